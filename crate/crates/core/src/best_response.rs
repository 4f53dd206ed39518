//! Guaranteeing best response against a finite mixed strategy.
//!
//! The responder cuts `[0, T)` into `2^n̂` equal cells. At the start of each
//! cell it identifies which opponent atoms are consistent with the observed
//! play, predicts the opponent's section on the cell for atoms whose grid
//! does not meet the cell, and plays `α_ε` against that model after
//! rescaling the cell to `[0, 1)`. After `T` it plays `b`.

use std::collections::BTreeSet;
use std::fmt;
use std::sync::Arc;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Zero};
use serde::Serialize;

use crate::engine::grid::{Cell, Grid};
use crate::engine::play::{construct_play, expected_payoff, extend_play, truncation_horizon, Play};
use crate::engine::strategy::{Control, DelayStrategy, MixedStrategy, OpponentView, Player, Responder};
use crate::error::{Error, Result};
use crate::guesser::{AlphaEpsilon, GuessSchedule};
use crate::interval_fn::discount::{check_rate, discounted_mass, tail_mass};
use crate::interval_fn::time::{ceil_to_grid, format_rational, rational_string, to_f64};
use crate::interval_fn::{joint_pieces, Action, StepFunction, TimeChange, TimePoint};
use crate::random_function::{n_omega, n_star_from_levels};

/// Denominator used to round `T` up to a rational.
pub const HORIZON_DENOMINATOR: i64 = 1024;
/// Deepest dyadic level tried when searching for `n̂`.
pub const MAX_LEVEL: u32 = 24;
/// Upper limit on the number of grid points of a constructed response.
pub const MAX_GRID_POINTS: usize = 4_000_000;

fn unit_interval(eps: &BigRational, what: &str) -> Result<()> {
    if *eps <= BigRational::zero() || *eps >= BigRational::one() {
        return Err(Error::Usage(format!("{what} = {} outside (0, 1)", format_rational(eps))));
    }
    Ok(())
}

/// `T` with `e^{-rT} = eps`.
pub fn horizon(eps: f64, r: f64) -> Result<f64> {
    check_rate(r)?;
    if !(eps > 0.0 && eps < 1.0) {
        return Err(Error::Usage(format!("eps = {eps} outside (0, 1)")));
    }
    Ok(-eps.ln() / r)
}

/// `eps_target / (2 + r)`, kept exact when `r` is a dyadic float.
pub fn internal_eps(eps_target: &BigRational, r: f64) -> Result<BigRational> {
    check_rate(r)?;
    let r_exact = BigRational::from_float(r).ok_or_else(|| Error::Usage(format!("r = {r} is not finite")))?;
    Ok(eps_target / (BigRational::from_integer(BigInt::from(2)) + r_exact))
}

fn dyadic_point(t: &TimePoint, n: u32, k: usize) -> TimePoint {
    t.scale(&BigRational::new(BigInt::from(k), BigInt::one() << n as usize))
}

/// Level-`n` dyadic cells of `[0, T)` whose open interior holds a point of
/// `theta`, in increasing order.
pub fn bad_cells(theta: &Grid, n: u32, t: &TimePoint) -> Vec<usize> {
    let scale = BigRational::from_integer(BigInt::one() << n as usize) / t.value();
    let mut out: Vec<usize> = Vec::new();
    for p in theta.points_between(&TimePoint::zero(), t).iter().skip(1) {
        let x = p.value() * &scale;
        if !x.is_integer() {
            let k: usize = x.floor().to_integer().try_into().expect("cell index fits");
            if out.last() != Some(&k) {
                out.push(k);
            }
        }
    }
    out
}

/// Membership of the level-`n` dyadic cells of `[0, T)` in `U^n_T`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GoodSet {
    pub level: u32,
    pub t: TimePoint,
    pub good: Vec<bool>,
}

impl GoodSet {
    pub fn cell(&self, k: usize) -> (TimePoint, TimePoint) {
        (dyadic_point(&self.t, self.level, k), dyadic_point(&self.t, self.level, k + 1))
    }

    /// Whether `[s, e)` lies in the union of good cells.
    pub fn covers(&self, s: &TimePoint, e: &TimePoint) -> bool {
        self.good.iter().enumerate().filter(|(_, g)| !**g).all(|(k, _)| {
            let (cs, ce) = self.cell(k);
            *e <= cs || *s >= ce
        })
    }
}

pub fn good_set(theta: &Grid, n: u32, t: &TimePoint) -> Result<GoodSet> {
    if n > MAX_LEVEL {
        return Err(Error::Usage(format!("level {n} exceeds {MAX_LEVEL}")));
    }
    let mut good = vec![true; 1usize << n];
    for k in bad_cells(theta, n, t) {
        good[k] = false;
    }
    Ok(GoodSet { level: n, t: t.clone(), good })
}

/// `E[∫_0^T r e^{-rt} 1{t outside U^n_T} dt]` over the atoms of `mixed`.
pub fn expected_bad_mass(mixed: &MixedStrategy, n: u32, r: f64, t: &TimePoint) -> f64 {
    mixed
        .atoms()
        .iter()
        .map(|(p, s)| {
            let mass: f64 = bad_cells(s.grid(), n, t)
                .into_iter()
                .map(|k| discounted_mass(r, dyadic_point(t, n, k).to_f64(), dyadic_point(t, n, k + 1).to_f64()))
                .sum();
            to_f64(p) * mass
        })
        .sum()
}

/// Smallest level whose expected bad-set mass is at most `eps_internal`.
pub fn find_n_hat(mixed: &MixedStrategy, eps_internal: &BigRational, r: f64, t: &TimePoint) -> Result<u32> {
    check_rate(r)?;
    let bound = to_f64(eps_internal);
    (0..=MAX_LEVEL)
        .find(|&n| expected_bad_mass(mixed, n, r, t) <= bound)
        .ok_or_else(|| Error::Usage(format!("no level up to {MAX_LEVEL} brings the bad-set mass below {bound}")))
}

#[derive(Clone, Debug, PartialEq)]
pub struct ConditionalAtom {
    /// Index into the opponent's atom list.
    pub index: usize,
    /// Posterior probability.
    pub p: BigRational,
    /// The opponent's play on the interval rescaled to `[0, 1)`, when the
    /// atom's grid does not meet the interval's interior.
    pub prediction: Option<StepFunction>,
}

/// Posterior over the opponent's atoms at the start of `[start, end)`.
#[derive(Clone, Debug, PartialEq)]
pub struct ConditionalModel {
    pub start: TimePoint,
    pub end: TimePoint,
    pub atoms: Vec<ConditionalAtom>,
}

impl ConditionalModel {
    /// Predictable atoms renormalized among themselves, as `(p, section)`.
    pub fn predictable(&self) -> Vec<(BigRational, &StepFunction)> {
        let mass = self
            .atoms
            .iter()
            .filter(|a| a.prediction.is_some())
            .fold(BigRational::zero(), |acc, a| acc + &a.p);
        self.atoms
            .iter()
            .filter_map(|a| a.prediction.as_ref().map(|f| (&a.p / &mass, f)))
            .collect()
    }

    pub fn indices(&self) -> Vec<usize> {
        self.atoms.iter().map(|a| a.index).collect()
    }

    pub fn good_indices(&self) -> Vec<usize> {
        self.atoms.iter().filter(|a| a.prediction.is_some()).map(|a| a.index).collect()
    }
}

/// Bayes update of the opponent's atoms given the opponent's `observed` play
/// and our own committed play, both on `[0, start)` (`None` when `start = 0`).
pub fn conditional_model(
    opponent: &MixedStrategy,
    observed: Option<&StepFunction>,
    own: Option<&StepFunction>,
    start: &TimePoint,
    end: &TimePoint,
) -> Result<ConditionalModel> {
    if start >= end {
        return Err(Error::Usage(format!("empty interval [{start}, {end})")));
    }
    let filler = Control::constant(Action::A);
    let own_control = match own {
        Some(prefix) => Control::overlay(prefix, &filler)?,
        None => filler,
    };
    let mut kept = Vec::new();
    for (index, (p, s)) in opponent.atoms().iter().enumerate() {
        if let Some(seen) = observed {
            if s.play(&own_control, start)? != *seen {
                continue;
            }
        }
        let prediction = if s.grid().meets_interior(start, end) {
            None
        } else {
            let n = s.grid().cell_index(start);
            let cell_start = s.grid().point(n);
            let seg = s.segment(n, &OpponentView::of(&own_control))?;
            let on_cell = seg.restrict(&(start - &cell_start), &(end - &cell_start))?;
            Some(on_cell.time_change(start, end, TimeChange::Inverse)?)
        };
        kept.push(ConditionalAtom { index, p: p.clone(), prediction });
    }
    if kept.is_empty() {
        return Err(Error::Inconsistency(format!(
            "no atom of {} is consistent with the play observed before {start}",
            opponent.label
        )));
    }
    let total = kept.iter().fold(BigRational::zero(), |acc, a| acc + &a.p);
    for a in &mut kept {
        a.p = &a.p / &total;
    }
    Ok(ConditionalModel { start: start.clone(), end: end.clone(), atoms: kept })
}

/// One history class of a dyadic cell: the atoms consistent with it and the
/// guessing schedule run on the cell.
#[derive(Clone, Debug, PartialEq)]
pub struct ClassPlan {
    pub atoms: Vec<usize>,
    pub good_atoms: Vec<usize>,
    pub schedule: GuessSchedule,
    /// Predicted rescaled sections of the good atoms, by atom index.
    pub predictions: Vec<(usize, StepFunction)>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CellPlan {
    pub k: usize,
    pub start: TimePoint,
    pub end: TimePoint,
    pub classes: Vec<ClassPlan>,
}

/// Everything the constructed responder consults.
#[derive(Clone, PartialEq)]
pub struct ResponsePlan {
    pub me: Player,
    pub opponent_label: String,
    pub eps_target: BigRational,
    pub eps_internal: BigRational,
    pub r: f64,
    /// `-ln(eps_internal) / r`.
    pub t_exact: f64,
    /// `t_exact` rounded up to a multiple of 1/1024; the dyadic cells split
    /// `[0, t_grid)`.
    pub t_grid: TimePoint,
    pub n_hat: u32,
    pub cells: Vec<CellPlan>,
    /// On-path opponent play per atom on `[0, t_grid)`.
    pub opponent_paths: Vec<StepFunction>,
    pub own_paths: Vec<StepFunction>,
}

impl fmt::Debug for ResponsePlan {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ResponsePlan")
            .field("me", &self.me)
            .field("eps_internal", &format_rational(&self.eps_internal))
            .field("t_grid", &self.t_grid)
            .field("n_hat", &self.n_hat)
            .field("cells", &self.cells.len())
            .finish()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PlanCellDump {
    pub k: usize,
    pub atoms: Vec<usize>,
    pub good_atoms: Vec<usize>,
    pub n_star: u32,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PlanDump {
    #[serde(with = "rational_string")]
    pub eps_target: BigRational,
    #[serde(with = "rational_string")]
    pub eps_internal: BigRational,
    #[serde(rename = "T")]
    pub t: f64,
    #[serde(rename = "T_grid")]
    pub t_grid: TimePoint,
    pub n_hat: u32,
    pub cells: Vec<PlanCellDump>,
}

impl ResponsePlan {
    pub fn cell_len(&self) -> TimePoint {
        dyadic_point(&self.t_grid, self.n_hat, 1)
    }

    fn cell_of(&self, t: &TimePoint) -> usize {
        let x = t.value() / self.cell_len().value();
        x.floor().to_integer().try_into().expect("cell index fits")
    }

    /// The class whose on-path opponent prefix agrees with `opponent` on
    /// `[0, t̂_k)`; `None` off path.
    pub fn class_for(&self, k: usize, opponent: &OpponentView<'_>) -> Result<Option<&ClassPlan>> {
        let cell = &self.cells[k];
        for class in &cell.classes {
            if k == 0 || opponent.agrees_on(&self.opponent_paths[class.atoms[0]], &TimePoint::zero(), &cell.start)? {
                return Ok(Some(class));
            }
        }
        Ok(None)
    }

    /// Own symbol on `[start, …)` before any role flip.
    fn raw_symbol(&self, start: &TimePoint, opponent: &OpponentView<'_>) -> Result<Action> {
        if *start >= self.t_grid {
            return Ok(Action::B);
        }
        let k = self.cell_of(start);
        let cell = &self.cells[k];
        let Some(class) = self.class_for(k, opponent)? else {
            return Ok(Action::B);
        };
        let len = &cell.end - &cell.start;
        let offset = (start - &cell.start).value() / len.value();
        let points = class.schedule.points();
        let round = points.partition_point(|p| *p.value() <= offset) - 1;
        let absolute = |p: &TimePoint| &cell.start + &len.scale(p.value());
        let previous = if round == 0 {
            None
        } else {
            Some(opponent.restrict(&absolute(&points[round - 1]), &absolute(&points[round]))?)
        };
        let alpha = AlphaEpsilon::new();
        Ok(alpha.decide(round, previous.as_ref()))
    }

    fn symbol(&self, start: &TimePoint, opponent: &OpponentView<'_>) -> Result<Action> {
        let raw = self.raw_symbol(start, opponent)?;
        Ok(match self.me {
            Player::Bard => raw,
            Player::Aqua => raw.flip(),
        })
    }

    /// Grid of the response: the dyadic cells refined by every class
    /// schedule, then unit steps after `T`.
    pub fn grid(&self) -> Result<Grid> {
        let mut points = Vec::new();
        for cell in &self.cells {
            let len = &cell.end - &cell.start;
            let mut local = BTreeSet::new();
            for class in &cell.classes {
                for p in &class.schedule.points()[..class.schedule.rounds()] {
                    local.insert(&cell.start + &len.scale(p.value()));
                }
            }
            points.extend(local);
            if points.len() > MAX_GRID_POINTS {
                return Err(Error::Usage(format!("response grid exceeds {MAX_GRID_POINTS} points")));
            }
        }
        points.push(self.t_grid.clone());
        Grid::new(points, TimePoint::one())
    }

    pub fn dump(&self) -> PlanDump {
        PlanDump {
            eps_target: self.eps_target.clone(),
            eps_internal: self.eps_internal.clone(),
            t: self.t_exact,
            t_grid: self.t_grid.clone(),
            n_hat: self.n_hat,
            cells: self
                .cells
                .iter()
                .flat_map(|c| {
                    c.classes.iter().map(|class| PlanCellDump {
                        k: c.k,
                        atoms: class.atoms.clone(),
                        good_atoms: class.good_atoms.clone(),
                        n_star: class.schedule.n_star(),
                    })
                })
                .collect(),
        }
    }
}

/// The per-cell rule of the constructed response.
#[derive(Clone)]
pub struct PlannedResponder {
    plan: Arc<ResponsePlan>,
}

impl fmt::Debug for PlannedResponder {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "PlannedResponder({:?})", self.plan)
    }
}

impl Responder for PlannedResponder {
    fn respond(&self, cell: &Cell, opponent: &OpponentView<'_>) -> Result<StepFunction> {
        StepFunction::constant(cell.len(), self.plan.symbol(&cell.start, opponent)?)
    }
}

/// A constructed response with the plan behind it.
#[derive(Clone, Debug)]
pub struct BestResponse {
    plan: Arc<ResponsePlan>,
    strategy: DelayStrategy,
}

impl BestResponse {
    pub fn plan(&self) -> &ResponsePlan {
        &self.plan
    }

    pub fn strategy(&self) -> &DelayStrategy {
        &self.strategy
    }

    pub fn into_strategy(self) -> DelayStrategy {
        self.strategy
    }
}

fn strategy_from(plan: Arc<ResponsePlan>, grid: Grid) -> DelayStrategy {
    DelayStrategy::new("alpha-eps-best-response", grid, Arc::new(PlannedResponder { plan }))
}

fn ordered<'a>(me: Player, mine: &'a DelayStrategy, theirs: &'a DelayStrategy) -> (&'a DelayStrategy, &'a DelayStrategy) {
    match me {
        Player::Bard => (theirs, mine),
        Player::Aqua => (mine, theirs),
    }
}

fn class_plan(model: ConditionalModel, eps: &BigRational) -> Result<ClassPlan> {
    let levels = model
        .predictable()
        .into_iter()
        .map(|(p, f)| Ok((p, n_omega(f, eps)?)))
        .collect::<Result<Vec<_>>>()?;
    let n_star = if levels.is_empty() { 0 } else { n_star_from_levels(&levels, eps)? };
    Ok(ClassPlan {
        atoms: model.indices(),
        good_atoms: model.good_indices(),
        schedule: GuessSchedule::build(n_star, eps)?,
        predictions: model
            .atoms
            .iter()
            .filter_map(|a| a.prediction.clone().map(|f| (a.index, f)))
            .collect(),
    })
}

fn extend_all(me: Player, opponent: &MixedStrategy, mine: &DelayStrategy, plays: &mut [Option<Play>], until: &TimePoint) -> Result<()> {
    let step = |(i, slot): (usize, &mut Option<Play>)| -> Result<()> {
        let (aqua, bard) = ordered(me, mine, &opponent.atoms()[i].1);
        match slot {
            Some(play) => extend_play(aqua, bard, play, until),
            None => {
                *slot = Some(construct_play(aqua, bard, until)?);
                Ok(())
            }
        }
    };
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        plays.par_iter_mut().enumerate().try_for_each(step)
    }
    #[cfg(not(feature = "parallel"))]
    {
        plays.iter_mut().enumerate().try_for_each(step)
    }
}

/// Builds the guaranteeing response of `opponent.player.opponent()`.
pub fn build_response(opponent: &MixedStrategy, eps_target: &BigRational, r: f64) -> Result<BestResponse> {
    unit_interval(eps_target, "eps_target")?;
    let me = opponent.player.opponent();
    let eps_internal = internal_eps(eps_target, r)?;
    let t_exact = horizon(to_f64(&eps_internal), r)?;
    let t_grid = TimePoint::new(ceil_to_grid(t_exact, HORIZON_DENOMINATOR))?;
    let n_hat = find_n_hat(opponent, &eps_internal, r, &t_grid)?;
    let cell_count = 1usize << n_hat;

    let mut plan = ResponsePlan {
        me,
        opponent_label: opponent.label.clone(),
        eps_target: eps_target.clone(),
        eps_internal: eps_internal.clone(),
        r,
        t_exact,
        t_grid: t_grid.clone(),
        n_hat,
        cells: Vec::with_capacity(cell_count),
        opponent_paths: Vec::new(),
        own_paths: Vec::new(),
    };
    let mut plays: Vec<Option<Play>> = vec![None; opponent.atoms().len()];
    let mut grid_points: Vec<TimePoint> = Vec::new();

    for k in 0..cell_count {
        let start = dyadic_point(&t_grid, n_hat, k);
        let end = dyadic_point(&t_grid, n_hat, k + 1);
        let mut assigned = vec![false; opponent.atoms().len()];
        let mut classes = Vec::new();
        for i in 0..opponent.atoms().len() {
            if assigned[i] {
                continue;
            }
            let (observed, own) = match &plays[i] {
                Some(p) => (Some(p.control(me.opponent())), Some(p.control(me))),
                None => (None, None),
            };
            let model = conditional_model(opponent, observed, own, &start, &end)?;
            if !model.atoms.iter().any(|a| a.index == i) {
                return Err(Error::Inconsistency(format!("atom {i} is inconsistent with its own play before {start}")));
            }
            for a in &model.atoms {
                if assigned[a.index] {
                    return Err(Error::Inconsistency(format!("atom {} falls in two history classes", a.index)));
                }
                assigned[a.index] = true;
            }
            classes.push(class_plan(model, &eps_internal)?);
        }
        let len = &end - &start;
        let mut local = BTreeSet::new();
        for class in &classes {
            for p in &class.schedule.points()[..class.schedule.rounds()] {
                local.insert(&start + &len.scale(p.value()));
            }
        }
        grid_points.extend(local);
        if grid_points.len() > MAX_GRID_POINTS {
            return Err(Error::Usage(format!("response grid exceeds {MAX_GRID_POINTS} points")));
        }
        plan.cells.push(CellPlan { k, start, end: end.clone(), classes });

        let mut partial_points = grid_points.clone();
        partial_points.push(end.clone());
        let partial_grid = Grid::new(partial_points, TimePoint::one())?;
        let shared = Arc::new(plan);
        let partial = strategy_from(shared.clone(), partial_grid);
        extend_all(me, opponent, &partial, &mut plays, &end)?;
        drop(partial);
        plan = Arc::try_unwrap(shared).expect("builder holds the only reference");
        plan.opponent_paths = plays.iter().map(|p| p.as_ref().expect("extended").control(me.opponent()).clone()).collect();
        plan.own_paths = plays.iter().map(|p| p.as_ref().expect("extended").control(me).clone()).collect();
    }

    let plan = Arc::new(plan);
    let grid = plan.grid()?;
    let strategy = strategy_from(plan.clone(), grid);
    Ok(BestResponse { plan, strategy })
}

/// Discounted loss of the responder split by where it occurs.
#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct LossDecomposition {
    /// `e^{-rT}`, the discounted mass after `T`.
    pub tail_mass: f64,
    /// Realized loss on `[T, H)` plus the untracked mass `e^{-rH}`.
    pub tail_loss: f64,
    /// Expected discounted mass of the cells met by the opponent's grid.
    pub bad_mass: f64,
    /// Realized loss on those cells.
    pub bad_loss: f64,
    /// Realized loss on the remaining cells of `[0, T)`.
    pub guessing_loss: f64,
    pub total_loss: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LossBounds {
    pub tail_le_eps: bool,
    pub bad_mass_le_eps: bool,
    /// Compares the guessing loss with `r · eps_internal`. Informational:
    /// the observation windows alone cost about `eps_internal (1 - e^{-rT})`.
    pub guessing_le_r_eps: bool,
    pub total_le_target: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ResponseReport {
    pub me: Player,
    pub opponent: String,
    #[serde(with = "rational_string")]
    pub eps_target: BigRational,
    #[serde(with = "rational_string")]
    pub eps_internal: BigRational,
    pub r: f64,
    #[serde(rename = "T")]
    pub t: f64,
    #[serde(rename = "T_grid")]
    pub t_grid: TimePoint,
    pub n_hat: u32,
    pub grid_points: usize,
    pub truncation: TimePoint,
    pub tail_bound: f64,
    /// Responder's truncated payoff; a lower bound on the full payoff.
    pub gamma: f64,
    pub gamma_opponent: f64,
    pub constant_sum_gap: f64,
    pub loss: LossDecomposition,
    pub bounds: LossBounds,
    /// Good-cell predictions that differ from the realized opponent play.
    pub prediction_mismatches: usize,
    pub pass: bool,
}

fn loss_split(play: &Play, me: Player, r: f64, t: &TimePoint, bad: &[usize], plan: &ResponsePlan) -> Result<(f64, f64, f64)> {
    let (mut tail, mut bad_loss, mut guess) = (0.0, 0.0, 0.0);
    let t_f = t.to_f64();
    for piece in joint_pieces(&play.aqua, &play.bard, &play.horizon)? {
        let lost = match me {
            Player::Bard => piece.left != piece.right,
            Player::Aqua => piece.left == piece.right,
        };
        if !lost {
            continue;
        }
        if piece.end > *t {
            let s = piece.start.to_f64().max(t_f);
            tail += discounted_mass(r, s, piece.end.to_f64());
        }
        if piece.start >= *t {
            continue;
        }
        let stop = piece.end.clone().min(t.clone());
        let mut k = plan.cell_of(&piece.start);
        loop {
            let cs = dyadic_point(t, plan.n_hat, k);
            if cs >= stop {
                break;
            }
            let ce = dyadic_point(t, plan.n_hat, k + 1);
            let s = piece.start.clone().max(cs);
            let e = stop.clone().min(ce);
            let m = discounted_mass(r, s.to_f64(), e.to_f64());
            if bad.binary_search(&k).is_ok() {
                bad_loss += m;
            } else {
                guess += m;
            }
            k += 1;
        }
    }
    Ok((tail, bad_loss, guess))
}

/// Builds the response to `opponent`, evaluates it by exact enumeration and
/// checks `γ > 1 - eps_target`.
pub fn verify_response(opponent: &MixedStrategy, eps_target: &BigRational, r: f64) -> Result<ResponseReport> {
    let built = build_response(opponent, eps_target, r)?;
    verify_built(opponent, &built)
}

pub fn verify_built(opponent: &MixedStrategy, built: &BestResponse) -> Result<ResponseReport> {
    let plan = built.plan();
    let me = plan.me;
    let r = plan.r;
    let t = &plan.t_grid;
    let h = truncation_horizon(r, t.to_f64())?;
    let mine = MixedStrategy::pure(me, built.strategy().clone());
    let report = match me {
        Player::Bard => expected_payoff(opponent, &mine, r, &h)?,
        Player::Aqua => expected_payoff(&mine, opponent, r, &h)?,
    };
    let mut loss = LossDecomposition { tail_mass: tail_mass(r, t.to_f64()), ..Default::default() };
    let mut mismatches = 0;
    for (i, (p, s)) in opponent.atoms().iter().enumerate() {
        let w = to_f64(p);
        let (aqua, bard) = ordered(me, built.strategy(), s);
        let play = construct_play(aqua, bard, &h)?;
        let bad = bad_cells(s.grid(), plan.n_hat, t);
        let (tail, bad_loss, guess) = loss_split(&play, me, r, t, &bad, plan)?;
        loss.tail_loss += w * tail;
        loss.bad_loss += w * bad_loss;
        loss.guessing_loss += w * guess;
        let realized = play.control(me.opponent());
        for cell in &plan.cells {
            let Some(class) = cell.classes.iter().find(|c| c.atoms.contains(&i)) else {
                continue;
            };
            if let Some((_, f)) = class.predictions.iter().find(|(j, _)| *j == i) {
                let actual = realized
                    .restrict(&cell.start, &cell.end)?
                    .time_change(&cell.start, &cell.end, TimeChange::Inverse)?;
                if actual != *f {
                    mismatches += 1;
                }
            }
        }
    }
    loss.tail_loss += report.tail_bound;
    loss.bad_mass = expected_bad_mass(opponent, plan.n_hat, r, t);
    let gamma = report.gamma(me);
    loss.total_loss = 1.0 - gamma;
    let eps_int = to_f64(&plan.eps_internal);
    let target = to_f64(&plan.eps_target);
    let bounds = LossBounds {
        tail_le_eps: loss.tail_mass <= eps_int,
        bad_mass_le_eps: loss.bad_mass <= eps_int,
        guessing_le_r_eps: loss.guessing_loss <= r * eps_int,
        total_le_target: loss.total_loss < target,
    };
    Ok(ResponseReport {
        me,
        opponent: opponent.label.clone(),
        eps_target: plan.eps_target.clone(),
        eps_internal: plan.eps_internal.clone(),
        r,
        t: plan.t_exact,
        t_grid: t.clone(),
        n_hat: plan.n_hat,
        grid_points: built.strategy().grid().prefix().len(),
        truncation: h,
        tail_bound: report.tail_bound,
        gamma,
        gamma_opponent: report.gamma(me.opponent()),
        constant_sum_gap: report.constant_sum_gap(),
        loss,
        bounds,
        prediction_mismatches: mismatches,
        pass: gamma > 1.0 - target,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::catalog::{ConstantPlay, GridSwitcher};
    use crate::engine::check::check_nonanticipativity;
    use crate::interval_fn::time::ratio;

    fn t(p: i64, q: i64) -> TimePoint {
        TimePoint::frac(p, q)
    }

    fn constant(action: Action, step: TimePoint) -> DelayStrategy {
        DelayStrategy::new("constant", Grid::uniform(step).unwrap(), Arc::new(ConstantPlay(action)))
    }

    #[test]
    fn horizon_examples() {
        assert!((horizon((-1.0f64).exp(), 1.0).unwrap() - 1.0).abs() < 1e-12);
        assert!((horizon(0.05, 0.1).unwrap() - 29.9573).abs() < 1e-4);
        assert!(horizon(1.0, 1.0).is_err());
        assert!(horizon(0.5, 0.0).is_err());
        assert_eq!(internal_eps(&ratio(1, 10), 0.5).unwrap(), ratio(1, 25));
    }

    #[test]
    fn good_set_examples() {
        let big = t(6, 1);
        let trivial = Grid::uniform(big.clone()).unwrap();
        assert!(good_set(&trivial, 3, &big).unwrap().good.iter().all(|g| *g));
        let half = Grid::new(vec![t(0, 1), t(3, 1)], t(3, 1)).unwrap();
        assert_eq!(good_set(&half, 1, &big).unwrap().good, vec![true, true]);
        let third = Grid::new(vec![t(0, 1), t(2, 1)], t(6, 1)).unwrap();
        assert_eq!(good_set(&third, 1, &big).unwrap().good, vec![false, true]);
    }

    #[test]
    fn good_set_grows_with_level() {
        let g = Grid::new(vec![t(0, 1), t(1, 3), t(5, 7)], t(2, 5)).unwrap();
        let big = t(5, 1);
        for n in 0..8 {
            let coarse = good_set(&g, n, &big).unwrap();
            let fine = good_set(&g, n + 1, &big).unwrap();
            for (k, good) in coarse.good.iter().enumerate() {
                if *good {
                    assert!(fine.good[2 * k] && fine.good[2 * k + 1]);
                }
            }
        }
    }

    #[test]
    fn n_hat_examples() {
        let big = t(4, 1);
        let trivial = MixedStrategy::pure(Player::Aqua, constant(Action::A, big.clone()));
        assert_eq!(find_n_hat(&trivial, &ratio(1, 100), 1.0, &big).unwrap(), 0);

        let third = Grid::new(vec![t(0, 1), t(4, 3)], big.clone()).unwrap();
        let one = MixedStrategy::pure(
            Player::Aqua,
            DelayStrategy::new("c", third, Arc::new(ConstantPlay(Action::A))),
        );
        let eps = ratio(1, 50);
        let r = 1.0;
        let expected = (0..30)
            .find(|&n| {
                let len = 4.0 / f64::from(1u32 << n);
                let k = ((4.0 / 3.0) / len).floor();
                (-r * k * len).exp() - (-r * (k + 1.0) * len).exp() <= 0.02
            })
            .unwrap();
        assert_eq!(find_n_hat(&one, &eps, r, &big).unwrap(), expected);
        assert_eq!(find_n_hat(&one, &ratio(1, 1), r, &big).unwrap(), 0);
    }

    #[test]
    fn conditional_model_examples() {
        let aqua = MixedStrategy::pure(Player::Aqua, constant(Action::A, t(1, 1)));
        let m = conditional_model(&aqua, None, None, &t(0, 1), &t(1, 2)).unwrap();
        assert_eq!(m.atoms.len(), 1);
        assert_eq!(m.atoms[0].p, ratio(1, 1));

        let mix = MixedStrategy::new(
            Player::Aqua,
            "mix",
            vec![(ratio(1, 2), constant(Action::A, t(1, 1))), (ratio(1, 2), constant(Action::B, t(1, 1)))],
        )
        .unwrap();
        let m = conditional_model(&mix, None, None, &t(0, 1), &t(1, 2)).unwrap();
        assert_eq!(m.atoms.iter().map(|a| a.p.clone()).collect::<Vec<_>>(), vec![ratio(1, 2), ratio(1, 2)]);

        let seen = StepFunction::constant(t(1, 2), Action::B).unwrap();
        let own = StepFunction::constant(t(1, 2), Action::A).unwrap();
        let m = conditional_model(&mix, Some(&seen), Some(&own), &t(1, 2), &t(3, 4)).unwrap();
        assert_eq!(m.indices(), vec![1]);
        assert_eq!(m.atoms[0].p, ratio(1, 1));
        assert_eq!(m.atoms[0].prediction, Some(StepFunction::constant(t(1, 1), Action::B).unwrap()));

        let off = StepFunction::from_lengths(&[(t(1, 4), Action::A), (t(1, 4), Action::B)]).unwrap();
        assert!(matches!(
            conditional_model(&mix, Some(&off), Some(&own), &t(1, 2), &t(3, 4)),
            Err(Error::Inconsistency(_))
        ));
    }

    #[test]
    fn responds_to_pure_constant() {
        let aqua = MixedStrategy::pure(Player::Aqua, constant(Action::A, t(1, 1)));
        let report = verify_response(&aqua, &ratio(1, 10), 1.0).unwrap();
        assert!(report.pass, "{report:?}");
        assert_eq!(report.prediction_mismatches, 0);
        assert!(report.bounds.tail_le_eps && report.bounds.bad_mass_le_eps);
        let built = build_response(&aqua, &ratio(1, 10), 1.0).unwrap();
        // After the first observation window the response matches a.
        let play = construct_play(&constant(Action::A, t(1, 1)), built.strategy(), &t(2, 1)).unwrap();
        let first = built.plan().cells[0].classes[0].schedule.points()[1].clone();
        let cut = built.plan().cell_len().scale(first.value());
        assert_eq!(play.bard.eval(&cut).unwrap(), Action::A);
    }

    #[test]
    fn responds_to_constant_mixture() {
        let mix = MixedStrategy::new(
            Player::Aqua,
            "mix",
            vec![(ratio(1, 2), constant(Action::A, t(1, 1))), (ratio(1, 2), constant(Action::B, t(1, 1)))],
        )
        .unwrap();
        let built = build_response(&mix, &ratio(1, 10), 1.0).unwrap();
        assert_eq!(built.plan().cells[0].classes.len(), 1);
        assert!(built.plan().cells.iter().skip(1).all(|c| c.classes.len() == 2));
        let report = verify_built(&mix, &built).unwrap();
        assert!(report.pass, "{report:?}");
        assert!(report.constant_sum_gap <= report.tail_bound + 1e-12);
        assert!(check_nonanticipativity(built.strategy(), 200, 5).unwrap().passed());
    }

    #[test]
    fn role_swap_gives_aqua_guarantee() {
        let bard = MixedStrategy::new(
            Player::Bard,
            "switch",
            vec![
                (
                    ratio(1, 2),
                    DelayStrategy::new("s", Grid::uniform(t(1, 2)).unwrap(), Arc::new(GridSwitcher { first: Action::A })),
                ),
                (ratio(1, 2), constant(Action::B, t(1, 1))),
            ],
        )
        .unwrap();
        let report = verify_response(&bard, &ratio(1, 5), 1.0).unwrap();
        assert_eq!(report.me, Player::Aqua);
        assert!(report.pass, "{report:?}");
    }

    #[test]
    fn plan_dump_shape() {
        let aqua = MixedStrategy::pure(Player::Aqua, constant(Action::A, t(1, 1)));
        let built = build_response(&aqua, &ratio(1, 5), 1.0).unwrap();
        let v = serde_json::to_value(built.plan().dump()).unwrap();
        assert_eq!(v["eps_target"], "1/5");
        assert_eq!(v["eps_internal"], "1/15");
        assert!(v["T"].is_f64());
        assert_eq!(v["cells"][0]["k"], 0);
        assert_eq!(v["cells"][0]["good_atoms"], serde_json::json!([0]));
        assert_eq!(v["cells"][0]["n_star"], 0);
    }
}
