use num_rational::BigRational;
use serde::Serialize;

use super::grid::merge_grids_between;
use super::strategy::{mp_payoff, Control, DelayStrategy, MixedStrategy, OpponentView, Player};
use crate::error::{Error, Result};
use crate::interval_fn::discount::{check_rate, tail_mass};
use crate::interval_fn::time::{ceil_to_grid, rational_string};
use crate::interval_fn::{discounted_integral, Action, StepFunction, TimePoint};

/// Tail mass below which truncated payoffs are reported without further
/// simulation.
pub const TRUNCATION_TAIL: f64 = 1e-9;

/// The play induced by two strategies with delay on `[0, horizon)`.
#[derive(Clone, Debug, PartialEq)]
pub struct Play {
    pub horizon: TimePoint,
    pub aqua: StepFunction,
    pub bard: StepFunction,
}

impl Play {
    pub fn control(&self, player: Player) -> &StepFunction {
        match player {
            Player::Aqua => &self.aqua,
            Player::Bard => &self.bard,
        }
    }

    /// Truncated discounted payoff `∫_0^H r e^{-rt} g^i(u(t)) dt`.
    pub fn payoff(&self, player: Player, r: f64) -> Result<f64> {
        discounted_integral(&self.aqua, &self.bard, r, |a, b| mp_payoff(a, b, player) == 1)
    }
}

/// Smallest multiple of 1/1024 that is at least `max(at_least, -ln(1e-9)/r)`.
pub fn truncation_horizon(r: f64, at_least: f64) -> Result<TimePoint> {
    check_rate(r)?;
    let t = at_least.max(-TRUNCATION_TAIL.ln() / r);
    TimePoint::new(ceil_to_grid(t, 1024))
}

/// Merged-grid recursion with the constant-`a` seed pair.
pub fn construct_play(aqua: &DelayStrategy, bard: &DelayStrategy, horizon: &TimePoint) -> Result<Play> {
    let seed = Control::constant(Action::A);
    construct_play_seeded(aqua, bard, horizon, &seed, &seed)
}

/// Builds the fixed point of the strategy pair on `[0, horizon)`.
///
/// Starting from the seed controls, each merged-grid cell `[t_m, t_{m+1})`
/// is filled by applying each strategy to the opponent control that equals
/// the play fixed so far on `[0, t_m)` and the seed afterwards.
pub fn construct_play_seeded(
    aqua: &DelayStrategy,
    bard: &DelayStrategy,
    horizon: &TimePoint,
    seed_aqua: &Control,
    seed_bard: &Control,
) -> Result<Play> {
    if horizon.is_zero() {
        return Err(Error::Usage("play horizon must be positive".into()));
    }
    let mut ua = None;
    let mut ub = None;
    advance(aqua, bard, &mut ua, &mut ub, &TimePoint::zero(), horizon, seed_aqua, seed_bard)?;
    Ok(Play {
        horizon: horizon.clone(),
        aqua: ua.expect("at least one cell"),
        bard: ub.expect("at least one cell"),
    })
}

/// Continues `play` to `until` with the constant-`a` seeds. The current
/// horizon must be a point of one of the two grids.
pub fn extend_play(aqua: &DelayStrategy, bard: &DelayStrategy, play: &mut Play, until: &TimePoint) -> Result<()> {
    if *until <= play.horizon {
        return Ok(());
    }
    let from = play.horizon.clone();
    if aqua.grid().point(aqua.grid().cell_index(&from)) != from && bard.grid().point(bard.grid().cell_index(&from)) != from {
        return Err(Error::Usage(format!("cannot resume a play at {from}, which is on neither grid")));
    }
    let seed = Control::constant(Action::A);
    let mut ua = Some(std::mem::replace(&mut play.aqua, StepFunction::constant(TimePoint::one(), Action::A)?));
    let mut ub = Some(std::mem::replace(&mut play.bard, StepFunction::constant(TimePoint::one(), Action::A)?));
    advance(aqua, bard, &mut ua, &mut ub, &from, until, &seed, &seed)?;
    play.aqua = ua.expect("kept");
    play.bard = ub.expect("kept");
    play.horizon = until.clone();
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn advance(
    aqua: &DelayStrategy,
    bard: &DelayStrategy,
    ua: &mut Option<StepFunction>,
    ub: &mut Option<StepFunction>,
    from: &TimePoint,
    until: &TimePoint,
    seed_aqua: &Control,
    seed_bard: &Control,
) -> Result<()> {
    let merged = merge_grids_between(aqua.grid(), bard.grid(), from, until);
    for (m, t_m) in merged.iter().enumerate() {
        let t_next = merged.get(m + 1).unwrap_or(until);
        let piece = |me: &DelayStrategy, view: OpponentView<'_>| -> Result<StepFunction> {
            let n = me.grid().cell_index(t_m);
            let start = me.grid().point(n);
            let seg = me.segment(n, &view)?;
            seg.restrict(&(t_m - &start), &(t_next - &start))
        };
        let pa = piece(aqua, OpponentView::new(ub.as_ref(), seed_bard))?;
        let pb = piece(bard, OpponentView::new(ua.as_ref(), seed_aqua))?;
        append(ua, &pa);
        append(ub, &pb);
    }
    Ok(())
}

fn append(path: &mut Option<StepFunction>, seg: &StepFunction) {
    match path.as_mut() {
        Some(p) => p.append(seg),
        None => *path = Some(seg.clone()),
    }
}

/// A cell where re-applying a strategy to the final opponent play does not
/// reproduce the constructed play.
#[derive(Clone, Debug, PartialEq)]
pub struct FixedPointViolation {
    pub player: Player,
    pub cell: usize,
}

/// Re-invokes both strategies on the final opponent play, cell by cell.
pub fn verify_fixed_point(aqua: &DelayStrategy, bard: &DelayStrategy, play: &Play) -> Result<Option<FixedPointViolation>> {
    let filler = Control::constant(Action::A);
    for (player, me, opp) in [(Player::Aqua, aqua, &play.bard), (Player::Bard, bard, &play.aqua)] {
        let own = play.control(player);
        let view = OpponentView::new(Some(opp), &filler);
        for (n, start) in me.grid().points_below(&play.horizon).iter().enumerate() {
            let cell = me.grid().cell(n);
            let stop = cell.end.clone().min(play.horizon.clone());
            let seg = me.segment(n, &view)?.restrict(&TimePoint::zero(), &(&stop - start))?;
            if seg != own.restrict(start, &stop)? {
                return Ok(Some(FixedPointViolation { player, cell: n }));
            }
        }
    }
    Ok(None)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PairOutcome {
    pub aqua_atom: usize,
    pub bard_atom: usize,
    #[serde(with = "rational_string")]
    pub p: BigRational,
    pub gamma_aqua: f64,
    pub gamma_bard: f64,
}

/// Expected truncated payoffs over the product of the two atom sets.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PayoffReport {
    pub r: f64,
    pub horizon: TimePoint,
    /// Upper bound on the payoff mass beyond the horizon, `e^{-rH}`.
    pub tail_bound: f64,
    pub gamma_aqua: f64,
    pub gamma_bard: f64,
    pub pairs: Vec<PairOutcome>,
}

impl PayoffReport {
    pub fn gamma(&self, player: Player) -> f64 {
        match player {
            Player::Aqua => self.gamma_aqua,
            Player::Bard => self.gamma_bard,
        }
    }

    /// `|γ^Aqua + γ^Bard - 1|` should not exceed the tail bound (plus rounding).
    pub fn constant_sum_gap(&self) -> f64 {
        (self.gamma_aqua + self.gamma_bard - 1.0).abs()
    }
}

fn map_pairs<T, F>(pairs: Vec<(usize, usize)>, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(usize, usize) -> Result<T> + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        pairs.into_par_iter().map(|(i, j)| f(i, j)).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        pairs.into_iter().map(|(i, j)| f(i, j)).collect()
    }
}

/// Exact enumeration of `E[γ^i(u_σ)]` over all atom pairs, truncated at
/// `horizon`. Pair outcomes are kept in (Aqua atom, Bard atom) order.
pub fn expected_payoff(aqua: &MixedStrategy, bard: &MixedStrategy, r: f64, horizon: &TimePoint) -> Result<PayoffReport> {
    check_rate(r)?;
    if aqua.player != Player::Aqua || bard.player != Player::Bard {
        return Err(Error::Usage("expected_payoff takes Aqua's strategy first, then Bard's".into()));
    }
    let index: Vec<(usize, usize)> = (0..aqua.atoms().len())
        .flat_map(|i| (0..bard.atoms().len()).map(move |j| (i, j)))
        .collect();
    let pairs = map_pairs(index, |i, j| {
        let (pa, sa) = &aqua.atoms()[i];
        let (pb, sb) = &bard.atoms()[j];
        let play = construct_play(sa, sb, horizon)?;
        Ok(PairOutcome {
            aqua_atom: i,
            bard_atom: j,
            p: pa * pb,
            gamma_aqua: play.payoff(Player::Aqua, r)?,
            gamma_bard: play.payoff(Player::Bard, r)?,
        })
    })?;
    let weight = |p: &BigRational| crate::interval_fn::time::to_f64(p);
    let gamma_aqua = pairs.iter().map(|o| weight(&o.p) * o.gamma_aqua).sum();
    let gamma_bard = pairs.iter().map(|o| weight(&o.p) * o.gamma_bard).sum();
    Ok(PayoffReport {
        r,
        horizon: horizon.clone(),
        tail_bound: tail_mass(r, horizon.to_f64()),
        gamma_aqua,
        gamma_bard,
        pairs,
    })
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    use super::*;
    use crate::engine::catalog::{reference_catalog, build_mixed, ConstantPlay, CopyLast, GridSwitcher};
    use crate::engine::check::random_control;
    use crate::engine::grid::Grid;

    fn t(p: i64, q: i64) -> TimePoint {
        TimePoint::frac(p, q)
    }

    fn pure(player: Player, s: DelayStrategy) -> MixedStrategy {
        MixedStrategy::pure(player, s)
    }

    fn constant(a: Action) -> DelayStrategy {
        DelayStrategy::new("constant", Grid::uniform(t(1, 1)).unwrap(), Arc::new(ConstantPlay(a)))
    }

    #[test]
    fn pure_constant_payoffs() {
        let h = truncation_horizon(1.0, 0.0).unwrap();
        let same = expected_payoff(&pure(Player::Aqua, constant(Action::A)), &pure(Player::Bard, constant(Action::A)), 1.0, &h).unwrap();
        assert!((same.gamma_bard - 1.0).abs() <= same.tail_bound + 1e-12);
        assert!(same.gamma_aqua.abs() < 1e-12);
        let diff = expected_payoff(&pure(Player::Aqua, constant(Action::A)), &pure(Player::Bard, constant(Action::B)), 1.0, &h).unwrap();
        assert!(diff.gamma_bard.abs() < 1e-12);
        assert!(expected_payoff(&pure(Player::Bard, constant(Action::A)), &pure(Player::Aqua, constant(Action::A)), 1.0, &h).is_err());
    }

    #[test]
    fn horizon_covers_tail() {
        let h = truncation_horizon(0.5, 3.0).unwrap();
        assert!(tail_mass(0.5, h.to_f64()) <= TRUNCATION_TAIL);
        assert_eq!(truncation_horizon(1.0, 100.0).unwrap(), t(100, 1));
        assert!(truncation_horizon(0.0, 1.0).is_err());
    }

    fn pairs() -> Vec<(DelayStrategy, DelayStrategy)> {
        let copy = DelayStrategy::new("copy", Grid::new(vec![t(0, 1), t(1, 3)], t(1, 2)).unwrap(), Arc::new(CopyLast { initial: Action::B }));
        let switch = DelayStrategy::new("switch", Grid::uniform(t(2, 5)).unwrap(), Arc::new(GridSwitcher { first: Action::A }));
        let mut out = vec![(switch.clone(), copy.clone()), (copy.clone(), copy)];
        for (a, b) in reference_catalog(Player::Aqua).iter().zip(reference_catalog(Player::Bard).iter().rev()) {
            out.push((build_mixed(a).unwrap().atoms()[0].1.clone(), build_mixed(b).unwrap().atoms()[0].1.clone()));
        }
        out
    }

    #[test]
    fn play_ignores_seed_controls() {
        let h = t(6, 1);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for (a, b) in pairs() {
            let reference = construct_play(&a, &b, &h).unwrap();
            for _ in 0..20 {
                let sa = random_control(&mut rng, &h, 12);
                let sb = random_control(&mut rng, &h, 12);
                assert_eq!(construct_play_seeded(&a, &b, &h, &sa, &sb).unwrap(), reference);
            }
        }
    }

    #[test]
    fn plays_are_fixed_points() {
        for (a, b) in pairs() {
            let play = construct_play(&a, &b, &t(7, 1)).unwrap();
            assert_eq!(verify_fixed_point(&a, &b, &play).unwrap(), None);
        }
    }

    #[test]
    fn extension_matches_direct_construction() {
        for (a, b) in pairs() {
            let direct = construct_play(&a, &b, &t(5, 1)).unwrap();
            let mut grown = construct_play(&a, &b, &t(2, 1)).unwrap();
            if extend_play(&a, &b, &mut grown, &t(5, 1)).is_ok() {
                assert_eq!(grown, direct);
            }
        }
    }

    #[test]
    fn constant_sum_and_truncation() {
        let catalog_a = reference_catalog(Player::Aqua);
        let catalog_b = reference_catalog(Player::Bard);
        for r in [0.5, 1.0] {
            let h = truncation_horizon(r, 0.0).unwrap();
            let h2 = TimePoint::new(h.value() * BigRational::from_integer(2.into())).unwrap();
            for (a, b) in catalog_a.iter().zip(catalog_b.iter().rev()) {
                let (ma, mb) = (build_mixed(a).unwrap(), build_mixed(b).unwrap());
                let short = expected_payoff(&ma, &mb, r, &h).unwrap();
                assert!(short.constant_sum_gap() <= short.tail_bound + 1e-12);
                let long = expected_payoff(&ma, &mb, r, &h2).unwrap();
                assert!((long.gamma_bard - short.gamma_bard).abs() <= short.tail_bound + 1e-12);
                assert!((long.gamma_aqua - short.gamma_aqua).abs() <= short.tail_bound + 1e-12);
            }
        }
    }
}
