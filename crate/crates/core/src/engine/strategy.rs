use std::fmt;
use std::sync::Arc;

use num_rational::BigRational;
use num_traits::{One, Zero};

use super::grid::{Cell, Grid};
use crate::error::{Error, Result};
use crate::interval_fn::time::format_rational;
use crate::interval_fn::{discounted_integral, splice, Action, StepFunction, TimePoint};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Player {
    Aqua,
    Bard,
}

impl Player {
    pub fn opponent(self) -> Player {
        match self {
            Player::Aqua => Player::Bard,
            Player::Bard => Player::Aqua,
        }
    }
}

impl fmt::Display for Player {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Player::Aqua => "aqua",
            Player::Bard => "bard",
        })
    }
}

/// Matching Pennies: Bard scores on a match, Aqua on a mismatch.
pub fn mp_payoff(a_aqua: Action, a_bard: Action, player: Player) -> u8 {
    let matched = a_aqua == a_bard;
    match player {
        Player::Bard => matched as u8,
        Player::Aqua => (!matched) as u8,
    }
}

/// A total control `u : [0, ∞) → A`: a step function with a tail value.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Control(StepFunction);

impl Control {
    pub fn new(path: StepFunction) -> Result<Self> {
        if path.tail().is_none() {
            return Err(Error::Usage("a control needs a tail value".into()));
        }
        Ok(Control(path))
    }

    pub fn constant(value: Action) -> Self {
        Control(StepFunction::constant(TimePoint::one(), value).expect("valid").with_tail(Some(value)))
    }

    /// `prefix` on `[0, prefix.end)`, then `rest` from there on.
    pub fn overlay(prefix: &StepFunction, rest: &Control) -> Result<Self> {
        let cut = prefix.end();
        let rest_end = rest.0.end();
        if rest_end > cut {
            let mut path = splice(&[prefix.clone(), rest.0.restrict(cut, rest_end)?])?;
            path = path.with_tail(rest.0.tail());
            Control::new(path)
        } else {
            Control::new(prefix.clone().with_tail(rest.0.tail()))
        }
    }

    pub fn path(&self) -> &StepFunction {
        &self.0
    }

    pub fn into_path(self) -> StepFunction {
        self.0
    }

    pub fn eval(&self, t: &TimePoint) -> Action {
        self.0.eval(t).expect("controls are total")
    }
}

/// `d(u, v) = ∫ r e^{-rt} 1{u_t != v_t} dt`.
pub fn control_distance(u: &Control, v: &Control, r: f64) -> Result<f64> {
    discounted_integral(u.path(), v.path(), r, |a, b| a != b)
}

/// What a responder sees of the opponent: the part of play already fixed
/// (`known`, on `[0, known.end)`) continued by an arbitrary completion.
///
/// A strategy with delay must read only `[0, cell.start)`; the completion is
/// what an anticipating strategy would (illegitimately) pick up.
#[derive(Clone, Copy)]
pub struct OpponentView<'a> {
    known: Option<&'a StepFunction>,
    rest: &'a StepFunction,
}

impl<'a> OpponentView<'a> {
    pub fn new(known: Option<&'a StepFunction>, rest: &'a Control) -> Self {
        OpponentView { known, rest: rest.path() }
    }

    pub fn of(control: &'a Control) -> Self {
        OpponentView { known: None, rest: control.path() }
    }

    fn split(&self) -> TimePoint {
        self.known.map(|k| k.end().clone()).unwrap_or_else(TimePoint::zero)
    }

    /// Opponent play on `[s, e)`, re-based at 0.
    pub fn restrict(&self, s: &TimePoint, e: &TimePoint) -> Result<StepFunction> {
        match self.known {
            Some(k) if e <= k.end() => k.restrict(s, e),
            Some(k) if s < k.end() => splice(&[k.restrict(s, k.end())?, self.rest.restrict(k.end(), e)?]),
            _ => self.rest.restrict(s, e),
        }
    }

    /// Opponent play on `[0, t)`.
    pub fn prefix(&self, t: &TimePoint) -> Result<StepFunction> {
        self.restrict(&TimePoint::zero(), t)
    }

    pub fn value_at(&self, t: &TimePoint) -> Result<Action> {
        match self.known {
            Some(k) if t < k.end() => k.eval(t),
            _ => self.rest.eval(t),
        }
    }

    /// Left limit `u(t-)`.
    pub fn value_before(&self, t: &TimePoint) -> Result<Action> {
        match self.known {
            Some(k) if t <= k.end() => k.value_before(t),
            _ => self.rest.value_before(t),
        }
    }

    /// Whether the opponent's play agrees with `other` a.e. on `[s, e)`.
    pub fn agrees_on(&self, other: &StepFunction, s: &TimePoint, e: &TimePoint) -> Result<bool> {
        let split = self.split();
        match self.known {
            Some(k) if e <= &split => k.agrees_on(other, s, e),
            Some(k) if s < &split => Ok(k.agrees_on(other, s, &split)? && self.rest.agrees_on(other, &split, e)?),
            _ => self.rest.agrees_on(other, s, e),
        }
    }
}

/// The per-cell decision rule of a strategy with delay.
pub trait Responder: Send + Sync + fmt::Debug {
    /// Own play on `cell`, re-based to `[0, cell.len())`. Must depend on the
    /// opponent only through its play on `[0, cell.start)`.
    fn respond(&self, cell: &Cell, opponent: &OpponentView<'_>) -> Result<StepFunction>;
}

/// A pure strategy with delay: a grid plus a responder.
#[derive(Clone, Debug)]
pub struct DelayStrategy {
    name: String,
    grid: Grid,
    responder: Arc<dyn Responder>,
}

impl DelayStrategy {
    pub fn new(name: impl Into<String>, grid: Grid, responder: Arc<dyn Responder>) -> Self {
        DelayStrategy { name: name.into(), grid, responder }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn responder(&self) -> &Arc<dyn Responder> {
        &self.responder
    }

    /// Own play on grid cell `n`, re-based at 0.
    pub fn segment(&self, n: usize, opponent: &OpponentView<'_>) -> Result<StepFunction> {
        let cell = self.grid.cell(n);
        let seg = self.responder.respond(&cell, opponent)?;
        if *seg.end() != cell.len() {
            return Err(Error::Protocol(format!(
                "{}: cell {n} segment has length {}, cell has length {}",
                self.name,
                seg.end(),
                cell.len()
            )));
        }
        Ok(seg)
    }

    /// `σ(u)` on `[0, until)`.
    pub fn play(&self, opponent: &Control, until: &TimePoint) -> Result<StepFunction> {
        let view = OpponentView::of(opponent);
        let mut path: Option<StepFunction> = None;
        let mut n = 0;
        loop {
            let seg = self.segment(n, &view)?;
            match path.as_mut() {
                Some(p) => p.append(&seg),
                None => path = Some(seg),
            }
            let p = path.as_ref().expect("set above");
            if p.end() >= until {
                return p.restrict(&TimePoint::zero(), until);
            }
            n += 1;
        }
    }
}

/// A finite mixed strategy: independent draws of pure strategies with delay.
#[derive(Clone, Debug)]
pub struct MixedStrategy {
    pub player: Player,
    pub label: String,
    atoms: Vec<(BigRational, DelayStrategy)>,
}

impl MixedStrategy {
    pub fn new(player: Player, label: impl Into<String>, atoms: Vec<(BigRational, DelayStrategy)>) -> Result<Self> {
        if atoms.is_empty() {
            return Err(Error::Usage("mixed strategy without atoms".into()));
        }
        if atoms.iter().any(|(p, _)| *p <= BigRational::zero()) {
            return Err(Error::Usage("mixed strategy atom with non-positive probability".into()));
        }
        let total = atoms.iter().fold(BigRational::zero(), |acc, (p, _)| acc + p);
        if !total.is_one() {
            return Err(Error::Usage(format!("atom probabilities sum to {}", format_rational(&total))));
        }
        Ok(MixedStrategy { player, label: label.into(), atoms })
    }

    pub fn pure(player: Player, strategy: DelayStrategy) -> Self {
        let label = strategy.name().to_string();
        MixedStrategy { player, label, atoms: vec![(BigRational::one(), strategy)] }
    }

    pub fn atoms(&self) -> &[(BigRational, DelayStrategy)] {
        &self.atoms
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn t(p: i64, q: i64) -> TimePoint {
        TimePoint::frac(p, q)
    }

    #[test]
    fn payoff_table() {
        use Action as X;
        assert_eq!(mp_payoff(X::A, X::A, Player::Bard), 1);
        assert_eq!(mp_payoff(X::A, X::A, Player::Aqua), 0);
        assert_eq!(mp_payoff(X::A, X::B, Player::Bard), 0);
        assert_eq!(mp_payoff(X::A, X::B, Player::Aqua), 1);
        for a in [X::A, X::B] {
            for b in [X::A, X::B] {
                assert_eq!(mp_payoff(a, b, Player::Aqua) + mp_payoff(a, b, Player::Bard), 1);
            }
        }
    }

    #[test]
    fn distance_examples() {
        let r = 1.3;
        let a = Control::constant(Action::A);
        let b = Control::constant(Action::B);
        assert_eq!(control_distance(&a, &a, r).unwrap(), 0.0);
        assert!((control_distance(&a, &b, r).unwrap() - 1.0).abs() < 1e-15);
        let cut = TimePoint::new(crate::interval_fn::time::ceil_to_grid(std::f64::consts::LN_2 / r, 1 << 40)).unwrap();
        let w = Control::new(
            StepFunction::new(t(2, 1), vec![t(0, 1), cut], vec![Action::B, Action::A], Some(Action::A)).unwrap(),
        )
        .unwrap();
        assert!((control_distance(&a, &w, r).unwrap() - 0.5).abs() < 1e-11);
        assert!(matches!(control_distance(&a, &b, 0.0), Err(Error::Usage(_))));
    }

    #[test]
    fn overlay_and_views() {
        let rest = Control::constant(Action::B);
        let prefix = StepFunction::constant(t(3, 2), Action::A).unwrap();
        let u = Control::overlay(&prefix, &rest).unwrap();
        assert_eq!(u.eval(&t(1, 1)), Action::A);
        assert_eq!(u.eval(&t(2, 1)), Action::B);

        let view = OpponentView::new(Some(&prefix), &rest);
        assert_eq!(view.value_at(&t(1, 1)).unwrap(), Action::A);
        assert_eq!(view.value_at(&t(3, 2)).unwrap(), Action::B);
        assert_eq!(view.value_before(&t(3, 2)).unwrap(), Action::A);
        let w = view.restrict(&t(1, 1), &t(2, 1)).unwrap();
        assert_eq!(w, StepFunction::from_lengths(&[(t(1, 2), Action::A), (t(1, 2), Action::B)]).unwrap());
        assert!(view.agrees_on(u.path(), &t(0, 1), &t(5, 1)).unwrap());
        assert!(!view.agrees_on(Control::constant(Action::A).path(), &t(0, 1), &t(2, 1)).unwrap());
        assert!(Control::new(prefix).is_err());
    }

    #[test]
    fn mixed_strategy_validation() {
        #[derive(Debug)]
        struct Flat;
        impl Responder for Flat {
            fn respond(&self, cell: &Cell, _: &OpponentView<'_>) -> Result<StepFunction> {
                StepFunction::constant(cell.len(), Action::A)
            }
        }
        let s = DelayStrategy::new("flat", Grid::uniform(t(1, 1)).unwrap(), Arc::new(Flat));
        let half = BigRational::new(1.into(), 2.into());
        assert!(MixedStrategy::new(Player::Aqua, "x", vec![(half.clone(), s.clone())]).is_err());
        assert!(MixedStrategy::new(Player::Aqua, "x", vec![]).is_err());
        assert!(MixedStrategy::new(Player::Aqua, "x", vec![(half.clone(), s.clone()), (half, s.clone())]).is_ok());
        let played = s.play(&Control::constant(Action::B), &t(5, 2)).unwrap();
        assert_eq!(played, StepFunction::constant(t(5, 2), Action::A).unwrap());
    }
}
