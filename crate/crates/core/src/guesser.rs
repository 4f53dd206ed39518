//! Bard's side of the guessing game: the observe-then-majority schedule, the
//! α_ε responder, and a round engine that only reveals a window of the hidden
//! section after the guess for that window is committed.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Zero};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::interval_fn::time::{format_rational, rational_string};
use crate::interval_fn::{agreement_measure, splice, Action, StepFunction, TimePoint};
use crate::random_function::{n_star, RandomFunctionModel};

/// Partition `0 = t_0 < ... < t_K = 1` with `K = 2^{n*+1}`,
/// `t_{2k} = k/2^{n*}` and `t_{2k+1} = (k + eps)/2^{n*}`.
#[derive(Clone, Debug, PartialEq)]
pub struct GuessSchedule {
    points: Vec<TimePoint>,
    n_star: u32,
    eps: BigRational,
}

impl GuessSchedule {
    pub fn build(n_star: u32, eps: &BigRational) -> Result<Self> {
        if *eps <= BigRational::zero() || *eps >= BigRational::one() {
            return Err(Error::Usage(format!(
                "eps = {} outside (0, 1) gives a degenerate partition",
                format_rational(eps)
            )));
        }
        if n_star > 24 {
            return Err(Error::Usage(format!("n_star = {n_star} is too fine to schedule")));
        }
        let cells = 1i64 << n_star;
        let width = BigRational::new(BigInt::one(), BigInt::from(cells));
        let mut points = Vec::with_capacity(2 * cells as usize + 1);
        for k in 0..cells {
            let start = BigRational::from_integer(BigInt::from(k)) * &width;
            let mid = (BigRational::from_integer(BigInt::from(k)) + eps) * &width;
            points.push(TimePoint::new(start).expect("non-negative"));
            points.push(TimePoint::new(mid).expect("non-negative"));
        }
        points.push(TimePoint::one());
        Ok(GuessSchedule { points, n_star, eps: eps.clone() })
    }

    pub fn points(&self) -> &[TimePoint] {
        &self.points
    }

    pub fn n_star(&self) -> u32 {
        self.n_star
    }

    pub fn eps(&self) -> &BigRational {
        &self.eps
    }

    /// Number of rounds `K`.
    pub fn rounds(&self) -> usize {
        self.points.len() - 1
    }

    pub fn window(&self, round: usize) -> (&TimePoint, &TimePoint) {
        (&self.points[round], &self.points[round + 1])
    }

    pub fn window_len(&self, round: usize) -> TimePoint {
        &self.points[round + 1] - &self.points[round]
    }

    /// Even rounds observe; odd rounds exploit the preceding observation.
    pub fn is_observation(round: usize) -> bool {
        round % 2 == 0
    }

    /// Total length of the observation windows.
    pub fn observation_measure(&self) -> BigRational {
        (0..self.rounds())
            .filter(|&k| Self::is_observation(k))
            .fold(BigRational::zero(), |acc, k| acc + self.window_len(k).value())
    }
}

/// A guessing strategy: the segment committed for `round` may depend only on
/// the windows already revealed (`revealed.len() == round`).
pub trait GuessResponder {
    fn commit(&self, schedule: &GuessSchedule, round: usize, revealed: &[StepFunction]) -> Result<StepFunction>;
}

/// Observe on even windows (guessing the fallback `b`), then play the strict
/// majority of the observed window on the following odd window.
#[derive(Clone, Debug)]
pub struct AlphaEpsilon {
    pub preferred: Action,
    pub fallback: Action,
}

impl AlphaEpsilon {
    pub fn new() -> Self {
        AlphaEpsilon { preferred: Action::A, fallback: Action::B }
    }

    /// The responder with its schedule for `model`; Bard knows the model but
    /// not the drawn outcome.
    pub fn for_model(model: &RandomFunctionModel, eps: &BigRational) -> Result<(Self, GuessSchedule)> {
        let n = n_star(model, eps)?;
        Ok((Self::new(), GuessSchedule::build(n, eps)?))
    }

    /// Constant value committed on `round`, given the earlier reveals.
    pub fn symbol(&self, schedule: &GuessSchedule, round: usize, revealed: &[StepFunction]) -> Result<Action> {
        if revealed.len() != round {
            return Err(Error::Protocol(format!(
                "round {round} requested with {} revealed windows",
                revealed.len()
            )));
        }
        if round >= schedule.rounds() {
            return Err(Error::Protocol(format!("round {round} past the last round")));
        }
        Ok(self.decide(round, revealed.last()))
    }

    /// Decision on `round` from the window just before it, if any.
    pub fn decide(&self, round: usize, previous: Option<&StepFunction>) -> Action {
        match previous {
            Some(observed) if !GuessSchedule::is_observation(round) => {
                let threshold = observed.end().value() / BigInt::from(2);
                observed.majority_value(&threshold, self.preferred, self.fallback)
            }
            _ => self.fallback,
        }
    }
}

impl Default for AlphaEpsilon {
    fn default() -> Self {
        Self::new()
    }
}

impl GuessResponder for AlphaEpsilon {
    fn commit(&self, schedule: &GuessSchedule, round: usize, revealed: &[StepFunction]) -> Result<StepFunction> {
        let value = self.symbol(schedule, round, revealed)?;
        StepFunction::constant(schedule.window_len(round), value)
    }
}

/// Commits the same symbol every round.
#[derive(Clone, Debug)]
pub struct ConstantGuess(pub Action);

impl GuessResponder for ConstantGuess {
    fn commit(&self, schedule: &GuessSchedule, round: usize, _revealed: &[StepFunction]) -> Result<StepFunction> {
        StepFunction::constant(schedule.window_len(round), self.0)
    }
}

/// Test fixture that cheats by reading the hidden section of the current
/// window before it is revealed.
#[derive(Clone, Debug)]
pub struct PeekingGuess {
    pub hidden: StepFunction,
}

impl GuessResponder for PeekingGuess {
    fn commit(&self, schedule: &GuessSchedule, round: usize, _revealed: &[StepFunction]) -> Result<StepFunction> {
        let (s, t) = schedule.window(round);
        self.hidden.restrict(s, t)
    }
}

/// One round of the protocol: the guess is recorded before the window of
/// the hidden section is revealed.
#[derive(Clone, Debug, PartialEq)]
pub struct RoundTranscript {
    pub round: usize,
    pub committed: StepFunction,
    pub revealed: StepFunction,
}

#[derive(Clone, Debug, PartialEq)]
pub struct GameTranscript {
    pub rounds: Vec<RoundTranscript>,
    pub guess: StepFunction,
    pub agreement: BigRational,
}

/// Plays the full round protocol of `responder` against one hidden section.
pub fn play_protocol<R: GuessResponder + ?Sized>(
    responder: &R,
    schedule: &GuessSchedule,
    hidden: &StepFunction,
) -> Result<GameTranscript> {
    if *hidden.end() != TimePoint::one() {
        return Err(Error::Usage("hidden section must live on [0, 1)".into()));
    }
    let mut revealed: Vec<StepFunction> = Vec::with_capacity(schedule.rounds());
    let mut rounds = Vec::with_capacity(schedule.rounds());
    for k in 0..schedule.rounds() {
        let committed = responder.commit(schedule, k, &revealed)?;
        let len = schedule.window_len(k);
        if *committed.end() != len {
            return Err(Error::Protocol(format!(
                "round {k}: committed segment has length {}, window has length {len}",
                committed.end()
            )));
        }
        let (s, t) = schedule.window(k);
        let window = hidden.restrict(s, t)?;
        revealed.push(window.clone());
        rounds.push(RoundTranscript { round: k, committed, revealed: window });
    }
    let segments: Vec<StepFunction> = rounds.iter().map(|r| r.committed.clone()).collect();
    let guess = splice(&segments)?;
    let agreement = agreement_measure(hidden, &guess)?.0;
    Ok(GameTranscript { rounds, guess, agreement })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AtomOutcome {
    #[serde(with = "rational_string")]
    pub p: BigRational,
    #[serde(with = "rational_string")]
    pub agreement: BigRational,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GuessBounds {
    /// `P(agreement >= 1 - 2 eps) >= 1 - eps`.
    pub prop1: bool,
    /// Expected payoff `>= 1 - 3 eps`.
    pub payoff_1_minus_3eps: bool,
}

/// Exact outcome of α_ε against every atom of a model.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GuessReport {
    #[serde(with = "rational_string")]
    pub eps: BigRational,
    pub n_star: u32,
    pub atoms: Vec<AtomOutcome>,
    #[serde(with = "rational_string")]
    pub prob_good: BigRational,
    #[serde(with = "rational_string")]
    pub expected_payoff: BigRational,
    pub bounds: GuessBounds,
}

impl GuessReport {
    fn from_outcomes(eps: BigRational, n_star: u32, atoms: Vec<AtomOutcome>) -> Self {
        let good_level = BigRational::one() - &eps * BigInt::from(2);
        let prob_good = atoms
            .iter()
            .filter(|a| a.agreement >= good_level)
            .fold(BigRational::zero(), |acc, a| acc + &a.p);
        let expected_payoff = atoms.iter().fold(BigRational::zero(), |acc, a| acc + &a.p * &a.agreement);
        let mut report = GuessReport {
            eps,
            n_star,
            atoms,
            prob_good,
            expected_payoff,
            bounds: GuessBounds { prop1: false, payoff_1_minus_3eps: false },
        };
        report.bounds = report.derive_bounds();
        report
    }

    /// Bound flags recomputed from the report's own numbers.
    pub fn derive_bounds(&self) -> GuessBounds {
        let one = BigRational::one();
        GuessBounds {
            prop1: self.prob_good >= &one - &self.eps,
            payoff_1_minus_3eps: self.expected_payoff >= &one - &self.eps * BigInt::from(3),
        }
    }

    /// True when the stored aggregates and flags re-derive from `atoms`.
    pub fn is_self_consistent(&self) -> bool {
        let again = GuessReport::from_outcomes(self.eps.clone(), self.n_star, self.atoms.clone());
        again.prob_good == self.prob_good
            && again.expected_payoff == self.expected_payoff
            && again.bounds == self.bounds
    }
}

fn map_atoms<T, F>(model: &RandomFunctionModel, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(&crate::random_function::Atom) -> Result<T> + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        model.atoms().par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        model.atoms().iter().map(f).collect()
    }
}

/// Runs α_ε against every atom of `model` and aggregates the exact results.
pub fn run_guessing_game(model: &RandomFunctionModel, eps: &BigRational) -> Result<GuessReport> {
    let (responder, schedule) = AlphaEpsilon::for_model(model, eps)?;
    let atoms = map_atoms(model, |atom| {
        let game = play_protocol(&responder, &schedule, &atom.section)?;
        Ok(AtomOutcome { p: atom.p.clone(), agreement: game.agreement })
    })?;
    Ok(GuessReport::from_outcomes(eps.clone(), schedule.n_star(), atoms))
}

/// A detected dependence of a committed segment on not-yet-revealed data.
#[derive(Clone, Debug, PartialEq)]
pub struct FlowViolation {
    pub round: usize,
    pub atom: usize,
    pub hidden: StepFunction,
    pub twin: StepFunction,
}

#[derive(Clone, Debug, PartialEq)]
pub enum FlowVerdict {
    Pass { comparisons: usize },
    Fail(Box<FlowViolation>),
}

impl FlowVerdict {
    pub fn passed(&self) -> bool {
        matches!(self, FlowVerdict::Pass { .. })
    }
}

/// Section equal to `f` on `[0, at)` and with every value flipped afterwards.
fn flip_after(f: &StepFunction, at: &TimePoint) -> Result<StepFunction> {
    let end = f.end().clone();
    let flipped_rest = |s: &TimePoint| -> Result<StepFunction> {
        let rest = f.restrict(s, &end)?;
        StepFunction::new(
            rest.end().clone(),
            rest.breaks().to_vec(),
            rest.values().iter().map(|v| v.flip()).collect(),
            None,
        )
    };
    if at.is_zero() {
        return flipped_rest(at);
    }
    splice(&[f.restrict(&TimePoint::zero(), at)?, flipped_rest(at)?])
}

/// Checks that the responder's round-`k` commitment is a function of rounds
/// `< k` only. `make` builds the responder facing a given hidden section,
/// which lets fixtures with illegitimate access be plugged in.
///
/// Twins are formed from sampled atoms: each atom against the same section
/// flipped from `t_k` on, and atom pairs against each other up to the first
/// window where their reveals differ.
pub fn enforce_information_flow<R, F>(
    make: F,
    model: &RandomFunctionModel,
    eps: &BigRational,
    samples: usize,
    seed: u64,
) -> Result<FlowVerdict>
where
    R: GuessResponder,
    F: Fn(&StepFunction) -> R,
{
    let schedule = GuessSchedule::build(n_star(model, eps)?, eps)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut order: Vec<usize> = (0..model.len()).collect();
    order.shuffle(&mut rng);
    order.truncate(samples.max(1));

    let mut comparisons = 0;
    let run = |hidden: &StepFunction| play_protocol(&make(hidden), &schedule, hidden);
    let compare = |a: &GameTranscript, b: &GameTranscript, upto: usize| -> Option<usize> {
        (0..=upto.min(schedule.rounds() - 1)).find(|&k| a.rounds[k].committed != b.rounds[k].committed)
    };

    for &i in &order {
        let hidden = &model.atoms()[i].section;
        let base = run(hidden)?;
        for k in 0..schedule.rounds() {
            let twin = flip_after(hidden, &schedule.points()[k])?;
            let other = run(&twin)?;
            comparisons += 1;
            if let Some(round) = compare(&base, &other, k) {
                return Ok(FlowVerdict::Fail(Box::new(FlowViolation {
                    round,
                    atom: i,
                    hidden: hidden.clone(),
                    twin,
                })));
            }
        }
    }
    for pair in order.windows(2) {
        let (i, j) = (pair[0], pair[1]);
        let (fi, fj) = (&model.atoms()[i].section, &model.atoms()[j].section);
        let (gi, gj) = (run(fi)?, run(fj)?);
        let first_diff = (0..schedule.rounds())
            .find(|&k| gi.rounds[k].revealed != gj.rounds[k].revealed)
            .unwrap_or(schedule.rounds() - 1);
        comparisons += 1;
        if let Some(round) = compare(&gi, &gj, first_diff) {
            return Ok(FlowVerdict::Fail(Box::new(FlowViolation {
                round,
                atom: i,
                hidden: fi.clone(),
                twin: fj.clone(),
            })));
        }
    }
    Ok(FlowVerdict::Pass { comparisons })
}
