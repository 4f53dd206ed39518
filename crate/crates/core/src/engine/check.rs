//! Sampling check of the delay property: equal opponent play on `[0, t_n)`
//! must give equal own play on cell `n`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::strategy::{Control, DelayStrategy, OpponentView};
use crate::error::Result;
use crate::interval_fn::{Action, StepFunction, TimeChange, TimePoint};
use crate::random_function::random_section;

/// Cells examined when no horizon is given.
pub const DEFAULT_CHECK_CELLS: usize = 32;

/// Two opponent controls that agree before `t_n` but make the strategy play
/// differently on cell `n`.
#[derive(Clone, Debug, PartialEq)]
pub struct AnticipationWitness {
    pub cell: usize,
    pub base: Control,
    pub twin: Control,
    pub own_base: StepFunction,
    pub own_twin: StepFunction,
}

#[derive(Clone, Debug, PartialEq)]
pub enum NonAnticipationVerdict {
    Pass { checked: usize },
    Fail(Box<AnticipationWitness>),
}

impl NonAnticipationVerdict {
    pub fn passed(&self) -> bool {
        matches!(self, NonAnticipationVerdict::Pass { .. })
    }
}

/// Random control with up to `max_pieces` pieces on `[0, horizon)` and a
/// random tail.
pub fn random_control<R: Rng>(rng: &mut R, horizon: &TimePoint, max_pieces: usize) -> Control {
    let unit = random_section(rng, max_pieces);
    let path = unit
        .time_change(&TimePoint::zero(), horizon, TimeChange::Forward)
        .expect("unit domain");
    let tail = if rng.gen() { Action::A } else { Action::B };
    Control::new(path.with_tail(Some(tail))).expect("tail set")
}

/// Checks `samples` random prefix pairs on the first grid cells of `s`.
pub fn check_nonanticipativity(s: &DelayStrategy, samples: usize, seed: u64) -> Result<NonAnticipationVerdict> {
    let horizon = s.grid().point(DEFAULT_CHECK_CELLS);
    check_nonanticipativity_with(s, &[], &horizon, samples, seed)
}

/// Like [`check_nonanticipativity`], but half of the base controls are drawn
/// from `bases` (e.g. on-path plays) when given, and cells start below
/// `horizon`.
pub fn check_nonanticipativity_with(
    s: &DelayStrategy,
    bases: &[Control],
    horizon: &TimePoint,
    samples: usize,
    seed: u64,
) -> Result<NonAnticipationVerdict> {
    let cells = s.grid().points_below(horizon).len().max(1);
    let span = s.grid().point(cells);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..samples {
        let base = if !bases.is_empty() && rng.gen() {
            bases[rng.gen_range(0..bases.len())].clone()
        } else {
            random_control(&mut rng, &span, 24)
        };
        let n = rng.gen_range(0..cells);
        let t_n = s.grid().point(n);
        let other = random_control(&mut rng, &span, 24);
        let twin = if t_n.is_zero() {
            other
        } else {
            Control::overlay(&base.path().restrict(&TimePoint::zero(), &t_n)?, &other)?
        };
        let own_base = s.segment(n, &OpponentView::of(&base))?;
        let own_twin = s.segment(n, &OpponentView::of(&twin))?;
        if own_base != own_twin {
            return Ok(NonAnticipationVerdict::Fail(Box::new(AnticipationWitness {
                cell: n,
                base,
                twin,
                own_base,
                own_twin,
            })));
        }
    }
    Ok(NonAnticipationVerdict::Pass { checked: samples })
}
