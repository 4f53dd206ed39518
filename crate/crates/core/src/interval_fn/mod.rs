//! Exact arithmetic on finitely-piecewise-constant functions of time.

pub mod discount;
pub mod step;
pub mod time;

pub use discount::{discounted_integral, discounted_mass, discounted_measure_where, tail_mass};
pub use step::{
    agreement_measure, disagreement_measure, joint_pieces, splice, JointPiece, Piece, StepFunction,
    TimeChange,
};
pub use time::{format_rational, parse_rational, Action, Alphabet, Measure, TimePoint};
