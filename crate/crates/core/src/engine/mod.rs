//! Continuous-time Matching Pennies: controls, strategies with delay, mixed
//! strategies, play construction and discounted payoffs.

pub mod catalog;
pub mod check;
pub mod grid;
pub mod play;
pub mod strategy;

pub use catalog::{build_mixed, build_strategy, reference_catalog, MixedStrategySpec, ResponderSpec};
pub use check::{check_nonanticipativity, AnticipationWitness, NonAnticipationVerdict};
pub use grid::{merge_grids, Cell, Grid};
pub use play::{construct_play, construct_play_seeded, expected_payoff, extend_play, truncation_horizon, Play, PayoffReport};
pub use strategy::{control_distance, mp_payoff, Control, DelayStrategy, MixedStrategy, OpponentView, Player, Responder};
