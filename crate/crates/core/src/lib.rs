pub mod best_response;
pub mod engine;
pub mod error;
pub mod guesser;
pub mod harness;
pub mod interval_fn;
pub mod oracle;
pub mod random_function;

pub use error::{Error, Result};
