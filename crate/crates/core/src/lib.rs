//! Maximin-share approximation for mixed goods and chores.

mod enumerate;
pub mod error;
pub mod generate;
pub mod identical;
pub mod lp;
pub mod mixed;
pub mod model;
pub mod oracle;
pub mod rational;
pub mod search;
mod simplex;

pub use error::{Error, FormatError, Result};
pub use model::{Allocation, Instance};
pub use rational::Rational;

/// Default cap on the number of candidates any exhaustive enumeration may visit.
pub const DEFAULT_BUDGET: u64 = 20_000_000;
