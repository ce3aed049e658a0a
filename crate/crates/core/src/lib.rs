//! The (p,q)-analogue of the Meyer-Koenig-Zeller operators.

pub mod bounds;
pub mod calculus;
pub mod cli;
pub mod error;
pub mod expr;
pub mod function;
pub mod moments;
pub mod operator;
pub mod oracle;
pub mod statistical;

pub use calculus::PQPair;
pub use error::{Error, Result};
pub use function::Function;
pub use operator::{EvalOutcome, PQParams, TruncationPolicy};
