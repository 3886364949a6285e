//! Exact fair division of chores whose costs spill over onto other agents.
//!
//! Agents are indexed from 0. All arithmetic is exact over big rationals.

// Errors carry exact rational witnesses; boxing them buys nothing here.
#![allow(clippy::result_large_err)]

pub mod approx;
pub mod error;
pub mod fairness;
pub mod fixtures;
pub mod model;
pub mod optimize;
pub mod oracle;
pub mod protocols;
pub mod rational;
pub mod roots;
pub mod rw;
pub mod schema;

pub use error::{ModelError, ProtocolError};
pub use fairness::{audit, audit_exact, FairnessReport, Notion, ValueTensor};
pub use model::{Allocation, Instance, Interval, Normalization, Piece, PiecewiseDensity};
pub use rational::{parse_rational, Rational};
