use crate::rational::{ParseRationalError, Rational};
use thiserror::Error;

/// Errors raised while building instances, pieces and allocations.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("schema error: {0}")]
    Schema(String),
    #[error(transparent)]
    Number(#[from] ParseRationalError),
    #[error("agent {agent} is not normalized: total value {sum}, expected 1")]
    Normalization { agent: usize, sum: Rational },
    #[error("density v[{agent}][{holder}] is negative on [{lo}, {hi}]")]
    NegativeDensity {
        agent: usize,
        holder: usize,
        lo: Rational,
        hi: Rational,
    },
    #[error("dimension mismatch: expected {expected} agents, found {found}")]
    Dimension { expected: usize, found: usize },
    #[error("interval [{lo}, {hi}] has lo > hi")]
    ReversedInterval { lo: Rational, hi: Rational },
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ProtocolError {
    #[error("protocol requires exactly two agents, instance has {0}")]
    NotTwoAgents(usize),
    #[error("uniform allocation requires piecewise-constant densities")]
    NotPiecewiseConstant,
    #[error("bad parameters: {0}")]
    BadParams(String),
    #[error(transparent)]
    Model(#[from] ModelError),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum OptimizeError {
    #[error("invalid fraction matrix: {0}")]
    InvalidFractions(String),
    #[error("linear program is infeasible")]
    InfeasibleModel { certificate: Vec<Rational> },
    #[error("linear program is unbounded")]
    Unbounded,
    #[error(transparent)]
    Model(#[from] ModelError),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ApproxError {
    #[error("epsilon must be positive, got {0}")]
    BadEps(Rational),
    #[error("Lipschitz constant must be positive, got {0}")]
    BadLipschitz(Rational),
    #[error("value {value} outside grid range [0, {top}]")]
    OutOfRange { value: f64, top: Rational },
    #[error("oracle v[{agent}][{holder}] violates its declared bounds: {detail}")]
    OracleContract {
        agent: usize,
        holder: usize,
        detail: String,
    },
    #[error("oracle spec error: {0}")]
    Spec(String),
    #[error(transparent)]
    Optimize(#[from] OptimizeError),
    #[error(transparent)]
    Model(#[from] ModelError),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RwError {
    #[error("bad query range: {0}")]
    BadRange(String),
    #[error("cut target unreachable: only {available} available, shortfall {shortfall}")]
    Unreachable {
        available: Rational,
        shortfall: Rational,
    },
    #[error("answer is irrational; it lies in [{lo}, {hi}]")]
    Irrational { lo: Rational, hi: Rational },
    #[error("bad agent index {0}")]
    BadAgent(usize),
    #[error("trace line {line}: {message}")]
    Script { line: usize, message: String },
    #[error("unsupported: {0}")]
    Unsupported(String),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum OracleError {
    #[error("search space of {size} allocations exceeds the budget cap {cap}")]
    BudgetExceeded { size: String, cap: u64 },
    #[error("no allocation satisfies the constraints at this grid")]
    NoFeasible,
    #[error("no witness found within budget {budget}")]
    NotFound { budget: u64 },
    #[error("bad property spec: {0}")]
    BadSpec(String),
    #[error(transparent)]
    Model(#[from] ModelError),
}
