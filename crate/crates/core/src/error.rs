use thiserror::Error;

use crate::expr::{DiffError, EvalError, ParseError};

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("degenerate interval: a = {a} must be strictly less than b = {b}")]
    DegenerateInterval { a: f64, b: f64 },

    #[error("denominator (q-1)t+omega vanished at t = {t}, which is not the fixed point {omega0}")]
    FixedPointDegeneracy { t: f64, omega0: f64 },

    #[error("sigma^{k}({t}) is out of the representable range")]
    Range { t: f64, k: i64 },

    #[error("{0} is not defined at the fixed point omega0")]
    AtFixedPoint(&'static str),

    #[error("index {index} out of range (depth {depth})")]
    IndexOutOfRange { index: usize, depth: usize },

    #[error("series did not converge after {terms} terms (last term {last_term:e})")]
    NonConvergence { terms: usize, last_term: f64 },

    #[error("length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },

    #[error("grid does not match the problem lattice: {0}")]
    LatticeMismatch(String),

    #[error("boundary at `{0}` is fixed; natural boundary residual requested")]
    FixedEnd(char),

    #[error("problem definition: {0}")]
    Problem(String),

    #[error(transparent)]
    Parse(#[from] ParseError),

    #[error(transparent)]
    Eval(#[from] EvalError),

    #[error(transparent)]
    Diff(#[from] DiffError),

    #[error("solver failed: {0}")]
    Solver(String),

    #[error("point t = {t} lies outside the validity window |t - omega0| < {window}")]
    ValidityWindow { t: f64, window: f64 },
}
