//! Quantum variational problems with free end-points on a truncated Hahn
//! lattice.

mod convexity;
mod discrete;
mod integrand;
mod isoperimetric;
mod linsolve;
mod problem;
mod residuals;
mod solve;

pub use convexity::{
    convexity_probe, ConvexityBox, ConvexityReport, ConvexitySample, ConvexityVerdict, ProbeOptions,
};
pub use discrete::{max_resolvable_depth, MIN_OFFSET};
pub use integrand::Integrand;
pub use isoperimetric::{solve_isoperimetric, Classification, IsoperimetricReport};
pub use problem::{
    BoundarySpec, Coefficient, Constraint, EndCondition, ExprCoefficient, NamedCoefficient, Sense,
    VariationalProblem,
};
pub use residuals::Evaluator;
pub use solve::solve_direct;

use crate::error::{Error, Result};
use crate::hahn::GridFunction;

/// Linear solver used for Newton steps on square systems.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum LinearSolver {
    /// Dense LU for small systems, bordered band elimination otherwise.
    #[default]
    Auto,
    Dense,
    Bordered,
}

#[derive(Debug, Clone)]
pub struct SolveOptions {
    /// Bound on the scaled residual `max_i |G_i| / (1 + sum_j |J_ij x_j|)`.
    pub tol: f64,
    pub max_iter: usize,
    /// Requested truncation depth; clamped by [`max_resolvable_depth`].
    pub depth: usize,
    /// Initial guess on the lattice of the clamped depth.
    pub init: Option<GridFunction>,
    pub linear: LinearSolver,
    /// Seed for randomized restarts.
    pub seed: u64,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            max_iter: 100,
            depth: 60,
            init: None,
            linear: LinearSolver::Auto,
            seed: 0,
        }
    }
}

impl SolveOptions {
    pub fn with_depth(mut self, depth: usize) -> Self {
        self.depth = depth;
        self
    }

    pub fn with_tol(mut self, tol: f64) -> Self {
        self.tol = tol;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.tol > 0.0 && self.tol.is_finite()) {
            return Err(Error::InvalidParams(format!(
                "tolerance {} must be positive",
                self.tol
            )));
        }
        if self.depth < 2 {
            return Err(Error::InvalidParams(format!(
                "depth {} must be at least 2",
                self.depth
            )));
        }
        Ok(())
    }
}

/// Euler–Lagrange residuals at `k = 0..N-2` of each orbit (empty for a
/// degenerate orbit).
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ElResiduals {
    pub a: Vec<f64>,
    pub b: Vec<f64>,
}

impl ElResiduals {
    pub fn max_abs(&self) -> f64 {
        self.a
            .iter()
            .chain(&self.b)
            .fold(0.0_f64, |m, v| m.max(v.abs()))
    }
}

#[derive(Debug, Clone)]
pub struct SolveReport {
    pub minimizer: GridFunction,
    /// Truncated functional `sum_{k < N}` over both orbits.
    pub functional_value: f64,
    /// Contribution of the closure extension past depth `N`.
    pub functional_tail: f64,
    pub el_residuals: ElResiduals,
    pub el_max: f64,
    /// Natural boundary residuals at free ends.
    pub nbc_a: Option<f64>,
    pub nbc_b: Option<f64>,
    /// Isoperimetric multiplier `lambda`.
    pub multiplier: Option<f64>,
    /// Multiplier of `L`: 1 (normal) or 0 (abnormal).
    pub multiplier0: Option<u8>,
    pub constraint_value: Option<f64>,
    pub constraint_residual: Option<f64>,
    pub iterations: usize,
    pub converged: bool,
    /// Final scaled residual.
    pub gradient_norm: f64,
    /// Final unscaled residual `max_i |G_i|`.
    pub raw_residual: f64,
    pub gradient_steps: usize,
    pub linear_solver: &'static str,
    pub depth_requested: usize,
    pub depth_used: usize,
}

impl SolveReport {
    pub fn functional_total(&self) -> f64 {
        self.functional_value + self.functional_tail
    }
}
