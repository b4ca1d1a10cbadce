//! Batch execution over independent work items.
//!
//! With the `parallel` feature, work is spread over the rayon thread pool;
//! without it every mode runs sequentially. Results keep input order either
//! way, so output does not depend on the mode.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

use crate::error::Result;
use crate::varcalc::{
    solve_direct, solve_isoperimetric, SolveOptions, SolveReport, VariationalProblem,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ExecMode {
    /// Parallel when the `parallel` feature is enabled.
    #[default]
    Auto,
    Sequential,
    /// Falls back to sequential without the `parallel` feature.
    Parallel,
}

impl ExecMode {
    pub fn is_parallel(self) -> bool {
        parallel_available() && self != ExecMode::Sequential
    }
}

pub fn parallel_available() -> bool {
    cfg!(feature = "parallel")
}

/// `f(0), ..., f(n - 1)` in order.
pub fn map_range<T, F>(n: usize, mode: ExecMode, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if mode.is_parallel() {
        return (0..n).into_par_iter().map(f).collect();
    }
    let _ = mode;
    (0..n).map(f).collect()
}

pub fn map_slice<I, T, F>(items: &[I], mode: ExecMode, f: F) -> Vec<T>
where
    I: Sync,
    T: Send,
    F: Fn(&I) -> T + Sync + Send,
{
    map_range(items.len(), mode, |i| f(&items[i]))
}

/// Solves each problem on its own, choosing the isoperimetric solver for
/// constrained problems.
pub fn solve_batch(
    problems: &[VariationalProblem],
    opts: &SolveOptions,
    mode: ExecMode,
) -> Vec<Result<SolveReport>> {
    map_slice(problems, mode, |p| solve_any(p, opts))
}

pub fn solve_any(problem: &VariationalProblem, opts: &SolveOptions) -> Result<SolveReport> {
    if problem.constraint().is_some() {
        solve_isoperimetric(problem, opts).map(|r| r.report)
    } else {
        solve_direct(problem, opts)
    }
}
