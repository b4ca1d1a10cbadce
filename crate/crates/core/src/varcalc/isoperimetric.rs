use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::discrete::{Discretization, Model, Multipliers};
use super::solve::{
    compile, diagnostics, finish, initial_state, newton, resolve_depth, NewtonOutcome,
};
use super::{SolveOptions, SolveReport};
use crate::error::{Error, Result};

/// Normal solves retried from perturbed starts before falling back to the
/// abnormal system.
const RESTARTS: usize = 3;
/// An extremal whose `F` Euler–Lagrange and boundary residuals all fall
/// below this is treated as an extremal of the constraint.
const ABNORMAL_TOL: f64 = 1e-7;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Classification {
    /// `lambda0 = 1`.
    Normal,
    /// `lambda0 = 0`: the candidate is an extremal of the constraint.
    Abnormal,
}

#[derive(Debug, Clone)]
pub struct IsoperimetricReport {
    pub classification: Classification,
    pub report: SolveReport,
    /// Perturbed restarts of the normal solve.
    pub restarts: usize,
}

fn perturb(x: &[f64], lambda_idx: Option<usize>, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let scale = 0.1 * (1.0 + x.iter().fold(0.0_f64, |m, v| m.max(v.abs())));
    let mut out: Vec<f64> = x
        .iter()
        .map(|v| v + scale * rng.random_range(-1.0..1.0))
        .collect();
    if let Some(l) = lambda_idx {
        out[l] = rng.random_range(-1.0..1.0);
    }
    out
}

/// Solves `extremize int L subject to int F = gamma` by multipliers.
///
/// The normal system `L - lambda F` is tried first. A converged candidate
/// that also extremizes `F` alone, or a normal system that fails from every
/// start, is handed to the abnormal system `-F` with the constraint row,
/// solved in the least-squares sense.
pub fn solve_isoperimetric(
    problem: &super::VariationalProblem,
    opts: &SolveOptions,
) -> Result<IsoperimetricReport> {
    let constraint = problem
        .constraint()
        .ok_or_else(|| Error::Problem("isoperimetric solve needs a constraint".into()))?;
    opts.validate()?;
    let (l, f) = compile(problem)?;
    let f = f.expect("constraint compiled");
    let gamma = constraint.gamma;
    let depth = resolve_depth(problem, opts.depth)?;
    let disc = Discretization::new(problem, depth)?;
    let cons = Some((&f, gamma));

    let normal = Model::new(&disc, &l, cons, *problem.boundary(), Multipliers::Normal);
    let x0 = initial_state(problem, &disc, &normal, opts)?;
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut best: Option<NewtonOutcome> = None;
    let mut restarts = 0;
    for attempt in 0..=RESTARTS {
        let start = if attempt == 0 {
            x0.clone()
        } else {
            restarts += 1;
            perturb(&x0, normal.layout.lambda, &mut rng)
        };
        let Ok(out) = newton(&normal, start, opts) else {
            continue;
        };
        let done = out.converged;
        if best
            .as_ref()
            .is_none_or(|b| out.gradient_norm < b.gradient_norm)
        {
            best = Some(out);
        }
        if done {
            break;
        }
    }

    let normal_ok = best.as_ref().is_some_and(|b| b.converged);
    if normal_ok {
        let out = best.take().expect("checked");
        let grid = normal.layout.unpack(&out.x, &disc.lattice);
        let (el_f, nbc_a, nbc_b) = diagnostics(&disc, problem, &l, Some(&f), &grid, 0.0, 1.0)?;
        let f_stationary = el_f.max_abs() < ABNORMAL_TOL
            && nbc_a.is_none_or(|v| v.abs() < ABNORMAL_TOL)
            && nbc_b.is_none_or(|v| v.abs() < ABNORMAL_TOL);
        if !f_stationary {
            let lambda = out.x[normal.layout.lambda.expect("normal layout")];
            let report = finish(
                problem,
                &disc,
                &l,
                Some(&f),
                &normal,
                out,
                opts.depth,
                Some((1, lambda)),
            )?;
            return Ok(IsoperimetricReport {
                classification: Classification::Normal,
                report,
                restarts,
            });
        }
        best = Some(out);
    }

    let abnormal = Model::new(&disc, &l, cons, *problem.boundary(), Multipliers::Abnormal);
    let start = match &best {
        Some(b) => abnormal
            .layout
            .pack(&normal.layout.unpack(&b.x, &disc.lattice), 0.0),
        None => initial_state(problem, &disc, &abnormal, opts)?,
    };
    let out = newton(&abnormal, start, opts)?;
    if out.converged || best.is_none() {
        let report = finish(
            problem,
            &disc,
            &l,
            Some(&f),
            &abnormal,
            out,
            opts.depth,
            Some((0, 1.0)),
        )?;
        return Ok(IsoperimetricReport {
            classification: Classification::Abnormal,
            report,
            restarts,
        });
    }
    let out = best.expect("checked");
    let lambda = out.x[normal.layout.lambda.expect("normal layout")];
    let report = finish(
        problem,
        &disc,
        &l,
        Some(&f),
        &normal,
        out,
        opts.depth,
        Some((1, lambda)),
    )?;
    Ok(IsoperimetricReport {
        classification: Classification::Normal,
        report,
        restarts,
    })
}
