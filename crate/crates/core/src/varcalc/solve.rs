use super::discrete::{max_resolvable_depth, Discretization, Model, Multipliers, RowKind, System};
use super::integrand::Integrand;
use super::linsolve::{bordered_solve, dense_solve, least_squares};
use super::problem::{EndCondition, Sense, VariationalProblem};
use super::{ElResiduals, LinearSolver, SolveOptions, SolveReport};
use crate::error::{Error, Result};
use crate::hahn::GridFunction;

/// Dense LU is used up to this many unknowns under [`LinearSolver::Auto`].
const DENSE_LIMIT: usize = 400;
/// Dense LU is still tried as a fallback up to this size.
const DENSE_FALLBACK_LIMIT: usize = 2500;
const MAX_HALVINGS: usize = 40;
const POLISH_STEPS: usize = 3;

pub(crate) struct NewtonOutcome {
    pub x: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    pub gradient_norm: f64,
    pub raw_residual: f64,
    pub gradient_steps: usize,
    pub linear_solver: &'static str,
}

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0_f64, |m, x| m.max(x.abs()))
}

fn merit(g: &[f64]) -> f64 {
    0.5 * g.iter().map(|v| v * v).sum::<f64>()
}

/// `max_i |G_i| / (1 + sum_j |J_ij x_j|)`.
fn scaled_norm(sys: &System, x: &[f64]) -> f64 {
    let jac = sys.jac.as_ref().expect("scaled norm needs the Jacobian");
    let scale = jac.abs_mul(x);
    sys.g
        .iter()
        .zip(&scale)
        .fold(0.0_f64, |m, (g, s)| m.max(g.abs() / (1.0 + s)))
}

fn merit_at(model: &Model, x: &[f64]) -> f64 {
    match model.assemble(x, false) {
        Ok(sys) if sys.g.iter().all(|v| v.is_finite()) => merit(&sys.g),
        _ => f64::INFINITY,
    }
}

fn newton_direction(
    model: &Model,
    sys: &System,
    choice: LinearSolver,
) -> Option<(Vec<f64>, &'static str)> {
    let jac = sys.jac.as_ref()?;
    let rhs: Vec<f64> = sys.g.iter().map(|v| -v).collect();
    let n = jac.n_cols;
    if jac.n_rows() != n {
        return least_squares(jac, &rhs).map(|d| (d, "least-squares"));
    }
    let bordered = || {
        let s = model.band_structure(&sys.kinds);
        bordered_solve(jac, &rhs, &s).map(|d| (d, "bordered"))
    };
    let dense = || dense_solve(jac, &rhs).map(|d| (d, "dense"));
    match choice {
        LinearSolver::Dense => dense(),
        LinearSolver::Bordered => bordered(),
        LinearSolver::Auto if n <= DENSE_LIMIT => dense().or_else(bordered),
        LinearSolver::Auto => bordered().or_else(|| {
            if n <= DENSE_FALLBACK_LIMIT {
                dense()
            } else {
                None
            }
        }),
    }
}

fn line_search(model: &Model, x: &[f64], d: &[f64], phi: f64, first: f64) -> Option<Vec<f64>> {
    let mut alpha = first;
    for _ in 0..MAX_HALVINGS {
        let trial: Vec<f64> = x.iter().zip(d).map(|(a, b)| a + alpha * b).collect();
        if merit_at(model, &trial) < phi {
            return Some(trial);
        }
        alpha *= 0.5;
    }
    None
}

/// Damped Newton on the optimality system, with a steepest-descent
/// fallback on `|G|^2 / 2`.
pub(crate) fn newton(model: &Model, mut x: Vec<f64>, opts: &SolveOptions) -> Result<NewtonOutcome> {
    let mut gradient_steps = 0;
    let mut solver = "none";
    let mut iterations = 0;
    let mut sys = model.assemble(&x, true)?;
    if sys.g.iter().any(|v| !v.is_finite()) {
        return Err(Error::Solver(
            "residual is not finite at the initial guess".into(),
        ));
    }
    let mut scaled = scaled_norm(&sys, &x);
    let mut converged = scaled <= opts.tol;
    while !converged && iterations < opts.max_iter {
        iterations += 1;
        let phi = merit(&sys.g);
        let mut next = None;
        if let Some((d, used)) = newton_direction(model, &sys, opts.linear) {
            solver = used;
            next = line_search(model, &x, &d, phi, 1.0);
        }
        if next.is_none() {
            let jac = sys.jac.as_ref().expect("assembled with Jacobian");
            let d: Vec<f64> = jac.mul_transpose(&sys.g).iter().map(|v| -v).collect();
            let jd = jac.mul(&d);
            let dd: f64 = d.iter().map(|v| v * v).sum();
            let jdjd: f64 = jd.iter().map(|v| v * v).sum();
            if dd > 0.0 && jdjd > 0.0 {
                next = line_search(model, &x, &d, phi, dd / jdjd);
                if next.is_some() {
                    gradient_steps += 1;
                }
            }
        }
        let Some(nx) = next else {
            break;
        };
        x = nx;
        sys = model.assemble(&x, true)?;
        scaled = scaled_norm(&sys, &x);
        converged = scaled <= opts.tol;
    }
    if converged {
        // A few more full steps push the raw residual to rounding level.
        for _ in 0..POLISH_STEPS {
            let raw = max_abs(&sys.g);
            let Some((d, _)) = newton_direction(model, &sys, opts.linear) else {
                break;
            };
            let trial: Vec<f64> = x.iter().zip(&d).map(|(a, b)| a + b).collect();
            let Ok(tsys) = model.assemble(&trial, true) else {
                break;
            };
            if !(max_abs(&tsys.g) < 0.5 * raw) {
                break;
            }
            x = trial;
            sys = tsys;
            scaled = scaled_norm(&sys, &x);
        }
    }
    Ok(NewtonOutcome {
        raw_residual: max_abs(&sys.g),
        x,
        iterations,
        converged,
        gradient_norm: scaled,
        gradient_steps,
        linear_solver: solver,
    })
}

pub(crate) fn compile(problem: &VariationalProblem) -> Result<(Integrand, Option<Integrand>)> {
    problem.validate()?;
    let names = problem.slot_names();
    let l = Integrand::new(problem.lagrangian(), &names)?;
    let f = problem
        .constraint()
        .map(|c| Integrand::new(&c.expr, &names))
        .transpose()?;
    Ok((l, f))
}

pub(crate) fn resolve_depth(problem: &VariationalProblem, requested: usize) -> Result<usize> {
    if requested < 2 {
        return Err(Error::InvalidParams(format!(
            "depth {requested} must be at least 2"
        )));
    }
    Ok(requested.min(max_resolvable_depth(
        problem.params(),
        problem.a(),
        problem.b(),
    )))
}

/// Straight line through the pinned end values, a constant if one end is
/// pinned, zero otherwise.
pub(crate) fn default_init(problem: &VariationalProblem, disc: &Discretization) -> GridFunction {
    let bc = problem.boundary();
    let (a, b) = (problem.a(), problem.b());
    match (bc.at_a, bc.at_b) {
        (EndCondition::Fixed(ya), EndCondition::Fixed(yb)) => {
            GridFunction::sample(&disc.lattice, |t| ya + (yb - ya) * (t - a) / (b - a))
        }
        (EndCondition::Fixed(v), _) | (_, EndCondition::Fixed(v)) => {
            GridFunction::sample(&disc.lattice, |_| v)
        }
        _ => GridFunction::zeros(&disc.lattice),
    }
}

pub(crate) fn initial_state(
    problem: &VariationalProblem,
    disc: &Discretization,
    model: &Model,
    opts: &SolveOptions,
) -> Result<Vec<f64>> {
    let init = match &opts.init {
        Some(gf) => {
            if !gf.lattice().is_compatible(&disc.lattice) {
                return Err(Error::LatticeMismatch(format!(
                    "initial guess has depth {} but the solve uses depth {}",
                    gf.lattice().depth(),
                    disc.depth
                )));
            }
            gf.clone()
        }
        None => default_init(problem, disc),
    };
    Ok(model.layout.pack(&init, 0.0))
}

/// Residual diagnostics of a state under fixed multipliers `H = cl L + cf F`.
pub(crate) fn diagnostics(
    disc: &Discretization,
    problem: &VariationalProblem,
    l: &Integrand,
    f: Option<&Integrand>,
    x_grid: &GridFunction,
    cl: f64,
    cf: f64,
) -> Result<(ElResiduals, Option<f64>, Option<f64>)> {
    let cons = f.map(|f| (f, problem.constraint().map_or(0.0, |c| c.gamma)));
    let model = Model::new(
        disc,
        l,
        cons,
        *problem.boundary(),
        Multipliers::Fixed { cl, cf },
    );
    let x = model.layout.pack(x_grid, 0.0);
    let sys = model.assemble(&x, false)?;
    let mut el = ElResiduals::default();
    let mut nbc = [None, None];
    for (g, kind) in sys.g.iter().zip(&sys.kinds) {
        match kind {
            RowKind::El { o, k } => {
                let v = g / disc.orbits[*o].h[*k];
                if *o == 0 {
                    el.a.push(v);
                } else {
                    el.b.push(v);
                }
            }
            RowKind::End(o) => {
                let free = if *o == 0 {
                    problem.boundary().at_a.is_free()
                } else {
                    problem.boundary().at_b.is_free()
                };
                if free {
                    nbc[*o] = Some(*g);
                }
            }
            _ => {}
        }
    }
    Ok((el, nbc[0], nbc[1]))
}

pub(crate) fn sign_of(sense: Sense) -> f64 {
    match sense {
        Sense::Min => 1.0,
        Sense::Max => -1.0,
    }
}

/// Minimizes (or maximizes) the functional of an unconstrained problem.
pub fn solve_direct(problem: &VariationalProblem, opts: &SolveOptions) -> Result<SolveReport> {
    if problem.constraint().is_some() {
        return Err(Error::Problem(
            "problem carries an isoperimetric constraint; use solve_isoperimetric".into(),
        ));
    }
    opts.validate()?;
    let (l, _) = compile(problem)?;
    let depth = resolve_depth(problem, opts.depth)?;
    let disc = Discretization::new(problem, depth)?;
    let sign = sign_of(problem.sense());
    let model = Model::new(
        &disc,
        &l,
        None,
        *problem.boundary(),
        Multipliers::Fixed { cl: sign, cf: 0.0 },
    );
    let x0 = initial_state(problem, &disc, &model, opts)?;
    let out = newton(&model, x0, opts)?;
    finish(problem, &disc, &l, None, &model, out, opts.depth, None)
}

#[allow(clippy::too_many_arguments)]
pub(crate) fn finish(
    problem: &VariationalProblem,
    disc: &Discretization,
    l: &Integrand,
    f: Option<&Integrand>,
    model: &Model,
    out: NewtonOutcome,
    depth_requested: usize,
    multipliers: Option<(u8, f64)>,
) -> Result<SolveReport> {
    let minimizer = model.layout.unpack(&out.x, &disc.lattice);
    let plain = Model::new(
        disc,
        l,
        None,
        *problem.boundary(),
        Multipliers::Fixed { cl: 1.0, cf: 0.0 },
    );
    let xp = plain.layout.pack(&minimizer, 0.0);
    let (functional_value, functional_tail) = plain.functional_parts(&xp)?;
    let (cl, cf) = match multipliers {
        Some((l0, lam)) => (l0 as f64, -lam),
        None => (1.0, 0.0),
    };
    let (el_residuals, nbc_a, nbc_b) = diagnostics(disc, problem, l, f, &minimizer, cl, cf)?;
    let constraint_value = match (f, problem.constraint()) {
        (Some(fi), Some(c)) => {
            let m = Model::new(
                disc,
                l,
                Some((fi, c.gamma)),
                *problem.boundary(),
                Multipliers::Fixed { cl: 1.0, cf: 0.0 },
            );
            m.constraint_value(&m.layout.pack(&minimizer, 0.0))?
        }
        _ => None,
    };
    Ok(SolveReport {
        minimizer,
        functional_value,
        functional_tail,
        el_max: el_residuals.max_abs(),
        el_residuals,
        nbc_a,
        nbc_b,
        multiplier: multipliers.map(|m| m.1),
        multiplier0: multipliers.map(|m| m.0),
        constraint_value,
        constraint_residual: constraint_value
            .zip(problem.constraint())
            .map(|(v, c)| v - c.gamma),
        iterations: out.iterations,
        converged: out.converged,
        gradient_norm: out.gradient_norm,
        raw_residual: out.raw_residual,
        gradient_steps: out.gradient_steps,
        linear_solver: out.linear_solver,
        depth_requested,
        depth_used: disc.depth,
    })
}
