//! Built-in problems with closed-form or independent reference solutions.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::expr::{parse, Expr};
use crate::hahn::{GridFunction, HahnParams, Lattice, Side};
use crate::varcalc::{
    max_resolvable_depth, BoundarySpec, Coefficient, EndCondition, ExprCoefficient,
    VariationalProblem,
};

/// `c2 t^2 + c1 t + c0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Quadratic {
    pub c2: f64,
    pub c1: f64,
    pub c0: f64,
}

impl Quadratic {
    pub fn eval(&self, t: f64) -> f64 {
        (self.c2 * t + self.c1) * t + self.c0
    }

    /// Hahn derivative: `c2 ((q + 1) t + omega) + c1`.
    pub fn hahn_derivative(&self, params: &HahnParams, t: f64) -> f64 {
        self.c2 * ((params.q() + 1.0) * t + params.omega()) + self.c1
    }

    pub fn sample(&self, lattice: &Lattice) -> GridFunction {
        GridFunction::sample(lattice, |t| self.eval(t))
    }
}

fn builtin(text: &str, params: &[&str]) -> Expr {
    parse(text, params).expect("built-in expression parses")
}

/// `int_0^1 y(sigma t) + Dy^2 / 2` with `y(1) = 1` and `y(0)` free.
pub fn example1_problem(params: HahnParams) -> (VariationalProblem, Quadratic) {
    let lagrangian = builtin("y + (1/2)*Dy^2", &[]);
    let boundary = BoundarySpec::new(EndCondition::Free, EndCondition::Fixed(1.0));
    let problem =
        VariationalProblem::new(params, 0.0, 1.0, lagrangian, boundary).expect("valid interval");
    let (q, w) = (params.q(), params.omega());
    let closed = Quadratic {
        c2: 1.0 / (q + 1.0),
        c1: -w / (q + 1.0),
        c0: (q + w) / (q + 1.0),
    };
    (problem, closed)
}

/// Example 1's functional with both ends free and the penalty terms
/// `gamma (y(1) - 1)^2 / 2 + nu y(0)^2 / 2`.
pub fn example2_problem(
    params: HahnParams,
    gamma: f64,
    nu: f64,
) -> Result<(VariationalProblem, Quadratic)> {
    if !(gamma > 0.0 && nu > 0.0 && gamma.is_finite() && nu.is_finite()) {
        return Err(Error::InvalidParams(format!(
            "gamma = {gamma} and nu = {nu} must be positive"
        )));
    }
    let lagrangian = builtin(
        "y + (1/2)*Dy^2 + gamma*(yb - 1)^2/2 + nu*ya^2/2",
        &["gamma", "nu"],
    );
    let problem = VariationalProblem::new(params, 0.0, 1.0, lagrangian, BoundarySpec::free())?
        .with_param("gamma", gamma)
        .with_param("nu", nu);
    let (q, w) = (params.q(), params.omega());
    let den = (q + 1.0) * (gamma + nu * gamma + nu);
    let closed = Quadratic {
        c2: 1.0 / (q + 1.0),
        c1: -(w * (nu + gamma) - nu * (gamma - 1.0) * (q + 1.0) + gamma * nu) / den,
        c0: ((gamma - 1.0) * (q + 1.0) - gamma * (1.0 - w)) / den,
    };
    Ok((problem, closed))
}

/// Minimizer of Example 1's functional with `y(0) = 0`, `y(1) = 1`: the
/// limit of the Example 2 minimizers as `gamma, nu -> infinity`.
pub fn example2_limit(params: HahnParams) -> Quadratic {
    let q = params.q();
    Quadratic {
        c2: 1.0 / (q + 1.0),
        c1: q / (q + 1.0),
        c0: 0.0,
    }
}

/// The q,omega-exponential `E(z, t)` as a per-point coefficient.
#[derive(Debug, Clone, Copy)]
pub struct QwExponentialCoefficient {
    pub z: f64,
}

const EXP_TOL: f64 = 1e-17;

impl Coefficient for QwExponentialCoefficient {
    fn value_at(&self, params: &HahnParams, t: f64) -> Result<f64> {
        let e = params.qw_exponential(self.z, t, EXP_TOL)?;
        if e.collapsed {
            return Err(Error::Problem(format!(
                "E({}, {t}) has a vanishing factor",
                self.z
            )));
        }
        Ok(e.value)
    }

    /// `E(z, sigma t) = E(z, t) / (1 + z (t (1 - q) - omega))`.
    fn along_orbit(&self, params: &HahnParams, anchor: f64, len: usize) -> Result<Vec<f64>> {
        let mut out = Vec::with_capacity(len);
        let mut t = anchor;
        let mut e = self.value_at(params, anchor)?;
        for _ in 0..len {
            out.push(e);
            let factor = 1.0 + self.z * (t * (1.0 - params.q()) - params.omega());
            if factor == 0.0 {
                return Err(Error::Problem(format!(
                    "E({}, {t}) has a vanishing factor",
                    self.z
                )));
            }
            e /= factor;
            t = params.sigma(t);
        }
        Ok(out)
    }
}

/// Quantum adjustment model: discount `r > 1`, disequilibrium weight
/// `alpha > 0`, horizon `T > 0` and target path `ybar(t)`.
#[derive(Debug, Clone)]
pub struct AdjustmentSpec {
    pub params: HahnParams,
    pub r: f64,
    pub alpha: f64,
    pub horizon: f64,
    pub target: Expr,
}

impl AdjustmentSpec {
    pub fn new(params: HahnParams, r: f64, alpha: f64, horizon: f64, target: Expr) -> Result<Self> {
        if !(r > 1.0 && r.is_finite()) {
            return Err(Error::InvalidParams(format!(
                "discount r = {r} must exceed 1"
            )));
        }
        if !(alpha > 0.0 && alpha.is_finite()) {
            return Err(Error::InvalidParams(format!(
                "alpha = {alpha} must be positive"
            )));
        }
        if !(horizon > 0.0 && horizon.is_finite()) {
            return Err(Error::InvalidParams(format!(
                "horizon T = {horizon} must be positive"
            )));
        }
        ExprCoefficient::new(target.clone(), true)?;
        Ok(Self {
            params,
            r,
            alpha,
            horizon,
            target,
        })
    }

    /// Target `ybar(t) = t`.
    pub fn linear_target(params: HahnParams, r: f64, alpha: f64, horizon: f64) -> Result<Self> {
        Self::new(params, r, alpha, horizon, Expr::var(crate::expr::Var::T))
    }

    /// `1 / ((r - 1)(1 - q))`: the recurrence form holds for
    /// `|t - omega0|` below this.
    pub fn validity_window(&self) -> f64 {
        1.0 / ((self.r - 1.0) * (1.0 - self.params.q()))
    }

    fn check_window(&self) -> Result<()> {
        let window = self.validity_window();
        let w0 = self.params.omega0();
        for t in [0.0, self.horizon] {
            if !((t - w0).abs() < window) {
                return Err(Error::ValidityWindow { t, window });
            }
        }
        Ok(())
    }
}

/// `int_0^T E(1 - r, t) [alpha (y(sigma t) - ybar(sigma t))^2 + Dy^2]`,
/// both ends free. `E` and `ybar(sigma t)` are per-point coefficients.
pub fn adjustment_problem(spec: &AdjustmentSpec) -> Result<VariationalProblem> {
    let lagrangian = builtin("E*(alpha*(y - ybar)^2 + Dy^2)", &["alpha", "E", "ybar"]);
    let target = ExprCoefficient::new(spec.target.clone(), true)?;
    Ok(VariationalProblem::new(
        spec.params,
        0.0,
        spec.horizon,
        lagrangian,
        BoundarySpec::free(),
    )?
    .with_param("alpha", spec.alpha)
    .with_coefficient("E", Arc::new(QwExponentialCoefficient { z: 1.0 - spec.r }))
    .with_coefficient("ybar", Arc::new(target)))
}

/// Value and slope at `s = 0` of the quadratic through `(s_i, y_i)`.
fn closure_at_zero(s: [f64; 3], y: [f64; 3]) -> (f64, f64) {
    let mut c0 = 0.0;
    let mut c1 = 0.0;
    for i in 0..3 {
        let (j, m) = ((i + 1) % 3, (i + 2) % 3);
        let den = (s[i] - s[j]) * (s[i] - s[m]);
        c0 += y[i] * s[j] * s[m] / den;
        c1 -= y[i] * (s[j] + s[m]) / den;
    }
    (c0, c1)
}

struct Marcher<'a> {
    spec: &'a AdjustmentSpec,
    target: ExprCoefficient,
    depth: usize,
}

impl Marcher<'_> {
    /// Orbit values from `y(anchor)` with `D[y](anchor) = 0`, using
    /// `D[y](t_{k+1}) = D[y](t_k) + h_k [(r - 1) D[y](t_k) + B_k alpha (y(t_{k+1}) - ybar(t_{k+1}))]`
    /// with `B_k = 1 - (r - 1)(t_k (1 - q) - omega)`.
    fn march(&self, anchor: f64, y0: f64) -> Result<(Vec<f64>, f64, f64)> {
        let p = &self.spec.params;
        let (r, alpha) = (self.spec.r, self.spec.alpha);
        let n = self.depth;
        let mut y = Vec::with_capacity(n + 1);
        let mut t = anchor;
        let mut dy = 0.0;
        y.push(y0);
        y.push(y0);
        for k in 0..n - 1 {
            let h = p.step(t);
            let b = 1.0 - (r - 1.0) * (t * (1.0 - p.q()) - p.omega());
            let ybar = self.target.value_at(p, t)?;
            dy += h * ((r - 1.0) * dy + b * alpha * (y[k + 1] - ybar));
            t = p.sigma(t);
            y.push(y[k + 1] + p.step(t) * dy);
        }
        if y.iter().any(|v| !v.is_finite()) {
            return Err(Error::Solver("shooting march overflowed".into()));
        }
        let s0 = anchor - p.omega0();
        let q = p.q();
        let s = [2, 1, 0].map(|back| s0 * q.powi((n - back) as i32));
        let (c0, c1) = closure_at_zero(s, [y[n - 2], y[n - 1], y[n]]);
        Ok((y, c0, c1))
    }
}

const SHOOT_ITERS: usize = 8;

/// Solves the adjustment model's optimality recurrence by shooting on the
/// anchor values.
///
/// Each orbit is marched from its anchor with `D[y] = 0` there; the anchor
/// values are chosen so the quadratic closures of the two orbits agree in
/// value and slope at `omega0`. An anchor on `omega0` carries no orbit;
/// there the slope of the other orbit's closure must vanish. The depth is
/// clamped by [`max_resolvable_depth`].
pub fn adjustment_shooting_solve(
    spec: &AdjustmentSpec,
    depth: usize,
    tol: f64,
) -> Result<GridFunction> {
    if depth < 3 {
        return Err(Error::InvalidParams(format!(
            "shooting depth {depth} must be at least 3"
        )));
    }
    if !(tol > 0.0) {
        return Err(Error::InvalidParams(format!(
            "tolerance {tol} must be positive"
        )));
    }
    spec.check_window()?;
    let p = spec.params;
    let (a, b) = (0.0, spec.horizon);
    let depth = depth.min(max_resolvable_depth(&p, a, b)).max(3);
    let lattice = Lattice::new(p, a, b, depth)?;
    let marcher = Marcher {
        spec,
        target: ExprCoefficient::new(spec.target.clone(), true)?,
        depth,
    };
    let live: Vec<(Side, f64)> = [(Side::A, a), (Side::B, b)]
        .into_iter()
        .filter(|(_, t)| !p.is_fixed_point(*t))
        .collect();

    type Marched = Vec<(Vec<f64>, f64, f64)>;
    let eval = |x: &[f64]| -> Result<(Marched, Vec<f64>)> {
        let runs = live
            .iter()
            .zip(x)
            .map(|((_, anchor), y0)| marcher.march(*anchor, *y0))
            .collect::<Result<Marched>>()?;
        let res = if runs.len() == 2 {
            vec![runs[0].1 - runs[1].1, runs[0].2 - runs[1].2]
        } else {
            vec![runs[0].2]
        };
        Ok((runs, res))
    };

    let m = live.len();
    let mut x: Vec<f64> = live
        .iter()
        .map(|(_, t)| marcher.target.value_at(&p, *t))
        .collect::<Result<_>>()?;
    let (mut runs, mut res) = eval(&x)?;
    let size = |runs: &Marched| {
        1.0 + runs
            .iter()
            .flat_map(|r| r.0.iter())
            .fold(0.0_f64, |s, v| s.max(v.abs()))
    };
    let worst = |res: &[f64]| res.iter().fold(0.0_f64, |s, v| s.max(v.abs()));
    // Rounding along the march is amplified by the closure slope, whose
    // nodes are `|s_N| (1 - q)` apart.
    let gap = live
        .iter()
        .map(|(_, t)| (t - p.omega0()).abs() * p.q().powi(depth as i32) * (1.0 - p.q()))
        .fold(f64::INFINITY, f64::min);
    let floor = 64.0 * f64::EPSILON * depth as f64 / gap.min(1.0);
    let bound = |runs: &Marched| tol.max(floor) * size(runs);
    for _ in 0..SHOOT_ITERS {
        if worst(&res) <= tol * size(&runs) {
            break;
        }
        // The recurrence is affine in the anchor values; unit differences
        // give the exact Jacobian.
        let mut jac = nalgebra::DMatrix::zeros(m, m);
        for j in 0..m {
            let mut xp = x.clone();
            xp[j] += 1.0;
            let (_, rp) = eval(&xp)?;
            for i in 0..m {
                jac[(i, j)] = rp[i] - res[i];
            }
        }
        let rhs = nalgebra::DVector::from_iterator(m, res.iter().map(|v| -v));
        let dx = jac
            .lu()
            .solve(&rhs)
            .ok_or_else(|| Error::Solver("shooting Jacobian is singular".into()))?;
        let xn: Vec<f64> = x.iter().zip(dx.iter()).map(|(a, d)| a + d).collect();
        let (rn, resn) = eval(&xn)?;
        if !(worst(&resn) < 0.5 * worst(&res)) {
            if worst(&resn) < worst(&res) {
                (runs, res) = (rn, resn);
            }
            break;
        }
        (x, runs, res) = (xn, rn, resn);
    }
    if !(worst(&res) <= bound(&runs)) {
        return Err(Error::Solver(format!(
            "shooting did not converge: closure mismatch {:e}",
            worst(&res)
        )));
    }
    let w0 = runs.iter().map(|r| r.1).sum::<f64>() / runs.len() as f64;
    let mut values = [vec![w0; depth + 1], vec![w0; depth + 1]];
    for ((side, _), run) in live.iter().zip(runs) {
        values[if *side == Side::A { 0 } else { 1 }] = run.0;
    }
    let [va, vb] = values;
    GridFunction::new(lattice, va, vb, w0)
}

/// Solution of `y'' - (r - 1) y' = alpha (y - t)`, `y'(0) = y'(T) = 0`:
/// the `q -> 1`, `omega -> 0` limit of the adjustment model with `ybar(t) = t`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ContinuousAdjustment {
    pub r: f64,
    pub alpha: f64,
    pub horizon: f64,
    pub m1: f64,
    pub m2: f64,
    pub a: f64,
    pub b: f64,
}

impl ContinuousAdjustment {
    pub fn value(&self, t: f64) -> f64 {
        t - (self.r - 1.0) / self.alpha
            + self.a * (self.m1 * t).exp()
            + self.b * (self.m2 * t).exp()
    }

    pub fn derivative(&self, t: f64) -> f64 {
        1.0 + self.a * self.m1 * (self.m1 * t).exp() + self.b * self.m2 * (self.m2 * t).exp()
    }

    pub fn second_derivative(&self, t: f64) -> f64 {
        self.a * self.m1 * self.m1 * (self.m1 * t).exp()
            + self.b * self.m2 * self.m2 * (self.m2 * t).exp()
    }
}

pub fn continuous_adjustment_oracle(
    r: f64,
    alpha: f64,
    horizon: f64,
) -> Result<ContinuousAdjustment> {
    if !(r > 1.0 && alpha > 0.0 && horizon > 0.0) {
        return Err(Error::InvalidParams(format!(
            "need r > 1, alpha > 0, T > 0; got r = {r}, alpha = {alpha}, T = {horizon}"
        )));
    }
    let k = r - 1.0;
    let root = (k * k + 4.0 * alpha).sqrt();
    let (m1, m2) = ((k + root) / 2.0, (k - root) / 2.0);
    let (e1, e2) = ((m1 * horizon).exp(), (m2 * horizon).exp());
    // [m1, m2; m1 e1, m2 e2] (A, B) = (-1, -1)
    let det = m1 * m2 * (e2 - e1);
    if det == 0.0 || !det.is_finite() {
        return Err(Error::Solver(
            "continuous adjustment system is singular".into(),
        ));
    }
    let a = (-m2 * e2 + m2) / det;
    let b = (m1 * e1 - m1) / det;
    Ok(ContinuousAdjustment {
        r,
        alpha,
        horizon,
        m1,
        m2,
        a,
        b,
    })
}
