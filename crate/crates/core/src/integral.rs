//! Jackson–Nörlund integration.
//!
//! ```text
//! int_{omega0}^{x} f = (x (1 - q) - omega) * sum_{k >= 0} q^k f(sigma^k(x))
//! int_a^b f          = int_{omega0}^{b} f - int_{omega0}^{a} f
//! ```
//!
//! The series is summed either to a fixed number of terms or until a
//! relative tail test holds for several consecutive terms.

use crate::error::{Error, Result};
use crate::hahn::{GridFunction, HahnParams, Side};

/// Consecutive terms that must pass the tail test before summation stops.
const TAIL_STREAK: usize = 4;

/// How a series is truncated.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QuadratureMode {
    /// Sum exactly `max_terms` terms.
    FixedDepth,
    /// Stop once `|term| < tail_tol * (1 + |partial sum|)`.
    TailTol,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadratureSpec {
    pub max_terms: usize,
    pub tail_tol: f64,
    pub mode: QuadratureMode,
}

impl Default for QuadratureSpec {
    fn default() -> Self {
        Self {
            max_terms: 10_000,
            tail_tol: 1e-13,
            mode: QuadratureMode::TailTol,
        }
    }
}

impl QuadratureSpec {
    pub fn fixed_depth(terms: usize) -> Self {
        Self {
            max_terms: terms,
            tail_tol: 1e-13,
            mode: QuadratureMode::FixedDepth,
        }
    }

    pub fn tail_tol(tol: f64) -> Self {
        Self {
            tail_tol: tol,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.max_terms < 1 {
            return Err(Error::InvalidParams("max_terms must be at least 1".into()));
        }
        if !(self.tail_tol > 0.0) {
            return Err(Error::InvalidParams(format!(
                "tail_tol = {} must be positive",
                self.tail_tol
            )));
        }
        Ok(())
    }
}

/// A summed series with its bookkeeping.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Quadrature {
    pub value: f64,
    /// Terms summed (the larger count for an interval integral).
    pub terms: usize,
    /// Geometric estimate of the neglected remainder.
    pub tail_estimate: f64,
    /// Smallest integrand value seen on the orbit.
    pub min_sample: f64,
}

impl Quadrature {
    fn zero() -> Self {
        Self {
            value: 0.0,
            terms: 0,
            tail_estimate: 0.0,
            min_sample: f64::INFINITY,
        }
    }
}

/// `int_{omega0}^{x} f` for a fallible integrand.
pub fn try_integral_from_omega0<F>(
    f: F,
    params: &HahnParams,
    x: f64,
    spec: &QuadratureSpec,
) -> Result<Quadrature>
where
    F: Fn(f64) -> Result<f64>,
{
    spec.validate()?;
    let q = params.q();
    let weight = x * (1.0 - q) - params.omega();
    if params.is_fixed_point(x) || weight == 0.0 {
        return Ok(Quadrature::zero());
    }

    let mut sum = 0.0;
    let mut qk = 1.0;
    let mut t = x;
    let mut streak = 0;
    let mut last = 0.0;
    let mut min_sample = f64::INFINITY;
    let mut terms = 0;
    while terms < spec.max_terms {
        let ft = f(t)?;
        min_sample = min_sample.min(ft);
        last = weight * qk * ft;
        sum += last;
        terms += 1;
        if spec.mode == QuadratureMode::TailTol {
            if last.abs() < spec.tail_tol * (1.0 + sum.abs()) {
                streak += 1;
                if streak >= TAIL_STREAK {
                    break;
                }
            } else {
                streak = 0;
            }
        }
        qk *= q;
        t = params.sigma(t);
    }
    if spec.mode == QuadratureMode::TailTol && streak < TAIL_STREAK {
        return Err(Error::NonConvergence {
            terms,
            last_term: last,
        });
    }
    Ok(Quadrature {
        value: sum,
        terms,
        tail_estimate: last.abs() * q / (1.0 - q),
        min_sample,
    })
}

pub fn integral_from_omega0<F>(
    f: F,
    params: &HahnParams,
    x: f64,
    spec: &QuadratureSpec,
) -> Result<Quadrature>
where
    F: Fn(f64) -> f64,
{
    try_integral_from_omega0(|t| Ok(f(t)), params, x, spec)
}

pub fn try_integral<F>(
    f: F,
    params: &HahnParams,
    a: f64,
    b: f64,
    spec: &QuadratureSpec,
) -> Result<Quadrature>
where
    F: Fn(f64) -> Result<f64>,
{
    if a == b {
        return Ok(Quadrature::zero());
    }
    let ib = try_integral_from_omega0(&f, params, b, spec)?;
    let ia = try_integral_from_omega0(&f, params, a, spec)?;
    Ok(Quadrature {
        value: ib.value - ia.value,
        terms: ib.terms.max(ia.terms),
        tail_estimate: ib.tail_estimate + ia.tail_estimate,
        min_sample: ib.min_sample.min(ia.min_sample),
    })
}

/// `int_a^b f`; antisymmetric in the limits.
pub fn integral<F>(
    f: F,
    params: &HahnParams,
    a: f64,
    b: f64,
    spec: &QuadratureSpec,
) -> Result<Quadrature>
where
    F: Fn(f64) -> f64,
{
    try_integral(|t| Ok(f(t)), params, a, b, spec)
}

/// The defining series truncated at the stored depth, from raw orbit values.
pub fn grid_integral(
    params: &HahnParams,
    a: f64,
    b: f64,
    values_a: &[f64],
    values_b: &[f64],
) -> Result<f64> {
    if values_a.len() != values_b.len() {
        return Err(Error::LengthMismatch {
            expected: values_a.len(),
            got: values_b.len(),
        });
    }
    let series = |anchor: f64, vals: &[f64]| {
        let w = anchor * (1.0 - params.q()) - params.omega();
        if params.is_fixed_point(anchor) {
            return 0.0;
        }
        let mut qk = 1.0;
        let mut s = 0.0;
        for v in vals {
            s += qk * v;
            qk *= params.q();
        }
        w * s
    };
    Ok(series(b, values_b) - series(a, values_a))
}

/// [`grid_integral`] over the values stored in a grid function.
pub fn grid_integral_of(gf: &GridFunction) -> f64 {
    let l = gf.lattice();
    grid_integral(
        l.params(),
        l.a(),
        l.b(),
        gf.values(Side::A),
        gf.values(Side::B),
    )
    .expect("grid function orbits share a length")
}

/// `|int_a^b D[f] - (f(b) - f(a))|`.
pub fn fundamental_theorem_residual<F>(
    f: F,
    params: &HahnParams,
    a: f64,
    b: f64,
    spec: &QuadratureSpec,
) -> Result<f64>
where
    F: Fn(f64) -> f64,
{
    let step = params.default_fixed_point_step();
    let lhs = try_integral(|t| params.hahn_derivative(&f, t, step), params, a, b, spec)?;
    Ok((lhs.value - (f(b) - f(a))).abs())
}

/// Difference between the two sides of `int f D[g] = [f g]_a^b - int D[f] g(sigma t)`.
pub fn integration_by_parts_residual<F, G>(
    f: F,
    g: G,
    params: &HahnParams,
    a: f64,
    b: f64,
    spec: &QuadratureSpec,
) -> Result<f64>
where
    F: Fn(f64) -> f64,
    G: Fn(f64) -> f64,
{
    let step = params.default_fixed_point_step();
    let lhs = try_integral(
        |t| Ok(f(t) * params.hahn_derivative(&g, t, step)?),
        params,
        a,
        b,
        spec,
    )?;
    let inner = try_integral(
        |t| Ok(params.hahn_derivative(&f, t, step)? * g(params.sigma(t))),
        params,
        a,
        b,
        spec,
    )?;
    let rhs = f(b) * g(b) - f(a) * g(a) - inner.value;
    Ok((lhs.value - rhs).abs())
}

/// Outcome of [`positivity_check`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PositivityDiagnosis {
    /// Every sampled orbit value was non-negative.
    pub hypothesis_met: bool,
    /// `int_{omega0}^{bound} f` if `bound >= omega0`, else `int_{bound}^{omega0} f`.
    pub oriented_integral: f64,
}

impl PositivityDiagnosis {
    /// Non-negative samples imply a non-negative integral on this instance.
    pub fn passes(&self) -> bool {
        !self.hypothesis_met
            || self.oriented_integral >= -1e-12 * (1.0 + self.oriented_integral.abs())
    }
}

pub fn positivity_check<F>(
    f: F,
    params: &HahnParams,
    bound: f64,
    spec: &QuadratureSpec,
) -> Result<PositivityDiagnosis>
where
    F: Fn(f64) -> f64,
{
    let anchored = integral_from_omega0(f, params, bound, spec)?;
    let oriented_integral = if bound >= params.omega0() {
        anchored.value
    } else {
        -anchored.value
    };
    Ok(PositivityDiagnosis {
        hypothesis_met: anchored.terms == 0 || anchored.min_sample >= 0.0,
        oriented_integral,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hahn::build_lattice;

    fn p(q: f64, w: f64) -> HahnParams {
        HahnParams::new(q, w).unwrap()
    }

    fn brute(f: impl Fn(f64) -> f64, h: &HahnParams, x: f64) -> f64 {
        let mut s = 0.0;
        let mut t = x;
        for k in 0..4000 {
            s += h.q().powi(k) * f(t);
            t = h.sigma(t);
        }
        (x * (1.0 - h.q()) - h.omega()) * s
    }

    #[test]
    fn anchored_at_fixed_point_is_zero() {
        let h = p(0.5, 0.5);
        let r =
            integral_from_omega0(|t| t.exp(), &h, h.omega0(), &QuadratureSpec::default()).unwrap();
        assert_eq!(r.value, 0.0);
        assert_eq!(r.terms, 0);
    }

    #[test]
    fn constant_integrates_to_distance() {
        for (q, w, x) in [(0.5, 0.5, 3.0), (0.9, 0.01, -2.0), (0.3, 0.0, 1.0)] {
            let h = p(q, w);
            let r = integral_from_omega0(|_| 1.0, &h, x, &QuadratureSpec::default()).unwrap();
            assert!((r.value - (x - h.omega0())).abs() < 1e-11);
        }
    }

    #[test]
    fn identity_matches_brute_force() {
        let h = p(0.5, 0.5);
        let r = integral_from_omega0(|t| t, &h, 2.0, &QuadratureSpec::default()).unwrap();
        assert!((r.value - brute(|t| t, &h, 2.0)).abs() < 1e-12);
    }

    #[test]
    fn interval_basics() {
        let h = p(0.8, 0.1);
        let s = QuadratureSpec::default();
        assert_eq!(integral(|t| t * t, &h, 0.7, 0.7, &s).unwrap().value, 0.0);
        let c = integral(|_| 2.5, &h, -1.0, 3.0, &s).unwrap().value;
        assert!((c - 10.0).abs() < 1e-11);
        let fwd = integral(|t| t.sin(), &h, 0.2, 1.7, &s).unwrap().value;
        let bwd = integral(|t| t.sin(), &h, 1.7, 0.2, &s).unwrap().value;
        assert_eq!(fwd, -bwd);
    }

    #[test]
    fn nonconvergence_is_reported() {
        let h = p(0.99, 0.0);
        let spec = QuadratureSpec {
            max_terms: 10,
            ..QuadratureSpec::default()
        };
        assert!(matches!(
            integral_from_omega0(|t| t, &h, 1.0, &spec),
            Err(Error::NonConvergence { terms: 10, .. })
        ));
        let fixed = QuadratureSpec::fixed_depth(10);
        assert_eq!(
            integral_from_omega0(|t| t, &h, 1.0, &fixed).unwrap().terms,
            10
        );
    }

    #[test]
    fn grid_integral_cases() {
        let h = p(0.9, 0.01);
        assert_eq!(
            grid_integral(&h, 0.0, 1.0, &[0.0; 5], &[0.0; 5]).unwrap(),
            0.0
        );
        let single = grid_integral(&h, 0.5, 1.0, &[3.0], &[2.0]).unwrap();
        let expect = (1.0 * 0.1 - 0.01) * 2.0 - (0.5 * 0.1 - 0.01) * 3.0;
        assert!((single - expect).abs() < 1e-15);
        let l = build_lattice(h, 0.0, 1.0, 600).unwrap();
        let ones = GridFunction::sample(&l, |_| 1.0);
        assert!((grid_integral_of(&ones) - 1.0).abs() < 1e-12);
        assert!(grid_integral(&h, 0.0, 1.0, &[0.0; 4], &[0.0; 5]).is_err());
    }

    #[test]
    fn fundamental_theorem_examples() {
        let s = QuadratureSpec::default();
        let h = p(0.5, 0.5);
        assert_eq!(
            fundamental_theorem_residual(|_| 4.0, &h, 0.0, 1.0, &s).unwrap(),
            0.0
        );
        assert!(fundamental_theorem_residual(|t| t * t, &h, 0.0, 1.0, &s).unwrap() < 1e-9);
        let h = p(0.73, 0.31);
        let cube = |t: f64| (2.0 * t + 1.0).powi(3);
        assert!(fundamental_theorem_residual(cube, &h, -0.4, 2.2, &s).unwrap() < 1e-9);
    }

    #[test]
    fn integration_by_parts_examples() {
        let s = QuadratureSpec::default();
        let h = p(0.6, 0.2);
        assert!(
            integration_by_parts_residual(|_| 1.0, |t| t * t, &h, 0.0, 1.0, &s).unwrap() < 1e-9
        );
        assert!(integration_by_parts_residual(|t| t, |t| t, &h, 0.0, 1.0, &s).unwrap() < 1e-9);
        assert_eq!(
            integration_by_parts_residual(|_| 0.0, |_| 0.0, &h, 0.0, 1.0, &s).unwrap(),
            0.0
        );
    }

    #[test]
    fn positivity_orientation() {
        let s = QuadratureSpec::default();
        let h = p(0.5, 0.5);
        let w0 = h.omega0();
        let d = positivity_check(|_| 1.0, &h, 3.0, &s).unwrap();
        assert!(d.hypothesis_met && d.passes() && d.oriented_integral > 0.0);
        let d = positivity_check(|t| (t - w0).powi(2), &h, -2.0, &s).unwrap();
        assert!(d.hypothesis_met && d.passes() && d.oriented_integral > 0.0);
        let d = positivity_check(|_| -1.0, &h, 3.0, &s).unwrap();
        assert!(!d.hypothesis_met);
        assert!(d.oriented_integral < 0.0);
        assert!(d.passes());
    }

    #[test]
    fn triangle_inequality_fails() {
        let h = p(0.9, 0.2);
        let s = QuadratureSpec::default();
        let f = |t: f64| t - 1.5;
        let lhs = integral(f, &h, 0.0, 1.0, &s).unwrap().value.abs();
        let rhs = integral(|t| f(t).abs(), &h, 0.0, 1.0, &s).unwrap().value;
        assert!(lhs > rhs);
    }
}
