//! The Hahn difference operator and the geometry it lives on.
//!
//! `sigma(t) = q t + omega` is a contraction towards its fixed point
//! `omega0 = omega / (1 - q)`. The operator
//!
//! ```text
//! D[f](t) = (f(sigma(t)) - f(t)) / ((q - 1) t + omega),   t != omega0
//! ```
//!
//! only ever samples a function on sigma-orbits, so a problem posed on
//! `[a, b]` is discretised exactly by the two orbits of `a` and `b`
//! (truncated at a chosen depth) together with `omega0`.

use crate::error::{Error, Result};

/// Relative tolerance used to decide that a point is the fixed point.
pub const FIXED_POINT_RTOL: f64 = 1e-12;

/// The pair `(q, omega)` with `0 < q < 1` and `omega >= 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HahnParams {
    q: f64,
    omega: f64,
    omega0: f64,
}

impl HahnParams {
    pub fn new(q: f64, omega: f64) -> Result<Self> {
        if !(q > 0.0 && q < 1.0) {
            return Err(Error::InvalidParams(format!("q = {q} must lie in (0, 1)")));
        }
        if !(omega >= 0.0) || !omega.is_finite() {
            return Err(Error::InvalidParams(format!(
                "omega = {omega} must be finite and non-negative"
            )));
        }
        Ok(Self {
            q,
            omega,
            omega0: omega / (1.0 - q),
        })
    }

    pub fn q(&self) -> f64 {
        self.q
    }

    pub fn omega(&self) -> f64 {
        self.omega
    }

    /// Fixed point of `sigma`.
    pub fn omega0(&self) -> f64 {
        self.omega0
    }

    pub fn sigma(&self, t: f64) -> f64 {
        self.q * t + self.omega
    }

    /// `[k]_q = (1 - q^k) / (1 - q)`.
    pub fn q_bracket(&self, k: u32) -> f64 {
        (1.0 - self.q.powi(k as i32)) / (1.0 - self.q)
    }

    /// `sigma` composed `k` times; negative `k` applies the inverse map.
    pub fn sigma_k(&self, t: f64, k: i64) -> Result<f64> {
        let value = if k >= 0 {
            let qk = self.q.powf(k as f64);
            qk * t + self.omega * (1.0 - qk) / (1.0 - self.q)
        } else {
            let m = -k;
            let qm = self.q.powf(m as f64);
            (t - self.omega * (1.0 - qm) / (1.0 - self.q)) / qm
        };
        if value.is_finite() {
            Ok(value)
        } else {
            Err(Error::Range { t, k })
        }
    }

    /// `(q - 1) t + omega`, the denominator of the difference quotient.
    pub fn step(&self, t: f64) -> f64 {
        (self.q - 1.0) * t + self.omega
    }

    pub fn fixed_point_tol(&self) -> f64 {
        FIXED_POINT_RTOL * self.omega0.abs().max(1.0)
    }

    pub fn is_fixed_point(&self, t: f64) -> bool {
        (t - self.omega0).abs() <= self.fixed_point_tol()
    }

    /// Default finite-difference step for the derivative at `omega0`.
    pub fn default_fixed_point_step(&self) -> f64 {
        1e-6 * self.omega0.abs().max(1.0)
    }

    /// The Hahn derivative of `f` at `t`.
    ///
    /// At the fixed point the operator is the ordinary derivative, which is
    /// estimated with a central difference of half-width `fixed_point_step`
    /// (the result is then only approximate).
    pub fn hahn_derivative<F>(&self, f: F, t: f64, fixed_point_step: f64) -> Result<f64>
    where
        F: Fn(f64) -> f64,
    {
        if self.is_fixed_point(t) {
            let h = fixed_point_step;
            if !(h > 0.0) {
                return Err(Error::InvalidParams(format!(
                    "fixed-point step {h} must be positive"
                )));
            }
            return Ok((f(t + h) - f(t - h)) / (2.0 * h));
        }
        let denom = self.step(t);
        if denom.abs() < f64::MIN_POSITIVE {
            return Err(Error::FixedPointDegeneracy {
                t,
                omega0: self.omega0,
            });
        }
        Ok((f(self.sigma(t)) - f(t)) / denom)
    }

    /// Closed form of `D[(a t + b)^n](t)` for `t != omega0`.
    pub fn power_rule(&self, a_coef: f64, b_coef: f64, n: u32, t: f64) -> Result<f64> {
        if n == 0 {
            return Err(Error::InvalidParams("power rule needs n >= 1".into()));
        }
        if self.is_fixed_point(t) {
            return Err(Error::AtFixedPoint("the power rule"));
        }
        let lo = a_coef * t + b_coef;
        let hi = a_coef * self.sigma(t) + b_coef;
        let sum: f64 = (0..n)
            .map(|k| hi.powi(k as i32) * lo.powi((n - k - 1) as i32))
            .sum();
        Ok(a_coef * sum)
    }

    /// The q,omega-exponential `E(z, t) = prod_k (1 + z q^k (t (1 - q) - omega))`.
    ///
    /// The product is truncated once the next factor differs from one by
    /// less than `tol`.
    pub fn qw_exponential(&self, z: f64, t: f64, tol: f64) -> Result<QwExponential> {
        if !(tol > 0.0) {
            return Err(Error::InvalidParams(format!(
                "tolerance {tol} must be positive"
            )));
        }
        let base = z * (t * (1.0 - self.q) - self.omega);
        if !base.is_finite() {
            return Err(Error::InvalidParams(format!(
                "exponential argument z = {z}, t = {t} is not finite"
            )));
        }
        let mut value = 1.0;
        let mut dev = base;
        let mut factors = 0;
        while dev.abs() >= tol {
            let factor = 1.0 + dev;
            factors += 1;
            if factor == 0.0 {
                return Ok(QwExponential {
                    value: 0.0,
                    factors,
                    collapsed: true,
                });
            }
            value *= factor;
            dev *= self.q;
        }
        Ok(QwExponential {
            value,
            factors,
            collapsed: false,
        })
    }
}

/// Result of [`HahnParams::qw_exponential`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QwExponential {
    pub value: f64,
    /// Number of factors multiplied in.
    pub factors: usize,
    /// A factor was exactly zero, so the whole product vanishes.
    pub collapsed: bool,
}

/// Which end-point orbit of a lattice.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Side {
    A,
    B,
}

impl Side {
    pub fn other(self) -> Side {
        match self {
            Side::A => Side::B,
            Side::B => Side::A,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Side::A => "a",
            Side::B => "b",
        }
    }
}

/// The truncated orbit `sigma^0(s), ..., sigma^N(s)`.
///
/// An anchor sitting on `omega0` gives a degenerate orbit: every point is
/// `omega0` and every quadrature weight vanishes.
#[derive(Debug, Clone, PartialEq)]
pub struct Orbit {
    anchor: f64,
    points: Vec<f64>,
    degenerate: bool,
}

impl Orbit {
    pub fn new(params: &HahnParams, anchor: f64, depth: usize) -> Self {
        let degenerate = params.is_fixed_point(anchor);
        let points = if degenerate {
            vec![params.omega0(); depth + 1]
        } else {
            let mut pts = Vec::with_capacity(depth + 1);
            let mut t = anchor;
            pts.push(t);
            for _ in 0..depth {
                t = params.sigma(t);
                pts.push(t);
            }
            pts
        };
        Self {
            anchor,
            points,
            degenerate,
        }
    }

    pub fn anchor(&self) -> f64 {
        self.anchor
    }

    pub fn depth(&self) -> usize {
        self.points.len() - 1
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn is_degenerate(&self) -> bool {
        self.degenerate
    }
}

/// `[a, b]_{q,omega}` truncated at depth `N`: two orbits plus `omega0`.
#[derive(Debug, Clone, PartialEq)]
pub struct Lattice {
    params: HahnParams,
    a: f64,
    b: f64,
    orbit_a: Orbit,
    orbit_b: Orbit,
}

impl Lattice {
    pub fn new(params: HahnParams, a: f64, b: f64, depth: usize) -> Result<Self> {
        if !(a < b) {
            return Err(Error::DegenerateInterval { a, b });
        }
        if depth < 1 {
            return Err(Error::InvalidParams(
                "lattice depth must be at least 1".into(),
            ));
        }
        Ok(Self {
            params,
            a,
            b,
            orbit_a: Orbit::new(&params, a, depth),
            orbit_b: Orbit::new(&params, b, depth),
        })
    }

    pub fn params(&self) -> &HahnParams {
        &self.params
    }

    pub fn a(&self) -> f64 {
        self.a
    }

    pub fn b(&self) -> f64 {
        self.b
    }

    pub fn depth(&self) -> usize {
        self.orbit_a.depth()
    }

    pub fn omega0(&self) -> f64 {
        self.params.omega0()
    }

    pub fn orbit(&self, side: Side) -> &Orbit {
        match side {
            Side::A => &self.orbit_a,
            Side::B => &self.orbit_b,
        }
    }

    /// Interval hull of `{a, b, omega0}`.
    pub fn hull(&self) -> (f64, f64) {
        let w0 = self.omega0();
        (self.a.min(w0), self.b.max(w0))
    }

    /// Same parameters and interval.
    pub fn is_compatible(&self, other: &Lattice) -> bool {
        self.params == other.params
            && self.a == other.a
            && self.b == other.b
            && self.depth() == other.depth()
    }
}

/// Convenience wrapper matching the free-function style of the other operators.
pub fn build_lattice(params: HahnParams, a: f64, b: f64, depth: usize) -> Result<Lattice> {
    Lattice::new(params, a, b, depth)
}

/// Real values of a function on a lattice.
///
/// The value at `omega0` is stored separately and is not derived from the
/// orbit values.
#[derive(Debug, Clone, PartialEq)]
pub struct GridFunction {
    lattice: Lattice,
    values_a: Vec<f64>,
    values_b: Vec<f64>,
    value_omega0: f64,
}

impl GridFunction {
    pub fn new(
        lattice: Lattice,
        values_a: Vec<f64>,
        values_b: Vec<f64>,
        value_omega0: f64,
    ) -> Result<Self> {
        let expected = lattice.depth() + 1;
        for len in [values_a.len(), values_b.len()] {
            if len != expected {
                return Err(Error::LengthMismatch { expected, got: len });
            }
        }
        Ok(Self {
            lattice,
            values_a,
            values_b,
            value_omega0,
        })
    }

    /// Samples `f` at every lattice point, `omega0` included.
    pub fn sample<F: Fn(f64) -> f64>(lattice: &Lattice, f: F) -> Self {
        let values_a = lattice
            .orbit(Side::A)
            .points()
            .iter()
            .map(|&t| f(t))
            .collect();
        let values_b = lattice
            .orbit(Side::B)
            .points()
            .iter()
            .map(|&t| f(t))
            .collect();
        Self {
            value_omega0: f(lattice.omega0()),
            lattice: lattice.clone(),
            values_a,
            values_b,
        }
    }

    pub fn zeros(lattice: &Lattice) -> Self {
        Self::sample(lattice, |_| 0.0)
    }

    pub fn lattice(&self) -> &Lattice {
        &self.lattice
    }

    pub fn values(&self, side: Side) -> &[f64] {
        match side {
            Side::A => &self.values_a,
            Side::B => &self.values_b,
        }
    }

    pub fn values_mut(&mut self, side: Side) -> &mut [f64] {
        match side {
            Side::A => &mut self.values_a,
            Side::B => &mut self.values_b,
        }
    }

    pub fn value_omega0(&self) -> f64 {
        self.value_omega0
    }

    pub fn set_value_omega0(&mut self, v: f64) {
        self.value_omega0 = v;
    }

    /// Value at the anchor of `side`; a degenerate anchor reads `omega0`.
    pub fn anchor_value(&self, side: Side) -> f64 {
        if self.lattice.orbit(side).is_degenerate() {
            self.value_omega0
        } else {
            self.values(side)[0]
        }
    }

    /// `D[y]` at orbit index `k`, from the stored neighbour `k + 1`.
    pub fn grid_derivative(&self, side: Side, k: usize) -> Result<f64> {
        let depth = self.lattice.depth();
        if k >= depth {
            return Err(Error::IndexOutOfRange { index: k, depth });
        }
        let orbit = self.lattice.orbit(side);
        if orbit.is_degenerate() {
            return Err(Error::AtFixedPoint("the grid difference quotient"));
        }
        let values = self.values(side);
        let h = self.lattice.params().step(orbit.points()[k]);
        Ok((values[k + 1] - values[k]) / h)
    }

    /// Largest absolute stored value.
    pub fn sup_norm(&self) -> f64 {
        self.values_a
            .iter()
            .chain(&self.values_b)
            .chain(std::iter::once(&self.value_omega0))
            .fold(0.0_f64, |m, v| m.max(v.abs()))
    }

    /// Sup of `|self - other|` over every stored point.
    pub fn sup_distance(&self, other: &GridFunction) -> Result<f64> {
        if !self.lattice.is_compatible(&other.lattice) {
            return Err(Error::LatticeMismatch(
                "sup distance between different lattices".into(),
            ));
        }
        let mut m = (self.value_omega0 - other.value_omega0).abs();
        for side in [Side::A, Side::B] {
            for (x, y) in self.values(side).iter().zip(other.values(side)) {
                m = m.max((x - y).abs());
            }
        }
        Ok(m)
    }

    /// Iterates `(side, k, t, y)` over the orbit points.
    pub fn iter_points(&self) -> impl Iterator<Item = (Side, usize, f64, f64)> + '_ {
        [Side::A, Side::B].into_iter().flat_map(move |side| {
            self.lattice
                .orbit(side)
                .points()
                .iter()
                .zip(self.values(side))
                .enumerate()
                .map(move |(k, (&t, &y))| (side, k, t, y))
        })
    }
}
