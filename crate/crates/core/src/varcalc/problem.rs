use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::expr::{Compiled, Expr, Var};
use crate::hahn::HahnParams;

/// Boundary data at one end of the interval.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EndCondition {
    Fixed(f64),
    Free,
}

impl EndCondition {
    pub fn is_free(&self) -> bool {
        matches!(self, EndCondition::Free)
    }

    pub fn fixed_value(&self) -> Option<f64> {
        match self {
            EndCondition::Fixed(v) => Some(*v),
            EndCondition::Free => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundarySpec {
    pub at_a: EndCondition,
    pub at_b: EndCondition,
}

impl BoundarySpec {
    pub fn new(at_a: EndCondition, at_b: EndCondition) -> Self {
        Self { at_a, at_b }
    }

    pub fn free() -> Self {
        Self::new(EndCondition::Free, EndCondition::Free)
    }

    pub fn fixed(ya: f64, yb: f64) -> Self {
        Self::new(EndCondition::Fixed(ya), EndCondition::Fixed(yb))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Sense {
    #[default]
    Min,
    Max,
}

/// `J[y] = int_a^b F(t, y(sigma t), D[y](t), y(a), y(b)) = gamma`.
#[derive(Debug, Clone, PartialEq)]
pub struct Constraint {
    pub expr: Expr,
    pub gamma: f64,
}

/// A per-point coefficient bound as a parameter of the integrand.
pub trait Coefficient: fmt::Debug + Send + Sync {
    fn value_at(&self, params: &HahnParams, t: f64) -> Result<f64>;

    /// Values at `anchor, sigma(anchor), ...` (`len` points).
    fn along_orbit(&self, params: &HahnParams, anchor: f64, len: usize) -> Result<Vec<f64>> {
        let mut out = Vec::with_capacity(len);
        let mut t = anchor;
        for _ in 0..len {
            out.push(self.value_at(params, t)?);
            t = params.sigma(t);
        }
        Ok(out)
    }
}

/// `g(t)` or `g(sigma(t))` for an expression `g` in `t`.
#[derive(Debug, Clone)]
pub struct ExprCoefficient {
    expr: Expr,
    program: Compiled,
    shifted: bool,
}

impl ExprCoefficient {
    pub fn new(expr: Expr, shifted: bool) -> Result<Self> {
        if expr.vars().iter().any(|v| *v != Var::T) || !expr.params().is_empty() {
            return Err(Error::Problem(format!(
                "coefficient `{expr}` may only depend on t"
            )));
        }
        let program = Compiled::new(&expr, &[])?;
        Ok(Self {
            expr,
            program,
            shifted,
        })
    }

    pub fn expr(&self) -> &Expr {
        &self.expr
    }
}

impl Coefficient for ExprCoefficient {
    fn value_at(&self, params: &HahnParams, t: f64) -> Result<f64> {
        let at = if self.shifted { params.sigma(t) } else { t };
        Ok(self.program.eval(&[at, 0.0, 0.0, 0.0, 0.0], &[])?)
    }
}

#[derive(Debug, Clone)]
pub struct NamedCoefficient {
    pub name: String,
    pub source: Arc<dyn Coefficient>,
}

/// A quantum variational problem on `[a, b]` with optional isoperimetric
/// constraint.
#[derive(Debug, Clone)]
pub struct VariationalProblem {
    params: HahnParams,
    a: f64,
    b: f64,
    lagrangian: Expr,
    table: Vec<(String, f64)>,
    coefficients: Vec<NamedCoefficient>,
    boundary: BoundarySpec,
    constraint: Option<Constraint>,
    sense: Sense,
}

impl VariationalProblem {
    pub fn new(
        params: HahnParams,
        a: f64,
        b: f64,
        lagrangian: Expr,
        boundary: BoundarySpec,
    ) -> Result<Self> {
        if !(a < b) {
            return Err(Error::DegenerateInterval { a, b });
        }
        for end in [boundary.at_a, boundary.at_b] {
            if let EndCondition::Fixed(v) = end {
                if !v.is_finite() {
                    return Err(Error::Problem(format!(
                        "fixed boundary value {v} is not finite"
                    )));
                }
            }
        }
        Ok(Self {
            params,
            a,
            b,
            lagrangian,
            table: Vec::new(),
            coefficients: Vec::new(),
            boundary,
            constraint: None,
            sense: Sense::Min,
        })
    }

    pub fn with_param(mut self, name: &str, value: f64) -> Self {
        self.set_param(name, value);
        self
    }

    pub fn set_param(&mut self, name: &str, value: f64) {
        match self.table.iter_mut().find(|(n, _)| n == name) {
            Some(slot) => slot.1 = value,
            None => self.table.push((name.to_string(), value)),
        }
    }

    pub fn with_coefficient(mut self, name: &str, source: Arc<dyn Coefficient>) -> Self {
        self.coefficients.retain(|c| c.name != name);
        self.coefficients.push(NamedCoefficient {
            name: name.to_string(),
            source,
        });
        self
    }

    pub fn with_constraint(mut self, expr: Expr, gamma: f64) -> Self {
        self.constraint = Some(Constraint { expr, gamma });
        self
    }

    pub fn with_sense(mut self, sense: Sense) -> Self {
        self.sense = sense;
        self
    }

    pub fn with_boundary(mut self, boundary: BoundarySpec) -> Self {
        self.boundary = boundary;
        self
    }

    /// Same problem on other Hahn parameters.
    pub fn with_hahn(mut self, params: HahnParams) -> Self {
        self.params = params;
        self
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

    pub fn lagrangian(&self) -> &Expr {
        &self.lagrangian
    }

    pub fn boundary(&self) -> &BoundarySpec {
        &self.boundary
    }

    pub fn constraint(&self) -> Option<&Constraint> {
        self.constraint.as_ref()
    }

    pub fn without_constraint(&self) -> Self {
        let mut p = self.clone();
        p.constraint = None;
        p
    }

    pub fn sense(&self) -> Sense {
        self.sense
    }

    pub fn table(&self) -> &[(String, f64)] {
        &self.table
    }

    pub fn param(&self, name: &str) -> Option<f64> {
        self.table.iter().find(|(n, _)| n == name).map(|(_, v)| *v)
    }

    pub fn coefficients(&self) -> &[NamedCoefficient] {
        &self.coefficients
    }

    /// Table parameter names followed by coefficient names: the slot order
    /// of compiled integrands.
    pub fn slot_names(&self) -> Vec<String> {
        self.table
            .iter()
            .map(|(n, _)| n.clone())
            .chain(self.coefficients.iter().map(|c| c.name.clone()))
            .collect()
    }

    pub fn validate(&self) -> Result<()> {
        let names = self.slot_names();
        for (i, n) in names.iter().enumerate() {
            if Var::from_name(n).is_some() {
                return Err(Error::Problem(format!(
                    "parameter `{n}` shadows a variable"
                )));
            }
            if names[..i].contains(n) {
                return Err(Error::Problem(format!("parameter `{n}` is declared twice")));
            }
        }
        for (_, v) in &self.table {
            if !v.is_finite() {
                return Err(Error::Problem(format!("parameter value {v} is not finite")));
            }
        }
        let mut exprs = vec![("lagrangian", &self.lagrangian)];
        if let Some(c) = &self.constraint {
            if !c.gamma.is_finite() {
                return Err(Error::Problem("constraint level is not finite".into()));
            }
            exprs.push(("constraint", &c.expr));
        }
        for (what, e) in exprs {
            for p in e.params() {
                if !names.contains(&p) {
                    return Err(Error::Problem(format!(
                        "{what} uses undeclared parameter `{p}`"
                    )));
                }
            }
        }
        Ok(())
    }
}
