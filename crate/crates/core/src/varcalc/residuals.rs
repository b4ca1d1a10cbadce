use super::discrete::{Discretization, Model, Multipliers};
use super::integrand::Integrand;
use super::problem::VariationalProblem;
use super::solve::{compile, diagnostics};
use super::ElResiduals;
use crate::error::{Error, Result};
use crate::hahn::{GridFunction, Lattice, Side};

/// Functional, variation and residual evaluation of one problem on one
/// lattice.
#[derive(Debug, Clone)]
pub struct Evaluator {
    problem: VariationalProblem,
    disc: Discretization,
    lagr: Integrand,
    cons: Option<Integrand>,
}

impl Evaluator {
    pub fn new(problem: &VariationalProblem, depth: usize) -> Result<Self> {
        let (lagr, cons) = compile(problem)?;
        let disc = Discretization::new(problem, depth)?;
        Ok(Self {
            problem: problem.clone(),
            disc,
            lagr,
            cons,
        })
    }

    /// Evaluator on the lattice of `gf`.
    pub fn for_grid(problem: &VariationalProblem, gf: &GridFunction) -> Result<Self> {
        let (lagr, cons) = compile(problem)?;
        let disc = Discretization::for_grid(problem, gf)?;
        Ok(Self {
            problem: problem.clone(),
            disc,
            lagr,
            cons,
        })
    }

    pub fn lattice(&self) -> &Lattice {
        &self.disc.lattice
    }

    pub fn problem(&self) -> &VariationalProblem {
        &self.problem
    }

    fn check(&self, gf: &GridFunction) -> Result<()> {
        if gf.lattice().is_compatible(&self.disc.lattice) {
            Ok(())
        } else {
            Err(Error::LatticeMismatch(format!(
                "grid function of depth {} on [{}, {}] does not live on the evaluator lattice",
                gf.lattice().depth(),
                gf.lattice().a(),
                gf.lattice().b()
            )))
        }
    }

    fn model(&self) -> Model<'_> {
        let cons = self
            .cons
            .as_ref()
            .zip(self.problem.constraint())
            .map(|(f, c)| (f, c.gamma));
        Model::new(
            &self.disc,
            &self.lagr,
            cons,
            *self.problem.boundary(),
            Multipliers::Fixed { cl: 1.0, cf: 0.0 },
        )
    }

    fn parts(&self, gf: &GridFunction) -> Result<(f64, f64)> {
        self.check(gf)?;
        let m = self.model();
        m.functional_parts(&m.layout.pack(gf, 0.0))
    }

    /// Truncated functional: the sum over orbit points `k < N`.
    pub fn functional_value(&self, gf: &GridFunction) -> Result<f64> {
        Ok(self.parts(gf)?.0)
    }

    /// Sum over `k >= N` of the closure extension.
    pub fn functional_tail(&self, gf: &GridFunction) -> Result<f64> {
        Ok(self.parts(gf)?.1)
    }

    pub fn functional_total(&self, gf: &GridFunction) -> Result<f64> {
        let (a, b) = self.parts(gf)?;
        Ok(a + b)
    }

    /// Directional derivative of [`Self::functional_value`] along `h`.
    pub fn first_variation(&self, gf: &GridFunction, h: &GridFunction) -> Result<f64> {
        self.check(gf)?;
        self.check(h)?;
        let m = self.model();
        let grad = m.truncated_gradient(&m.layout.pack(gf, 0.0))?;
        let dir = m.layout.pack(h, 0.0);
        Ok(grad.iter().zip(&dir).map(|(a, b)| a * b).sum())
    }

    /// Euler–Lagrange residuals of `L`.
    pub fn el_residuals(&self, gf: &GridFunction) -> Result<ElResiduals> {
        self.el_residuals_with(gf, 1.0, 0.0)
    }

    /// Euler–Lagrange residuals of `lambda0 L - lambda F`.
    pub fn el_residuals_with(
        &self,
        gf: &GridFunction,
        lambda0: f64,
        lambda: f64,
    ) -> Result<ElResiduals> {
        Ok(self.diag(gf, lambda0, lambda)?.0)
    }

    fn diag(
        &self,
        gf: &GridFunction,
        lambda0: f64,
        lambda: f64,
    ) -> Result<(ElResiduals, Option<f64>, Option<f64>)> {
        self.check(gf)?;
        if lambda != 0.0 && self.cons.is_none() {
            return Err(Error::Problem(
                "multiplier given without a constraint".into(),
            ));
        }
        diagnostics(
            &self.disc,
            &self.problem,
            &self.lagr,
            self.cons.as_ref(),
            gf,
            lambda0,
            -lambda,
        )
    }

    /// Natural boundary residual of `L` at a free end.
    pub fn nbc_residual(&self, gf: &GridFunction, side: Side) -> Result<f64> {
        self.nbc_residual_with(gf, side, 1.0, 0.0)
    }

    pub fn nbc_residual_with(
        &self,
        gf: &GridFunction,
        side: Side,
        lambda0: f64,
        lambda: f64,
    ) -> Result<f64> {
        let (_, a, b) = self.diag(gf, lambda0, lambda)?;
        match side {
            Side::A => a.ok_or(Error::FixedEnd('a')),
            Side::B => b.ok_or(Error::FixedEnd('b')),
        }
    }

    /// Full constraint integral `J[y]`.
    pub fn constraint_value(&self, gf: &GridFunction) -> Result<f64> {
        self.check(gf)?;
        let m = self.model();
        m.constraint_value(&m.layout.pack(gf, 0.0))?
            .ok_or_else(|| Error::Problem("problem has no constraint".into()))
    }
}
