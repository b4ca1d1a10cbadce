use crate::error::Result;
use crate::expr::{diff, Compiled, Expr, Var};

/// The four arguments after `t`, in order `y(sigma t), D[y](t), y(a), y(b)`.
pub const ARGS: [Var; 4] = [Var::Y, Var::Dy, Var::Ya, Var::Yb];

/// An integrand compiled together with its first and second partials in
/// the four state arguments.
#[derive(Debug, Clone)]
pub struct Integrand {
    value: Compiled,
    grad: Vec<Compiled>,
    hess: Vec<Vec<Compiled>>,
}

fn slots(t: f64, u: &[f64; 4]) -> [f64; 5] {
    [t, u[0], u[1], u[2], u[3]]
}

impl Integrand {
    pub fn new(expr: &Expr, names: &[String]) -> Result<Self> {
        let value = Compiled::new(expr, names)?;
        let mut grad = Vec::with_capacity(4);
        let mut hess = Vec::with_capacity(4);
        for vi in ARGS {
            let gi = diff(expr, vi)?;
            grad.push(Compiled::new(&gi, names)?);
            let mut row = Vec::with_capacity(4);
            for vj in ARGS {
                row.push(Compiled::new(&diff(&gi, vj)?, names)?);
            }
            hess.push(row);
        }
        Ok(Self { value, grad, hess })
    }

    pub fn value(&self, t: f64, u: &[f64; 4], p: &[f64]) -> Result<f64> {
        Ok(self.value.eval(&slots(t, u), p)?)
    }

    pub fn partial(&self, i: usize, t: f64, u: &[f64; 4], p: &[f64]) -> Result<f64> {
        Ok(self.grad[i].eval(&slots(t, u), p)?)
    }

    pub fn grad(&self, t: f64, u: &[f64; 4], p: &[f64]) -> Result<[f64; 4]> {
        let s = slots(t, u);
        let mut g = [0.0; 4];
        for (gi, prog) in g.iter_mut().zip(&self.grad) {
            *gi = prog.eval(&s, p)?;
        }
        Ok(g)
    }

    pub fn hess(&self, t: f64, u: &[f64; 4], p: &[f64]) -> Result<[[f64; 4]; 4]> {
        let s = slots(t, u);
        let mut h = [[0.0; 4]; 4];
        for (hr, row) in h.iter_mut().zip(&self.hess) {
            for (hij, prog) in hr.iter_mut().zip(row) {
                *hij = prog.eval(&s, p)?;
            }
        }
        Ok(h)
    }

    /// The partial in argument `i` is the literal zero.
    pub fn partial_vanishes(&self, i: usize) -> bool {
        self.grad[i].is_zero()
    }
}
