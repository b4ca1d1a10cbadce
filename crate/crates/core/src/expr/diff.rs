use std::fmt;

use super::compile::{apply_bin, apply_func};
use super::{BinOp, Expr, Func, Var};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum DiffError {
    /// `abs` of a subexpression that depends on the variable.
    Abs { node: String, var: &'static str },
}

impl fmt::Display for DiffError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DiffError::Abs { node, var } => {
                write!(
                    f,
                    "cannot differentiate `{node}` with respect to {var}: abs is not smooth"
                )
            }
        }
    }
}

impl std::error::Error for DiffError {}

use BinOp::*;

fn n(v: f64) -> Expr {
    Expr::Num(v)
}

fn b(op: BinOp, l: Expr, r: Expr) -> Expr {
    Expr::bin(op, l, r)
}

/// Symbolic partial derivative, folded.
pub fn diff(e: &Expr, v: Var) -> Result<Expr, DiffError> {
    Ok(fold(&raw_diff(e, v)?))
}

fn raw_diff(e: &Expr, v: Var) -> Result<Expr, DiffError> {
    if !e.depends_on(v) {
        return Ok(n(0.0));
    }
    Ok(match e {
        Expr::Num(_) | Expr::Param(_) => n(0.0),
        Expr::Var(w) => n(if *w == v { 1.0 } else { 0.0 }),
        Expr::Neg(x) => Expr::neg(raw_diff(x, v)?),
        Expr::Bin(op, l, r) => {
            let (lu, ru) = (l.as_ref().clone(), r.as_ref().clone());
            match op {
                Add => b(Add, raw_diff(l, v)?, raw_diff(r, v)?),
                Sub => b(Sub, raw_diff(l, v)?, raw_diff(r, v)?),
                Mul => b(
                    Add,
                    b(Mul, raw_diff(l, v)?, ru),
                    b(Mul, lu, raw_diff(r, v)?),
                ),
                Div if !r.depends_on(v) => b(Div, raw_diff(l, v)?, ru),
                Div => b(
                    Div,
                    b(
                        Sub,
                        b(Mul, raw_diff(l, v)?, ru.clone()),
                        b(Mul, lu, raw_diff(r, v)?),
                    ),
                    b(Pow, ru, n(2.0)),
                ),
                Pow if !r.depends_on(v) => b(
                    Mul,
                    b(Mul, ru.clone(), b(Pow, lu, b(Sub, ru, n(1.0)))),
                    raw_diff(l, v)?,
                ),
                Pow => b(
                    Mul,
                    e.clone(),
                    b(
                        Add,
                        b(Mul, raw_diff(r, v)?, Expr::call(Func::Log, lu.clone())),
                        b(Div, b(Mul, ru, raw_diff(l, v)?), lu),
                    ),
                ),
            }
        }
        Expr::Call(func, x) => {
            let xu = x.as_ref().clone();
            let dx = raw_diff(x, v)?;
            let outer = match func {
                Func::Sin => Expr::call(Func::Cos, xu),
                Func::Cos => Expr::neg(Expr::call(Func::Sin, xu)),
                Func::Exp => e.clone(),
                Func::Log => b(Div, n(1.0), xu),
                Func::Sqrt => b(Div, n(1.0), b(Mul, n(2.0), e.clone())),
                Func::Abs => {
                    return Err(DiffError::Abs {
                        node: e.to_string(),
                        var: v.name(),
                    })
                }
            };
            b(Mul, outer, dx)
        }
    })
}

/// Constant folding, 0/1 identities, and numeric coefficient extraction in
/// product/quotient chains. Evaluation is preserved wherever the input is
/// defined.
pub fn fold(e: &Expr) -> Expr {
    match e {
        Expr::Num(_) | Expr::Param(_) | Expr::Var(_) => e.clone(),
        Expr::Neg(x) => match fold(x) {
            Expr::Num(c) => n(-c),
            Expr::Neg(y) => *y,
            y if is_chain(&y) => {
                let c = negated(collect_chain(&y));
                if c.coeff.is_finite() {
                    rebuild_chain(c)
                } else {
                    Expr::neg(y)
                }
            }
            y => Expr::neg(y),
        },
        Expr::Call(func, x) => {
            let x = fold(x);
            if let Expr::Num(c) = x {
                if let Some(v) = apply_func(*func, c).filter(|v| v.is_finite()) {
                    return n(v);
                }
            }
            Expr::call(*func, x)
        }
        Expr::Bin(op, l, r) => {
            let (l, r) = (fold(l), fold(r));
            if let (Expr::Num(x), Expr::Num(y)) = (&l, &r) {
                if let Some(v) = apply_bin(*op, *x, *y).filter(|v| v.is_finite()) {
                    return n(v);
                }
            }
            match op {
                Add => match (&l, &r) {
                    (Expr::Num(z), _) if *z == 0.0 => r,
                    (_, Expr::Num(z)) if *z == 0.0 => l,
                    _ => b(Add, l, r),
                },
                Sub => match (&l, &r) {
                    (_, Expr::Num(z)) if *z == 0.0 => l,
                    (Expr::Num(z), _) if *z == 0.0 => fold(&Expr::neg(r)),
                    _ => b(Sub, l, r),
                },
                Mul | Div => {
                    let whole = Expr::bin(*op, l, r);
                    let chain = collect_chain(&whole);
                    if chain.coeff.is_finite() {
                        rebuild_chain(chain)
                    } else {
                        whole
                    }
                }
                Pow => match &r {
                    Expr::Num(one) if *one == 1.0 => l,
                    Expr::Num(zero) if *zero == 0.0 => n(1.0),
                    _ => b(Pow, l, r),
                },
            }
        }
    }
}

fn is_chain(e: &Expr) -> bool {
    matches!(e, Expr::Bin(Mul | Div, ..))
}

/// `coeff * prod(num) / prod(den)`.
struct Chain {
    coeff: f64,
    num: Vec<Expr>,
    den: Vec<Expr>,
}

fn negated(mut c: Chain) -> Chain {
    c.coeff = -c.coeff;
    c
}

fn collect_chain(e: &Expr) -> Chain {
    let mut c = Chain {
        coeff: 1.0,
        num: Vec::new(),
        den: Vec::new(),
    };
    walk_chain(e, false, &mut c);
    c
}

fn walk_chain(e: &Expr, inverted: bool, c: &mut Chain) {
    match e {
        Expr::Num(v) if !inverted || *v != 0.0 => {
            if inverted {
                c.coeff /= v;
            } else {
                c.coeff *= v;
            }
        }
        Expr::Neg(x) => {
            c.coeff = -c.coeff;
            walk_chain(x, inverted, c);
        }
        Expr::Bin(Mul, l, r) => {
            walk_chain(l, inverted, c);
            walk_chain(r, inverted, c);
        }
        Expr::Bin(Div, l, r) => {
            walk_chain(l, inverted, c);
            walk_chain(r, !inverted, c);
        }
        other => {
            if inverted {
                c.den.push(other.clone());
            } else {
                c.num.push(other.clone());
            }
        }
    }
}

fn product(items: Vec<Expr>) -> Option<Expr> {
    items.into_iter().reduce(|acc, x| b(Mul, acc, x))
}

fn rebuild_chain(c: Chain) -> Expr {
    if c.coeff == 0.0 {
        return n(0.0);
    }
    let numerator = match product(c.num) {
        None => n(c.coeff),
        Some(p) if c.coeff == 1.0 => p,
        Some(p) if c.coeff == -1.0 => Expr::neg(p),
        Some(p) => b(Mul, n(c.coeff), p),
    };
    match product(c.den) {
        None => numerator,
        Some(d) => b(Div, numerator, d),
    }
}
