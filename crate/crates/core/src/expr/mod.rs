//! A small expression language for Lagrangians `L(t, y, Dy, ya, yb)`.
//!
//! Grammar:
//!
//! ```text
//! expr   := term (("+" | "-") term)*
//! term   := factor (("*" | "/") factor)*
//! factor := "-" factor | power
//! power  := atom ("^" factor)?
//! atom   := number | ident | ident "(" expr ")" | "(" expr ")"
//! ```
//!
//! `^` binds tightest and associates to the right. A minus sign directly in
//! front of a number literal (not followed by `^`) produces a negative
//! literal rather than a negation node.

mod compile;
mod diff;
mod parse;

use std::collections::HashMap;
use std::fmt;

pub use compile::{Compiled, EvalError};
pub use diff::{diff, fold, DiffError};
pub use parse::{parse, parse_in, ParseError};

/// The five canonical variables, in slot order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Var {
    /// Time.
    T,
    /// `y(sigma(t))`.
    Y,
    /// `D[y](t)`.
    Dy,
    /// `y(a)`.
    Ya,
    /// `y(b)`.
    Yb,
}

impl Var {
    pub const ALL: [Var; 5] = [Var::T, Var::Y, Var::Dy, Var::Ya, Var::Yb];

    pub fn name(self) -> &'static str {
        match self {
            Var::T => "t",
            Var::Y => "y",
            Var::Dy => "Dy",
            Var::Ya => "ya",
            Var::Yb => "yb",
        }
    }

    pub fn from_name(s: &str) -> Option<Var> {
        Var::ALL.into_iter().find(|v| v.name() == s)
    }

    pub fn slot(self) -> usize {
        self as usize
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
}

impl BinOp {
    fn symbol(self) -> &'static str {
        match self {
            BinOp::Add => " + ",
            BinOp::Sub => " - ",
            BinOp::Mul => "*",
            BinOp::Div => "/",
            BinOp::Pow => "^",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Func {
    Sin,
    Cos,
    Exp,
    Log,
    Sqrt,
    Abs,
}

impl Func {
    pub const ALL: [Func; 6] = [
        Func::Sin,
        Func::Cos,
        Func::Exp,
        Func::Log,
        Func::Sqrt,
        Func::Abs,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Exp => "exp",
            Func::Log => "log",
            Func::Sqrt => "sqrt",
            Func::Abs => "abs",
        }
    }

    pub fn from_name(s: &str) -> Option<Func> {
        Func::ALL.into_iter().find(|f| f.name() == s)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Num(f64),
    Param(String),
    Var(Var),
    Neg(Box<Expr>),
    Bin(BinOp, Box<Expr>, Box<Expr>),
    Call(Func, Box<Expr>),
}

impl Expr {
    pub fn num(v: f64) -> Expr {
        Expr::Num(v)
    }

    pub fn var(v: Var) -> Expr {
        Expr::Var(v)
    }

    pub fn param(name: impl Into<String>) -> Expr {
        Expr::Param(name.into())
    }

    pub fn bin(op: BinOp, l: Expr, r: Expr) -> Expr {
        Expr::Bin(op, Box::new(l), Box::new(r))
    }

    #[allow(clippy::should_implement_trait)]
    pub fn neg(e: Expr) -> Expr {
        Expr::Neg(Box::new(e))
    }

    pub fn call(f: Func, e: Expr) -> Expr {
        Expr::Call(f, Box::new(e))
    }

    pub fn depends_on(&self, v: Var) -> bool {
        match self {
            Expr::Num(_) | Expr::Param(_) => false,
            Expr::Var(w) => *w == v,
            Expr::Neg(e) | Expr::Call(_, e) => e.depends_on(v),
            Expr::Bin(_, l, r) => l.depends_on(v) || r.depends_on(v),
        }
    }

    /// Parameter names in first-appearance order.
    pub fn params(&self) -> Vec<String> {
        fn walk(e: &Expr, out: &mut Vec<String>) {
            match e {
                Expr::Param(p) if !out.contains(p) => out.push(p.clone()),
                Expr::Neg(x) | Expr::Call(_, x) => walk(x, out),
                Expr::Bin(_, l, r) => {
                    walk(l, out);
                    walk(r, out);
                }
                _ => {}
            }
        }
        let mut out = Vec::new();
        walk(self, &mut out);
        out
    }

    pub fn vars(&self) -> Vec<Var> {
        Var::ALL
            .into_iter()
            .filter(|v| self.depends_on(*v))
            .collect()
    }

    pub fn contains_abs(&self) -> bool {
        match self {
            Expr::Call(Func::Abs, _) => true,
            Expr::Neg(x) | Expr::Call(_, x) => x.contains_abs(),
            Expr::Bin(_, l, r) => l.contains_abs() || r.contains_abs(),
            _ => false,
        }
    }

    pub fn node_count(&self) -> usize {
        match self {
            Expr::Num(_) | Expr::Param(_) | Expr::Var(_) => 1,
            Expr::Neg(x) | Expr::Call(_, x) => 1 + x.node_count(),
            Expr::Bin(_, l, r) => 1 + l.node_count() + r.node_count(),
        }
    }

    /// Binding strength used by the printer.
    fn level(&self) -> u8 {
        match self {
            Expr::Bin(BinOp::Add | BinOp::Sub, ..) => 1,
            Expr::Bin(BinOp::Mul | BinOp::Div, ..) => 2,
            Expr::Neg(_) => 3,
            Expr::Num(v) if v.is_sign_negative() => 3,
            Expr::Bin(BinOp::Pow, ..) => 4,
            _ => 5,
        }
    }

    fn write_at(&self, f: &mut fmt::Formatter<'_>, min_level: u8) -> fmt::Result {
        if self.level() < min_level {
            write!(f, "(")?;
            self.write_at(f, 0)?;
            return write!(f, ")");
        }
        match self {
            Expr::Num(v) => write_num(f, *v),
            Expr::Param(p) => write!(f, "{p}"),
            Expr::Var(v) => write!(f, "{}", v.name()),
            Expr::Neg(x) => {
                write!(f, "-")?;
                if let Expr::Num(v) = **x {
                    write!(f, "(")?;
                    write_num(f, v)?;
                    write!(f, ")")
                } else {
                    x.write_at(f, 3)
                }
            }
            Expr::Bin(op, l, r) => {
                let (ll, rl) = match op {
                    BinOp::Add | BinOp::Sub => (1, 2),
                    BinOp::Mul | BinOp::Div => (2, 3),
                    BinOp::Pow => (5, 3),
                };
                l.write_at(f, ll)?;
                write!(f, "{}", op.symbol())?;
                r.write_at(f, rl)
            }
            Expr::Call(func, x) => {
                write!(f, "{}(", func.name())?;
                x.write_at(f, 0)?;
                write!(f, ")")
            }
        }
    }
}

fn write_num(f: &mut fmt::Formatter<'_>, v: f64) -> fmt::Result {
    if v.fract() == 0.0 && v.abs() < 1e15 {
        if v == 0.0 && v.is_sign_negative() {
            write!(f, "-0")
        } else {
            write!(f, "{}", v as i64)
        }
    } else {
        write!(f, "{v:?}")
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.write_at(f, 0)
    }
}

/// Tree-walking evaluation against named bindings (`t`, `y`, `Dy`, `ya`,
/// `yb` and parameter names).
pub fn eval(expr: &Expr, env: &HashMap<String, f64>) -> Result<f64, EvalError> {
    let lookup = |name: &str| {
        env.get(name)
            .copied()
            .ok_or_else(|| EvalError::Unbound(name.to_string()))
    };
    let checked = |v: f64, e: &Expr| -> Result<f64, EvalError> {
        if v.is_finite() {
            Ok(v)
        } else {
            Err(EvalError::Domain {
                node: e.to_string(),
            })
        }
    };
    match expr {
        Expr::Num(v) => Ok(*v),
        Expr::Param(p) => lookup(p),
        Expr::Var(v) => lookup(v.name()),
        Expr::Neg(x) => Ok(-eval(x, env)?),
        Expr::Bin(op, l, r) => {
            let a = eval(l, env)?;
            let b = eval(r, env)?;
            let v = compile::apply_bin(*op, a, b).ok_or_else(|| EvalError::Domain {
                node: expr.to_string(),
            })?;
            checked(v, expr)
        }
        Expr::Call(func, x) => {
            let a = eval(x, env)?;
            let v = compile::apply_func(*func, a).ok_or_else(|| EvalError::Domain {
                node: expr.to_string(),
            })?;
            checked(v, expr)
        }
    }
}
