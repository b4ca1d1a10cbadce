use std::fmt;

use super::{BinOp, Expr, Func, Var};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum EvalError {
    /// A name with no binding.
    Unbound(String),
    /// Division by zero, a log/sqrt argument out of range, or a non-finite result.
    Domain { node: String },
}

impl fmt::Display for EvalError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EvalError::Unbound(n) => write!(f, "unbound name `{n}`"),
            EvalError::Domain { node } => write!(f, "domain error evaluating `{node}`"),
        }
    }
}

impl std::error::Error for EvalError {}

pub(crate) fn apply_bin(op: BinOp, a: f64, b: f64) -> Option<f64> {
    match op {
        BinOp::Add => Some(a + b),
        BinOp::Sub => Some(a - b),
        BinOp::Mul => Some(a * b),
        BinOp::Div => (b != 0.0).then(|| a / b),
        BinOp::Pow => {
            if b.fract() == 0.0 && b.abs() <= i32::MAX as f64 {
                if a == 0.0 && b < 0.0 {
                    None
                } else {
                    Some(a.powi(b as i32))
                }
            } else if a < 0.0 || (a == 0.0 && b < 0.0) {
                None
            } else {
                Some(a.powf(b))
            }
        }
    }
}

pub(crate) fn apply_func(func: Func, a: f64) -> Option<f64> {
    match func {
        Func::Sin => Some(a.sin()),
        Func::Cos => Some(a.cos()),
        Func::Exp => Some(a.exp()),
        Func::Log => (a > 0.0).then(|| a.ln()),
        Func::Sqrt => (a >= 0.0).then(|| a.sqrt()),
        Func::Abs => Some(a.abs()),
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Op {
    Const(f64),
    Var(usize),
    Param(usize),
    Neg,
    Bin(BinOp),
    Call(Func),
}

/// A flattened postfix program with variables and parameters resolved to slots.
///
/// Variables occupy the slots of [`Var::slot`]; parameters are indexed by
/// their position in the name list given to [`Compiled::new`].
#[derive(Debug, Clone, PartialEq)]
pub struct Compiled {
    ops: Vec<Op>,
    /// Start index of the subprogram that ends at each op.
    spans: Vec<usize>,
    param_names: Vec<String>,
    constant: Option<f64>,
}

impl Compiled {
    pub fn new(expr: &Expr, param_names: &[String]) -> Result<Self, EvalError> {
        let mut ops = Vec::with_capacity(expr.node_count());
        let mut spans = Vec::with_capacity(expr.node_count());
        emit(expr, param_names, &mut ops, &mut spans)?;
        let constant = match ops.as_slice() {
            [Op::Const(c)] => Some(*c),
            _ => None,
        };
        Ok(Self {
            ops,
            spans,
            param_names: param_names.to_vec(),
            constant,
        })
    }

    /// The program is a single literal.
    pub fn constant(&self) -> Option<f64> {
        self.constant
    }

    pub fn is_zero(&self) -> bool {
        self.constant == Some(0.0)
    }

    pub fn eval(&self, vars: &[f64; 5], params: &[f64]) -> Result<f64, EvalError> {
        if let Some(c) = self.constant {
            return Ok(c);
        }
        let mut stack: Vec<f64> = Vec::with_capacity(16);
        for (i, op) in self.ops.iter().enumerate() {
            match *op {
                Op::Const(c) => stack.push(c),
                Op::Var(s) => stack.push(vars[s]),
                Op::Param(s) => match params.get(s) {
                    Some(v) => stack.push(*v),
                    None => return Err(EvalError::Unbound(self.param_names[s].clone())),
                },
                Op::Neg => {
                    let a = stack.pop().expect("well-formed program");
                    stack.push(-a);
                }
                Op::Bin(b) => {
                    let r = stack.pop().expect("well-formed program");
                    let l = stack.pop().expect("well-formed program");
                    match apply_bin(b, l, r) {
                        Some(v) if v.is_finite() => stack.push(v),
                        _ => return Err(self.domain(i)),
                    }
                }
                Op::Call(f) => {
                    let a = stack.pop().expect("well-formed program");
                    match apply_func(f, a) {
                        Some(v) if v.is_finite() => stack.push(v),
                        _ => return Err(self.domain(i)),
                    }
                }
            }
        }
        Ok(stack.pop().expect("well-formed program"))
    }

    fn domain(&self, at: usize) -> EvalError {
        EvalError::Domain {
            node: self.decompile(self.spans[at], at).to_string(),
        }
    }

    fn decompile(&self, from: usize, to: usize) -> Expr {
        let mut stack: Vec<Expr> = Vec::new();
        for op in &self.ops[from..=to] {
            let e = match *op {
                Op::Const(c) => Expr::Num(c),
                Op::Var(s) => Expr::Var(Var::ALL[s]),
                Op::Param(s) => Expr::Param(self.param_names[s].clone()),
                Op::Neg => Expr::neg(stack.pop().unwrap()),
                Op::Bin(b) => {
                    let r = stack.pop().unwrap();
                    let l = stack.pop().unwrap();
                    Expr::bin(b, l, r)
                }
                Op::Call(f) => Expr::call(f, stack.pop().unwrap()),
            };
            stack.push(e);
        }
        stack.pop().unwrap()
    }
}

fn emit(
    e: &Expr,
    names: &[String],
    ops: &mut Vec<Op>,
    spans: &mut Vec<usize>,
) -> Result<(), EvalError> {
    let start = ops.len();
    let op = match e {
        Expr::Num(v) => Op::Const(*v),
        Expr::Var(v) => Op::Var(v.slot()),
        Expr::Param(p) => match names.iter().position(|n| n == p) {
            Some(i) => Op::Param(i),
            None => return Err(EvalError::Unbound(p.clone())),
        },
        Expr::Neg(x) => {
            emit(x, names, ops, spans)?;
            Op::Neg
        }
        Expr::Bin(b, l, r) => {
            emit(l, names, ops, spans)?;
            emit(r, names, ops, spans)?;
            Op::Bin(*b)
        }
        Expr::Call(f, x) => {
            emit(x, names, ops, spans)?;
            Op::Call(*f)
        }
    };
    ops.push(op);
    spans.push(start);
    Ok(())
}
