use std::f64::consts::PI;
use std::fmt;

use smallvec::SmallVec;
use thiserror::Error;

use super::ast::{BinOp, Func, Node, Var};
use crate::rank::k_rank_in_place;

#[derive(Debug, Clone, PartialEq)]
pub enum DomainKind {
    LnNonPositive(f64),
    FractionalPowerOfNegative { base: f64, exponent: f64 },
    DivisionByZero,
    NonFinite(f64),
    /// Variable missing from the evaluation environment.
    Unbound(Var),
}

impl fmt::Display for DomainKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DomainKind::LnNonPositive(v) => write!(f, "ln of non-positive argument {v}"),
            DomainKind::FractionalPowerOfNegative { base, exponent } => {
                write!(f, "negative base {base} raised to non-integer power {exponent}")
            }
            DomainKind::DivisionByZero => f.write_str("division by zero"),
            DomainKind::NonFinite(v) => write!(f, "non-finite value {v}"),
            DomainKind::Unbound(v) => write!(f, "variable {v} is not bound"),
        }
    }
}

/// Numeric-domain failure, naming the subexpression that raised it.
#[derive(Debug, Clone, PartialEq, Error)]
#[error("numeric domain error: {kind} in `{subexpr}`")]
pub struct EvalError {
    pub kind: DomainKind,
    pub subexpr: String,
}

/// Values for the variables of an expression. `y[0]` is `y1`.
#[derive(Debug, Clone, Copy, Default)]
pub struct Env<'a> {
    pub x: Option<f64>,
    pub n: Option<f64>,
    pub y: &'a [f64],
}

fn fail(node: &Node, kind: DomainKind) -> EvalError {
    EvalError {
        kind,
        subexpr: node.to_string(),
    }
}

fn finite(node: &Node, v: f64) -> Result<f64, EvalError> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(fail(node, DomainKind::NonFinite(v)))
    }
}

pub(crate) fn eval(node: &Node, env: &Env<'_>) -> Result<f64, EvalError> {
    let v = match node {
        Node::Num(v) => *v,
        Node::Pi => PI,
        Node::Var(var) => {
            let bound = match var {
                Var::X => env.x,
                Var::N => env.n,
                Var::Y(j) => env.y.get(j - 1).copied(),
            };
            bound.ok_or_else(|| fail(node, DomainKind::Unbound(*var)))?
        }
        Node::Neg(a) => -eval(a, env)?,
        Node::Bin(op, a, b) => {
            let a = eval(a, env)?;
            let b = eval(b, env)?;
            match op {
                BinOp::Add => a + b,
                BinOp::Sub => a - b,
                BinOp::Mul => a * b,
                BinOp::Div => {
                    if b == 0.0 {
                        return Err(fail(node, DomainKind::DivisionByZero));
                    }
                    a / b
                }
            }
        }
        Node::Pow(a, b) => {
            let base = eval(a, env)?;
            let exponent = eval(b, env)?;
            if base < 0.0 && exponent.fract() != 0.0 {
                return Err(fail(
                    node,
                    DomainKind::FractionalPowerOfNegative { base, exponent },
                ));
            }
            if base == 0.0 && exponent < 0.0 {
                return Err(fail(node, DomainKind::DivisionByZero));
            }
            if exponent.fract() == 0.0 && exponent.abs() <= 64.0 {
                base.powi(exponent as i32)
            } else {
                base.powf(exponent)
            }
        }
        Node::Call(func, args) => match func {
            Func::Max => fold_args(args, env, f64::NEG_INFINITY, f64::max)?,
            Func::Min => fold_args(args, env, f64::INFINITY, f64::min)?,
            _ => {
                let a = eval(&args[0], env)?;
                match func {
                    Func::Exp => a.exp(),
                    Func::Ln => {
                        if a <= 0.0 {
                            return Err(fail(node, DomainKind::LnNonPositive(a)));
                        }
                        a.ln()
                    }
                    Func::Sin => a.sin(),
                    Func::Cos => a.cos(),
                    Func::Abs => a.abs(),
                    Func::Max | Func::Min => unreachable!(),
                }
            }
        },
        Node::Rank(k, args) => {
            let mut vals: SmallVec<[f64; 8]> = SmallVec::with_capacity(args.len());
            for a in args {
                vals.push(eval(a, env)?);
            }
            k_rank_in_place(&mut vals, *k)
        }
    };
    finite(node, v)
}

fn fold_args(
    args: &[Node],
    env: &Env<'_>,
    init: f64,
    op: fn(f64, f64) -> f64,
) -> Result<f64, EvalError> {
    let mut acc = init;
    for a in args {
        acc = op(acc, eval(a, env)?);
    }
    Ok(acc)
}
