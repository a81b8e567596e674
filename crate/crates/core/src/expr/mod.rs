//! User-defined functions: scalar maps `f(x, n)` and block maps
//! `G(y1, …, yM)`, plus sampled Lipschitz estimates for them.
//!
//! The grammar is documented in `docs/grammar.md`.

mod ast;
mod eval;
mod lipschitz;
mod parse;

use std::f64::consts::PI;
use std::fmt;

use serde::{Deserialize, Serialize};

pub use ast::{BinOp, Func, Node, Var};
pub use eval::{DomainKind, Env, EvalError};
pub use lipschitz::{
    estimate_block_lipschitz, estimate_scalar_lipschitz, LipschitzEstimate, LipschitzMethod,
    DEFAULT_GRID_POINTS, DEFAULT_PAIRS, DEFAULT_SAFETY_FACTOR,
};
pub use parse::{ParseError, ParseErrorKind, Pos, Scope};

use crate::error::{Error, Result};

/// A function `f(x, n)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarExpr {
    node: Node,
}

impl ScalarExpr {
    pub fn parse(src: &str) -> Result<Self, ParseError> {
        Ok(ScalarExpr {
            node: parse::parse(src, Scope::Scalar)?,
        })
    }

    /// Wraps a programmatically built tree; only `x` and `n` may appear.
    pub fn from_node(node: Node) -> Result<Self> {
        if node.max_y() > 0 {
            return Err(Error::arg("scalar expressions may only use x and n"));
        }
        Ok(ScalarExpr { node })
    }

    pub fn node(&self) -> &Node {
        &self.node
    }

    pub fn eval(&self, x: f64, n: i64) -> Result<f64, EvalError> {
        eval::eval(
            &self.node,
            &Env {
                x: Some(x),
                n: Some(n as f64),
                y: &[],
            },
        )
    }

    /// `x -> f(x, n)` for a fixed `n`.
    pub fn at(&self, n: i64) -> impl Fn(f64) -> Result<f64, EvalError> + '_ {
        move |x| self.eval(x, n)
    }

    pub fn depends_on_n(&self) -> bool {
        self.node.mentions(Var::N)
    }

    /// `(slope, intercept)` when `x -> f(x, n)` is syntactically affine
    /// after folding constant subtrees.
    pub fn affine_coefficients(&self, n: i64) -> Option<(f64, f64)> {
        linear(&self.node, n as f64)
    }

    /// Replaces `x` by `y_j` and `n` by the literal `n`, for use inside a
    /// block expression.
    pub(crate) fn to_block_node(&self, j: usize, n: i64) -> Node {
        self.node.substitute(&|v| match v {
            Var::X => Node::Var(Var::Y(j)),
            Var::N => Node::Num(n as f64),
            other => Node::Var(other),
        })
    }
}

impl fmt::Display for ScalarExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.node.fmt(f)
    }
}

impl std::str::FromStr for ScalarExpr {
    type Err = ParseError;

    fn from_str(s: &str) -> Result<Self, ParseError> {
        ScalarExpr::parse(s)
    }
}

/// A function `G(y1, …, yM)` of the last `M` states, most recent first.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockExpr {
    node: Node,
    arity: usize,
}

impl BlockExpr {
    pub fn parse(src: &str, arity: usize) -> Result<Self> {
        if arity == 0 {
            return Err(Error::arg("block arity must be at least 1"));
        }
        Ok(BlockExpr {
            node: parse::parse(src, Scope::Block { arity })?,
            arity,
        })
    }

    pub fn from_node(node: Node, arity: usize) -> Result<Self> {
        if arity == 0 {
            return Err(Error::arg("block arity must be at least 1"));
        }
        if node.mentions(Var::X) || node.mentions(Var::N) {
            return Err(Error::arg("block expressions may only use y1..yM"));
        }
        if node.max_y() > arity {
            return Err(Error::arg(format!(
                "block expression references y{} but arity is {arity}",
                node.max_y()
            )));
        }
        Ok(BlockExpr { node, arity })
    }

    pub fn arity(&self) -> usize {
        self.arity
    }

    pub fn node(&self) -> &Node {
        &self.node
    }

    /// `y[0]` is `y1`, the most recent state. Extra trailing entries are ignored.
    pub fn eval(&self, y: &[f64]) -> Result<f64, EvalError> {
        debug_assert!(y.len() >= self.arity);
        eval::eval(
            &self.node,
            &Env {
                x: None,
                n: None,
                y,
            },
        )
    }
}

impl fmt::Display for BlockExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.node.fmt(f)
    }
}

/// Closed sampling window `[lo, hi]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "[f64; 2]", into = "[f64; 2]")]
pub struct DomainInterval {
    lo: f64,
    hi: f64,
}

impl DomainInterval {
    pub fn new(lo: f64, hi: f64) -> Result<Self> {
        if !lo.is_finite() || !hi.is_finite() || lo >= hi {
            return Err(Error::arg(format!("invalid domain [{lo}, {hi}]")));
        }
        Ok(DomainInterval { lo, hi })
    }

    pub fn lo(&self) -> f64 {
        self.lo
    }

    pub fn hi(&self) -> f64 {
        self.hi
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }
}

impl Default for DomainInterval {
    fn default() -> Self {
        DomainInterval {
            lo: -10.0,
            hi: 10.0,
        }
    }
}

impl TryFrom<[f64; 2]> for DomainInterval {
    type Error = Error;

    fn try_from([lo, hi]: [f64; 2]) -> Result<Self> {
        DomainInterval::new(lo, hi)
    }
}

impl From<DomainInterval> for [f64; 2] {
    fn from(d: DomainInterval) -> [f64; 2] {
        [d.lo, d.hi]
    }
}

impl fmt::Display for DomainInterval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}, {}]", self.lo, self.hi)
    }
}

fn constant(node: &Node, n: f64) -> Option<f64> {
    eval::eval(
        node,
        &Env {
            x: None,
            n: Some(n),
            y: &[],
        },
    )
    .ok()
}

fn linear(node: &Node, n: f64) -> Option<(f64, f64)> {
    if !node.mentions(Var::X) {
        return constant(node, n).map(|c| (0.0, c));
    }
    match node {
        Node::Num(v) => Some((0.0, *v)),
        Node::Pi => Some((0.0, PI)),
        Node::Var(Var::X) => Some((1.0, 0.0)),
        Node::Var(Var::N) => Some((0.0, n)),
        Node::Var(Var::Y(_)) => None,
        Node::Neg(a) => linear(a, n).map(|(s, c)| (-s, -c)),
        Node::Bin(op, a, b) => {
            let (s1, c1) = linear(a, n)?;
            let (s2, c2) = linear(b, n)?;
            match op {
                BinOp::Add => Some((s1 + s2, c1 + c2)),
                BinOp::Sub => Some((s1 - s2, c1 - c2)),
                BinOp::Mul if s1 == 0.0 => Some((c1 * s2, c1 * c2)),
                BinOp::Mul if s2 == 0.0 => Some((s1 * c2, c1 * c2)),
                BinOp::Mul => None,
                BinOp::Div if s2 == 0.0 && c2 != 0.0 => Some((s1 / c2, c1 / c2)),
                BinOp::Div => None,
            }
        }
        Node::Pow(a, e) => {
            let e = constant(e, n)?;
            if e == 1.0 {
                linear(a, n)
            } else if e == 0.0 {
                Some((0.0, 1.0))
            } else {
                None
            }
        }
        Node::Call(..) | Node::Rank(..) => None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn f(src: &str) -> ScalarExpr {
        ScalarExpr::parse(src).unwrap()
    }

    fn ev(src: &str, x: f64, n: i64) -> f64 {
        f(src).eval(x, n).unwrap()
    }

    #[test]
    fn eval_examples() {
        assert_eq!(ev("0.5*x+1", 2.0, 0), 2.0);
        assert_eq!(ev("max(1-2*x, 2*x-1)", 0.25, 0), 0.5);
    }

    #[test]
    fn eval_exp_sin_against_desk_value() {
        // 30-digit desk evaluation: exp(0.1*sin(0.7 + pi/2)) = 1.07948515455438322816...
        let v = ev("exp(0.1*sin(0.7 + 2*pi*n/4) - x^2)", 0.0, 1);
        assert!((v - 1.079_485_154_554_383).abs() < 1e-14, "{v}");
    }

    #[test]
    fn eval_fixed_suite() {
        let cases: &[(&str, f64, i64, f64)] = &[
            ("1 + 2 * 3", 0.0, 0, 7.0),
            ("(1 + 2) * 3", 0.0, 0, 9.0),
            ("2^3^2", 0.0, 0, 512.0),
            ("-x^2", 3.0, 0, -9.0),
            ("(-x)^2", 3.0, 0, 9.0),
            ("x^-1", 4.0, 0, 0.25),
            ("(-8)^(1/1)", 0.0, 0, -8.0),
            ("x^0.5", 16.0, 0, 4.0),
            ("abs(x - 5)", 2.0, 0, 3.0),
            ("min(x, 3, -1)", 0.0, 0, -1.0),
            ("max(x)", -4.0, 0, -4.0),
            ("rank(2; 3, 1, 2)", 0.0, 0, 2.0),
            ("rank(3; x, x, 1)", 5.0, 0, 1.0),
            ("rank(1; -x, 2)", -7.0, 0, 7.0),
            ("ln(exp(x))", 1.25, 0, 1.25),
            ("cos(pi)", 0.0, 0, -1.0),
            ("sin(0)", 0.0, 0, 0.0),
            ("n * x", 2.0, 3, 6.0),
            ("n / 4", 0.0, 2, 0.5),
            ("10 - 4 - 3", 0.0, 0, 3.0),
            ("12 / 3 / 2", 0.0, 0, 2.0),
            ("--x", 2.0, 0, 2.0),
            ("1.5e1 + .5", 0.0, 0, 15.5),
        ];
        for (src, x, n, want) in cases {
            let got = ev(src, *x, *n);
            assert!((got - want).abs() < 1e-12, "{src} at ({x}, {n}) = {got}, want {want}");
        }
    }

    #[test]
    fn domain_errors_name_subexpression() {
        let e = f("1 + ln(x - 2)").eval(1.0, 0).unwrap_err();
        assert_eq!(e.kind, DomainKind::LnNonPositive(-1.0));
        assert_eq!(e.subexpr, "ln(x - 2)");

        let e = f("x^0.5").eval(-1.0, 0).unwrap_err();
        assert!(matches!(e.kind, DomainKind::FractionalPowerOfNegative { .. }));

        let e = f("3 / (x - x)").eval(1.0, 0).unwrap_err();
        assert_eq!(e.kind, DomainKind::DivisionByZero);
        assert_eq!(e.subexpr, "3 / (x - x)");

        let e = f("x^-1").eval(0.0, 0).unwrap_err();
        assert_eq!(e.kind, DomainKind::DivisionByZero);

        let e = f("exp(x)").eval(1000.0, 0).unwrap_err();
        assert!(matches!(e.kind, DomainKind::NonFinite(_)));
    }

    #[test]
    fn block_eval_and_arity() {
        let g = BlockExpr::parse("rank(1; y1, y2)", 2).unwrap();
        assert_eq!(g.eval(&[1.0, 3.0]).unwrap(), 3.0);
        let g = BlockExpr::parse("0.5*(max(y1,y2) - rank(2; y1, y2))", 2).unwrap();
        assert_eq!(g.eval(&[1.0, 3.0]).unwrap(), 1.0);
        assert!(matches!(
            BlockExpr::parse("y3", 2),
            Err(Error::Parse(ParseError {
                kind: ParseErrorKind::Arity { .. },
                ..
            }))
        ));
        assert!(BlockExpr::parse("y1", 0).is_err());
    }

    #[test]
    fn affine_detection() {
        assert_eq!(f("0.5*x + 1").affine_coefficients(0), Some((0.5, 1.0)));
        assert_eq!(f("-x").affine_coefficients(0), Some((-1.0, 0.0)));
        assert_eq!(f("(x - 3)/4").affine_coefficients(0), Some((0.25, -0.75)));
        assert_eq!(f("2*(x + n)").affine_coefficients(3), Some((2.0, 6.0)));
        assert_eq!(f("ln(2) + 0.3*x").affine_coefficients(0), Some((0.3, 2f64.ln())));
        assert_eq!(f("x^1").affine_coefficients(0), Some((1.0, 0.0)));
        assert_eq!(f("sin(n)*x").affine_coefficients(2).unwrap().0, 2f64.sin());
        assert_eq!(f("x*x").affine_coefficients(0), None);
        assert_eq!(f("max(1-2*x, 2*x-1)").affine_coefficients(0), None);
        assert_eq!(f("1/x").affine_coefficients(0), None);
        assert_eq!(f("x^2").affine_coefficients(0), None);
    }

    #[test]
    fn domain_interval() {
        assert!(DomainInterval::new(1.0, 1.0).is_err());
        assert!(DomainInterval::new(2.0, 1.0).is_err());
        assert!(DomainInterval::new(f64::NEG_INFINITY, 1.0).is_err());
        let d = DomainInterval::default();
        assert_eq!((d.lo(), d.hi()), (-10.0, 10.0));
    }
}
