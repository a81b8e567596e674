use std::fmt;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Var {
    /// State argument of a scalar function.
    X,
    /// Time argument of a scalar function. Bound to the forcing phase.
    N,
    /// `y_j` of a block function, 1-based, most recent first.
    Y(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Func {
    Exp,
    Ln,
    Sin,
    Cos,
    Abs,
    Max,
    Min,
}

impl Func {
    pub fn name(self) -> &'static str {
        match self {
            Func::Exp => "exp",
            Func::Ln => "ln",
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Abs => "abs",
            Func::Max => "max",
            Func::Min => "min",
        }
    }

    pub fn from_name(name: &str) -> Option<Func> {
        Some(match name {
            "exp" => Func::Exp,
            "ln" => Func::Ln,
            "sin" => Func::Sin,
            "cos" => Func::Cos,
            "abs" => Func::Abs,
            "max" => Func::Max,
            "min" => Func::Min,
            _ => return None,
        })
    }

    /// `None` means variadic with at least one argument.
    pub fn arity(self) -> Option<usize> {
        match self {
            Func::Max | Func::Min => None,
            _ => Some(1),
        }
    }
}

/// Expression tree. Exponents of `Pow` contain no variables.
#[derive(Debug, Clone, PartialEq)]
pub enum Node {
    Num(f64),
    Pi,
    Var(Var),
    Neg(Box<Node>),
    Bin(BinOp, Box<Node>, Box<Node>),
    Pow(Box<Node>, Box<Node>),
    Call(Func, Vec<Node>),
    Rank(usize, Vec<Node>),
}

impl Node {
    pub fn num(v: f64) -> Node {
        Node::Num(v)
    }

    pub fn var(v: Var) -> Node {
        Node::Var(v)
    }

    pub fn bin(op: BinOp, a: Node, b: Node) -> Node {
        Node::Bin(op, Box::new(a), Box::new(b))
    }

    pub fn add(a: Node, b: Node) -> Node {
        Node::bin(BinOp::Add, a, b)
    }

    pub fn sub(a: Node, b: Node) -> Node {
        Node::bin(BinOp::Sub, a, b)
    }

    pub fn mul(a: Node, b: Node) -> Node {
        Node::bin(BinOp::Mul, a, b)
    }

    pub fn call(f: Func, args: Vec<Node>) -> Node {
        Node::Call(f, args)
    }

    /// True when the subtree mentions `v`.
    pub fn mentions(&self, v: Var) -> bool {
        self.any_var(&mut |w| w == v)
    }

    pub fn has_vars(&self) -> bool {
        self.any_var(&mut |_| true)
    }

    fn any_var(&self, pred: &mut dyn FnMut(Var) -> bool) -> bool {
        match self {
            Node::Num(_) | Node::Pi => false,
            Node::Var(v) => pred(*v),
            Node::Neg(a) => a.any_var(pred),
            Node::Bin(_, a, b) | Node::Pow(a, b) => a.any_var(pred) || b.any_var(pred),
            Node::Call(_, args) | Node::Rank(_, args) => args.iter().any(|a| a.any_var(pred)),
        }
    }

    /// Replaces every variable via `f`.
    pub fn substitute(&self, f: &dyn Fn(Var) -> Node) -> Node {
        match self {
            Node::Num(_) | Node::Pi => self.clone(),
            Node::Var(v) => f(*v),
            Node::Neg(a) => Node::Neg(Box::new(a.substitute(f))),
            Node::Bin(op, a, b) => Node::bin(*op, a.substitute(f), b.substitute(f)),
            Node::Pow(a, b) => Node::Pow(Box::new(a.substitute(f)), Box::new(b.substitute(f))),
            Node::Call(func, args) => {
                Node::Call(*func, args.iter().map(|a| a.substitute(f)).collect())
            }
            Node::Rank(k, args) => Node::Rank(*k, args.iter().map(|a| a.substitute(f)).collect()),
        }
    }

    /// Largest `j` of any `y_j` in the tree, 0 when none.
    pub fn max_y(&self) -> usize {
        let mut top = 0;
        self.any_var(&mut |v| {
            if let Var::Y(j) = v {
                top = top.max(j);
            }
            false
        });
        top
    }

    fn precedence(&self) -> u8 {
        match self {
            Node::Bin(BinOp::Add | BinOp::Sub, ..) => 1,
            Node::Bin(BinOp::Mul | BinOp::Div, ..) => 2,
            Node::Neg(_) => 3,
            Node::Pow(..) => 4,
            Node::Num(v) if v.is_sign_negative() => 3,
            _ => 5,
        }
    }
}

impl fmt::Display for Var {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Var::X => f.write_str("x"),
            Var::N => f.write_str("n"),
            Var::Y(j) => write!(f, "y{j}"),
        }
    }
}

impl fmt::Display for BinOp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            BinOp::Add => "+",
            BinOp::Sub => "-",
            BinOp::Mul => "*",
            BinOp::Div => "/",
        })
    }
}

fn write_wrapped(f: &mut fmt::Formatter<'_>, node: &Node, wrap: bool) -> fmt::Result {
    if wrap {
        write!(f, "({node})")
    } else {
        write!(f, "{node}")
    }
}

fn write_args(f: &mut fmt::Formatter<'_>, args: &[Node]) -> fmt::Result {
    for (i, a) in args.iter().enumerate() {
        if i > 0 {
            f.write_str(", ")?;
        }
        write!(f, "{a}")?;
    }
    Ok(())
}

/// Canonical form with minimal parentheses. Parsing the output yields the
/// same tree for every tree the parser can produce.
impl fmt::Display for Node {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Node::Num(v) => write!(f, "{v}"),
            Node::Pi => f.write_str("pi"),
            Node::Var(v) => write!(f, "{v}"),
            Node::Neg(a) => {
                f.write_str("-")?;
                write_wrapped(f, a, a.precedence() < 3)
            }
            Node::Bin(op, a, b) => {
                let p = self.precedence();
                write_wrapped(f, a, a.precedence() < p)?;
                write!(f, " {op} ")?;
                write_wrapped(f, b, b.precedence() <= p)
            }
            Node::Pow(a, b) => {
                write_wrapped(f, a, a.precedence() <= 4)?;
                f.write_str("^")?;
                write_wrapped(f, b, b.precedence() < 3)
            }
            Node::Call(func, args) => {
                write!(f, "{}(", func.name())?;
                write_args(f, args)?;
                f.write_str(")")
            }
            Node::Rank(k, args) => {
                write!(f, "rank({k}; ")?;
                write_args(f, args)?;
                f.write_str(")")
            }
        }
    }
}
