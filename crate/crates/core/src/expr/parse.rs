//! Recursive-descent parser for the function DSL.
//!
//! ```text
//! expr    = term { ("+" | "-") term } ;
//! term    = unary { ("*" | "/") unary } ;
//! unary   = "-" unary | power ;
//! power   = primary [ "^" unary ] ;
//! primary = number | "pi" | variable | call | rank | "(" expr ")" ;
//! call    = func "(" expr { "," expr } ")" ;
//! rank    = "rank" "(" integer ";" expr { "," expr } ")" ;
//! ```

use std::fmt;

use thiserror::Error;

use super::ast::{BinOp, Func, Node, Var};

/// 1-based line and column.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Pos {
    pub line: usize,
    pub col: usize,
}

impl fmt::Display for Pos {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.line, self.col)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ParseErrorKind {
    Syntax(String),
    UnknownIdentifier(String),
    Arity {
        name: String,
        expected: String,
        found: usize,
    },
    NonLiteralRank,
    NonConstantExponent,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{pos}: {kind}")]
pub struct ParseError {
    pub pos: Pos,
    pub kind: ParseErrorKind,
}

impl fmt::Display for ParseErrorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ParseErrorKind::Syntax(msg) => write!(f, "syntax error: {msg}"),
            ParseErrorKind::UnknownIdentifier(name) => write!(f, "unknown identifier `{name}`"),
            ParseErrorKind::Arity {
                name,
                expected,
                found,
            } => write!(f, "`{name}` expects {expected}, got {found}"),
            ParseErrorKind::NonLiteralRank => {
                f.write_str("rank index must be a literal positive integer")
            }
            ParseErrorKind::NonConstantExponent => {
                f.write_str("exponent of `^` must not depend on variables")
            }
        }
    }
}

/// Which identifiers resolve to variables.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scope {
    /// `x` and `n`.
    Scalar,
    /// `y1 .. yM`.
    Block { arity: usize },
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Int(usize),
    Sym(char),
    End,
}

struct Lexer<'a> {
    src: &'a str,
    offset: usize,
    line: usize,
    col: usize,
}

impl<'a> Lexer<'a> {
    fn new(src: &'a str) -> Self {
        Lexer {
            src,
            offset: 0,
            line: 1,
            col: 1,
        }
    }

    fn peek_char(&self) -> Option<char> {
        self.src[self.offset..].chars().next()
    }

    fn bump(&mut self) -> Option<char> {
        let c = self.peek_char()?;
        self.offset += c.len_utf8();
        if c == '\n' {
            self.line += 1;
            self.col = 1;
        } else {
            self.col += 1;
        }
        Some(c)
    }

    fn pos(&self) -> Pos {
        Pos {
            line: self.line,
            col: self.col,
        }
    }

    fn tokens(mut self) -> Result<Vec<(Tok, Pos)>, ParseError> {
        let mut out = Vec::new();
        loop {
            while self.peek_char().is_some_and(char::is_whitespace) {
                self.bump();
            }
            let pos = self.pos();
            let Some(c) = self.peek_char() else {
                out.push((Tok::End, pos));
                return Ok(out);
            };
            if c.is_ascii_digit() || c == '.' {
                out.push((self.number(pos)?, pos));
            } else if c.is_alphabetic() || c == '_' {
                let start = self.offset;
                while self
                    .peek_char()
                    .is_some_and(|c| c.is_alphanumeric() || c == '_')
                {
                    self.bump();
                }
                out.push((Tok::Ident(self.src[start..self.offset].to_string()), pos));
            } else if "+-*/^(),;".contains(c) {
                self.bump();
                out.push((Tok::Sym(c), pos));
            } else {
                return Err(ParseError {
                    pos,
                    kind: ParseErrorKind::Syntax(format!("unexpected character `{c}`")),
                });
            }
        }
    }

    fn number(&mut self, pos: Pos) -> Result<Tok, ParseError> {
        let start = self.offset;
        let mut integral = true;
        while self.peek_char().is_some_and(|c| c.is_ascii_digit()) {
            self.bump();
        }
        if self.peek_char() == Some('.') {
            integral = false;
            self.bump();
            while self.peek_char().is_some_and(|c| c.is_ascii_digit()) {
                self.bump();
            }
        }
        if matches!(self.peek_char(), Some('e' | 'E')) {
            let rest = &self.src[self.offset + 1..];
            let mut chars = rest.chars();
            let next = chars.next();
            let exp_ok = match next {
                Some(d) if d.is_ascii_digit() => true,
                Some('+' | '-') => chars.next().is_some_and(|d| d.is_ascii_digit()),
                _ => false,
            };
            if exp_ok {
                integral = false;
                self.bump();
                if matches!(self.peek_char(), Some('+' | '-')) {
                    self.bump();
                }
                while self.peek_char().is_some_and(|c| c.is_ascii_digit()) {
                    self.bump();
                }
            }
        }
        let text = &self.src[start..self.offset];
        let bad = || ParseError {
            pos,
            kind: ParseErrorKind::Syntax(format!("malformed number `{text}`")),
        };
        let value: f64 = text.parse().map_err(|_| bad())?;
        if !value.is_finite() {
            return Err(bad());
        }
        if integral {
            if let Ok(k) = text.parse::<usize>() {
                return Ok(Tok::Int(k));
            }
        }
        Ok(Tok::Num(value))
    }
}

struct Parser {
    toks: Vec<(Tok, Pos)>,
    at: usize,
    scope: Scope,
}

type PResult<T> = Result<T, ParseError>;

impl Parser {
    fn peek(&self) -> &Tok {
        &self.toks[self.at].0
    }

    fn pos(&self) -> Pos {
        self.toks[self.at].1
    }

    fn advance(&mut self) -> (Tok, Pos) {
        let t = self.toks[self.at].clone();
        if self.at + 1 < self.toks.len() {
            self.at += 1;
        }
        t
    }

    fn syntax<T>(&self, msg: impl Into<String>) -> PResult<T> {
        Err(ParseError {
            pos: self.pos(),
            kind: ParseErrorKind::Syntax(msg.into()),
        })
    }

    fn describe(tok: &Tok) -> String {
        match tok {
            Tok::Num(v) => format!("number {v}"),
            Tok::Int(k) => format!("number {k}"),
            Tok::Ident(s) => format!("`{s}`"),
            Tok::Sym(c) => format!("`{c}`"),
            Tok::End => "end of input".to_string(),
        }
    }

    fn expect(&mut self, c: char) -> PResult<()> {
        if *self.peek() == Tok::Sym(c) {
            self.advance();
            Ok(())
        } else {
            let found = Self::describe(self.peek());
            self.syntax(format!("expected `{c}`, found {found}"))
        }
    }

    fn expr(&mut self) -> PResult<Node> {
        let mut lhs = self.term()?;
        loop {
            let op = match self.peek() {
                Tok::Sym('+') => BinOp::Add,
                Tok::Sym('-') => BinOp::Sub,
                _ => return Ok(lhs),
            };
            self.advance();
            let rhs = self.term()?;
            lhs = Node::bin(op, lhs, rhs);
        }
    }

    fn term(&mut self) -> PResult<Node> {
        let mut lhs = self.unary()?;
        loop {
            let op = match self.peek() {
                Tok::Sym('*') => BinOp::Mul,
                Tok::Sym('/') => BinOp::Div,
                _ => return Ok(lhs),
            };
            self.advance();
            let rhs = self.unary()?;
            lhs = Node::bin(op, lhs, rhs);
        }
    }

    fn unary(&mut self) -> PResult<Node> {
        if *self.peek() == Tok::Sym('-') {
            self.advance();
            return Ok(Node::Neg(Box::new(self.unary()?)));
        }
        self.power()
    }

    fn power(&mut self) -> PResult<Node> {
        let base = self.primary()?;
        if *self.peek() != Tok::Sym('^') {
            return Ok(base);
        }
        self.advance();
        let pos = self.pos();
        let exponent = self.unary()?;
        if exponent.has_vars() {
            return Err(ParseError {
                pos,
                kind: ParseErrorKind::NonConstantExponent,
            });
        }
        Ok(Node::Pow(Box::new(base), Box::new(exponent)))
    }

    fn args(&mut self) -> PResult<Vec<Node>> {
        let mut args = vec![self.expr()?];
        while *self.peek() == Tok::Sym(',') {
            self.advance();
            args.push(self.expr()?);
        }
        self.expect(')')?;
        Ok(args)
    }

    fn primary(&mut self) -> PResult<Node> {
        let (tok, pos) = self.advance();
        match tok {
            Tok::Num(v) => Ok(Node::Num(v)),
            Tok::Int(k) => Ok(Node::Num(k as f64)),
            Tok::Sym('(') => {
                let inner = self.expr()?;
                self.expect(')')?;
                Ok(inner)
            }
            Tok::Ident(name) => self.identifier(name, pos),
            Tok::End => Err(ParseError {
                pos,
                kind: ParseErrorKind::Syntax("unexpected end of input".into()),
            }),
            other => Err(ParseError {
                pos,
                kind: ParseErrorKind::Syntax(format!("unexpected {}", Self::describe(&other))),
            }),
        }
    }

    fn identifier(&mut self, name: String, pos: Pos) -> PResult<Node> {
        if name == "rank" {
            self.expect('(')?;
            let kpos = self.pos();
            let k = match self.advance().0 {
                Tok::Int(k) if k >= 1 => k,
                _ => {
                    return Err(ParseError {
                        pos: kpos,
                        kind: ParseErrorKind::NonLiteralRank,
                    })
                }
            };
            self.expect(';')?;
            let args = self.args()?;
            if k > args.len() {
                return Err(ParseError {
                    pos,
                    kind: ParseErrorKind::Arity {
                        name,
                        expected: format!("at least {k} arguments for rank {k}"),
                        found: args.len(),
                    },
                });
            }
            return Ok(Node::Rank(k, args));
        }
        if let Some(func) = Func::from_name(&name) {
            self.expect('(')?;
            let args = self.args()?;
            let ok = match func.arity() {
                Some(n) => args.len() == n,
                None => !args.is_empty(),
            };
            if !ok {
                let expected = match func.arity() {
                    Some(1) => "1 argument".to_string(),
                    Some(n) => format!("{n} arguments"),
                    None => "at least 1 argument".to_string(),
                };
                return Err(ParseError {
                    pos,
                    kind: ParseErrorKind::Arity {
                        name,
                        expected,
                        found: args.len(),
                    },
                });
            }
            return Ok(Node::Call(func, args));
        }
        if name == "pi" {
            return Ok(Node::Pi);
        }
        match (self.scope, name.as_str()) {
            (Scope::Scalar, "x") => Ok(Node::Var(Var::X)),
            (Scope::Scalar, "n") => Ok(Node::Var(Var::N)),
            (Scope::Block { arity }, _) => match block_var(&name) {
                Some(j) if j <= arity => Ok(Node::Var(Var::Y(j))),
                Some(j) => Err(ParseError {
                    pos,
                    kind: ParseErrorKind::Arity {
                        name: name.clone(),
                        expected: format!("a variable among y1..y{arity}"),
                        found: j,
                    },
                }),
                None => Err(ParseError {
                    pos,
                    kind: ParseErrorKind::UnknownIdentifier(name),
                }),
            },
            _ => Err(ParseError {
                pos,
                kind: ParseErrorKind::UnknownIdentifier(name),
            }),
        }
    }
}

/// `y3` or `y_3` -> 3.
fn block_var(name: &str) -> Option<usize> {
    let digits = name.strip_prefix('y')?;
    let digits = digits.strip_prefix('_').unwrap_or(digits);
    if digits.is_empty() || !digits.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    match digits.parse::<usize>() {
        Ok(j) if j >= 1 => Some(j),
        _ => None,
    }
}

pub fn parse(src: &str, scope: Scope) -> Result<Node, ParseError> {
    let toks = Lexer::new(src).tokens()?;
    let mut p = Parser {
        toks,
        at: 0,
        scope,
    };
    let node = p.expr()?;
    if *p.peek() != Tok::End {
        let found = Parser::describe(p.peek());
        return p.syntax(format!("unexpected {found} after expression"));
    }
    Ok(node)
}
