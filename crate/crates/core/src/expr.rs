//! Recursive-descent parser for single-variable real expressions.
//!
//! ```text
//! expr   := term (('+' | '-') term)*
//! term   := factor (('*' | '/') factor)*
//! factor := base ('^' factor)?
//! base   := number | VAR | '(' expr ')' | func '(' expr ')'
//! func   := sin | cos | exp | abs | sqrt
//! ```
//!
//! `VAR` is `x` for operator inputs and `n` for sequence schemes. Error
//! positions are 1-based character offsets.

use std::fmt;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
}

impl BinOp {
    fn symbol(self) -> char {
        match self {
            BinOp::Add => '+',
            BinOp::Sub => '-',
            BinOp::Mul => '*',
            BinOp::Div => '/',
            BinOp::Pow => '^',
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Func {
    Sin,
    Cos,
    Exp,
    Abs,
    Sqrt,
}

impl Func {
    const ALL: [Func; 5] = [Func::Sin, Func::Cos, Func::Exp, Func::Abs, Func::Sqrt];

    pub fn name(self) -> &'static str {
        match self {
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Exp => "exp",
            Func::Abs => "abs",
            Func::Sqrt => "sqrt",
        }
    }

    fn from_name(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|f| f.name() == name)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Node {
    Number(f64),
    Var,
    Binary(BinOp, Box<Node>, Box<Node>),
    Call(Func, Box<Node>),
}

impl Node {
    pub fn eval(&self, v: f64) -> Result<f64> {
        let out = match self {
            Node::Number(c) => *c,
            Node::Var => v,
            Node::Binary(op, l, r) => {
                let (a, b) = (l.eval(v)?, r.eval(v)?);
                match op {
                    BinOp::Add => a + b,
                    BinOp::Sub => a - b,
                    BinOp::Mul => a * b,
                    BinOp::Div => {
                        if b == 0.0 {
                            return Err(domain(v, "division by zero"));
                        }
                        a / b
                    }
                    BinOp::Pow => {
                        let r = a.powf(b);
                        if r.is_nan() {
                            return Err(domain(v, format!("{a}^{b} is undefined")));
                        }
                        r
                    }
                }
            }
            Node::Call(f, arg) => {
                let a = arg.eval(v)?;
                match f {
                    Func::Sin => a.sin(),
                    Func::Cos => a.cos(),
                    Func::Exp => a.exp(),
                    Func::Abs => a.abs(),
                    Func::Sqrt => {
                        if a < 0.0 {
                            return Err(domain(v, "sqrt of a negative value"));
                        }
                        a.sqrt()
                    }
                }
            }
        };
        if out.is_finite() {
            Ok(out)
        } else {
            Err(domain(v, "non-finite result"))
        }
    }

    fn write(&self, var: &str, out: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Node::Number(c) => write!(out, "{c}"),
            Node::Var => out.write_str(var),
            Node::Binary(op, l, r) => {
                out.write_str("(")?;
                l.write(var, out)?;
                write!(out, " {} ", op.symbol())?;
                r.write(var, out)?;
                out.write_str(")")
            }
            Node::Call(f, a) => {
                write!(out, "{}(", f.name())?;
                a.write(var, out)?;
                out.write_str(")")
            }
        }
    }
}

fn domain(at: f64, reason: impl Into<String>) -> Error {
    Error::Domain {
        at,
        reason: reason.into(),
    }
}

/// A parsed expression in one free variable.
#[derive(Debug, Clone, PartialEq)]
pub struct Expression {
    root: Node,
    var: String,
}

impl Expression {
    /// Parses `text` with free variable `x`.
    pub fn parse(text: &str) -> Result<Self> {
        Self::parse_in(text, "x")
    }

    pub fn parse_in(text: &str, var: &str) -> Result<Self> {
        let mut parser = Parser {
            chars: text.chars().collect(),
            pos: 0,
            var,
        };
        parser.skip_ws();
        if parser.at_end() {
            return Err(parser.error("empty expression"));
        }
        let root = parser.expr()?;
        parser.skip_ws();
        if !parser.at_end() {
            return Err(parser.error(format!("unexpected '{}'", parser.chars[parser.pos])));
        }
        Ok(Self {
            root,
            var: var.to_string(),
        })
    }

    pub fn from_node(root: Node, var: &str) -> Self {
        Self {
            root,
            var: var.to_string(),
        }
    }

    pub fn root(&self) -> &Node {
        &self.root
    }

    pub fn var(&self) -> &str {
        &self.var
    }

    pub fn eval(&self, v: f64) -> Result<f64> {
        self.root.eval(v)
    }
}

impl fmt::Display for Expression {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.root.write(&self.var, f)
    }
}

struct Parser<'a> {
    chars: Vec<char>,
    pos: usize,
    var: &'a str,
}

impl Parser<'_> {
    fn at_end(&self) -> bool {
        self.pos >= self.chars.len()
    }

    fn peek(&self) -> Option<char> {
        self.chars.get(self.pos).copied()
    }

    fn skip_ws(&mut self) {
        while self.peek().is_some_and(char::is_whitespace) {
            self.pos += 1;
        }
    }

    fn error(&self, message: impl Into<String>) -> Error {
        Error::Syntax {
            position: self.pos + 1,
            message: message.into(),
        }
    }

    fn eat(&mut self, c: char) -> bool {
        self.skip_ws();
        if self.peek() == Some(c) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expr(&mut self) -> Result<Node> {
        let mut lhs = self.term()?;
        loop {
            let op = if self.eat('+') {
                BinOp::Add
            } else if self.eat('-') {
                BinOp::Sub
            } else {
                return Ok(lhs);
            };
            let rhs = self.term()?;
            lhs = Node::Binary(op, Box::new(lhs), Box::new(rhs));
        }
    }

    fn term(&mut self) -> Result<Node> {
        let mut lhs = self.factor()?;
        loop {
            let op = if self.eat('*') {
                BinOp::Mul
            } else if self.eat('/') {
                BinOp::Div
            } else {
                return Ok(lhs);
            };
            let rhs = self.factor()?;
            lhs = Node::Binary(op, Box::new(lhs), Box::new(rhs));
        }
    }

    fn factor(&mut self) -> Result<Node> {
        let base = self.base()?;
        if self.eat('^') {
            let exponent = self.factor()?;
            return Ok(Node::Binary(BinOp::Pow, Box::new(base), Box::new(exponent)));
        }
        Ok(base)
    }

    fn base(&mut self) -> Result<Node> {
        self.skip_ws();
        match self.peek() {
            None => Err(self.error("unexpected end of input")),
            Some('(') => {
                self.pos += 1;
                let inner = self.expr()?;
                if !self.eat(')') {
                    return Err(self.error("expected ')'"));
                }
                Ok(inner)
            }
            Some(c) if c.is_ascii_digit() || c == '.' => self.number(),
            Some(c) if c.is_alphabetic() || c == '_' => self.identifier(),
            Some(c) => Err(self.error(format!("unexpected '{c}'"))),
        }
    }

    fn number(&mut self) -> Result<Node> {
        let start = self.pos;
        let digits = |p: &mut Self| {
            let s = p.pos;
            while p.peek().is_some_and(|c| c.is_ascii_digit()) {
                p.pos += 1;
            }
            p.pos - s
        };
        let mut count = digits(self);
        if self.peek() == Some('.') {
            self.pos += 1;
            count += digits(self);
        }
        if count == 0 {
            self.pos = start;
            return Err(self.error("malformed number"));
        }
        if matches!(self.peek(), Some('e' | 'E')) {
            let mark = self.pos;
            self.pos += 1;
            if matches!(self.peek(), Some('+' | '-')) {
                self.pos += 1;
            }
            if digits(self) == 0 {
                self.pos = mark;
                return Err(self.error("malformed exponent"));
            }
        }
        let text: String = self.chars[start..self.pos].iter().collect();
        let value: f64 = text.parse().map_err(|_| Error::Syntax {
            position: start + 1,
            message: format!("malformed number '{text}'"),
        })?;
        if !value.is_finite() {
            return Err(Error::Syntax {
                position: start + 1,
                message: format!("number '{text}' is out of range"),
            });
        }
        Ok(Node::Number(value))
    }

    fn identifier(&mut self) -> Result<Node> {
        let start = self.pos;
        while self.peek().is_some_and(|c| c.is_alphanumeric() || c == '_') {
            self.pos += 1;
        }
        let name: String = self.chars[start..self.pos].iter().collect();
        if name == self.var {
            return Ok(Node::Var);
        }
        if let Some(func) = Func::from_name(&name) {
            if !self.eat('(') {
                return Err(self.error(format!("expected '(' after {name}")));
            }
            let arg = self.expr()?;
            if !self.eat(')') {
                return Err(self.error("expected ')'"));
            }
            return Ok(Node::Call(func, Box::new(arg)));
        }
        Err(Error::UnknownIdentifier {
            name,
            position: start + 1,
        })
    }
}
