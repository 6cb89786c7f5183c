//! The field expression language.
//!
//! ```text
//! expr    := term (('+' | '-') term)*
//! term    := unary (('*' | '/') unary)*
//! unary   := '-' unary | power
//! power   := primary ('^' unary)?
//! primary := number | name | name '(' expr (',' expr)* ')' | '(' expr ')'
//! ```
//!
//! `^` is right-associative and binds tighter than unary minus, so `-x1^2`
//! is `-(x1^2)` while `2^-1` is still accepted.

use std::fmt;
use std::sync::Arc;

use thiserror::Error;

use crate::calculus::{EPoint, Field, Jet, JetPoint, Scalar, SmoothField};
use crate::error::EvalError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Var {
    /// Base coordinate, 0-based (`x1` is `X(0)`).
    X(usize),
    Y,
    T,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Constant {
    Pi,
    E,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Func {
    Sin,
    Cos,
    Tan,
    Exp,
    Log,
    Sqrt,
    Abs,
    Pow,
}

impl Func {
    fn lookup(name: &str) -> Option<Func> {
        Some(match name {
            "sin" => Func::Sin,
            "cos" => Func::Cos,
            "tan" => Func::Tan,
            "exp" => Func::Exp,
            "log" => Func::Log,
            "sqrt" => Func::Sqrt,
            "abs" => Func::Abs,
            "pow" => Func::Pow,
            _ => return None,
        })
    }

    pub fn name(self) -> &'static str {
        match self {
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Tan => "tan",
            Func::Exp => "exp",
            Func::Log => "log",
            Func::Sqrt => "sqrt",
            Func::Abs => "abs",
            Func::Pow => "pow",
        }
    }

    pub fn arity(self) -> usize {
        if self == Func::Pow {
            2
        } else {
            1
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Num(f64),
    Const(Constant),
    Var(Var),
    Neg(Box<Expr>),
    Bin(BinOp, Box<Expr>, Box<Expr>),
    Call(Func, Vec<Expr>),
}

/// Which variables an expression may mention.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Scope {
    pub base_dim: usize,
    pub fiber: bool,
    pub time: bool,
}

impl Scope {
    /// Fields on E: x1..xm and y0.
    pub fn total(m: usize) -> Self {
        Scope { base_dim: m, fiber: true, time: false }
    }

    /// Fields on M: x1..xm only.
    pub fn base(m: usize) -> Self {
        Scope { base_dim: m, fiber: false, time: false }
    }

    /// Curve coordinates: t only.
    pub fn curve() -> Self {
        Scope { base_dim: 0, fiber: false, time: true }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("parse error at byte {offset}: expected {expected}, found {found}")]
pub struct ParseError {
    pub offset: usize,
    pub expected: String,
    pub found: String,
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Op(char),
    End,
}

impl fmt::Display for Tok {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Tok::Num(v) => write!(f, "number {v}"),
            Tok::Ident(s) => write!(f, "`{s}`"),
            Tok::Op(c) => write!(f, "`{c}`"),
            Tok::End => f.write_str("end of input"),
        }
    }
}

fn lex(src: &str) -> Result<Vec<(Tok, usize)>, ParseError> {
    let bytes = src.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i];
        if c.is_ascii_whitespace() {
            i += 1;
        } else if c.is_ascii_digit() || (c == b'.' && bytes.get(i + 1).is_some_and(u8::is_ascii_digit)) {
            let start = i;
            while i < bytes.len() && (bytes[i].is_ascii_digit() || bytes[i] == b'.') {
                i += 1;
            }
            if i < bytes.len() && (bytes[i] == b'e' || bytes[i] == b'E') {
                let mut j = i + 1;
                if j < bytes.len() && (bytes[j] == b'+' || bytes[j] == b'-') {
                    j += 1;
                }
                if j < bytes.len() && bytes[j].is_ascii_digit() {
                    while j < bytes.len() && bytes[j].is_ascii_digit() {
                        j += 1;
                    }
                    i = j;
                }
            }
            let text = &src[start..i];
            let v = text.parse::<f64>().map_err(|_| ParseError {
                offset: start,
                expected: "a number".into(),
                found: format!("`{text}`"),
            })?;
            out.push((Tok::Num(v), start));
        } else if c.is_ascii_alphabetic() || c == b'_' {
            let start = i;
            while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                i += 1;
            }
            out.push((Tok::Ident(src[start..i].to_string()), start));
        } else if b"+-*/^(),".contains(&c) {
            out.push((Tok::Op(c as char), i));
            i += 1;
        } else {
            let ch = src[i..].chars().next().unwrap_or('?');
            return Err(ParseError { offset: i, expected: "a token".into(), found: format!("`{ch}`") });
        }
    }
    out.push((Tok::End, src.len()));
    Ok(out)
}

struct Parser {
    toks: Vec<(Tok, usize)>,
    pos: usize,
    scope: Scope,
}

impl Parser {
    fn peek(&self) -> &Tok {
        &self.toks[self.pos].0
    }

    fn offset(&self) -> usize {
        self.toks[self.pos].1
    }

    fn error(&self, expected: &str) -> ParseError {
        ParseError { offset: self.offset(), expected: expected.into(), found: self.peek().to_string() }
    }

    fn eat(&mut self, c: char) -> bool {
        if *self.peek() == Tok::Op(c) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expect(&mut self, c: char) -> Result<(), ParseError> {
        if self.eat(c) {
            Ok(())
        } else {
            Err(self.error(&format!("`{c}`")))
        }
    }

    fn expr(&mut self) -> Result<Expr, ParseError> {
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
            lhs = Expr::Bin(op, Box::new(lhs), Box::new(rhs));
        }
    }

    fn term(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.unary()?;
        loop {
            let op = if self.eat('*') {
                BinOp::Mul
            } else if self.eat('/') {
                BinOp::Div
            } else {
                return Ok(lhs);
            };
            let rhs = self.unary()?;
            lhs = Expr::Bin(op, Box::new(lhs), Box::new(rhs));
        }
    }

    fn unary(&mut self) -> Result<Expr, ParseError> {
        if self.eat('-') {
            Ok(Expr::Neg(Box::new(self.unary()?)))
        } else {
            self.power()
        }
    }

    fn power(&mut self) -> Result<Expr, ParseError> {
        let base = self.primary()?;
        if self.eat('^') {
            let exp = self.unary()?;
            Ok(Expr::Bin(BinOp::Pow, Box::new(base), Box::new(exp)))
        } else {
            Ok(base)
        }
    }

    fn primary(&mut self) -> Result<Expr, ParseError> {
        let start = self.offset();
        match self.peek().clone() {
            Tok::Num(v) => {
                self.pos += 1;
                Ok(Expr::Num(v))
            }
            Tok::Op('(') => {
                self.pos += 1;
                let e = self.expr()?;
                self.expect(')')?;
                Ok(e)
            }
            Tok::Ident(name) => {
                self.pos += 1;
                if let Some(func) = Func::lookup(&name) {
                    self.expect('(')?;
                    let mut args = vec![self.expr()?];
                    while self.eat(',') {
                        args.push(self.expr()?);
                    }
                    if args.len() != func.arity() {
                        return Err(ParseError {
                            offset: start,
                            expected: format!("{} argument(s) to {}", func.arity(), func.name()),
                            found: format!("{}", args.len()),
                        });
                    }
                    self.expect(')')?;
                    return Ok(Expr::Call(func, args));
                }
                self.name(&name, start)
            }
            _ => Err(self.error("an operand")),
        }
    }

    fn name(&self, name: &str, offset: usize) -> Result<Expr, ParseError> {
        let unknown = |expected: String| ParseError { offset, expected, found: format!("`{name}`") };
        match name {
            "pi" => return Ok(Expr::Const(Constant::Pi)),
            "e" => return Ok(Expr::Const(Constant::E)),
            "y0" if self.scope.fiber => return Ok(Expr::Var(Var::Y)),
            "t" if self.scope.time => return Ok(Expr::Var(Var::T)),
            "y0" | "t" => return Err(unknown(format!("a variable allowed here ({})", self.scope_vars()))),
            _ => {}
        }
        if let Some(digits) = name.strip_prefix('x') {
            if !digits.is_empty() && digits.bytes().all(|b| b.is_ascii_digit()) && !digits.starts_with('0') {
                let i: usize = digits.parse().unwrap_or(usize::MAX);
                if (1..=self.scope.base_dim).contains(&i) {
                    return Ok(Expr::Var(Var::X(i - 1)));
                }
                return Err(unknown(format!("a variable allowed here ({})", self.scope_vars())));
            }
        }
        Err(unknown("a variable, constant or function name".into()))
    }

    fn scope_vars(&self) -> String {
        let mut v = Vec::new();
        if self.scope.base_dim > 0 {
            v.push(format!("x1..x{}", self.scope.base_dim));
        }
        if self.scope.fiber {
            v.push("y0".into());
        }
        if self.scope.time {
            v.push("t".into());
        }
        if v.is_empty() {
            "none".into()
        } else {
            v.join(", ")
        }
    }
}

/// Parse a field on E with base dimension `m`.
pub fn parse(src: &str, m: usize) -> Result<Expr, ParseError> {
    parse_in(src, Scope::total(m))
}

pub fn parse_in(src: &str, scope: Scope) -> Result<Expr, ParseError> {
    let mut p = Parser { toks: lex(src)?, pos: 0, scope };
    let e = p.expr()?;
    if *p.peek() != Tok::End {
        return Err(p.error("an operator or end of input"));
    }
    Ok(e)
}

/// Variable bindings for evaluation.
pub struct Env<'a, S> {
    pub x: &'a [S],
    pub y: Option<S>,
    pub t: Option<S>,
}

fn checked<S: Scalar>(v: S, op: &'static str) -> Result<S, EvalError> {
    if v.all_finite() {
        Ok(v)
    } else {
        Err(EvalError::NonFinite { op })
    }
}

fn power<S: Scalar>(a: S, b: S) -> Result<S, EvalError> {
    let (av, bv) = (a.value(), b.value());
    if av < 0.0 && !(b.is_constant() && bv.fract() == 0.0) {
        return Err(EvalError::Domain { op: "pow", arg: av });
    }
    if av == 0.0 && (!b.is_constant() || bv < 0.0) {
        return Err(EvalError::Domain { op: "pow", arg: av });
    }
    checked(a.pow(b), "pow")
}

impl Expr {
    pub fn eval<S: Scalar>(&self, env: &Env<'_, S>) -> Result<S, EvalError> {
        match self {
            Expr::Num(v) => Ok(S::from_f64(*v)),
            Expr::Const(Constant::Pi) => Ok(S::from_f64(std::f64::consts::PI)),
            Expr::Const(Constant::E) => Ok(S::from_f64(std::f64::consts::E)),
            Expr::Var(Var::X(i)) => env.x.get(*i).copied().ok_or(EvalError::Unbound("x")),
            Expr::Var(Var::Y) => env.y.ok_or(EvalError::Unbound("y0")),
            Expr::Var(Var::T) => env.t.ok_or(EvalError::Unbound("t")),
            Expr::Neg(a) => Ok(-a.eval(env)?),
            Expr::Bin(op, a, b) => {
                let a = a.eval(env)?;
                let b = b.eval(env)?;
                match op {
                    BinOp::Add => checked(a + b, "+"),
                    BinOp::Sub => checked(a - b, "-"),
                    BinOp::Mul => checked(a * b, "*"),
                    BinOp::Div => {
                        if b.value() == 0.0 {
                            return Err(EvalError::DivisionByZero);
                        }
                        checked(a / b, "/")
                    }
                    BinOp::Pow => power(a, b),
                }
            }
            Expr::Call(f, args) => {
                let a = args[0].eval(env)?;
                let v = a.value();
                match f {
                    Func::Sin => checked(a.sin(), "sin"),
                    Func::Cos => checked(a.cos(), "cos"),
                    Func::Tan => checked(a.tan(), "tan"),
                    Func::Exp => checked(a.exp(), "exp"),
                    Func::Log => {
                        if v <= 0.0 {
                            return Err(EvalError::Domain { op: "log", arg: v });
                        }
                        checked(a.ln(), "log")
                    }
                    Func::Sqrt => {
                        if v < 0.0 || (v == 0.0 && !a.is_constant()) {
                            return Err(EvalError::Domain { op: "sqrt", arg: v });
                        }
                        checked(a.sqrt(), "sqrt")
                    }
                    Func::Abs => {
                        if v == 0.0 && !a.is_constant() {
                            return Err(EvalError::Domain { op: "abs", arg: v });
                        }
                        Ok(a.abs())
                    }
                    Func::Pow => power(a, args[1].eval(env)?),
                }
            }
        }
    }

    /// Whether `var` appears anywhere in the tree.
    pub fn uses(&self, var: Var) -> bool {
        match self {
            Expr::Var(v) => *v == var,
            Expr::Num(_) | Expr::Const(_) => false,
            Expr::Neg(a) => a.uses(var),
            Expr::Bin(_, a, b) => a.uses(var) || b.uses(var),
            Expr::Call(_, args) => args.iter().any(|a| a.uses(var)),
        }
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Num(v) => write!(f, "{v:?}"),
            Expr::Const(Constant::Pi) => f.write_str("pi"),
            Expr::Const(Constant::E) => f.write_str("e"),
            Expr::Var(Var::X(i)) => write!(f, "x{}", i + 1),
            Expr::Var(Var::Y) => f.write_str("y0"),
            Expr::Var(Var::T) => f.write_str("t"),
            Expr::Neg(a) => write!(f, "(-{a})"),
            Expr::Bin(op, a, b) => {
                let sym = match op {
                    BinOp::Add => "+",
                    BinOp::Sub => "-",
                    BinOp::Mul => "*",
                    BinOp::Div => "/",
                    BinOp::Pow => "^",
                };
                write!(f, "({a} {sym} {b})")
            }
            Expr::Call(func, args) => {
                write!(f, "{}(", func.name())?;
                for (k, a) in args.iter().enumerate() {
                    if k > 0 {
                        f.write_str(", ")?;
                    }
                    write!(f, "{a}")?;
                }
                f.write_str(")")
            }
        }
    }
}

/// A parsed expression viewed as a smooth field on E.
#[derive(Debug, Clone)]
pub struct ExprField {
    expr: Expr,
}

impl ExprField {
    pub fn expr(&self) -> &Expr {
        &self.expr
    }
}

impl SmoothField for ExprField {
    fn eval(&self, p: &JetPoint) -> Result<Jet, EvalError> {
        self.expr.eval(&Env { x: &p.x, y: Some(p.y), t: None })
    }

    fn value(&self, p: &EPoint) -> Result<f64, EvalError> {
        self.expr.eval(&Env { x: &p.x, y: Some(p.y), t: None })
    }
}

pub fn eval_field(e: Expr) -> Field {
    Arc::new(ExprField { expr: e })
}

/// Parse and wrap in one step.
pub fn field(src: &str, m: usize) -> Result<Field, ParseError> {
    parse(src, m).map(eval_field)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::calculus::{fd_partial, partial, Axis};

    fn at(e: &str, x: &[f64], y: f64) -> f64 {
        let f = field(e, x.len()).unwrap();
        f.value(&EPoint::new(x.to_vec(), y)).unwrap()
    }

    #[test]
    fn spec_examples() {
        assert_eq!(at("2*x1 + sin(y0)", &[1.0], 0.0), 2.0);
        assert_eq!(at("x1^2^3", &[1.0], 0.0), 1.0);
        assert_eq!(at("x1^2^3", &[2.0], 0.0), 256.0);
        let err = parse("1+*2", 1).unwrap_err();
        assert_eq!(err.offset, 2);
        assert_eq!(at("pi", &[0.3], 0.7), std::f64::consts::PI);
    }

    #[test]
    fn precedence() {
        assert_eq!(at("-x1^2", &[3.0], 0.0), -9.0);
        assert_eq!(at("2^-1", &[], 0.0), 0.5);
        assert_eq!(at("1 - 2 - 3", &[], 0.0), -4.0);
        assert_eq!(at("8 / 4 / 2", &[], 0.0), 1.0);
        assert_eq!(at("2 + 3 * 4", &[], 0.0), 14.0);
        assert_eq!(at("-2 * -3", &[], 0.0), 6.0);
        assert_eq!(at("pow(2, 10)", &[], 0.0), 1024.0);
        assert_eq!(at("e", &[], 0.0), std::f64::consts::E);
        assert_eq!(at("1.5e1 + .5", &[], 0.0), 15.5);
    }

    #[test]
    fn derivative_examples() {
        let p = EPoint::new(vec![0.0, 0.4], 1.0);
        let f = field("x2", 2).unwrap();
        assert_eq!(partial(f.as_ref(), &p, Axis::X(1)).unwrap(), 1.0);
        let f = field("exp(2*x1)", 2).unwrap();
        let d = partial(f.as_ref(), &p, Axis::X(0)).unwrap();
        assert_eq!(d, 2.0);
        assert!((fd_partial(f.as_ref(), &p, Axis::X(0), 1e-5).unwrap() - d).abs() < 1e-8);
    }

    #[test]
    fn rejects_bad_names_and_arity() {
        assert_eq!(parse("x3", 2).unwrap_err().offset, 0);
        assert_eq!(parse("1 + foo", 2).unwrap_err().offset, 4);
        assert!(parse("x0", 2).is_err());
        assert!(parse("pow(1)", 2).is_err());
        assert!(parse("sin(1, 2)", 2).is_err());
        assert!(parse_in("y0", Scope::base(2)).is_err());
        assert!(parse_in("x1", Scope::curve()).is_err());
        assert!(parse_in("t^2", Scope::curve()).is_ok());
        assert_eq!(parse("(1", 1).unwrap_err().offset, 2);
        assert_eq!(parse("1 2", 1).unwrap_err().offset, 2);
        assert_eq!(parse("", 1).unwrap_err().offset, 0);
        assert_eq!(parse("2 $ 3", 1).unwrap_err().offset, 2);
    }

    #[test]
    fn domain_errors() {
        let p = EPoint::new(vec![0.0], 1.0);
        let f = field("1/x1", 1).unwrap();
        assert_eq!(f.value(&p).unwrap_err(), EvalError::DivisionByZero);
        let f = field("log(x1)", 1).unwrap();
        assert!(matches!(f.value(&p), Err(EvalError::Domain { op: "log", .. })));
        let f = field("log(-1)", 1).unwrap();
        assert!(f.value(&p).is_err());
        let f = field("sqrt(x1 - 1)", 1).unwrap();
        assert!(f.value(&p).is_err());
        let f = field("(-2)^0.5", 1).unwrap();
        assert!(f.value(&p).is_err());
        assert_eq!(field("(-2)^3", 1).unwrap().value(&p).unwrap(), -8.0);
        assert!(field("exp(1000)", 1).unwrap().value(&p).is_err());
    }

    #[test]
    fn pow_forms_agree() {
        let p = EPoint::new(vec![0.7], 1.3);
        let a = field("pow(x1, y0)", 1).unwrap();
        let b = field("x1^y0", 1).unwrap();
        assert_eq!(a.value(&p).unwrap(), b.value(&p).unwrap());
        for ax in [Axis::X(0), Axis::Fiber] {
            assert_eq!(partial(a.as_ref(), &p, ax).unwrap(), partial(b.as_ref(), &p, ax).unwrap());
        }
    }

    #[test]
    fn pretty_print_is_parenthesized() {
        let e = parse("-x1^2 + 3*sin(y0)/2", 1).unwrap();
        assert_eq!(e.to_string(), "((-(x1 ^ 2.0)) + ((3.0 * sin(y0)) / 2.0))");
        assert_eq!(parse(&e.to_string(), 1).unwrap(), e);
    }
}
