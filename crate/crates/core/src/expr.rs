//! Scalar expressions in the coordinates `(t, x, y)`.
//!
//! Grammar, loosest binding first:
//!
//! ```text
//! expr    := term (('+' | '-') term)*
//! term    := unary (('*' | '/') unary)*
//! unary   := '-' unary | power
//! power   := primary ('^' unary)?          right associative, constant exponent
//! primary := number | coord | const | func '(' expr ')' | '(' expr ')'
//! ```
//!
//! Functions: `exp`, `log` (alias `ln`), `sin`, `cos`, `sqrt`, `abs`.
//! Named constants: `pi`, `e`.

use std::collections::BTreeSet;
use std::fmt;
use std::ops::{Add, Div, Mul, Neg, Sub};

use thiserror::Error;

use crate::jets::{Jet, JetError, Scalar};
use crate::point::{Coord, Point};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Func {
    Exp,
    Log,
    Sin,
    Cos,
    Sqrt,
    Abs,
}

impl Func {
    fn name(self) -> &'static str {
        match self {
            Func::Exp => "exp",
            Func::Log => "log",
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Sqrt => "sqrt",
            Func::Abs => "abs",
        }
    }

    fn from_name(s: &str) -> Option<Func> {
        Some(match s {
            "exp" => Func::Exp,
            "log" | "ln" => Func::Log,
            "sin" => Func::Sin,
            "cos" => Func::Cos,
            "sqrt" => Func::Sqrt,
            "abs" => Func::Abs,
            _ => return None,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    /// The right operand is always a constant subexpression.
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

    fn precedence(self) -> u8 {
        match self {
            BinOp::Add | BinOp::Sub => 1,
            BinOp::Mul | BinOp::Div => 2,
            BinOp::Pow => 4,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Num(f64),
    Var(Coord),
    Neg(Box<Expr>),
    Call(Func, Box<Expr>),
    Bin(BinOp, Box<Expr>, Box<Expr>),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("parse error at {position}: {message}")]
pub struct ParseError {
    pub position: usize,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Error)]
#[error("cannot evaluate `{subexpr}`: {source}")]
pub struct EvalError {
    pub subexpr: String,
    #[source]
    pub source: JetError,
}

impl Expr {
    pub fn num(v: f64) -> Expr {
        Expr::Num(v)
    }

    pub fn var(c: Coord) -> Expr {
        Expr::Var(c)
    }

    pub fn call(f: Func, arg: Expr) -> Expr {
        Expr::Call(f, Box::new(arg))
    }

    pub fn exp(self) -> Expr {
        Expr::call(Func::Exp, self)
    }

    pub fn pow(self, exponent: f64) -> Expr {
        let e = if exponent < 0.0 { -Expr::Num(-exponent) } else { Expr::Num(exponent) };
        Expr::Bin(BinOp::Pow, Box::new(self), Box::new(e))
    }

    /// Coordinates referenced anywhere in the tree.
    pub fn variables(&self) -> BTreeSet<Coord> {
        let mut out = BTreeSet::new();
        self.collect_vars(&mut out);
        out
    }

    fn collect_vars(&self, out: &mut BTreeSet<Coord>) {
        match self {
            Expr::Num(_) => {}
            Expr::Var(c) => {
                out.insert(*c);
            }
            Expr::Neg(a) | Expr::Call(_, a) => a.collect_vars(out),
            Expr::Bin(_, a, b) => {
                a.collect_vars(out);
                b.collect_vars(out);
            }
        }
    }

    pub fn is_constant(&self) -> bool {
        self.variables().is_empty()
    }

    /// Value at a point.
    pub fn eval(&self, p: &Point) -> Result<f64, EvalError> {
        Ok(self.eval_jet(p, 0)?.value())
    }

    /// All partial derivatives at `p` up to total degree `order`.
    pub fn eval_jet(&self, p: &Point, order: usize) -> Result<Jet, EvalError> {
        self.eval_jet_in(p, order)
    }

    /// [`Expr::eval_jet`] over any scalar type.
    pub fn eval_jet_in<S: Scalar>(&self, p: &Point, order: usize) -> Result<Jet<S>, EvalError> {
        let wrap = |e: &Expr, source: JetError| EvalError { subexpr: e.to_string(), source };
        match self {
            Expr::Num(v) => Ok(Jet::constant(S::of(*v), order)),
            Expr::Var(c) => Ok(Jet::variable(*c, S::of(p.get(*c)), order)),
            Expr::Neg(a) => Ok(-a.eval_jet_in(p, order)?),
            Expr::Call(f, a) => {
                let j = a.eval_jet_in(p, order)?;
                match f {
                    Func::Exp => Ok(j.exp()),
                    Func::Sin => Ok(j.sin()),
                    Func::Cos => Ok(j.cos()),
                    Func::Log => j.ln(),
                    Func::Sqrt => j.sqrt(),
                    Func::Abs => j.abs(),
                }
                .map_err(|e| wrap(self, e))
            }
            Expr::Bin(op, a, b) => {
                let ja = a.eval_jet_in(p, order)?;
                if *op == BinOp::Pow {
                    let exponent = b.eval(p)?;
                    return pow_jet(&ja, exponent).map_err(|e| wrap(self, e));
                }
                let jb = b.eval_jet_in(p, order)?;
                match op {
                    BinOp::Add => Ok(&ja + &jb),
                    BinOp::Sub => Ok(&ja - &jb),
                    BinOp::Mul => Ok(&ja * &jb),
                    BinOp::Div => ja.checked_div(&jb).map_err(|e| wrap(self, e)),
                    BinOp::Pow => unreachable!(),
                }
            }
        }
    }

    fn precedence(&self) -> u8 {
        match self {
            Expr::Bin(op, _, _) => op.precedence(),
            Expr::Neg(_) => 3,
            Expr::Num(_) | Expr::Var(_) | Expr::Call(..) => 5,
        }
    }
}

/// Integer exponents use repeated multiplication (negative ones divide);
/// anything else goes through `exp(b * log(a))`, which needs `a > 0`.
fn pow_jet<S: Scalar>(base: &Jet<S>, exponent: f64) -> Result<Jet<S>, JetError> {
    if exponent.fract() == 0.0 && exponent.abs() <= u32::MAX as f64 {
        let pos = base.powi(exponent.abs() as u32);
        return if exponent >= 0.0 { Ok(pos) } else { pos.recip() };
    }
    let v = base.value().as_f64();
    if !(v > 0.0) {
        return Err(JetError::Domain { op: "pow", value: v });
    }
    Ok(base.ln()?.scale(S::of(exponent)).exp())
}

fn write_operand(f: &mut fmt::Formatter<'_>, e: &Expr, parens: bool) -> fmt::Result {
    if parens {
        write!(f, "({e})")
    } else {
        write!(f, "{e}")
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Num(v) => write!(f, "{v}"),
            Expr::Var(c) => write!(f, "{c}"),
            Expr::Neg(a) => {
                f.write_str("-")?;
                write_operand(f, a, a.precedence() < 3)
            }
            Expr::Call(func, a) => write!(f, "{}({a})", func.name()),
            Expr::Bin(op, a, b) => {
                let p = op.precedence();
                let (left_parens, right_parens) = if *op == BinOp::Pow {
                    (a.precedence() <= p, b.precedence() < 3)
                } else {
                    (a.precedence() < p, b.precedence() <= p)
                };
                write_operand(f, a, left_parens)?;
                let sep = if p == 1 { " " } else { "" };
                write!(f, "{sep}{}{sep}", op.symbol())?;
                write_operand(f, b, right_parens)
            }
        }
    }
}

impl Neg for Expr {
    type Output = Expr;
    fn neg(self) -> Expr {
        Expr::Neg(Box::new(self))
    }
}

macro_rules! expr_binop {
    ($tr:ident, $m:ident, $op:expr) => {
        impl $tr for Expr {
            type Output = Expr;
            fn $m(self, rhs: Expr) -> Expr {
                Expr::Bin($op, Box::new(self), Box::new(rhs))
            }
        }
    };
}

expr_binop!(Add, add, BinOp::Add);
expr_binop!(Sub, sub, BinOp::Sub);
expr_binop!(Mul, mul, BinOp::Mul);
expr_binop!(Div, div, BinOp::Div);

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Sym(char),
}

fn tokenize(text: &str) -> Result<Vec<(usize, Tok)>, ParseError> {
    let chars: Vec<char> = text.chars().collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        if c.is_whitespace() {
            i += 1;
        } else if c.is_ascii_digit() || (c == '.' && chars.get(i + 1).is_some_and(|d| d.is_ascii_digit())) {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_digit() || chars[i] == '.') {
                i += 1;
            }
            if i < chars.len() && (chars[i] == 'e' || chars[i] == 'E') {
                let mut j = i + 1;
                if j < chars.len() && (chars[j] == '+' || chars[j] == '-') {
                    j += 1;
                }
                if j < chars.len() && chars[j].is_ascii_digit() {
                    while j < chars.len() && chars[j].is_ascii_digit() {
                        j += 1;
                    }
                    i = j;
                }
            }
            let s: String = chars[start..i].iter().collect();
            let v = s.parse::<f64>().map_err(|_| ParseError {
                position: start,
                message: format!("malformed number `{s}`"),
            })?;
            out.push((start, Tok::Num(v)));
        } else if c.is_ascii_alphabetic() || c == '_' {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                i += 1;
            }
            out.push((start, Tok::Ident(chars[start..i].iter().collect())));
        } else if "+-*/^()".contains(c) {
            out.push((i, Tok::Sym(c)));
            i += 1;
        } else {
            return Err(ParseError { position: i, message: format!("unexpected character `{c}`") });
        }
    }
    Ok(out)
}

struct Parser<'a> {
    toks: Vec<(usize, Tok)>,
    pos: usize,
    end: usize,
    vars: &'a [Coord],
}

impl Parser<'_> {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|(_, t)| t)
    }

    fn here(&self) -> usize {
        self.toks.get(self.pos).map_or(self.end, |(p, _)| *p)
    }

    fn err<T>(&self, message: impl Into<String>) -> Result<T, ParseError> {
        Err(ParseError { position: self.here(), message: message.into() })
    }

    fn eat(&mut self, c: char) -> bool {
        if self.peek() == Some(&Tok::Sym(c)) {
            self.pos += 1;
            true
        } else {
            false
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
            lhs = Expr::Bin(op, Box::new(lhs), Box::new(self.term()?));
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
            lhs = Expr::Bin(op, Box::new(lhs), Box::new(self.unary()?));
        }
    }

    fn unary(&mut self) -> Result<Expr, ParseError> {
        if self.eat('-') {
            return Ok(-self.unary()?);
        }
        self.power()
    }

    fn power(&mut self) -> Result<Expr, ParseError> {
        let base = self.primary()?;
        if !self.eat('^') {
            return Ok(base);
        }
        let at = self.here();
        let exponent = self.unary()?;
        if !exponent.is_constant() {
            return Err(ParseError { position: at, message: "exponent must be a constant".into() });
        }
        Ok(Expr::Bin(BinOp::Pow, Box::new(base), Box::new(exponent)))
    }

    fn primary(&mut self) -> Result<Expr, ParseError> {
        let Some(tok) = self.peek().cloned() else {
            return self.err("expected an operand, found end of input");
        };
        match tok {
            Tok::Num(v) => {
                self.pos += 1;
                Ok(Expr::Num(v))
            }
            Tok::Sym('(') => {
                self.pos += 1;
                let inner = self.expr()?;
                if !self.eat(')') {
                    return self.err("expected `)`");
                }
                Ok(inner)
            }
            Tok::Sym(c) => self.err(format!("expected an operand, found `{c}`")),
            Tok::Ident(name) => {
                if let Some(func) = Func::from_name(&name) {
                    self.pos += 1;
                    if !self.eat('(') {
                        return self.err(format!("expected `(` after `{name}`"));
                    }
                    let arg = self.expr()?;
                    if !self.eat(')') {
                        return self.err("expected `)`");
                    }
                    return Ok(Expr::call(func, arg));
                }
                let value = match name.as_str() {
                    "pi" => Some(std::f64::consts::PI),
                    "e" => Some(std::f64::consts::E),
                    _ => None,
                };
                if let Some(v) = value {
                    self.pos += 1;
                    return Ok(Expr::Num(v));
                }
                match Coord::from_name(&name).filter(|c| self.vars.contains(c)) {
                    Some(c) => {
                        self.pos += 1;
                        Ok(Expr::Var(c))
                    }
                    None => self.err(format!("unknown identifier `{name}`")),
                }
            }
        }
    }
}

/// Parses `text`, accepting only the listed coordinates as variables.
pub fn parse(text: &str, vars: &[Coord]) -> Result<Expr, ParseError> {
    let toks = tokenize(text)?;
    let mut p = Parser { toks, pos: 0, end: text.chars().count(), vars };
    if p.peek().is_none() {
        return p.err("empty expression");
    }
    let e = p.expr()?;
    if p.eat(')') {
        p.pos -= 1;
        return p.err("unbalanced `)`");
    }
    if p.peek().is_some() {
        return p.err("unexpected trailing input");
    }
    Ok(e)
}

impl std::str::FromStr for Expr {
    type Err = ParseError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        parse(s, &Coord::ALL)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(s: &str) -> Expr {
        s.parse().unwrap()
    }

    #[test]
    fn grammar_cases() {
        assert_eq!(p("exp(2*x)"), Expr::call(Func::Exp, Expr::Num(2.0) * Expr::Var(Coord::X)));
        assert_eq!(p("x^2 + t"), Expr::Var(Coord::X).pow(2.0) + Expr::Var(Coord::T));
        assert_eq!(p("-x^2"), -(Expr::Var(Coord::X).pow(2.0)));
        assert_eq!(p("2^3^2").eval(&Point::ORIGIN).unwrap(), 512.0);
        assert_eq!(p("x^-1"), Expr::Var(Coord::X).pow(-1.0));
        assert_eq!(p("1 - 2 - 3").eval(&Point::ORIGIN).unwrap(), -4.0);
        assert_eq!(p("8 / 4 / 2").eval(&Point::ORIGIN).unwrap(), 1.0);
        assert_eq!(p("1.5e2 + .5").eval(&Point::ORIGIN).unwrap(), 150.5);
    }

    #[test]
    fn parse_errors_carry_positions() {
        let e = parse("x + * 2", &Coord::ALL).unwrap_err();
        assert_eq!(e.position, 4);
        assert_eq!(parse("(x + 1", &Coord::ALL).unwrap_err().position, 6);
        assert_eq!(parse("x + 1)", &Coord::ALL).unwrap_err().position, 5);
        assert!(parse("foo(x)", &Coord::ALL).unwrap_err().message.contains("unknown identifier"));
        assert!(parse("", &Coord::ALL).is_err());
        assert!(parse("x^t", &Coord::ALL).unwrap_err().message.contains("constant"));
        assert_eq!(parse("t + x", &[Coord::X]).unwrap_err().position, 0);
        assert!(parse("exp x", &Coord::ALL).is_err());
        assert_eq!(parse("x $ 1", &Coord::ALL).unwrap_err().position, 2);
    }

    #[test]
    fn jets_of_elementary_functions() {
        let j = p("x^2").eval_jet(&Point::new(0.0, 1.0, 0.0), 2).unwrap();
        assert_eq!(j.value(), 1.0);
        assert_eq!(j.pure(Coord::X, 1).unwrap(), 2.0);
        assert_eq!(j.pure(Coord::X, 2).unwrap(), 2.0);
        assert_eq!(j.pure(Coord::T, 1).unwrap(), 0.0);
        assert_eq!(j.pure(Coord::Y, 2).unwrap(), 0.0);

        let j = p("exp(x)").eval_jet(&Point::ORIGIN, 4).unwrap();
        for k in 0..=4 {
            assert!((j.pure(Coord::X, k).unwrap() - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn delta_of_exponential_f() {
        // exp(x) + exp(2x): k-th derivative at 0 is 1 + 2^k
        let e = p("exp(x) + exp(2*x)");
        let j = e.eval_jet(&Point::ORIGIN, 6).unwrap();
        let h = 1e-3;
        let at = |x: f64| e.eval(&Point::new(0.0, x, 0.0)).unwrap();
        for k in 0..=6 {
            let want = 1.0 + 2f64.powi(k as i32);
            assert!((j.pure(Coord::X, k).unwrap() - want).abs() < 1e-12 * want);
        }
        let fd2 = (at(h) - 2.0 * at(0.0) + at(-h)) / (h * h);
        assert!((fd2 - 5.0).abs() < 1e-5);
    }

    #[test]
    fn domain_errors_name_the_subexpression() {
        let err = p("1 + log(x - 1)").eval_jet(&Point::ORIGIN, 1).unwrap_err();
        assert_eq!(err.subexpr, "log(x - 1)");
        let err = p("t / x").eval_jet(&Point::ORIGIN, 0).unwrap_err();
        assert_eq!(err.source, JetError::DivisionByZero);
        assert!(p("abs(x)").eval_jet(&Point::ORIGIN, 1).is_err());
        assert!(p("abs(x)").eval_jet(&Point::new(0.0, -2.0, 0.0), 1).is_ok());
        assert!(p("x^0.5").eval_jet(&Point::new(0.0, -1.0, 0.0), 0).is_err());
        assert!(p("x^3").eval_jet(&Point::new(0.0, -1.0, 0.0), 2).is_ok());
    }

    #[test]
    fn printing_round_trips() {
        for s in ["-(x + 1)^2", "x - (t - y)", "x/(t*y)", "--x", "(-x)^3", "exp(-t)*x^-2", "2^3^2", "(2^3)^2"] {
            let e = p(s);
            assert_eq!(p(&e.to_string()), e, "{s} printed as {e}");
        }
    }

    #[test]
    fn variables_scan() {
        assert_eq!(p("exp(x) * t").variables(), [Coord::T, Coord::X].into_iter().collect());
        assert!(p("2*pi + e").is_constant());
    }
}
