//! Scalar coefficient expressions over the coordinates `x1..xn`.
//!
//! Expressions are small immutable trees. They are parsed from an infix
//! grammar, evaluated exactly by recursion, differentiated symbolically and
//! folded by a light simplifier. For hot loops (integration of vector fields)
//! a tree can be compiled into a postfix program, see [`Compiled`].

use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use thiserror::Error;

/// Expression tree. Variables are stored 0-based (`Var(0)` prints as `x1`).
#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Const(f64),
    Var(usize),
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    Div(Box<Expr>, Box<Expr>),
    Pow(Box<Expr>, u32),
    Neg(Box<Expr>),
    Sin(Box<Expr>),
    Cos(Box<Expr>),
    Exp(Box<Expr>),
}

#[derive(Debug, Clone, PartialEq, Error)]
#[error("parse error at byte {offset}: {message}")]
pub struct ParseError {
    pub offset: usize,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EvalError {
    #[error("division by zero")]
    DivisionByZero,
    #[error("variable x{index} is not defined for a point of dimension {dim}")]
    MissingCoordinate { index: usize, dim: usize },
}

impl Expr {
    pub fn constant(v: f64) -> Self {
        Expr::Const(v)
    }

    /// Coordinate `x_{axis+1}`.
    pub fn var(axis: usize) -> Self {
        Expr::Var(axis)
    }

    pub fn zero() -> Self {
        Expr::Const(0.0)
    }

    pub fn one() -> Self {
        Expr::Const(1.0)
    }

    pub fn sin(self) -> Self {
        Expr::Sin(Box::new(self))
    }

    pub fn cos(self) -> Self {
        Expr::Cos(Box::new(self))
    }

    pub fn exp(self) -> Self {
        Expr::Exp(Box::new(self))
    }

    pub fn powi(self, k: u32) -> Self {
        Expr::Pow(Box::new(self), k)
    }

    #[allow(clippy::should_implement_trait)]
    pub fn div(self, rhs: Expr) -> Self {
        Expr::Div(Box::new(self), Box::new(rhs))
    }

    pub fn is_zero(&self) -> bool {
        matches!(self, Expr::Const(c) if *c == 0.0)
    }

    pub fn as_const(&self) -> Option<f64> {
        match self {
            Expr::Const(c) => Some(*c),
            _ => None,
        }
    }

    /// One plus the largest variable index used, i.e. the minimal point dimension.
    pub fn arity(&self) -> usize {
        match self {
            Expr::Const(_) => 0,
            Expr::Var(i) => i + 1,
            Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) | Expr::Div(a, b) => {
                a.arity().max(b.arity())
            }
            Expr::Pow(a, _) | Expr::Neg(a) | Expr::Sin(a) | Expr::Cos(a) | Expr::Exp(a) => {
                a.arity()
            }
        }
    }

    pub fn contains_division(&self) -> bool {
        match self {
            Expr::Div(_, _) => true,
            Expr::Const(_) | Expr::Var(_) => false,
            Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) => {
                a.contains_division() || b.contains_division()
            }
            Expr::Pow(a, _) | Expr::Neg(a) | Expr::Sin(a) | Expr::Cos(a) | Expr::Exp(a) => {
                a.contains_division()
            }
        }
    }

    pub fn node_count(&self) -> usize {
        match self {
            Expr::Const(_) | Expr::Var(_) => 1,
            Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) | Expr::Div(a, b) => {
                1 + a.node_count() + b.node_count()
            }
            Expr::Pow(a, _) | Expr::Neg(a) | Expr::Sin(a) | Expr::Cos(a) | Expr::Exp(a) => {
                1 + a.node_count()
            }
        }
    }

    pub fn evaluate(&self, p: &[f64]) -> Result<f64, EvalError> {
        Ok(match self {
            Expr::Const(c) => *c,
            Expr::Var(i) => *p.get(*i).ok_or(EvalError::MissingCoordinate {
                index: i + 1,
                dim: p.len(),
            })?,
            Expr::Add(a, b) => a.evaluate(p)? + b.evaluate(p)?,
            Expr::Sub(a, b) => a.evaluate(p)? - b.evaluate(p)?,
            Expr::Mul(a, b) => a.evaluate(p)? * b.evaluate(p)?,
            Expr::Div(a, b) => {
                let num = a.evaluate(p)?;
                let den = b.evaluate(p)?;
                if den == 0.0 {
                    return Err(EvalError::DivisionByZero);
                }
                num / den
            }
            Expr::Pow(a, k) => powu(a.evaluate(p)?, *k),
            Expr::Neg(a) => -a.evaluate(p)?,
            Expr::Sin(a) => a.evaluate(p)?.sin(),
            Expr::Cos(a) => a.evaluate(p)?.cos(),
            Expr::Exp(a) => a.evaluate(p)?.exp(),
        })
    }

    /// Symbolic partial derivative with respect to `x_{axis+1}`, simplified.
    pub fn differentiate(&self, axis: usize) -> Expr {
        self.derive(axis).simplify()
    }

    fn derive(&self, axis: usize) -> Expr {
        use Expr::*;
        match self {
            Const(_) => Expr::zero(),
            Var(i) => Const(if *i == axis { 1.0 } else { 0.0 }),
            Add(a, b) => a.derive(axis) + b.derive(axis),
            Sub(a, b) => a.derive(axis) - b.derive(axis),
            Mul(a, b) => a.derive(axis) * (**b).clone() + (**a).clone() * b.derive(axis),
            Div(a, b) => (a.derive(axis) * (**b).clone() - (**a).clone() * b.derive(axis))
                .div((**b).clone().powi(2)),
            Pow(_, 0) => Expr::zero(),
            Pow(a, k) => {
                Const(*k as f64) * (**a).clone().powi(k - 1) * a.derive(axis)
            }
            Neg(a) => -a.derive(axis),
            Sin(a) => (**a).clone().cos() * a.derive(axis),
            Cos(a) => -((**a).clone().sin() * a.derive(axis)),
            Exp(a) => self.clone() * a.derive(axis),
        }
    }

    /// Folds constants and the neutral/absorbing elements of `+`, `-`, `*`, `/`
    /// and `^`. Value preserving wherever the input evaluates.
    pub fn simplify(&self) -> Expr {
        let mut cur = self.simplify_pass();
        // a pass is normally already a fixed point; the loop makes idempotence unconditional
        for _ in 0..16 {
            let next = cur.simplify_pass();
            if next == cur {
                break;
            }
            cur = next;
        }
        cur
    }

    fn simplify_pass(&self) -> Expr {
        use Expr::*;
        match self {
            Const(_) | Var(_) => self.clone(),
            Add(a, b) => s_add(a.simplify_pass(), b.simplify_pass()),
            Sub(a, b) => s_sub(a.simplify_pass(), b.simplify_pass()),
            Mul(a, b) => s_mul(a.simplify_pass(), b.simplify_pass()),
            Div(a, b) => s_div(a.simplify_pass(), b.simplify_pass()),
            Pow(a, k) => s_pow(a.simplify_pass(), *k),
            Neg(a) => s_neg(a.simplify_pass()),
            Sin(a) => s_unary(a.simplify_pass(), f64::sin, Expr::sin),
            Cos(a) => s_unary(a.simplify_pass(), f64::cos, Expr::cos),
            Exp(a) => s_unary(a.simplify_pass(), f64::exp, Expr::exp),
        }
    }

    pub fn compile(&self) -> Compiled {
        let mut code = Vec::with_capacity(self.node_count());
        self.emit(&mut code);
        let mut depth = 0usize;
        let mut max_depth = 0usize;
        for ins in &code {
            match ins {
                Instr::Const(_) | Instr::Var(_) => depth += 1,
                Instr::Add | Instr::Sub | Instr::Mul | Instr::Div => depth -= 1,
                _ => {}
            }
            max_depth = max_depth.max(depth);
        }
        Compiled {
            code,
            stack_size: max_depth,
        }
    }

    fn emit(&self, code: &mut Vec<Instr>) {
        match self {
            Expr::Const(c) => code.push(Instr::Const(*c)),
            Expr::Var(i) => code.push(Instr::Var(*i)),
            Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) | Expr::Div(a, b) => {
                a.emit(code);
                b.emit(code);
                code.push(match self {
                    Expr::Add(..) => Instr::Add,
                    Expr::Sub(..) => Instr::Sub,
                    Expr::Mul(..) => Instr::Mul,
                    _ => Instr::Div,
                });
            }
            Expr::Pow(a, k) => {
                a.emit(code);
                code.push(Instr::Pow(*k));
            }
            Expr::Neg(a) | Expr::Sin(a) | Expr::Cos(a) | Expr::Exp(a) => {
                a.emit(code);
                code.push(match self {
                    Expr::Neg(_) => Instr::Neg,
                    Expr::Sin(_) => Instr::Sin,
                    Expr::Cos(_) => Instr::Cos,
                    _ => Instr::Exp,
                });
            }
        }
    }
}

fn powu(x: f64, k: u32) -> f64 {
    match i32::try_from(k) {
        Ok(k) => x.powi(k),
        Err(_) => x.powf(k as f64),
    }
}

fn s_add(a: Expr, b: Expr) -> Expr {
    match (a.as_const(), b.as_const()) {
        (Some(x), Some(y)) => Expr::Const(x + y),
        (Some(x), _) if x == 0.0 => b,
        (_, Some(y)) if y == 0.0 => a,
        _ => Expr::Add(Box::new(a), Box::new(b)),
    }
}

fn s_sub(a: Expr, b: Expr) -> Expr {
    match (a.as_const(), b.as_const()) {
        (Some(x), Some(y)) => Expr::Const(x - y),
        (_, Some(y)) if y == 0.0 => a,
        (Some(x), _) if x == 0.0 => s_neg(b),
        _ => Expr::Sub(Box::new(a), Box::new(b)),
    }
}

fn s_mul(a: Expr, b: Expr) -> Expr {
    match (a.as_const(), b.as_const()) {
        (Some(x), Some(y)) => Expr::Const(x * y),
        (Some(x), _) if x == 0.0 => Expr::zero(),
        (_, Some(y)) if y == 0.0 => Expr::zero(),
        (Some(x), _) if x == 1.0 => b,
        (_, Some(y)) if y == 1.0 => a,
        (Some(x), _) if x == -1.0 => s_neg(b),
        (_, Some(y)) if y == -1.0 => s_neg(a),
        _ => Expr::Mul(Box::new(a), Box::new(b)),
    }
}

fn s_div(a: Expr, b: Expr) -> Expr {
    match (a.as_const(), b.as_const()) {
        (Some(x), Some(y)) if y != 0.0 => Expr::Const(x / y),
        (_, Some(y)) if y == 1.0 => a,
        _ => Expr::Div(Box::new(a), Box::new(b)),
    }
}

fn s_pow(a: Expr, k: u32) -> Expr {
    match (k, a.as_const()) {
        (0, _) => Expr::one(),
        (1, _) => a,
        (_, Some(x)) => Expr::Const(powu(x, k)),
        _ => Expr::Pow(Box::new(a), k),
    }
}

fn s_neg(a: Expr) -> Expr {
    match a {
        Expr::Const(x) => Expr::Const(-x),
        Expr::Neg(inner) => *inner,
        other => Expr::Neg(Box::new(other)),
    }
}

fn s_unary(a: Expr, f: fn(f64) -> f64, wrap: fn(Expr) -> Expr) -> Expr {
    match a.as_const() {
        Some(x) => Expr::Const(f(x)),
        None => wrap(a),
    }
}

impl Add for Expr {
    type Output = Expr;
    fn add(self, rhs: Expr) -> Expr {
        Expr::Add(Box::new(self), Box::new(rhs))
    }
}

impl Sub for Expr {
    type Output = Expr;
    fn sub(self, rhs: Expr) -> Expr {
        Expr::Sub(Box::new(self), Box::new(rhs))
    }
}

impl Mul for Expr {
    type Output = Expr;
    fn mul(self, rhs: Expr) -> Expr {
        Expr::Mul(Box::new(self), Box::new(rhs))
    }
}

impl Neg for Expr {
    type Output = Expr;
    fn neg(self) -> Expr {
        Expr::Neg(Box::new(self))
    }
}

/// Prints in the input grammar. Binary nodes are parenthesised so that the
/// output parses back to a tree with the same value everywhere.
impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Const(c) if *c < 0.0 || (*c == 0.0 && c.is_sign_negative()) => {
                write!(f, "(-{})", -c)
            }
            Expr::Const(c) => write!(f, "{c}"),
            Expr::Var(i) => write!(f, "x{}", i + 1),
            Expr::Add(a, b) => write!(f, "({a} + {b})"),
            Expr::Sub(a, b) => write!(f, "({a} - {b})"),
            Expr::Mul(a, b) => write!(f, "{a}*{b}"),
            Expr::Div(a, b) => match **b {
                Expr::Mul(..) => write!(f, "({a}/({b}))"),
                _ => write!(f, "({a}/{b})"),
            },
            Expr::Pow(a, k) => match **a {
                Expr::Var(_) => write!(f, "{a}^{k}"),
                _ => write!(f, "({a})^{k}"),
            },
            Expr::Neg(a) => write!(f, "(-{a})"),
            Expr::Sin(a) => write!(f, "sin({a})"),
            Expr::Cos(a) => write!(f, "cos({a})"),
            Expr::Exp(a) => write!(f, "exp({a})"),
        }
    }
}

/// Checks pointwise equality of two expressions at the given sample points.
/// There is no symbolic equality procedure; this is the equality used throughout.
pub fn sampled_eq<'a>(
    a: &Expr,
    b: &Expr,
    points: impl IntoIterator<Item = &'a [f64]>,
    tol: f64,
) -> bool {
    points.into_iter().all(|p| match (a.evaluate(p), b.evaluate(p)) {
        (Ok(x), Ok(y)) => (x - y).abs() <= tol * (1.0 + x.abs().max(y.abs())),
        (Err(_), Err(_)) => true,
        _ => false,
    })
}

// ---------------------------------------------------------------------------
// compiled evaluation

#[derive(Debug, Clone, Copy, PartialEq)]
enum Instr {
    Const(f64),
    Var(usize),
    Add,
    Sub,
    Mul,
    Div,
    Pow(u32),
    Neg,
    Sin,
    Cos,
    Exp,
}

/// Postfix program for fast repeated evaluation. Division by zero yields a
/// non-finite value instead of an error; callers check finiteness.
#[derive(Debug, Clone, PartialEq)]
pub struct Compiled {
    code: Vec<Instr>,
    stack_size: usize,
}

impl Compiled {
    pub fn eval(&self, p: &[f64], stack: &mut Vec<f64>) -> f64 {
        if let [Instr::Const(c)] = self.code.as_slice() {
            return *c;
        }
        stack.clear();
        stack.reserve(self.stack_size);
        for ins in &self.code {
            match *ins {
                Instr::Const(c) => stack.push(c),
                Instr::Var(i) => stack.push(p.get(i).copied().unwrap_or(f64::NAN)),
                Instr::Add | Instr::Sub | Instr::Mul | Instr::Div => {
                    let b = stack.pop().unwrap_or(f64::NAN);
                    let a = stack.last_mut().expect("compiled stack underflow");
                    *a = match ins {
                        Instr::Add => *a + b,
                        Instr::Sub => *a - b,
                        Instr::Mul => *a * b,
                        _ if b == 0.0 => f64::NAN,
                        _ => *a / b,
                    };
                }
                Instr::Pow(k) => {
                    let a = stack.last_mut().expect("compiled stack underflow");
                    *a = powu(*a, k);
                }
                Instr::Neg | Instr::Sin | Instr::Cos | Instr::Exp => {
                    let a = stack.last_mut().expect("compiled stack underflow");
                    *a = match ins {
                        Instr::Neg => -*a,
                        Instr::Sin => a.sin(),
                        Instr::Cos => a.cos(),
                        _ => a.exp(),
                    };
                }
            }
        }
        stack.pop().unwrap_or(f64::NAN)
    }

    pub fn is_const(&self) -> Option<f64> {
        match self.code.as_slice() {
            [Instr::Const(c)] => Some(*c),
            _ => None,
        }
    }
}

// ---------------------------------------------------------------------------
// parser
//
// expr   := term (('+' | '-') term)*
// term   := unary (('*' | '/') unary)*
// unary  := '-' unary | power
// power  := atom ('^' integer)?
// atom   := number | 'pi' | x<i> | func '(' expr ')' | '(' expr ')'

/// Parses `text` into an expression over `x1..x<dim>`.
pub fn parse(text: &str, dim: usize) -> Result<Expr, ParseError> {
    let mut p = Parser {
        src: text,
        bytes: text.as_bytes(),
        pos: 0,
        dim,
    };
    p.skip_ws();
    if p.pos == p.bytes.len() {
        return Err(p.error("empty expression"));
    }
    let e = p.expr()?;
    p.skip_ws();
    if p.pos != p.bytes.len() {
        return Err(p.error(&format!("unexpected `{}`", p.rest_token())));
    }
    Ok(e)
}

struct Parser<'a> {
    src: &'a str,
    bytes: &'a [u8],
    pos: usize,
    dim: usize,
}

impl Parser<'_> {
    fn error(&self, message: &str) -> ParseError {
        ParseError {
            offset: self.pos.min(self.bytes.len()),
            message: message.to_string(),
        }
    }

    fn rest_token(&self) -> &str {
        let rest = &self.src[self.pos..];
        let end = rest
            .char_indices()
            .nth(1)
            .map(|(i, _)| i)
            .unwrap_or(rest.len());
        &rest[..end]
    }

    fn skip_ws(&mut self) {
        while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<u8> {
        self.skip_ws();
        self.bytes.get(self.pos).copied()
    }

    fn eat(&mut self, c: u8) -> bool {
        if self.peek() == Some(c) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expr(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.term()?;
        loop {
            if self.eat(b'+') {
                lhs = lhs + self.term()?;
            } else if self.eat(b'-') {
                lhs = lhs - self.term()?;
            } else {
                return Ok(lhs);
            }
        }
    }

    fn term(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.unary()?;
        loop {
            if self.eat(b'*') {
                lhs = lhs * self.unary()?;
            } else if self.eat(b'/') {
                lhs = lhs.div(self.unary()?);
            } else {
                return Ok(lhs);
            }
        }
    }

    fn unary(&mut self) -> Result<Expr, ParseError> {
        if self.eat(b'-') {
            Ok(-self.unary()?)
        } else if self.eat(b'+') {
            self.unary()
        } else {
            self.power()
        }
    }

    fn power(&mut self) -> Result<Expr, ParseError> {
        let base = self.atom()?;
        if !self.eat(b'^') {
            return Ok(base);
        }
        self.skip_ws();
        let start = self.pos;
        while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_digit() {
            self.pos += 1;
        }
        if start == self.pos {
            return Err(ParseError {
                offset: start,
                message: "exponent must be a nonnegative integer literal".into(),
            });
        }
        let k: u32 = self.src[start..self.pos].parse().map_err(|_| ParseError {
            offset: start,
            message: "exponent too large".into(),
        })?;
        if self.peek() == Some(b'^') {
            return Err(self.error("chained exponents need parentheses"));
        }
        Ok(base.powi(k))
    }

    fn atom(&mut self) -> Result<Expr, ParseError> {
        match self.peek() {
            None => Err(self.error("unexpected end of input")),
            Some(b'(') => {
                self.pos += 1;
                let e = self.expr()?;
                if !self.eat(b')') {
                    return Err(self.error("expected `)`"));
                }
                Ok(e)
            }
            Some(c) if c.is_ascii_digit() || c == b'.' => self.number(),
            Some(c) if c.is_ascii_alphabetic() => self.ident(),
            Some(_) => Err(self.error(&format!("unexpected `{}`", self.rest_token()))),
        }
    }

    fn number(&mut self) -> Result<Expr, ParseError> {
        let start = self.pos;
        let b = self.bytes;
        let mut i = self.pos;
        while i < b.len() && (b[i].is_ascii_digit() || b[i] == b'.') {
            i += 1;
        }
        if i < b.len() && (b[i] == b'e' || b[i] == b'E') {
            let mut j = i + 1;
            if j < b.len() && (b[j] == b'+' || b[j] == b'-') {
                j += 1;
            }
            if j < b.len() && b[j].is_ascii_digit() {
                while j < b.len() && b[j].is_ascii_digit() {
                    j += 1;
                }
                i = j;
            }
        }
        self.pos = i;
        self.src[start..i]
            .parse::<f64>()
            .map(Expr::Const)
            .map_err(|_| ParseError {
                offset: start,
                message: format!("malformed number `{}`", &self.src[start..i]),
            })
    }

    fn ident(&mut self) -> Result<Expr, ParseError> {
        let start = self.pos;
        while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_alphanumeric() {
            self.pos += 1;
        }
        let name = &self.src[start..self.pos];
        match name {
            "pi" => return Ok(Expr::Const(std::f64::consts::PI)),
            "sin" | "cos" | "exp" => {
                if !self.eat(b'(') {
                    return Err(self.error(&format!("expected `(` after `{name}`")));
                }
                let arg = self.expr()?;
                if !self.eat(b')') {
                    return Err(self.error("expected `)`"));
                }
                return Ok(match name {
                    "sin" => arg.sin(),
                    "cos" => arg.cos(),
                    _ => arg.exp(),
                });
            }
            _ => {}
        }
        if let Some(digits) = name.strip_prefix('x') {
            if !digits.is_empty() && digits.bytes().all(|c| c.is_ascii_digit()) {
                let idx: usize = digits.parse().map_err(|_| ParseError {
                    offset: start,
                    message: format!("bad variable `{name}`"),
                })?;
                if idx == 0 || idx > self.dim {
                    return Err(ParseError {
                        offset: start,
                        message: format!(
                            "variable `{name}` out of range (dimension {})",
                            self.dim
                        ),
                    });
                }
                return Ok(Expr::Var(idx - 1));
            }
        }
        Err(ParseError {
            offset: start,
            message: format!("unknown identifier `{name}`"),
        })
    }
}
