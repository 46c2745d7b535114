//! Exact scalar inputs: rationals, decimals and quadratic surd expressions.
//!
//! Grammar (whitespace is ignored):
//!
//! ```text
//! expr    := term (('+' | '-') term)*
//! term    := unary (('*' | '/') unary)*
//! unary   := ('-' | '+') unary | primary
//! primary := number | '(' expr ')' | 'sqrt' '(' integer ')'
//! number  := digits ['.' digits] [('e' | 'E') ['+' | '-'] digits]
//! ```
//!
//! `×`, `÷`, `−` and `√k` are accepted as aliases.

use std::fmt;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::ball::{Ball, MAX_PRECISION};
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub enum Expr {
    Rational(BigRational),
    Sqrt(BigInt),
    Neg(Box<Expr>),
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    Div(Box<Expr>, Box<Expr>),
}

impl Expr {
    /// Exact value when the expression is rational.
    pub fn as_rational(&self) -> Option<BigRational> {
        match self {
            Expr::Rational(r) => Some(r.clone()),
            Expr::Sqrt(k) => {
                let s = k.sqrt();
                (&s * &s == *k).then(|| BigRational::from_integer(s))
            }
            Expr::Neg(a) => a.as_rational().map(|x| -x),
            Expr::Add(a, b) => Some(a.as_rational()? + b.as_rational()?),
            Expr::Sub(a, b) => Some(a.as_rational()? - b.as_rational()?),
            Expr::Mul(a, b) => Some(a.as_rational()? * b.as_rational()?),
            Expr::Div(a, b) => {
                let d = b.as_rational()?;
                if d.is_zero() {
                    None
                } else {
                    Some(a.as_rational()? / d)
                }
            }
        }
    }

    fn eval(&self, prec: u32) -> Result<Ball> {
        Ok(match self {
            Expr::Rational(r) => Ball::from_rational(r, prec),
            Expr::Sqrt(k) => Ball::sqrt_int(k, prec)?,
            Expr::Neg(a) => a.eval(prec)?.neg(),
            Expr::Add(a, b) => a.eval(prec)?.add(&b.eval(prec)?),
            Expr::Sub(a, b) => a.eval(prec)?.sub(&b.eval(prec)?),
            Expr::Mul(a, b) => a.eval(prec)?.mul(&b.eval(prec)?),
            Expr::Div(a, b) => a.eval(prec)?.div(&b.eval(prec)?)?,
        })
    }

    fn precedence(&self) -> u8 {
        match self {
            Expr::Add(..) | Expr::Sub(..) => 1,
            Expr::Mul(..) | Expr::Div(..) => 2,
            Expr::Neg(_) => 3,
            Expr::Rational(r) if r.is_negative() => 3,
            Expr::Rational(r) if !r.is_integer() => 2,
            _ => 4,
        }
    }

    fn write_child(&self, f: &mut fmt::Formatter<'_>, min: u8) -> fmt::Result {
        if self.precedence() < min {
            write!(f, "({self})")
        } else {
            write!(f, "{self}")
        }
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Rational(r) => {
                if r.is_integer() {
                    write!(f, "{}", r.numer())
                } else {
                    write!(f, "{}/{}", r.numer(), r.denom())
                }
            }
            Expr::Sqrt(k) => write!(f, "sqrt({k})"),
            Expr::Neg(a) => {
                write!(f, "-")?;
                a.write_child(f, 4)
            }
            Expr::Add(a, b) => {
                a.write_child(f, 1)?;
                write!(f, " + ")?;
                b.write_child(f, 2)
            }
            Expr::Sub(a, b) => {
                a.write_child(f, 1)?;
                write!(f, " - ")?;
                b.write_child(f, 2)
            }
            Expr::Mul(a, b) => {
                a.write_child(f, 2)?;
                write!(f, "*")?;
                b.write_child(f, 4)
            }
            Expr::Div(a, b) => {
                a.write_child(f, 2)?;
                write!(f, "/")?;
                b.write_child(f, 4)
            }
        }
    }
}

struct Parser<'a> {
    src: &'a str,
    pos: usize,
}

impl<'a> Parser<'a> {
    fn err<T>(&self, msg: impl Into<String>) -> Result<T> {
        Err(Error::Parse { pos: self.pos, msg: msg.into() })
    }

    fn skip_ws(&mut self) {
        while let Some(c) = self.peek_raw() {
            if c.is_whitespace() {
                self.pos += c.len_utf8();
            } else {
                break;
            }
        }
    }

    fn peek_raw(&self) -> Option<char> {
        self.src[self.pos..].chars().next()
    }

    fn peek(&mut self) -> Option<char> {
        self.skip_ws();
        self.peek_raw()
    }

    fn bump(&mut self) -> Option<char> {
        let c = self.peek()?;
        self.pos += c.len_utf8();
        Some(c)
    }

    fn expect(&mut self, want: char) -> Result<()> {
        match self.bump() {
            Some(c) if c == want => Ok(()),
            Some(c) => {
                self.pos -= c.len_utf8();
                self.err(format!("expected '{want}', found '{c}'"))
            }
            None => self.err(format!("expected '{want}', found end of input")),
        }
    }

    fn expr(&mut self) -> Result<Expr> {
        let mut lhs = self.term()?;
        loop {
            match self.peek() {
                Some('+') => {
                    self.bump();
                    lhs = Expr::Add(Box::new(lhs), Box::new(self.term()?));
                }
                Some('-') | Some('−') => {
                    self.bump();
                    lhs = Expr::Sub(Box::new(lhs), Box::new(self.term()?));
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn term(&mut self) -> Result<Expr> {
        let mut lhs = self.unary()?;
        loop {
            match self.peek() {
                Some('*') | Some('×') => {
                    self.bump();
                    lhs = Expr::Mul(Box::new(lhs), Box::new(self.unary()?));
                }
                Some('/') | Some('÷') => {
                    self.bump();
                    lhs = Expr::Div(Box::new(lhs), Box::new(self.unary()?));
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn unary(&mut self) -> Result<Expr> {
        match self.peek() {
            Some('-') | Some('−') => {
                self.bump();
                Ok(Expr::Neg(Box::new(self.unary()?)))
            }
            Some('+') => {
                self.bump();
                self.unary()
            }
            _ => self.primary(),
        }
    }

    fn digits(&mut self) -> &'a str {
        let start = self.pos;
        while let Some(c) = self.peek_raw() {
            if c.is_ascii_digit() {
                self.pos += 1;
            } else {
                break;
            }
        }
        &self.src[start..self.pos]
    }

    fn integer(&mut self) -> Result<BigInt> {
        self.skip_ws();
        let d = self.digits();
        if d.is_empty() {
            return self.err("expected an integer");
        }
        Ok(d.parse().expect("digits parse"))
    }

    fn number(&mut self) -> Result<Expr> {
        let int_part = self.digits();
        let mut mantissa: BigInt = if int_part.is_empty() { BigInt::zero() } else { int_part.parse().unwrap() };
        let mut scale: i64 = 0;
        if self.peek_raw() == Some('.') {
            self.pos += 1;
            let frac = self.digits();
            if int_part.is_empty() && frac.is_empty() {
                return self.err("malformed number");
            }
            for c in frac.chars() {
                mantissa = mantissa * 10 + (c as u32 - '0' as u32);
                scale -= 1;
            }
        }
        if matches!(self.peek_raw(), Some('e') | Some('E')) {
            self.pos += 1;
            let sign = match self.peek_raw() {
                Some('-') => {
                    self.pos += 1;
                    -1
                }
                Some('+') => {
                    self.pos += 1;
                    1
                }
                _ => 1,
            };
            let e = self.digits();
            if e.is_empty() {
                return self.err("malformed exponent");
            }
            let e: i64 = e.parse().map_err(|_| Error::Parse { pos: self.pos, msg: "exponent too large".into() })?;
            if e > 10_000 {
                return self.err("exponent too large");
            }
            scale += sign * e;
        }
        let ten = BigInt::from(10);
        let r = if scale >= 0 {
            BigRational::from_integer(mantissa * num_traits::pow(ten, scale as usize))
        } else {
            BigRational::new(mantissa, num_traits::pow(ten, (-scale) as usize))
        };
        Ok(Expr::Rational(r))
    }

    fn primary(&mut self) -> Result<Expr> {
        match self.peek() {
            Some('(') => {
                self.bump();
                let e = self.expr()?;
                self.expect(')')?;
                Ok(e)
            }
            Some('√') => {
                self.bump();
                let k = if self.peek() == Some('(') {
                    self.bump();
                    let k = self.integer()?;
                    self.expect(')')?;
                    k
                } else {
                    self.integer()?
                };
                self.sqrt_of(k)
            }
            Some(c) if c.is_ascii_digit() || c == '.' => self.number(),
            Some(_) if self.src[self.pos..].starts_with("sqrt") => {
                self.pos += 4;
                self.expect('(')?;
                let k = self.integer()?;
                self.expect(')')?;
                self.sqrt_of(k)
            }
            Some(c) => self.err(format!("unexpected '{c}'")),
            None => self.err("unexpected end of input"),
        }
    }

    fn sqrt_of(&self, k: BigInt) -> Result<Expr> {
        if k.is_zero() {
            return self.err("sqrt needs a positive integer");
        }
        let s = k.sqrt();
        if &s * &s == k {
            Ok(Expr::Rational(BigRational::from_integer(s)))
        } else {
            Ok(Expr::Sqrt(k))
        }
    }
}

/// A real number given exactly by an expression, together with the text it
/// was written as.
#[derive(Clone, Debug)]
pub struct Scalar {
    text: String,
    expr: Expr,
    rational: Option<BigRational>,
}

impl PartialEq for Scalar {
    fn eq(&self, other: &Self) -> bool {
        self.text == other.text
    }
}

impl Scalar {
    pub fn parse(text: &str) -> Result<Scalar> {
        let mut p = Parser { src: text, pos: 0 };
        let expr = p.expr()?;
        p.skip_ws();
        if p.pos != text.len() {
            return p.err("trailing input");
        }
        let rational = expr.as_rational();
        if rational.is_none() {
            // reject expressions that divide by an exact zero
            check_no_zero_division(&expr)?;
        }
        Ok(Scalar { text: text.trim().to_string(), expr, rational })
    }

    pub fn from_expr(expr: Expr) -> Scalar {
        let rational = expr.as_rational();
        let expr = match &rational {
            Some(r) => Expr::Rational(r.clone()),
            None => expr,
        };
        Scalar { text: expr.to_string(), expr, rational }
    }

    pub fn from_rational(r: BigRational) -> Scalar {
        Scalar::from_expr(Expr::Rational(r))
    }

    pub fn from_int(v: i64) -> Scalar {
        Scalar::from_rational(BigRational::from_integer(v.into()))
    }

    pub fn zero() -> Scalar {
        Scalar::from_int(0)
    }

    /// The exact value of a finite double.
    pub fn from_f64(v: f64) -> Result<Scalar> {
        BigRational::from_float(v)
            .map(Scalar::from_rational)
            .ok_or_else(|| Error::InvalidArgument(format!("non-finite value {v}")))
    }

    pub fn text(&self) -> &str {
        &self.text
    }

    pub fn expr(&self) -> &Expr {
        &self.expr
    }

    pub fn as_rational(&self) -> Option<&BigRational> {
        self.rational.as_ref()
    }

    pub fn is_rational(&self) -> bool {
        self.rational.is_some()
    }

    pub fn is_zero(&self) -> bool {
        self.rational.as_ref().is_some_and(|r| r.is_zero())
    }

    /// Enclosure of width at most `2^-prec`.
    pub fn eval(&self, prec: u32) -> Result<Ball> {
        if let Some(r) = &self.rational {
            return Ok(Ball::from_rational(r, prec));
        }
        let target = crate::ball::ldexp_up(1.0, -(prec as i64));
        let mut work = prec + 32;
        loop {
            match self.expr.eval(work) {
                Ok(b) if b.width() <= target => return Ok(b),
                Ok(_) | Err(Error::DivisionByZero) => {}
                Err(e) => return Err(e),
            }
            if work >= MAX_PRECISION + 256 {
                return Err(Error::Precision(format!("cannot enclose {} to 2^-{prec}", self.text)));
            }
            work = (work * 2).min(MAX_PRECISION + 256);
        }
    }

    /// Midpoint approximation for reporting.
    pub fn to_f64(&self) -> f64 {
        match &self.rational {
            Some(r) => r.to_f64().unwrap_or(f64::NAN),
            None => self.eval(96).map(|b| b.mid_f64()).unwrap_or(f64::NAN),
        }
    }

    fn combine(&self, other: &Scalar, f: impl Fn(Box<Expr>, Box<Expr>) -> Expr) -> Scalar {
        Scalar::from_expr(f(Box::new(self.expr.clone()), Box::new(other.expr.clone())))
    }

    pub fn add(&self, other: &Scalar) -> Scalar {
        if self.is_zero() {
            return other.clone();
        }
        if other.is_zero() {
            return self.clone();
        }
        self.combine(other, Expr::Add)
    }

    pub fn sub(&self, other: &Scalar) -> Scalar {
        if other.is_zero() {
            return self.clone();
        }
        self.combine(other, Expr::Sub)
    }

    pub fn mul(&self, other: &Scalar) -> Scalar {
        if self.is_zero() || other.is_zero() {
            return Scalar::zero();
        }
        if self.rational.as_ref().is_some_and(|r| r.is_one()) {
            return other.clone();
        }
        if other.rational.as_ref().is_some_and(|r| r.is_one()) {
            return self.clone();
        }
        self.combine(other, Expr::Mul)
    }

    pub fn neg(&self) -> Scalar {
        match &self.rational {
            Some(r) => Scalar::from_rational(-r),
            None => Scalar::from_expr(Expr::Neg(Box::new(self.expr.clone()))),
        }
    }

    pub fn mul_int(&self, k: i64) -> Scalar {
        self.mul(&Scalar::from_int(k))
    }
}

fn check_no_zero_division(e: &Expr) -> Result<()> {
    match e {
        Expr::Rational(_) | Expr::Sqrt(_) => Ok(()),
        Expr::Neg(a) => check_no_zero_division(a),
        Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) => {
            check_no_zero_division(a)?;
            check_no_zero_division(b)
        }
        Expr::Div(a, b) => {
            check_no_zero_division(a)?;
            check_no_zero_division(b)?;
            if b.as_rational().is_some_and(|r| r.is_zero()) {
                return Err(Error::DivisionByZero);
            }
            Ok(())
        }
    }
}

impl fmt::Display for Scalar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.text)
    }
}

impl std::str::FromStr for Scalar {
    type Err = Error;
    fn from_str(s: &str) -> Result<Scalar> {
        Scalar::parse(s)
    }
}

impl Serialize for Scalar {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.text)
    }
}

impl<'de> Deserialize<'de> for Scalar {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        Scalar::parse(&s).map_err(serde::de::Error::custom)
    }
}
