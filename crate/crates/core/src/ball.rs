//! Midpoint-radius real arithmetic.
//!
//! A [`Ball`] stores an exact binary fixed-point midpoint `mid * 2^-prec`
//! and an absolute radius held as an `f64` that is always rounded upward.
//! Every operation returns a ball that contains the exact result of applying
//! the operation to any pair of points from its inputs.

use std::cmp::Ordering;
use std::sync::OnceLock;

use num_bigint::{BigInt, Sign};
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::error::{Error, Result};

/// Largest working precision accepted anywhere in the crate.
pub const MAX_PRECISION: u32 = 960;

#[derive(Clone, Debug)]
pub struct Ball {
    mid: BigInt,
    prec: u32,
    rad: f64,
}

/// Upper bound of `m * 2^e` for `m >= 0`.
pub(crate) fn ldexp_up(m: f64, e: i64) -> f64 {
    if m == 0.0 {
        return 0.0;
    }
    if e > 1000 {
        return f64::INFINITY;
    }
    if e < -1000 {
        let v = (m * 2f64.powi(-500)) * 2f64.powi((e + 500).max(-1070) as i32);
        return v.next_up();
    }
    (m * 2f64.powi(e as i32)).next_up()
}

/// Lower bound of `m * 2^e` for `m >= 0`.
pub(crate) fn ldexp_down(m: f64, e: i64) -> f64 {
    if m == 0.0 || e < -1000 {
        return 0.0;
    }
    if e > 1000 {
        return f64::MAX;
    }
    (m * 2f64.powi(e as i32)).next_down().max(0.0)
}

/// `|x|` as an upper-bounding f64 mantissa and binary exponent.
fn big_abs_bounds(x: &BigInt) -> (f64, f64, i64) {
    let bits = x.bits();
    // 53 bits so both bounds convert to f64 exactly
    if bits <= 53 {
        let v = x.abs().to_u64().unwrap_or(0) as f64;
        return (v, v, 0);
    }
    let shift = bits - 53;
    let top = (x.abs() >> shift).to_u64().unwrap_or(u64::MAX);
    (top as f64, (top + 1) as f64, shift as i64)
}

/// `|x| ~ m * 2^e`, rounded to nearest: 64 leading bits plus a sticky bit,
/// so the u64 to f64 conversion does the rounding.
fn big_abs_nearest(x: &BigInt) -> (f64, i64) {
    let bits = x.bits();
    let a = x.abs();
    if bits <= 64 {
        return (a.to_u64().unwrap_or(0) as f64, 0);
    }
    let shift = bits - 64;
    let mut top = (&a >> shift).to_u64().unwrap_or(u64::MAX);
    if a.trailing_zeros().is_some_and(|z| z < shift) {
        top |= 1;
    }
    (top as f64, shift as i64)
}

fn add_up(a: f64, b: f64) -> f64 {
    let s = a + b;
    if s == 0.0 {
        0.0
    } else {
        s.next_up()
    }
}

fn mul_up(a: f64, b: f64) -> f64 {
    let p = a * b;
    if p == 0.0 {
        0.0
    } else {
        p.next_up()
    }
}

/// `round(x / 2^k)` with ties toward +infinity; returns (value, exact).
fn round_shift(x: &BigInt, k: u32) -> (BigInt, bool) {
    if k == 0 {
        return (x.clone(), true);
    }
    let half = BigInt::one() << (k - 1);
    let r = (x + &half) >> k;
    let exact = (&r << k) == *x;
    (r, exact)
}

impl Ball {
    pub fn zero(prec: u32) -> Self {
        Ball { mid: BigInt::zero(), prec, rad: 0.0 }
    }

    pub fn from_int(v: impl Into<BigInt>, prec: u32) -> Self {
        Ball { mid: v.into() << prec, prec, rad: 0.0 }
    }

    /// Ball around `p/q`, exact when the quotient is representable.
    pub fn from_ratio(p: &BigInt, q: &BigInt, prec: u32) -> Result<Self> {
        if q.is_zero() {
            return Err(Error::DivisionByZero);
        }
        let num = p << prec;
        let (mut quo, rem) = num.div_mod_floor(q);
        if rem.is_zero() {
            return Ok(Ball { mid: quo, prec, rad: 0.0 });
        }
        // round to nearest
        let twice: BigInt = &rem * 2;
        if twice.abs() >= q.abs() {
            quo += if q.is_positive() { 1 } else { -1 };
        }
        Ok(Ball { mid: quo, prec, rad: ldexp_up(1.0, -(prec as i64) - 1) })
    }

    pub fn from_rational(r: &BigRational, prec: u32) -> Self {
        // denominators of BigRational are never zero
        Self::from_ratio(r.numer(), r.denom(), prec).expect("nonzero denominator")
    }

    /// Exact ball for a finite double (rounded if it has bits below 2^-prec).
    pub fn from_f64(v: f64, prec: u32) -> Result<Self> {
        let r = BigRational::from_float(v)
            .ok_or_else(|| Error::InvalidArgument(format!("non-finite value {v}")))?;
        Ok(Self::from_rational(&r, prec))
    }

    /// `sqrt(k)` for a non-negative integer `k`.
    pub fn sqrt_int(k: &BigInt, prec: u32) -> Result<Self> {
        if k.is_negative() {
            return Err(Error::InvalidArgument("sqrt of a negative integer".into()));
        }
        let scaled = k << (2 * prec);
        let s = scaled.sqrt();
        let exact = &s * &s == scaled;
        let rad = if exact { 0.0 } else { ldexp_up(1.0, -(prec as i64)) };
        Ok(Ball { mid: s, prec, rad })
    }

    pub fn prec(&self) -> u32 {
        self.prec
    }

    pub fn rad(&self) -> f64 {
        self.rad
    }

    pub fn mid_raw(&self) -> &BigInt {
        &self.mid
    }

    pub fn is_exact(&self) -> bool {
        self.rad == 0.0
    }

    /// Full width of the enclosure, rounded up.
    pub fn width(&self) -> f64 {
        mul_up(2.0, self.rad)
    }

    pub fn mid_f64(&self) -> f64 {
        let (m, e) = big_abs_nearest(&self.mid);
        let v = m * 2f64.powi((e - self.prec as i64).clamp(-1070, 1000) as i32);
        if self.mid.is_negative() {
            -v
        } else {
            v
        }
    }

    /// The midpoint as an exact dyadic rational.
    pub fn mid_rational(&self) -> BigRational {
        BigRational::new(self.mid.clone(), BigInt::one() << self.prec)
    }

    /// Upper bound of `|mid|`.
    fn abs_mid_up(&self) -> f64 {
        let (_, hi, e) = big_abs_bounds(&self.mid);
        ldexp_up(hi, e - self.prec as i64)
    }

    /// Lower bound of `|mid|`.
    fn abs_mid_down(&self) -> f64 {
        let (lo, _, e) = big_abs_bounds(&self.mid);
        ldexp_down(lo, e - self.prec as i64)
    }

    /// Upper bound of `|x|` over the ball.
    pub fn abs_upper(&self) -> f64 {
        add_up(self.abs_mid_up(), self.rad)
    }

    /// Lower bound of `|x|` over the ball (0 when the ball touches 0).
    pub fn abs_lower(&self) -> f64 {
        let v = self.abs_mid_down() - self.rad;
        if v <= 0.0 {
            0.0
        } else {
            v.next_down().max(0.0)
        }
    }

    /// Upper bound of the ball as f64.
    pub fn upper_f64(&self) -> f64 {
        if self.mid.is_negative() {
            let v = self.abs_mid_down() - self.rad;
            (-v).next_up()
        } else {
            add_up(self.abs_mid_up(), self.rad)
        }
    }

    /// Lower bound of the ball as f64.
    pub fn lower_f64(&self) -> f64 {
        if self.mid.is_negative() {
            -add_up(self.abs_mid_up(), self.rad)
        } else {
            let v = self.abs_mid_down() - self.rad;
            v.next_down()
        }
    }

    /// Sign of every point in the ball, if it is the same for all of them.
    pub fn sign(&self) -> Option<Ordering> {
        if self.mid.is_zero() {
            return if self.rad == 0.0 { Some(Ordering::Equal) } else { None };
        }
        if self.abs_mid_down() > self.rad {
            Some(if self.mid.is_positive() { Ordering::Greater } else { Ordering::Less })
        } else {
            None
        }
    }

    /// True when every point of the ball is `>= 0`.
    pub fn certainly_nonneg(&self) -> bool {
        self.mid.sign() != Sign::Minus && (self.rad == 0.0 || self.abs_mid_down() >= self.rad)
    }

    pub fn contains_zero(&self) -> bool {
        self.sign().is_none() || self.sign() == Some(Ordering::Equal)
    }

    /// Re-express at another precision (rounding when lowering).
    pub fn with_prec(&self, prec: u32) -> Ball {
        match prec.cmp(&self.prec) {
            Ordering::Equal => self.clone(),
            Ordering::Greater => Ball { mid: &self.mid << (prec - self.prec), prec, rad: self.rad },
            Ordering::Less => {
                let (mid, exact) = round_shift(&self.mid, self.prec - prec);
                let extra = if exact { 0.0 } else { ldexp_up(1.0, -(prec as i64) - 1) };
                Ball { mid, prec, rad: add_up(self.rad, extra) }
            }
        }
    }

    fn aligned(a: &Ball, b: &Ball) -> (BigInt, BigInt, u32) {
        match a.prec.cmp(&b.prec) {
            Ordering::Equal => (a.mid.clone(), b.mid.clone(), a.prec),
            Ordering::Less => (&a.mid << (b.prec - a.prec), b.mid.clone(), b.prec),
            Ordering::Greater => (a.mid.clone(), &b.mid << (a.prec - b.prec), a.prec),
        }
    }

    pub fn add(&self, other: &Ball) -> Ball {
        let (a, b, prec) = Self::aligned(self, other);
        Ball { mid: a + b, prec, rad: add_up(self.rad, other.rad) }
    }

    pub fn sub(&self, other: &Ball) -> Ball {
        let (a, b, prec) = Self::aligned(self, other);
        Ball { mid: a - b, prec, rad: add_up(self.rad, other.rad) }
    }

    pub fn neg(&self) -> Ball {
        Ball { mid: -&self.mid, prec: self.prec, rad: self.rad }
    }

    pub fn abs(&self) -> Ball {
        Ball { mid: self.mid.abs(), prec: self.prec, rad: self.rad }
    }

    /// Exact multiplication by `2^e`.
    pub fn scale_pow2(&self, e: i64) -> Ball {
        let rad = if self.rad == 0.0 { 0.0 } else { ldexp_up(self.rad, e) };
        if e >= 0 {
            Ball { mid: &self.mid << (e as u64), prec: self.prec, rad }
        } else {
            Ball { mid: self.mid.clone(), prec: self.prec + (-e) as u32, rad }
        }
    }

    pub fn mul_int(&self, k: &BigInt) -> Ball {
        let (_, hi, e) = big_abs_bounds(k);
        Ball { mid: &self.mid * k, prec: self.prec, rad: mul_up(self.rad, ldexp_up(hi, e)) }
    }

    pub fn mul(&self, other: &Ball) -> Ball {
        let prec = self.prec.max(other.prec);
        let a = self.with_prec(prec);
        let b = other.with_prec(prec);
        let (mid, exact) = round_shift(&(&a.mid * &b.mid), prec);
        let mut rad = add_up(mul_up(a.abs_mid_up(), b.rad), mul_up(b.abs_mid_up(), a.rad));
        rad = add_up(rad, mul_up(a.rad, b.rad));
        if !exact {
            rad = add_up(rad, ldexp_up(1.0, -(prec as i64) - 1));
        }
        Ball { mid, prec, rad }
    }

    pub fn square(&self) -> Ball {
        self.mul(self)
    }

    pub fn div(&self, other: &Ball) -> Result<Ball> {
        let prec = self.prec.max(other.prec);
        let a = self.with_prec(prec);
        let b = other.with_prec(prec);
        let b_lo = b.abs_lower();
        if b_lo <= 0.0 || b.mid.is_zero() {
            return Err(Error::DivisionByZero);
        }
        let num = &a.mid << prec;
        let (mut quo, rem) = num.div_mod_floor(&b.mid);
        let exact = rem.is_zero();
        if !exact && (&rem * BigInt::from(2)).abs() >= b.mid.abs() {
            quo += if b.mid.is_positive() { 1 } else { -1 };
        }
        let mut rad = 0.0;
        if a.rad > 0.0 || b.rad > 0.0 {
            let ratio = a.abs_mid_up() / b.abs_mid_down().next_down();
            let num_err = add_up(a.rad, mul_up(ratio.next_up(), b.rad));
            rad = (num_err / b_lo).next_up();
        }
        if !exact {
            rad = add_up(rad, ldexp_up(1.0, -(prec as i64) - 1));
        }
        Ok(Ball { mid: quo, prec, rad })
    }

    pub fn recip(&self) -> Result<Ball> {
        Ball::from_int(1, self.prec).div(self)
    }

    pub fn powi(&self, n: u32) -> Ball {
        let mut acc = Ball::from_int(1, self.prec);
        let mut base = self.clone();
        let mut e = n;
        while e > 0 {
            if e & 1 == 1 {
                acc = acc.mul(&base);
            }
            e >>= 1;
            if e > 0 {
                base = base.square();
            }
        }
        acc
    }

    /// Square root of a ball whose points are all positive.
    pub fn sqrt(&self) -> Result<Ball> {
        let lo = self.lower_f64();
        if self.mid.is_negative() || (self.rad > 0.0 && lo <= 0.0) {
            if self.mid.is_zero() && self.rad == 0.0 {
                return Ok(self.clone());
            }
            return Err(Error::InvalidArgument("sqrt of a ball reaching below zero".into()));
        }
        let scaled = &self.mid << self.prec;
        let s = scaled.sqrt();
        let exact = &s * &s == scaled;
        let mut rad = if exact { 0.0 } else { ldexp_up(1.0, -(self.prec as i64)) };
        if self.rad > 0.0 {
            let denom = lo.sqrt().next_down();
            rad = add_up(rad, (self.rad / denom).next_up());
        }
        Ok(Ball { mid: s, prec: self.prec, rad })
    }

    /// Distance to the nearest integer, as a ball inside `[0, 1/2]`.
    pub fn dist_to_nearest_int(&self) -> Ball {
        let one = BigInt::one() << self.prec;
        let half = BigInt::one() << (self.prec.max(1) - 1);
        let r = self.mid.mod_floor(&one);
        let folded = if r > half { &one - &r } else { r };
        let mut out = Ball { mid: folded, prec: self.prec, rad: self.rad };
        if out.rad > 0.0 {
            // The fold is 1-Lipschitz; clip to the range [0, 1/2].
            let lo = out.lower_f64();
            let hi = out.upper_f64();
            if lo < 0.0 || hi > 0.5 {
                let l = lo.max(0.0);
                let h = hi.min(0.5);
                let m = Ball::from_f64((l + h) / 2.0, self.prec).unwrap_or(Ball::zero(self.prec));
                let r = ((h - l) / 2.0).next_up();
                out = Ball { mid: m.mid, prec: self.prec, rad: add_up(r, m.rad) };
            }
        }
        out
    }

    /// Nearest integer to the midpoint.
    pub fn round_mid(&self) -> BigInt {
        round_shift(&self.mid, self.prec).0
    }

    /// `floor(x)` when it is the same integer for every point of the ball.
    pub fn floor_certain(&self) -> Option<BigInt> {
        let f = self.mid.div_floor(&(BigInt::one() << self.prec));
        let lo = self.sub(&Ball::from_int(f.clone(), self.prec));
        let hi = Ball::from_int(f.clone() + 1, self.prec).sub(self);
        if lo.certainly_nonneg() && hi.sign() == Some(Ordering::Greater) {
            Some(f)
        } else {
            None
        }
    }

    /// Union hull with another ball.
    pub fn hull(&self, other: &Ball) -> Ball {
        let prec = self.prec.max(other.prec);
        let lo = if self.lower_f64() < other.lower_f64() { self } else { other };
        let hi = if self.upper_f64() > other.upper_f64() { self } else { other };
        let lo_b = lo.with_prec(prec);
        let hi_b = hi.with_prec(prec);
        let lo_pt = lo_b.mid.clone() - BigInt::from(1); // keep strictly outside rounding
        let hi_pt = hi_b.mid.clone() + BigInt::from(1);
        let mid = (&lo_pt + &hi_pt) >> 1;
        let half_span = Ball { mid: &hi_pt - &mid, prec, rad: 0.0 }.abs_mid_up();
        let rad = add_up(half_span, lo_b.rad.max(hi_b.rad));
        Ball { mid, prec, rad: add_up(rad, ldexp_up(2.0, -(prec as i64))) }
    }

    /// `pi` at the requested precision.
    pub fn pi(prec: u32) -> Ball {
        pi_cache().with_prec(prec)
    }

    /// `(cos 2 pi x, sin 2 pi x)`.
    pub fn cos_sin_turns(&self) -> (Ball, Ball) {
        cos_sin_turns(self)
    }
}

fn arctan_inv(x: u32, w: u32) -> (BigInt, u64) {
    // atan(1/x) = sum (-1)^k / ((2k+1) x^(2k+1)) in fixed point; returns
    // (value * 2^w, number of terms), each term off by at most one unit.
    let x2 = BigInt::from(x) * BigInt::from(x);
    let mut power = (BigInt::one() << w) / BigInt::from(x);
    let mut sum = BigInt::zero();
    let mut k: u64 = 0;
    while !power.is_zero() {
        let term = &power / BigInt::from(2 * k + 1);
        if k.is_multiple_of(2) {
            sum += term;
        } else {
            sum -= term;
        }
        power /= &x2;
        k += 1;
    }
    (sum, k)
}

fn pi_cache() -> &'static Ball {
    static PI: OnceLock<Ball> = OnceLock::new();
    PI.get_or_init(|| {
        let w = MAX_PRECISION + 128;
        let (a5, n5) = arctan_inv(5, w);
        let (a239, n239) = arctan_inv(239, w);
        let mid = a5 * 16 - a239 * 4;
        // every term of each series is off by < 2 units (power floor + quotient floor)
        let units = 2 * (16 * (n5 + 1) + 4 * (n239 + 1));
        Ball { mid, prec: w, rad: ldexp_up(units as f64, -(w as i64)) }
    })
}

fn cos_sin_turns(x: &Ball) -> (Ball, Ball) {
    let p = x.prec.max(8);
    let w = p + 40;
    let xw = x.with_prec(w);
    let one = BigInt::one() << w;
    let frac = xw.mid.mod_floor(&one);
    // nearest quarter turn
    let quarter_units = BigInt::one() << (w - 2);
    let (k_big, _) = round_shift(&frac, w - 2);
    let k = (k_big.to_i64().unwrap_or(0) % 4) as u8;
    let r_mid = &frac - &k_big * &quarter_units;
    let r = Ball { mid: r_mid, prec: w, rad: xw.rad };
    let theta = Ball::pi(w).mul(&r).mul_int(&BigInt::from(2));

    // Taylor series at the midpoint of theta, |theta| <= pi/4 + tiny.
    let t = theta.mid.clone();
    let mut term = one.clone();
    let mut cos_sum = one.clone();
    let mut sin_sum = BigInt::zero();
    let mut n: u64 = 0;
    loop {
        n += 1;
        term = (&term * &t) >> w;
        term /= BigInt::from(n);
        if term.is_zero() {
            break;
        }
        match n % 4 {
            1 => sin_sum += &term,
            2 => cos_sum -= &term,
            3 => sin_sum -= &term,
            _ => cos_sum += &term,
        }
        if n > 4 * w as u64 {
            break;
        }
    }
    // rounding: each term off by at most 2 units per step accumulated;
    // truncation: the first dropped term is below one unit.
    let units = (2 * n * n + 4) as f64;
    let rad = add_up(ldexp_up(units, -(w as i64)), theta.rad);
    let c = Ball { mid: cos_sum, prec: w, rad };
    let s = Ball { mid: sin_sum, prec: w, rad };
    let (c, s) = match k {
        0 => (c, s),
        1 => (s.neg(), c),
        2 => (c.neg(), s.neg()),
        _ => (s, c.neg()),
    };
    (c.with_prec(p), s.with_prec(p))
}

/// Complex number with ball real and imaginary parts.
#[derive(Clone, Debug)]
pub struct CBall {
    pub re: Ball,
    pub im: Ball,
}

impl CBall {
    pub fn zero(prec: u32) -> Self {
        CBall { re: Ball::zero(prec), im: Ball::zero(prec) }
    }

    pub fn one(prec: u32) -> Self {
        CBall { re: Ball::from_int(1, prec), im: Ball::zero(prec) }
    }

    pub fn new(re: Ball, im: Ball) -> Self {
        CBall { re, im }
    }

    /// `e(x) = exp(2 pi i x)`.
    pub fn expi_turns(x: &Ball) -> Self {
        let (c, s) = x.cos_sin_turns();
        CBall { re: c, im: s }
    }

    pub fn add(&self, o: &CBall) -> CBall {
        CBall { re: self.re.add(&o.re), im: self.im.add(&o.im) }
    }

    pub fn mul(&self, o: &CBall) -> CBall {
        let re = self.re.mul(&o.re).sub(&self.im.mul(&o.im));
        let im = self.re.mul(&o.im).add(&self.im.mul(&o.re));
        CBall { re, im }
    }

    pub fn norm_sqr(&self) -> Ball {
        self.re.square().add(&self.im.square())
    }

    pub fn conj(&self) -> CBall {
        CBall { re: self.re.clone(), im: self.im.neg() }
    }

    pub fn with_prec(&self, prec: u32) -> CBall {
        CBall { re: self.re.with_prec(prec), im: self.im.with_prec(prec) }
    }
}

impl std::fmt::Display for Ball {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{:.17e} +/- {:.3e}", self.mid_f64(), self.rad)
    }
}
