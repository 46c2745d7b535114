//! Fixed-point arithmetic on `R/Z` and the incremental lattice scan.
//!
//! A [`Torus`] value holds `x mod 1` as `64 L` fractional bits. Additions and
//! integer multiples are exact modulo 1, so after encoding each matrix entry
//! once (with a known error) the residual of any integer combination carries
//! an error of at most `sum |coefficient| * entry error`.

use num_bigint::{BigInt, Sign};
use num_integer::Integer;
use num_traits::{FromPrimitive, One, Zero};

use crate::ball::{ldexp_up, Ball};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Torus<const L: usize>(pub [u64; L]);

impl<const L: usize> Torus<L> {
    pub const ZERO: Self = Torus([0; L]);
    pub const BITS: u32 = 64 * L as u32;

    #[inline(always)]
    pub fn add(self, o: Self) -> Self {
        let mut out = [0u64; L];
        let mut carry = 0u64;
        for i in 0..L {
            let (s1, c1) = self.0[i].overflowing_add(o.0[i]);
            let (s2, c2) = s1.overflowing_add(carry);
            out[i] = s2;
            carry = (c1 | c2) as u64;
        }
        Torus(out)
    }

    #[inline(always)]
    pub fn neg(self) -> Self {
        let mut out = [0u64; L];
        let mut borrow = 0u64;
        for i in 0..L {
            let (s1, b1) = 0u64.overflowing_sub(self.0[i]);
            let (s2, b2) = s1.overflowing_sub(borrow);
            out[i] = s2;
            borrow = (b1 | b2) as u64;
        }
        Torus(out)
    }

    #[inline(always)]
    pub fn sub(self, o: Self) -> Self {
        self.add(o.neg())
    }

    pub fn mul_u64(self, k: u64) -> Self {
        let mut out = [0u64; L];
        let mut carry = 0u128;
        for i in 0..L {
            let p = self.0[i] as u128 * k as u128 + carry;
            out[i] = p as u64;
            carry = p >> 64;
        }
        Torus(out)
    }

    pub fn mul_i64(self, k: i64) -> Self {
        let p = self.mul_u64(k.unsigned_abs());
        if k < 0 {
            p.neg()
        } else {
            p
        }
    }

    /// Distance to the nearest integer, in the same fixed-point scale.
    #[inline(always)]
    pub fn fold(self) -> Self {
        if self.0[L - 1] >> 63 == 1 {
            self.neg()
        } else {
            self
        }
    }

    #[inline(always)]
    pub fn lt(&self, o: &Self) -> bool {
        for i in (0..L).rev() {
            if self.0[i] != o.0[i] {
                return self.0[i] < o.0[i];
            }
        }
        false
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|&x| x == 0)
    }

    /// Value in `[0, 1)`.
    pub fn to_f64(self) -> f64 {
        let mut v = 0.0;
        for i in (0..L).rev() {
            v += self.0[i] as f64 * 2f64.powi(64 * (i as i32 - L as i32));
        }
        v
    }

    /// Representative in `[-1/2, 1/2)`.
    pub fn to_signed_f64(self) -> f64 {
        if self.0[L - 1] >> 63 == 1 {
            -self.neg().to_f64()
        } else {
            self.to_f64()
        }
    }

    /// `x mod 2^BITS` for an integer `x`.
    pub fn from_big(x: &BigInt) -> Self {
        let modulus = BigInt::one() << Self::BITS;
        let r = x.mod_floor(&modulus);
        let (_, digits) = r.to_u64_digits();
        let mut out = [0u64; L];
        for (i, d) in digits.into_iter().take(L).enumerate() {
            out[i] = d;
        }
        Torus(out)
    }

    pub fn to_big(self) -> BigInt {
        BigInt::from_slice(
            Sign::Plus,
            &self.0.iter().flat_map(|&w| [w as u32, (w >> 32) as u32]).collect::<Vec<_>>(),
        )
    }

    /// Encode a ball modulo 1; returns the value and an upper bound on the
    /// distance (mod 1) from any point of the ball to it.
    pub fn encode(b: &Ball) -> (Self, f64) {
        let t = b.with_prec(b.prec().max(Self::BITS));
        let shift = t.prec() - Self::BITS;
        let half = if shift == 0 { BigInt::zero() } else { BigInt::one() << (shift - 1) };
        let rounded: BigInt = (t.mid_raw() + &half) >> shift;
        let exact = shift == 0 || (&rounded << shift) == *t.mid_raw();
        let mut err = t.rad();
        if !exact {
            err = (err + ldexp_up(1.0, -(Self::BITS as i64) - 1)).next_up();
        }
        (Self::from_big(&rounded), err)
    }

    /// Half of the circle, plus one unit: larger than every folded value.
    pub fn above_half() -> Self {
        let mut out = [0u64; L];
        out[0] = 1;
        out[L - 1] |= 1u64 << 63;
        Torus(out)
    }

    /// `clamp(x, 0, above_half)` for an integer in units of `2^-BITS`.
    pub fn clamp_threshold(x: &BigInt) -> Self {
        if x.sign() != Sign::Plus {
            return Self::ZERO;
        }
        let cap = Self::above_half();
        if *x >= cap.to_big() {
            cap
        } else {
            Self::from_big(x)
        }
    }
}

/// Outcome for one enumerated point.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PointVerdict {
    Hit,
    Miss,
    Ambiguous,
}

/// Decides `||r_j|| < delta` for all components given a global error bound.
#[derive(Clone, Copy, Debug)]
pub struct Classifier<const L: usize> {
    /// `c < true_below` certifies `||r|| < delta - guard`.
    pub true_below: Torus<L>,
    /// `c >= false_from` certifies `||r|| >= delta + guard`.
    pub false_from: Torus<L>,
}

impl<const L: usize> Classifier<L> {
    /// Thresholds for `||r|| < delta` when every computed residual is within
    /// `err` of the exact one.
    pub fn new(delta: &Ball, guard: &Ball, err: f64) -> Self {
        let bits = Torus::<L>::BITS;
        let prec = delta.prec().max(guard.prec()).max(bits + 32);
        let e = Ball::from_f64(err, prec).expect("finite error bound");
        let lo = delta.sub(guard).sub(&e).with_prec(prec);
        let hi = delta.add(guard).add(&e).with_prec(prec);
        Classifier {
            true_below: Torus::clamp_threshold(&floor_lower_scaled(&lo, bits)),
            false_from: Torus::clamp_threshold(&ceil_upper_scaled(&hi, bits)),
        }
    }

    #[inline(always)]
    pub fn classify(&self, res: &[Torus<L>]) -> PointVerdict {
        let mut certain = true;
        for r in res {
            let c = r.fold();
            if !c.lt(&self.true_below) {
                if !c.lt(&self.false_from) {
                    return PointVerdict::Miss;
                }
                certain = false;
            }
        }
        if certain {
            PointVerdict::Hit
        } else {
            PointVerdict::Ambiguous
        }
    }
}

/// `floor(lower(b) * 2^bits)`, possibly smaller.
pub fn floor_lower_scaled(b: &Ball, bits: u32) -> BigInt {
    let shift = b.prec() as i64 - bits as i64;
    let m = if shift >= 0 {
        b.mid_raw().div_floor(&(BigInt::one() << shift as u64))
    } else {
        b.mid_raw() << (-shift) as u64
    };
    m - rad_units(b.rad(), bits)
}

/// `ceil(upper(b) * 2^bits)`, possibly larger.
pub fn ceil_upper_scaled(b: &Ball, bits: u32) -> BigInt {
    let shift = b.prec() as i64 - bits as i64;
    let m = if shift >= 0 {
        let d = BigInt::one() << shift as u64;
        -((-b.mid_raw()).div_floor(&d))
    } else {
        b.mid_raw() << (-shift) as u64
    };
    m + rad_units(b.rad(), bits)
}

fn rad_units(rad: f64, bits: u32) -> BigInt {
    if rad == 0.0 {
        return BigInt::zero();
    }
    let scaled = ldexp_up(rad, bits as i64).ceil();
    if scaled < 1.0 {
        BigInt::one()
    } else {
        <BigInt as FromPrimitive>::from_f64(scaled).expect("finite radius") + 1
    }
}

/// Incremental scan of an integer box: for every point `c` of
/// `prod [lo_i, hi_i]` the residual vector `base + sum c_i rows[i]` is
/// maintained with one row addition per step.
pub struct Scanner<'a, const L: usize> {
    pub rows: &'a [Vec<Torus<L>>],
    pub classifier: Classifier<L>,
}

impl<'a, const L: usize> Scanner<'a, L> {
    /// Visit every point in lexicographic order (last coordinate fastest).
    pub fn scan<F>(&self, base: &[Torus<L>], ranges: &[(i64, i64)], mut visit: F)
    where
        F: FnMut(&[i64], &[Torus<L>], PointVerdict),
    {
        let levels = ranges.len();
        debug_assert_eq!(levels, self.rows.len());
        if ranges.iter().any(|&(lo, hi)| lo > hi) {
            return;
        }
        let m = base.len();
        let mut coords: Vec<i64> = ranges.iter().map(|r| r.0).collect();
        let mut res = base.to_vec();
        let mut wraps = Vec::with_capacity(levels);
        for (i, &(lo, hi)) in ranges.iter().enumerate() {
            for j in 0..m {
                res[j] = res[j].add(self.rows[i][j].mul_i64(lo));
            }
            wraps.push(self.rows[i].iter().map(|t| t.mul_i64(lo - hi)).collect::<Vec<_>>());
        }
        loop {
            let v = self.classifier.classify(&res);
            visit(&coords, &res, v);
            let mut lvl = levels;
            loop {
                if lvl == 0 {
                    return;
                }
                lvl -= 1;
                if coords[lvl] < ranges[lvl].1 {
                    coords[lvl] += 1;
                    let row = &self.rows[lvl];
                    for j in 0..m {
                        res[j] = res[j].add(row[j]);
                    }
                    break;
                }
                coords[lvl] = ranges[lvl].0;
                let w = &wraps[lvl];
                for j in 0..m {
                    res[j] = res[j].add(w[j]);
                }
            }
        }
    }
}

/// Limb count used for a working precision.
pub fn limbs_for(precision: u32) -> usize {
    (precision.div_ceil(64) as usize).clamp(2, 4)
}

/// Run `$body` with a const `$l` matching the limb count for `$prec`.
#[macro_export]
#[doc(hidden)]
macro_rules! with_limbs {
    ($prec:expr, $l:ident => $body:expr) => {
        match $crate::torus::limbs_for($prec) {
            2 => {
                const $l: usize = 2;
                $body
            }
            3 => {
                const $l: usize = 3;
                $body
            }
            _ => {
                const $l: usize = 4;
                $body
            }
        }
    };
}
