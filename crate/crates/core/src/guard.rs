//! Guarded comparisons and the distance to the nearest integer.

use serde::{Deserialize, Serialize};

use crate::ball::Ball;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Outcome of a comparison decided up to a guard band.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum GuardedBool {
    True,
    False,
    Ambiguous,
}

impl GuardedBool {
    pub fn is_true(self) -> bool {
        self == GuardedBool::True
    }

    pub fn and(self, other: GuardedBool) -> GuardedBool {
        use GuardedBool::*;
        match (self, other) {
            (False, _) | (_, False) => False,
            (True, True) => True,
            _ => Ambiguous,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            GuardedBool::True => "true",
            GuardedBool::False => "false",
            GuardedBool::Ambiguous => "ambiguous",
        }
    }
}

impl std::fmt::Display for GuardedBool {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// `a < b` on balls: True when `a < b - guard` for every point, False when
/// `a >= b + guard` for every point.
pub fn guarded_less_ball(a: &Ball, b: &Ball, guard: &Ball) -> GuardedBool {
    // b - guard - a > 0 certainly
    if b.sub(guard).sub(a).sign() == Some(std::cmp::Ordering::Greater) {
        return GuardedBool::True;
    }
    // a - b - guard >= 0 certainly
    if a.sub(b).sub(guard).certainly_nonneg() {
        return GuardedBool::False;
    }
    GuardedBool::Ambiguous
}

/// `a <= b` on balls, decided up to the guard band.
pub fn guarded_le_ball(a: &Ball, b: &Ball, guard: &Ball) -> GuardedBool {
    if b.add(guard).sub(a).certainly_nonneg() {
        return GuardedBool::True;
    }
    if a.sub(b).sub(guard).sign() == Some(std::cmp::Ordering::Greater) {
        return GuardedBool::False;
    }
    GuardedBool::Ambiguous
}

pub fn guarded_less(a: &Scalar, b: &Scalar, guard: &Scalar, prec: u32) -> Result<GuardedBool> {
    let g = guard.eval(prec)?;
    if g.sign() != Some(std::cmp::Ordering::Greater) {
        return Err(Error::InvalidArgument("guard must be positive".into()));
    }
    Ok(guarded_less_ball(&a.eval(prec)?, &b.eval(prec)?, &g))
}

/// `min_k |x - k|` as a ball inside `[0, 1/2]`.
pub fn dist_to_nearest_int(x: &Scalar, prec: u32) -> Result<Ball> {
    if let Some(r) = x.as_rational() {
        let f = r - r.floor();
        let half = num_rational::BigRational::new(1.into(), 2.into());
        let d = if f > half { num_rational::BigRational::from_integer(1.into()) - f } else { f };
        return Ok(Ball::from_rational(&d, prec));
    }
    Ok(x.eval(prec)?.dist_to_nearest_int())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn s(t: &str) -> Scalar {
        Scalar::parse(t).unwrap()
    }

    #[test]
    fn guarded_comparisons() {
        let g = s("1e-9");
        assert_eq!(guarded_less(&s("0.1"), &s("0.2"), &g, 192).unwrap(), GuardedBool::True);
        assert_eq!(guarded_less(&s("0.3"), &s("0.2"), &g, 192).unwrap(), GuardedBool::False);
        assert_eq!(guarded_less(&s("0.2"), &s("0.2 + 1e-12"), &g, 192).unwrap(), GuardedBool::Ambiguous);
        assert!(guarded_less(&s("0"), &s("1"), &s("0"), 192).is_err());
    }

    #[test]
    fn nearest_integer_distance() {
        assert_eq!(dist_to_nearest_int(&s("0"), 192).unwrap().mid_f64(), 0.0);
        assert_eq!(dist_to_nearest_int(&s("2.25"), 192).unwrap().mid_f64(), 0.25);
        assert_eq!(dist_to_nearest_int(&s("-0.1"), 192).unwrap().mid_f64(), 0.1);
        let r = dist_to_nearest_int(&s("sqrt(2)"), 192).unwrap();
        assert!((r.mid_f64() - (std::f64::consts::SQRT_2 - 1.0)).abs() < 1e-15);
    }

    fn surd() -> impl Strategy<Value = String> {
        (-50i64..50, 1i64..20, 2u32..30, -5i64..5).prop_map(|(p, q, k, c)| format!("{p}/{q} + {c}*sqrt({k})"))
    }

    proptest! {
        #[test]
        fn distance_is_periodic_and_even(t in surd(), k in -1000i64..1000) {
            let x = s(&t);
            let shifted = x.add(&Scalar::from_int(k));
            let d0 = dist_to_nearest_int(&x, 192).unwrap();
            let d1 = dist_to_nearest_int(&shifted, 192).unwrap();
            let d2 = dist_to_nearest_int(&x.neg(), 192).unwrap();
            prop_assert!(d0.sub(&d1).abs_upper() < 1e-50);
            prop_assert!(d0.sub(&d2).abs_upper() < 1e-50);
            prop_assert!(d0.lower_f64() >= -1e-15 && d0.upper_f64() <= 0.5 + 1e-15);
        }

        #[test]
        fn antisymmetric_outside_band(a in surd(), b in surd()) {
            let g = s("1e-20");
            let ab = guarded_less(&s(&a), &s(&b), &g, 192).unwrap();
            let ba = guarded_less(&s(&b), &s(&a), &g, 192).unwrap();
            if ab == GuardedBool::True {
                prop_assert_eq!(ba, GuardedBool::False);
            }
        }

        #[test]
        fn more_precision_never_flips(a in surd(), b in surd(), bits in 64u32..128) {
            let g = s("1e-12");
            let lo = guarded_less(&s(&a), &s(&b), &g, bits).unwrap();
            let hi = guarded_less(&s(&a), &s(&b), &g, bits + 128).unwrap();
            if lo != GuardedBool::Ambiguous {
                prop_assert_eq!(lo, hi);
            }
        }
    }
}
