//! Approximation functions `q -> psi(q)`.

use num_rational::BigRational;
use num_traits::ToPrimitive;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Relative widening applied to floating-point evaluations of `psi`.
pub const REL_GUARD: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "kebab-case")]
pub enum ApproxFunction {
    /// `c q^-b (log q)^-b'`.
    PowerLog { c: Scalar, b: Scalar, b_log: Scalar },
    /// Explicit values; `psi(t)` is read at `ceil(t)`.
    Table { values: Vec<(u64, f64)> },
}

/// The logarithm with `log t = 1` for `t <= e`.
pub fn log_conv(t: f64) -> f64 {
    if t <= std::f64::consts::E {
        1.0
    } else {
        t.ln()
    }
}

impl ApproxFunction {
    pub fn power_log(c: &str, b: &str, b_log: &str) -> Result<Self> {
        let f = ApproxFunction::PowerLog { c: Scalar::parse(c)?, b: Scalar::parse(b)?, b_log: Scalar::parse(b_log)? };
        f.validate()?;
        Ok(f)
    }

    /// `c / t`.
    pub fn reciprocal(c: f64) -> Result<Self> {
        let f = ApproxFunction::PowerLog { c: Scalar::from_f64(c)?, b: Scalar::from_int(1), b_log: Scalar::zero() };
        f.validate()?;
        Ok(f)
    }

    /// `c t^-b`.
    pub fn power(c: f64, b: f64) -> Result<Self> {
        let f = ApproxFunction::PowerLog { c: Scalar::from_f64(c)?, b: Scalar::from_f64(b)?, b_log: Scalar::zero() };
        f.validate()?;
        Ok(f)
    }

    pub fn table(values: Vec<(u64, f64)>) -> Result<Self> {
        let f = ApproxFunction::Table { values };
        f.validate()?;
        Ok(f)
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            ApproxFunction::PowerLog { c, .. } => {
                if !(c.to_f64() > 0.0) {
                    return Err(Error::InvalidArgument("power-log constant c must be positive".into()));
                }
            }
            ApproxFunction::Table { values } => {
                if values.iter().any(|&(_, v)| !(v >= 0.0) || !v.is_finite()) {
                    return Err(Error::InvalidArgument("table values must be finite and non-negative".into()));
                }
                if values.windows(2).any(|w| w[0].0 >= w[1].0) {
                    return Err(Error::InvalidArgument("table arguments must be strictly increasing".into()));
                }
            }
        }
        Ok(())
    }

    /// Exponents `(b, b')` of the power-log family, exactly.
    pub fn exponents(&self) -> Result<(BigRational, BigRational)> {
        match self {
            ApproxFunction::PowerLog { b, b_log, .. } => {
                let rb = b.as_rational().cloned();
                let rl = b_log.as_rational().cloned();
                match (rb, rl) {
                    (Some(x), Some(y)) => Ok((x, y)),
                    _ => Err(Error::InvalidArgument("power-log exponents must be rational".into())),
                }
            }
            ApproxFunction::Table { .. } => {
                Err(Error::InvalidArgument("no analytic test exists for a tabulated function".into()))
            }
        }
    }

    /// Midpoint value at a real argument `t >= 1`.
    pub fn eval(&self, t: f64) -> Result<f64> {
        match self {
            ApproxFunction::PowerLog { c, b, b_log } => {
                Ok(c.to_f64() * t.powf(-b.to_f64()) * log_conv(t).powf(-b_log.to_f64()))
            }
            ApproxFunction::Table { values } => {
                let k = t.ceil().max(1.0) as u64;
                match values.binary_search_by_key(&k, |&(q, _)| q) {
                    Ok(i) => Ok(values[i].1),
                    Err(_) => Err(Error::InvalidArgument(format!("table has no value at {k}"))),
                }
            }
        }
    }

    /// Enclosure `[lo, hi]` of `psi(t)`.
    pub fn eval_bounds(&self, t: f64) -> Result<(f64, f64)> {
        let v = self.eval(t)?;
        match self {
            ApproxFunction::Table { .. } => Ok((v, v)),
            ApproxFunction::PowerLog { .. } => Ok((v * (1.0 - REL_GUARD), v * (1.0 + REL_GUARD))),
        }
    }

    /// `k psi`, for `k > 0`.
    pub fn scaled(&self, k: f64) -> Result<Self> {
        if !(k > 0.0 && k.is_finite()) {
            return Err(Error::InvalidArgument(format!("scale factor must be positive, got {k}")));
        }
        let f = match self {
            ApproxFunction::PowerLog { c, b, b_log } => {
                ApproxFunction::PowerLog { c: c.mul(&Scalar::from_f64(k)?), b: b.clone(), b_log: b_log.clone() }
            }
            ApproxFunction::Table { values } => {
                ApproxFunction::Table { values: values.iter().map(|&(q, v)| (q, v * k)).collect() }
            }
        };
        f.validate()?;
        Ok(f)
    }

    pub fn describe(&self) -> String {
        match self {
            ApproxFunction::PowerLog { c, b, b_log } => format!("{c} * q^-({b}) * log(q)^-({b_log})"),
            ApproxFunction::Table { values } => format!("table of {} values", values.len()),
        }
    }

    pub fn constant(&self) -> Option<f64> {
        match self {
            ApproxFunction::PowerLog { c, .. } => c.as_rational().and_then(|r| r.to_f64()).or(Some(c.to_f64())),
            ApproxFunction::Table { .. } => None,
        }
    }
}
