use serde::{Deserialize, Serialize};

use crate::ball::{Ball, MAX_PRECISION};
use crate::error::{Error, Result};

/// Numerical and resource knobs shared by every operation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Settings {
    /// Working precision in fractional bits.
    pub precision: u32,
    /// The guard band is `2^-guard_bits`.
    pub guard_bits: u32,
    /// Maximum number of candidate points a single enumeration may visit.
    pub budget: u64,
    /// Worker threads used by the enumeration kernels.
    pub workers: usize,
}

impl Default for Settings {
    fn default() -> Self {
        Settings { precision: 192, guard_bits: 96, budget: 1_000_000_000, workers: 1 }
    }
}

impl Settings {
    pub fn with_workers(mut self, workers: usize) -> Self {
        self.workers = workers;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.precision < 64 || self.precision > MAX_PRECISION {
            return Err(Error::InvalidArgument(format!(
                "precision must lie in 64..={MAX_PRECISION}, got {}",
                self.precision
            )));
        }
        if self.guard_bits == 0 || self.guard_bits >= self.precision {
            return Err(Error::InvalidArgument(format!(
                "guard bits must lie in 1..{}, got {}",
                self.precision, self.guard_bits
            )));
        }
        if self.workers == 0 {
            return Err(Error::InvalidArgument("workers must be positive".into()));
        }
        Ok(())
    }

    pub fn guard(&self) -> Ball {
        Ball::from_int(1, self.precision).scale_pow2(-(self.guard_bits as i64))
    }

    pub fn check_budget(&self, needed: u128) -> Result<()> {
        if needed > self.budget as u128 {
            Err(Error::Budget { needed, budget: self.budget })
        } else {
            Ok(())
        }
    }
}
