// SPDX-License-Identifier: Apache-2.0

use std::fmt;
use std::iter::Sum;
use std::ops::{Add, AddAssign, Mul, Sub};

use serde::{Deserialize, Serialize};

/// Simulation time in femtoseconds.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Ticks(pub u64);

impl Ticks {
    pub const ZERO: Ticks = Ticks(0);
    pub const FS: Ticks = Ticks(1);
    pub const PS: Ticks = Ticks(1_000);
    pub const NS: Ticks = Ticks(1_000_000);
    pub const US: Ticks = Ticks(1_000_000_000);
    /// Default output clock period (50 ns).
    pub const DEFAULT_PERIOD: Ticks = Ticks(50_000_000);

    pub const fn fs(v: u64) -> Ticks {
        Ticks(v)
    }

    pub const fn ps(v: u64) -> Ticks {
        Ticks(v * 1_000)
    }

    pub const fn ns(v: u64) -> Ticks {
        Ticks(v * 1_000_000)
    }

    pub const fn get(self) -> u64 {
        self.0
    }

    /// `self * num / den`, rounded to the nearest tick (ties away from zero).
    pub fn frac(self, num: u64, den: u64) -> Ticks {
        assert!(den > 0, "zero denominator");
        let n = self.0 as u128 * num as u128;
        let d = den as u128;
        Ticks(((2 * n + d) / (2 * d)) as u64)
    }

    /// `self * factor`, rounded to the nearest tick.
    pub fn scale(self, factor: f64) -> Ticks {
        assert!(factor.is_finite() && factor >= 0.0, "invalid scale factor {factor}");
        Ticks((self.0 as f64 * factor).round() as u64)
    }

    pub fn saturating_sub(self, rhs: Ticks) -> Ticks {
        Ticks(self.0.saturating_sub(rhs.0))
    }

    pub fn checked_sub(self, rhs: Ticks) -> Option<Ticks> {
        self.0.checked_sub(rhs.0).map(Ticks)
    }

    /// Signed difference `self - rhs` in ticks.
    pub fn diff(self, rhs: Ticks) -> i64 {
        self.0 as i64 - rhs.0 as i64
    }

    pub fn as_ns(self) -> f64 {
        self.0 as f64 / 1e6
    }

    pub fn as_secs(self) -> f64 {
        self.0 as f64 * 1e-15
    }
}

impl Add for Ticks {
    type Output = Ticks;
    fn add(self, rhs: Ticks) -> Ticks {
        Ticks(self.0 + rhs.0)
    }
}

impl AddAssign for Ticks {
    fn add_assign(&mut self, rhs: Ticks) {
        self.0 += rhs.0;
    }
}

impl Sub for Ticks {
    type Output = Ticks;
    fn sub(self, rhs: Ticks) -> Ticks {
        Ticks(self.0.checked_sub(rhs.0).expect("tick subtraction underflow"))
    }
}

impl Mul<u64> for Ticks {
    type Output = Ticks;
    fn mul(self, rhs: u64) -> Ticks {
        Ticks(self.0 * rhs)
    }
}

impl Sum for Ticks {
    fn sum<I: Iterator<Item = Ticks>>(iter: I) -> Ticks {
        iter.fold(Ticks::ZERO, Add::add)
    }
}

impl fmt::Display for Ticks {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}fs", self.0)
    }
}
