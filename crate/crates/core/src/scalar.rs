// SPDX-License-Identifier: Apache-2.0

//! Scalar abstractions shared by the analysis code.

use std::fmt::Debug;

use num_rational::Ratio;
use num_traits::{Num, Signed};

/// An ordered additive number: enough for interval arithmetic on time axes.
pub trait Scalar: Num + Copy + PartialOrd + Debug + Send + Sync + 'static {
    /// `num / den`, rounded to the nearest representable value.
    fn from_ratio(num: i64, den: i64) -> Self;

    fn to_f64(self) -> f64;

    /// `self * num / den`, rounded like [`Scalar::from_ratio`].
    fn scale_ratio(self, num: i64, den: i64) -> Self;

    fn max_of(self, other: Self) -> Self {
        if other > self {
            other
        } else {
            self
        }
    }

    fn min_of(self, other: Self) -> Self {
        if other < self {
            other
        } else {
            self
        }
    }
}

/// A scalar that also supports exact (or IEEE) division and sign handling.
pub trait Real: Scalar + Signed {}

impl Scalar for i64 {
    fn from_ratio(num: i64, den: i64) -> Self {
        assert!(den != 0, "zero denominator");
        let (n, d) = if den < 0 { (-(num as i128), -(den as i128)) } else { (num as i128, den as i128) };
        // round half away from zero
        let q = if n >= 0 { (2 * n + d) / (2 * d) } else { -((-2 * n + d) / (2 * d)) };
        q as i64
    }

    fn scale_ratio(self, num: i64, den: i64) -> Self {
        let n = self as i128 * num as i128;
        let (n, d) = if den < 0 { (-n, -(den as i128)) } else { (n, den as i128) };
        let q = if n >= 0 { (2 * n + d) / (2 * d) } else { -((-2 * n + d) / (2 * d)) };
        q as i64
    }

    fn to_f64(self) -> f64 {
        self as f64
    }
}

impl Scalar for f64 {
    fn from_ratio(num: i64, den: i64) -> Self {
        num as f64 / den as f64
    }

    fn scale_ratio(self, num: i64, den: i64) -> Self {
        self * num as f64 / den as f64
    }

    fn to_f64(self) -> f64 {
        self
    }
}

impl Scalar for f32 {
    fn from_ratio(num: i64, den: i64) -> Self {
        (num as f64 / den as f64) as f32
    }

    fn scale_ratio(self, num: i64, den: i64) -> Self {
        (self as f64 * num as f64 / den as f64) as f32
    }

    fn to_f64(self) -> f64 {
        self as f64
    }
}

impl Scalar for Ratio<i64> {
    fn from_ratio(num: i64, den: i64) -> Self {
        Ratio::new(num, den)
    }

    fn scale_ratio(self, num: i64, den: i64) -> Self {
        self * Ratio::new(num, den)
    }

    fn to_f64(self) -> f64 {
        *self.numer() as f64 / *self.denom() as f64
    }
}

impl Real for f64 {}
impl Real for f32 {}
impl Real for Ratio<i64> {}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn integer_ratio_rounds_to_nearest() {
        assert_eq!(i64::from_ratio(50_000_000, 3), 16_666_667);
        assert_eq!(i64::from_ratio(50_000_000, 6), 8_333_333);
        assert_eq!(i64::from_ratio(5, 2), 3);
        assert_eq!(i64::from_ratio(-5, 2), -3);
        assert_eq!(i64::from_ratio(7, -2), -4);
    }

    #[test]
    fn rational_is_exact() {
        let third = Ratio::<i64>::from_ratio(1, 3);
        assert_eq!(third + third + third, Ratio::from_integer(1));
        assert!((third.to_f64() - 1.0 / 3.0).abs() < 1e-15);
    }
}
