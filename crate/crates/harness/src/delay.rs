// SPDX-License-Identifier: Apache-2.0

//! Delay micro-syntax.
//!
//! A delay is either a fraction of the clock period (`T`, `T/4`, `3T/4`, `0.33T`,
//! `13T/120`) or an absolute time (`250ps`, `1.5ns`, `7fs`, or a bare integer of
//! femtoseconds). Fractions are resolved against the scenario period and rounded to the
//! nearest tick, ties away from zero.

use std::fmt;
use std::str::FromStr;

use droopsim_core::Ticks;
use serde::de::{self, Visitor};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Delay {
    Abs(Ticks),
    /// `num / den` of the period, in lowest terms.
    Period { num: u64, den: u64 },
}

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
#[error("invalid delay `{input}`: {reason}")]
pub struct DelayError {
    pub input: String,
    pub reason: &'static str,
}

fn gcd(a: u128, b: u128) -> u128 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// Unsigned decimal as an exact fraction.
fn decimal(s: &str) -> Option<(u128, u128)> {
    let (int, frac) = s.split_once('.').unwrap_or((s, ""));
    if int.is_empty() && frac.is_empty() {
        return None;
    }
    if !int.chars().chain(frac.chars()).all(|c| c.is_ascii_digit()) || frac.len() > 18 {
        return None;
    }
    let den = 10u128.pow(frac.len() as u32);
    let i: u128 = if int.is_empty() { 0 } else { int.parse().ok()? };
    let f: u128 = if frac.is_empty() { 0 } else { frac.parse().ok()? };
    Some((i.checked_mul(den)?.checked_add(f)?, den))
}

impl Delay {
    pub fn fs(n: u64) -> Delay {
        Delay::Abs(Ticks(n))
    }

    /// `num / den` of the period.
    pub fn of_period(num: u64, den: u64) -> Delay {
        assert!(den > 0, "zero denominator");
        let g = gcd(num as u128, den as u128).max(1) as u64;
        Delay::Period { num: num / g, den: den / g }
    }

    pub fn resolve(self, period: Ticks) -> Ticks {
        match self {
            Delay::Abs(t) => t,
            Delay::Period { num, den } => period.frac(num, den),
        }
    }

    pub fn is_relative(self) -> bool {
        matches!(self, Delay::Period { .. })
    }
}

impl FromStr for Delay {
    type Err = DelayError;

    fn from_str(input: &str) -> Result<Delay, DelayError> {
        let err = |reason| DelayError { input: input.to_string(), reason };
        let s: String = input.chars().filter(|c| !c.is_whitespace()).collect();
        if s.is_empty() {
            return Err(err("empty"));
        }
        if let Some((coef, rest)) = s.split_once('T') {
            let (cn, cd) = if coef.is_empty() { (1, 1) } else { decimal(coef).ok_or_else(|| err("bad coefficient before T"))? };
            let den: u128 = match rest {
                "" => 1,
                r => match r.strip_prefix('/') {
                    Some(d) => d.parse().map_err(|_| err("bad denominator after T/"))?,
                    None => return Err(err("expected `/` after T")),
                },
            };
            if den == 0 {
                return Err(err("zero denominator"));
            }
            let (n, d) = (cn, cd * den);
            let g = gcd(n, d).max(1);
            let (n, d) = (n / g, d / g);
            if n > u64::MAX as u128 || d > u64::MAX as u128 {
                return Err(err("fraction too large"));
            }
            return Ok(Delay::Period { num: n as u64, den: d as u64 });
        }
        let split = s.find(|c: char| c.is_ascii_alphabetic()).unwrap_or(s.len());
        let (num, unit) = s.split_at(split);
        let scale: u128 = match unit {
            "" | "fs" => 1,
            "ps" => 1_000,
            "ns" => 1_000_000,
            "us" => 1_000_000_000,
            "ms" => 1_000_000_000_000,
            "s" => 1_000_000_000_000_000,
            _ => return Err(err("unknown unit (use fs, ps, ns, us, ms, s or a fraction of T)")),
        };
        let (n, d) = decimal(num).ok_or_else(|| err("bad number"))?;
        if unit.is_empty() && d != 1 {
            return Err(err("bare numbers are integer femtoseconds"));
        }
        let v = n.checked_mul(scale).ok_or_else(|| err("out of range"))?;
        let t = (2 * v + d) / (2 * d);
        u64::try_from(t).map(|t| Delay::Abs(Ticks(t))).map_err(|_| err("out of range"))
    }
}

impl fmt::Display for Delay {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            Delay::Abs(t) => write!(f, "{}fs", t.0),
            Delay::Period { num: 1, den: 1 } => write!(f, "T"),
            Delay::Period { num, den: 1 } => write!(f, "{num}T"),
            Delay::Period { num: 1, den } => write!(f, "T/{den}"),
            Delay::Period { num, den } => write!(f, "{num}T/{den}"),
        }
    }
}

impl Serialize for Delay {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Delay {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Delay, D::Error> {
        struct V;
        impl Visitor<'_> for V {
            type Value = Delay;

            fn expecting(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str("a delay such as \"T/4\", \"250ps\" or an integer number of femtoseconds")
            }

            fn visit_u64<E: de::Error>(self, v: u64) -> Result<Delay, E> {
                Ok(Delay::fs(v))
            }

            fn visit_i64<E: de::Error>(self, v: i64) -> Result<Delay, E> {
                u64::try_from(v).map(Delay::fs).map_err(|_| E::custom("negative delay"))
            }

            fn visit_str<E: de::Error>(self, v: &str) -> Result<Delay, E> {
                v.parse().map_err(E::custom)
            }
        }
        d.deserialize_any(V)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const T: Ticks = Ticks::DEFAULT_PERIOD;

    fn p(s: &str) -> Ticks {
        s.parse::<Delay>().unwrap().resolve(T)
    }

    #[test]
    fn fractions() {
        assert_eq!(p("T/3"), Ticks(16_666_667));
        assert_eq!(p("T/4"), Ticks(12_500_000));
        assert_eq!(p("3T/4"), Ticks(37_500_000));
        assert_eq!(p("0.33T"), Ticks(16_500_000));
        assert_eq!(p("13T/120"), Ticks(5_416_667));
        assert_eq!(p("2T"), Ticks(100_000_000));
        assert_eq!(p(" 3 T / 4 "), Ticks(37_500_000));
    }

    #[test]
    fn absolute() {
        assert_eq!(p("250ps"), Ticks(250_000));
        assert_eq!(p("1.5ns"), Ticks(1_500_000));
        assert_eq!(p("42"), Ticks(42));
        assert_eq!(p("0.0005ps"), Ticks(1));
    }

    #[test]
    fn rejects() {
        for s in ["", "T/0", "1.5", "3x", "T4", "-1ns", "ns"] {
            assert!(s.parse::<Delay>().is_err(), "{s}");
        }
    }

    #[test]
    fn display_round_trips() {
        for s in ["T", "T/3", "3T/4", "33T/100", "2T", "250000fs"] {
            let d: Delay = s.parse().unwrap();
            assert_eq!(d.to_string().parse::<Delay>().unwrap(), d);
        }
    }
}
