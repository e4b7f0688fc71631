// SPDX-License-Identifier: Apache-2.0

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{Logic, Ticks};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum WaveformError {
    #[error("transition at {at} is not after previous transition at {prev}")]
    NotIncreasing { prev: Ticks, at: Ticks },
    #[error("transition at {at} repeats level {level}")]
    RepeatedLevel { at: Ticks, level: Logic },
}

/// Piecewise-constant 3-valued signal: an initial level and strictly increasing
/// transitions, each to a level different from the one before it.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Waveform {
    initial: Logic,
    transitions: Vec<(Ticks, Logic)>,
}

impl Waveform {
    pub fn new(initial: Logic) -> Waveform {
        Waveform { initial, transitions: Vec::new() }
    }

    pub fn constant(level: Logic) -> Waveform {
        Waveform::new(level)
    }

    /// Validating constructor.
    pub fn from_transitions(
        initial: Logic,
        transitions: impl IntoIterator<Item = (Ticks, Logic)>,
    ) -> Result<Waveform, WaveformError> {
        let mut w = Waveform::new(initial);
        for (t, l) in transitions {
            if let Some(&(prev, _)) = w.transitions.last() {
                if t <= prev {
                    return Err(WaveformError::NotIncreasing { prev, at: t });
                }
            }
            if l == w.last_level() {
                return Err(WaveformError::RepeatedLevel { at: t, level: l });
            }
            w.transitions.push((t, l));
        }
        Ok(w)
    }

    /// Builds a waveform from possibly redundant `(time, level)` pairs: repeated
    /// levels are dropped, and for equal times the last pair wins.
    pub fn from_levels(initial: Logic, points: impl IntoIterator<Item = (Ticks, Logic)>) -> Waveform {
        let mut w = Waveform::new(initial);
        for (t, l) in points {
            w.set_from(t, l);
        }
        w
    }

    /// Periodic clock: low until `first_rise`, then high for `high` out of every `period`,
    /// up to and including `until`.
    pub fn clock(first_rise: Ticks, high: Ticks, period: Ticks, until: Ticks) -> Waveform {
        assert!(high > Ticks::ZERO && high < period, "clock high time must be inside the period");
        let mut w = Waveform::new(Logic::L0);
        let mut t = first_rise;
        while t <= until {
            w.set_from(t, Logic::L1);
            if t + high <= until {
                w.set_from(t + high, Logic::L0);
            }
            t += period;
        }
        w
    }

    /// Sets the level from `t` on, discarding any transition at or after `t`.
    pub fn set_from(&mut self, t: Ticks, level: Logic) {
        while matches!(self.transitions.last(), Some(&(lt, _)) if lt >= t) {
            self.transitions.pop();
        }
        if self.last_level() != level {
            if t == Ticks::ZERO && self.transitions.is_empty() {
                self.initial = level;
            } else {
                self.transitions.push((t, level));
            }
        }
    }

    /// Appends a transition. A push that does not change the level is a no-op.
    pub fn push(&mut self, t: Ticks, level: Logic) -> Result<(), WaveformError> {
        if let Some(&(prev, _)) = self.transitions.last() {
            if t <= prev {
                return Err(WaveformError::NotIncreasing { prev, at: t });
            }
        }
        if level != self.last_level() {
            self.transitions.push((t, level));
        }
        Ok(())
    }

    pub fn initial(&self) -> Logic {
        self.initial
    }

    pub fn transitions(&self) -> &[(Ticks, Logic)] {
        &self.transitions
    }

    pub fn len(&self) -> usize {
        self.transitions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.transitions.is_empty()
    }

    pub fn last_level(&self) -> Logic {
        self.transitions.last().map_or(self.initial, |&(_, l)| l)
    }

    /// Level at `t`. A transition takes effect at its own timestamp.
    pub fn sample(&self, t: Ticks) -> Logic {
        let idx = self.transitions.partition_point(|&(tt, _)| tt <= t);
        if idx == 0 {
            self.initial
        } else {
            self.transitions[idx - 1].1
        }
    }

    /// Level just before `t`.
    pub fn sample_before(&self, t: Ticks) -> Logic {
        let idx = self.transitions.partition_point(|&(tt, _)| tt < t);
        if idx == 0 {
            self.initial
        } else {
            self.transitions[idx - 1].1
        }
    }

    /// Transitions with `lo <= t <= hi`.
    pub fn transitions_in(&self, lo: Ticks, hi: Ticks) -> &[(Ticks, Logic)] {
        let a = self.transitions.partition_point(|&(t, _)| t < lo);
        let b = self.transitions.partition_point(|&(t, _)| t <= hi);
        &self.transitions[a..b.max(a)]
    }

    /// Times of L0 → L1 transitions.
    pub fn rising_edges(&self) -> Vec<Ticks> {
        self.edges(Logic::L0, Logic::L1)
    }

    /// Times of L1 → L0 transitions.
    pub fn falling_edges(&self) -> Vec<Ticks> {
        self.edges(Logic::L1, Logic::L0)
    }

    fn edges(&self, from: Logic, to: Logic) -> Vec<Ticks> {
        let mut prev = self.initial;
        let mut out = Vec::new();
        for &(t, l) in &self.transitions {
            if prev == from && l == to {
                out.push(t);
            }
            prev = l;
        }
        out
    }

    /// Bounded constant segments `(start, end, level)` between consecutive transitions.
    pub fn pulses(&self) -> Vec<(Ticks, Ticks, Logic)> {
        self.transitions.windows(2).map(|w| (w[0].0, w[1].0, w[0].1)).collect()
    }

    /// Every transition moved `d` later.
    pub fn shifted(&self, d: Ticks) -> Waveform {
        Waveform {
            initial: self.initial,
            transitions: self.transitions.iter().map(|&(t, l)| (t + d, l)).collect(),
        }
    }

    pub fn negated(&self) -> Waveform {
        Waveform {
            initial: !self.initial,
            transitions: self.transitions.iter().map(|&(t, l)| (t, !l)).collect(),
        }
    }

    /// Drops transitions after `t_end`.
    pub fn truncated(&self, t_end: Ticks) -> Waveform {
        let n = self.transitions.partition_point(|&(t, _)| t <= t_end);
        Waveform { initial: self.initial, transitions: self.transitions[..n].to_vec() }
    }

    pub fn has_x(&self) -> bool {
        self.initial == Logic::X || self.transitions.iter().any(|&(_, l)| l == Logic::X)
    }

    /// Re-checks the representation invariants.
    pub fn validate(&self) -> Result<(), WaveformError> {
        Waveform::from_transitions(self.initial, self.transitions.iter().copied()).map(|_| ())
    }
}
