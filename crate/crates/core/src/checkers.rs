// SPDX-License-Identifier: Apache-2.0

//! Waveform monitors. Every checker is a pure function of its inputs.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::kernel::{Logic, Ticks, Waveform};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ViolationKind {
    Glitch,
    HighTimeEnvelope,
    LowTimeEnvelope,
    FixedDelayDrift,
    MonotoneDelayBreach,
    PipelineMismatch,
    SelectWindow,
    XReached,
}

/// Enough to rerun the offending simulation.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Reproducer {
    pub seed: u64,
    pub scenario_hash: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ViolationReport {
    pub kind: ViolationKind,
    pub net: String,
    pub time: Ticks,
    pub measured: i64,
    pub bound_lo: i64,
    pub bound_hi: i64,
    pub reproducer: Reproducer,
}

impl ViolationReport {
    fn new(kind: ViolationKind, net: &str, time: Ticks, measured: i64, lo: i64, hi: i64) -> Self {
        ViolationReport {
            kind,
            net: net.to_string(),
            time,
            measured,
            bound_lo: lo,
            bound_hi: hi,
            reproducer: Reproducer::default(),
        }
    }
}

impl fmt::Display for ViolationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{:?} on {} at {}: measured {} outside [{}, {}] (seed {}, scenario {})",
            self.kind,
            self.net,
            self.time,
            self.measured,
            self.bound_lo,
            self.bound_hi,
            self.reproducer.seed,
            self.reproducer.scenario_hash
        )
    }
}

/// Attaches a reproducer to every finding.
pub fn stamp(findings: &mut [ViolationReport], r: &Reproducer) {
    for f in findings {
        f.reproducer = r.clone();
    }
}

/// Default minimum legitimate pulse width: `T / 20`.
pub fn default_min_pulse(period: Ticks) -> Ticks {
    period.frac(1, 20)
}

/// One finding per bounded constant segment shorter than `min_pulse`.
pub fn check_glitch(w: &Waveform, net: &str, min_pulse: Ticks) -> Vec<ViolationReport> {
    w.pulses()
        .into_iter()
        .filter(|&(a, b, _)| b - a < min_pulse)
        .map(|(a, b, _)| ViolationReport::new(ViolationKind::Glitch, net, a, (b - a).0 as i64, min_pulse.0 as i64, i64::MAX))
        .collect()
}

/// One finding per interval during which the waveform carries X.
pub fn check_no_x(w: &Waveform, net: &str) -> Vec<ViolationReport> {
    let mut out = Vec::new();
    if w.initial().is_x() {
        out.push(ViolationReport::new(ViolationKind::XReached, net, Ticks::ZERO, 0, 0, 0));
    }
    for &(t, l) in w.transitions() {
        if l.is_x() {
            out.push(ViolationReport::new(ViolationKind::XReached, net, t, t.0 as i64, 0, 0));
        }
    }
    out
}

/// Complete high pulses `(rise, fall)`.
pub fn high_pulses(w: &Waveform) -> Vec<(Ticks, Ticks)> {
    w.pulses().into_iter().filter(|p| p.2 == Logic::L1).map(|(a, b, _)| (a, b)).collect()
}

/// Complete low pulses `(fall, rise)`.
pub fn low_pulses(w: &Waveform) -> Vec<(Ticks, Ticks)> {
    w.pulses().into_iter().filter(|p| p.2 == Logic::L0).map(|(a, b, _)| (a, b)).collect()
}

/// Expected spacing between consecutive rising edges.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum RisingSchedule {
    None,
    /// Every gap equals the period.
    Period(Ticks),
    /// Gap `i` (between rising edges `i` and `i + 1`) equals `gaps[i]`.
    Gaps(Vec<Ticks>),
}

/// High times within `[high_lo, high_hi]` and rising gaps within `tol` of the schedule.
pub fn check_envelope(
    w: &Waveform,
    net: &str,
    schedule: &RisingSchedule,
    high_lo: Ticks,
    high_hi: Ticks,
    tol: Ticks,
) -> Vec<ViolationReport> {
    let mut out = Vec::new();
    for (a, b) in high_pulses(w) {
        let h = b - a;
        if h < high_lo || h > high_hi {
            out.push(ViolationReport::new(ViolationKind::HighTimeEnvelope, net, a, h.0 as i64, high_lo.0 as i64, high_hi.0 as i64));
        }
    }
    let rises = w.rising_edges();
    for (i, pair) in rises.windows(2).enumerate() {
        let gap = pair[1] - pair[0];
        let expect = match schedule {
            RisingSchedule::None => continue,
            RisingSchedule::Period(p) => *p,
            RisingSchedule::Gaps(g) => match g.get(i) {
                Some(&e) => e,
                None => break,
            },
        };
        let (lo, hi) = (expect.saturating_sub(tol), expect + tol);
        if gap < lo || gap > hi {
            out.push(ViolationReport::new(ViolationKind::FixedDelayDrift, net, pair[1], gap.0 as i64, lo.0 as i64, hi.0 as i64));
        }
    }
    out
}

/// Low pulse `i` (counted from the first complete one) within `tol` of `expected[i]`.
pub fn check_low_times(w: &Waveform, net: &str, expected: &[Ticks], tol: Ticks) -> Vec<ViolationReport> {
    low_pulses(w)
        .into_iter()
        .zip(expected)
        .filter_map(|((a, b), &e)| {
            let l = b - a;
            let (lo, hi) = (e.saturating_sub(tol), e + tol);
            (l < lo || l > hi).then(|| ViolationReport::new(ViolationKind::LowTimeEnvelope, net, a, l.0 as i64, lo.0 as i64, hi.0 as i64))
        })
        .collect()
}

/// Cumulative offsets `edges[k] - baseline[k]` must never decrease by more than `tol`,
/// and no single step may grow by more than `(1 + epsilon) * quantum + tol`.
pub fn check_monotone_delay(
    edges: &[Ticks],
    baseline: &[Ticks],
    net: &str,
    quantum: Ticks,
    epsilon: f64,
    tol: Ticks,
) -> Vec<ViolationReport> {
    let offs: Vec<i64> = edges.iter().zip(baseline).map(|(e, b)| e.diff(*b)).collect();
    let step_max = quantum.scale(1.0 + epsilon).0 as i64 + tol.0 as i64;
    let mut out = Vec::new();
    for k in 1..offs.len() {
        let d = offs[k] - offs[k - 1];
        if d < -(tol.0 as i64) || d > step_max {
            out.push(ViolationReport::new(ViolationKind::MonotoneDelayBreach, net, edges[k], d, -(tol.0 as i64), step_max));
        }
    }
    out
}

/// One pipeline stage: its output and the instants at which it samples its input,
/// aligned by clock-pulse index across stages.
#[derive(Clone, Debug)]
pub struct PipelineStage<'a> {
    pub net: &'a str,
    pub e_out: &'a Waveform,
    pub samples: &'a [Ticks],
}

/// Stages are ordered from the data input. Stage `j` reads `droop_in` (`j = 0`) or the
/// previous stage's output. For every sample `k` where that input is stable within
/// `window` of the sampling instant, the stage output observed at sample `k + 1` must
/// equal the input level at sample `k`. Unstable samples are exempt.
pub fn check_pipeline(droop_in: &Waveform, stages: &[PipelineStage<'_>], window: Ticks) -> Vec<ViolationReport> {
    let mut out = Vec::new();
    let mut input = droop_in;
    for st in stages {
        for k in 0..st.samples.len().saturating_sub(1) {
            let s = st.samples[k];
            let v = input.sample(s);
            let stable = !v.is_x() && input.transitions_in(s.saturating_sub(window), s + window).is_empty();
            if !stable {
                continue;
            }
            let next = st.samples[k + 1];
            let got = st.e_out.sample(next);
            if got != v {
                out.push(ViolationReport::new(ViolationKind::PipelineMismatch, st.net, next, logic_code(got), logic_code(v), logic_code(v)));
            }
        }
        input = st.e_out;
    }
    out
}

fn logic_code(l: Logic) -> i64 {
    match l {
        Logic::L0 => 0,
        Logic::L1 => 1,
        Logic::X => -1,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const T: Ticks = Ticks::DEFAULT_PERIOD;

    #[test]
    fn clean_clock_has_no_glitch() {
        let w = Waveform::clock(Ticks::ns(1), T.frac(1, 2), T, T * 10);
        assert!(check_glitch(&w, "c", T.frac(1, 10)).is_empty());
    }

    #[test]
    fn spike_is_a_glitch() {
        let w = Waveform::from_transitions(Logic::L0, [(Ticks::ns(3), Logic::L1), (Ticks::ns(3) + Ticks::ps(1), Logic::L0)]).unwrap();
        assert_eq!(check_glitch(&w, "c", Ticks::ns(5)).len(), 1);
    }

    #[test]
    fn high_time_bounds() {
        let w = Waveform::clock(Ticks::ns(1), T.frac(9, 20), T, T * 5);
        assert!(check_envelope(&w, "c", &RisingSchedule::Period(T), T.frac(44, 100), T.frac(46, 100), Ticks(0)).is_empty());
        assert!(!check_envelope(&w, "c", &RisingSchedule::None, T.frac(49, 100), T.frac(51, 100), Ticks(0)).is_empty());
    }

    #[test]
    fn monotone_offsets() {
        let q = T.frac(1, 4);
        let base: Vec<Ticks> = (0..6).map(|k| T * k).collect();
        let x = Ticks::ns(4);
        let ok: Vec<Ticks> = [0, 0, x.0, q.0, q.0, q.0].iter().zip(&base).map(|(o, b)| *b + Ticks(*o)).collect();
        assert!(check_monotone_delay(&ok, &base, "c", q, 0.0, Ticks(0)).is_empty());
        let bad: Vec<Ticks> = [0, q.0, 0].iter().zip(&base).map(|(o, b)| *b + Ticks(*o)).collect();
        assert_eq!(check_monotone_delay(&bad, &base, "c", q, 0.0, Ticks(0)).len(), 1);
        assert!(check_monotone_delay(&base, &base, "c", q, 0.0, Ticks(0)).is_empty());
    }
}
