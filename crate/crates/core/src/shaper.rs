// SPDX-License-Identifier: Apache-2.0

//! Staged pulse shapers and their glitch-freedom constraint analysis.
//!
//! An optional pre-stage `AND(in, delay(in, s))` delays the rising flank and shortens
//! the high time by `s`. Stage 1 is `NAND(x, NOT(delay(x, d1)))` and turns each rising
//! flank into a low pulse of width `d1`. Later stages alternate `NAND(x, delay(x, dk))`
//! on low pulses and `NOR(x, delay(x, dk))` on high pulses, each widening the pulse by
//! `dk`. A final inverter is added when the stage count is odd, so the output is a high
//! pulse of width `d1 + ... + dn` starting at a fixed delay after each input rising flank.

use serde::{Deserialize, Serialize};

use crate::gates::{delay_line, gate, source, GateKind};
use crate::kernel::{run_until, NetId, Netlist, NetlistBuilder, SimError, SimOptions, Ticks, Waveform};
use crate::timing::TimingProfile;
use crate::{Rational, Real};

/// Shaper delays as fractions of the clock period.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ShaperSpec {
    pub shorten: Option<Rational>,
    pub stages: Vec<Rational>,
}

impl ShaperSpec {
    /// Two stages `[T/3, T/6]`, no pre-stage.
    pub fn old() -> ShaperSpec {
        ShaperSpec { shorten: None, stages: vec![Rational::new(1, 3), Rational::new(1, 6)] }
    }

    /// Pre-stage `T/10`, stages `[T/3, T/6]`.
    pub fn idealized_new() -> ShaperSpec {
        ShaperSpec { shorten: Some(Rational::new(1, 10)), stages: vec![Rational::new(1, 3), Rational::new(1, 6)] }
    }

    /// Pre-stage `T/10`, stages `[T/4, T/5]`.
    pub fn implemented() -> ShaperSpec {
        ShaperSpec { shorten: Some(Rational::new(1, 10)), stages: vec![Rational::new(1, 4), Rational::new(1, 5)] }
    }

    /// Nominal output high time as a fraction of the period.
    pub fn target_high(&self) -> Rational {
        self.stages.iter().copied().sum()
    }

    pub fn to_ticks(&self, period: Ticks) -> ShaperStages {
        let f = |r: Rational| period.frac(*r.numer() as u64, *r.denom() as u64);
        ShaperStages { shorten: self.shorten.map(f), stages: self.stages.iter().copied().map(f).collect() }
    }

    pub fn validate(&self) -> Result<(), SimError> {
        let zero = Rational::from_integer(0);
        if self.stages.is_empty() {
            return Err(SimError::Config("shaper needs at least one stage".into()));
        }
        if self.stages.iter().chain(self.shorten.iter()).any(|&d| d <= zero) {
            return Err(SimError::Config("shaper delays must be positive".into()));
        }
        Ok(())
    }
}

/// Shaper delays in ticks.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ShaperStages {
    pub shorten: Option<Ticks>,
    pub stages: Vec<Ticks>,
}

impl ShaperStages {
    pub fn validate(&self) -> Result<(), SimError> {
        if self.stages.is_empty() {
            return Err(SimError::Config("shaper needs at least one stage".into()));
        }
        if self.stages.iter().chain(self.shorten.iter()).any(|&d| d < Ticks(1)) {
            return Err(SimError::Config("shaper delays must be at least one tick".into()));
        }
        Ok(())
    }
}

/// Adds a shaper under scope `name` and returns its output net.
pub fn build_shaper(
    b: &mut NetlistBuilder,
    tp: &TimingProfile,
    name: &str,
    input: NetId,
    stages: &ShaperStages,
) -> Result<NetId, SimError> {
    stages.validate()?;
    b.push_scope(name);
    let r = build_inner(b, tp, input, stages);
    b.pop_scope();
    r
}

fn build_inner(b: &mut NetlistBuilder, tp: &TimingProfile, input: NetId, st: &ShaperStages) -> Result<NetId, SimError> {
    let mut x = input;
    if let Some(s) = st.shorten {
        let d = delay_line(b, tp, "pre_dly", x, s)?;
        x = gate(b, tp, GateKind::And, "pre", &[x, d])?;
    }
    for (k, &dk) in st.stages.iter().enumerate() {
        // the stage-1 inverter is part of the d1 path
        let dk = if k == 0 && dk > tp.gate.fall { dk - tp.gate.fall } else { dk };
        let dly = delay_line(b, tp, &format!("s{}_dly", k + 1), x, dk)?;
        x = if k == 0 {
            let inv = gate(b, tp, GateKind::Not, "s1_inv", &[dly])?;
            gate(b, tp, GateKind::Nand, "s1", &[x, inv])?
        } else if k % 2 == 1 {
            gate(b, tp, GateKind::Nand, &format!("s{}", k + 1), &[x, dly])?
        } else {
            gate(b, tp, GateKind::Nor, &format!("s{}", k + 1), &[x, dly])?
        };
    }
    if st.stages.len() % 2 == 1 {
        x = gate(b, tp, GateKind::Not, "out_inv", &[x])?;
    }
    Ok(x)
}

/// Stand-alone shaper netlist driven by `input`; probes `in` and `out`.
pub fn shaper_netlist(stages: &ShaperStages, tp: &TimingProfile, input: Waveform) -> Result<Netlist, SimError> {
    let mut b = NetlistBuilder::new();
    let i = source(&mut b, "in", input)?;
    let o = build_shaper(&mut b, tp, "shaper", i, stages)?;
    let out = b.net("out");
    b.add("out", crate::gates::DelayLine { delay: Ticks(1) }, &[o], &[out])?;
    b.probe(i);
    b.probe(out);
    b.build()
}

/// Runs a shaper on `input` up to `t_end`. The result is the shaper output without the
/// one-tick probe buffer.
pub fn shape(input: &Waveform, stages: &ShaperStages, tp: &TimingProfile, t_end: Ticks) -> Result<Waveform, SimError> {
    let nl = shaper_netlist(stages, tp, input.clone())?;
    let r = run_until(&nl, t_end + Ticks(1), &SimOptions::default())?;
    let w = r.wave("out");
    Ok(Waveform::from_transitions(w.initial(), w.transitions().iter().map(|&(t, l)| (t - Ticks(1), l)))
        .expect("shift keeps order"))
}

/// One inequality `margin0 + slope * eps > 0` of the constraint system.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct StageBound<S> {
    pub stage: usize,
    pub description: String,
    /// Slack at `eps = 0`, as a fraction of the period.
    pub margin_at_zero: S,
    pub slope: S,
    /// Supremum of admissible `eps`, `None` when the inequality holds for every `eps`.
    pub bound: Option<S>,
}

impl<S: Real> StageBound<S> {
    pub fn feasible(&self) -> bool {
        self.margin_at_zero > S::zero()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ConstraintReport<S> {
    pub stages: Vec<StageBound<S>>,
    /// Supremum of `eps` for which every inequality holds (capped at 1); zero when broken.
    pub max_epsilon: S,
    /// First stage that fails already at `eps = 0`.
    pub broken_stage: Option<usize>,
}

impl<S: Real> ConstraintReport<S> {
    pub fn feasible(&self) -> bool {
        self.broken_stage.is_none()
    }

    /// Index of the stage with the tightest bound.
    pub fn binding_stage(&self) -> Option<usize> {
        let mut best: Option<(usize, S)> = None;
        for s in &self.stages {
            if let Some(b) = s.bound {
                if best.is_none_or(|(_, v)| b < v) {
                    best = Some((s.stage, b));
                }
            }
        }
        best.map(|(i, _)| i)
    }
}

fn linear<S: Real>(stage: usize, description: String, c0: S, c1: S) -> StageBound<S> {
    let bound = if c1 < S::zero() { Some(c0 / -c1) } else { None };
    StageBound { stage, description, margin_at_zero: c0, slope: c1, bound }
}

/// Solves the worst-case glitch-freedom inequalities for the largest `eps`.
///
/// All quantities are fractions of the period. With input high time at most
/// `(1+eps) h_max` and low time at least `(1-eps) l_min`, the low time seen by stage 1
/// (after the pre-stage, which lengthens it by `(1-eps) s`) must exceed `(1+eps) d1`;
/// every later stage `k` needs the accumulated pulse `(1-eps)(d1 + ... + d(k-1))` to
/// exceed `(1+eps) dk`. Inequalities are strict.
pub fn analyze_constraints<S: Real>(
    shorten: Option<S>,
    stages: &[S],
    input_high_max: Option<S>,
    input_low_min: Option<S>,
) -> ConstraintReport<S> {
    let one = S::one();
    let s = shorten.unwrap_or_else(S::zero);
    let d1 = stages.first().copied().unwrap_or_else(S::zero);
    let mut first: Vec<StageBound<S>> = Vec::new();
    if let Some(h) = input_high_max {
        // 1 - (1+e)h + (1-e)s - (1+e)d1 > 0
        first.push(linear(1, "period minus stretched high time exceeds d1".into(), one - h + s - d1, -h - s - d1));
    }
    if let Some(l) = input_low_min {
        // (1-e)(l + s) - (1+e)d1 > 0
        first.push(linear(1, "shrunk low time exceeds d1".into(), l + s - d1, -(l + s) - d1));
    }
    // Keep the tighter of the two stage-1 forms.
    let mut out: Vec<StageBound<S>> = Vec::new();
    if let Some(f) = first.into_iter().reduce(|a, b| if tighter(&b, &a) { b } else { a }) {
        out.push(f);
    }
    let mut acc = d1;
    for (k, &dk) in stages.iter().enumerate().skip(1) {
        // (1-e)acc - (1+e)dk > 0
        out.push(linear(k + 1, format!("accumulated pulse exceeds d{}", k + 1), acc - dk, -acc - dk));
        acc = acc + dk;
    }
    let broken_stage = out.iter().find(|b| !b.feasible()).map(|b| b.stage);
    let max_epsilon = if broken_stage.is_some() {
        S::zero()
    } else {
        out.iter().filter_map(|b| b.bound).fold(one, |m, b| m.min_of(b))
    };
    ConstraintReport { stages: out, max_epsilon, broken_stage }
}

fn tighter<S: Real>(a: &StageBound<S>, b: &StageBound<S>) -> bool {
    match (a.feasible(), b.feasible()) {
        (false, true) => true,
        (true, false) => false,
        (false, false) => a.margin_at_zero < b.margin_at_zero,
        (true, true) => match (a.bound, b.bound) {
            (Some(x), Some(y)) => x < y,
            (Some(_), None) => true,
            _ => false,
        },
    }
}

/// Constraint analysis of a [`ShaperSpec`] in scalar type `S`.
pub fn analyze_spec<S: Real>(spec: &ShaperSpec, input_high_max: Option<Rational>, input_low_min: Option<Rational>) -> ConstraintReport<S> {
    let c = |r: Rational| S::from_ratio(*r.numer(), *r.denom());
    let stages: Vec<S> = spec.stages.iter().copied().map(c).collect();
    analyze_constraints(spec.shorten.map(c), &stages, input_high_max.map(c), input_low_min.map(c))
}
