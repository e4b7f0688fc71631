// SPDX-License-Identifier: Apache-2.0

//! Independent interval-algebra model of two-valued signals.
//!
//! A signal is constant `before` for all negative time and toggles at each listed edge.
//! Gates are pointwise Boolean operations and delays are time shifts, so pure delay
//! networks can be evaluated exactly by forward substitution without an event queue.

use crate::kernel::{Logic, Ticks, Waveform};
use crate::shaper::ShaperSpec;
use crate::{Rational, Scalar};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct IntervalSignal<S> {
    before: bool,
    edges: Vec<S>,
}

impl<S: Scalar> IntervalSignal<S> {
    pub fn constant(v: bool) -> Self {
        IntervalSignal { before: v, edges: Vec::new() }
    }

    /// Signal from its steady level and toggle times; equal toggles cancel pairwise.
    pub fn from_edges(before: bool, mut edges: Vec<S>) -> Self {
        edges.sort_by(|a, b| a.partial_cmp(b).expect("ordered scalar"));
        let mut out: Vec<S> = Vec::with_capacity(edges.len());
        for e in edges {
            if out.last() == Some(&e) {
                out.pop();
            } else {
                out.push(e);
            }
        }
        IntervalSignal { before, edges: out }
    }

    /// Signal low before zero and high on each `[start, end)`. Intervals must be disjoint.
    pub fn from_intervals(intervals: &[(S, S)]) -> Self {
        let mut e = Vec::new();
        for &(a, b) in intervals {
            if a < b {
                e.push(a);
                e.push(b);
            }
        }
        IntervalSignal::from_edges(false, e)
    }

    /// Periodic clock, high on `[first + k period, first + k period + high)` for `k < cycles`.
    pub fn clock(first: S, high: S, period: S, cycles: usize) -> Self {
        let mut iv = Vec::with_capacity(cycles);
        let mut t = first;
        for _ in 0..cycles {
            iv.push((t, t + high));
            t = t + period;
        }
        IntervalSignal::from_intervals(&iv)
    }

    pub fn before(&self) -> bool {
        self.before
    }

    pub fn edges(&self) -> &[S] {
        &self.edges
    }

    pub fn at(&self, t: S) -> bool {
        let n = self.edges.iter().take_while(|&&e| e <= t).count();
        self.before ^ (n % 2 == 1)
    }

    /// Level after the last edge.
    pub fn last(&self) -> bool {
        self.before ^ (self.edges.len() % 2 == 1)
    }

    /// Maximal high intervals; `None` as the end means high forever.
    pub fn intervals(&self) -> Vec<(Option<S>, Option<S>)> {
        let mut out = Vec::new();
        let mut start: Option<Option<S>> = if self.before { Some(None) } else { None };
        for &e in &self.edges {
            match start.take() {
                Some(s) => out.push((s, Some(e))),
                None => start = Some(Some(e)),
            }
        }
        if let Some(s) = start {
            out.push((s, None));
        }
        out
    }

    pub fn shift(&self, d: S) -> Self {
        IntervalSignal { before: self.before, edges: self.edges.iter().map(|&e| e + d).collect() }
    }

    pub fn not(&self) -> Self {
        IntervalSignal { before: !self.before, edges: self.edges.clone() }
    }

    fn combine(&self, other: &Self, f: impl Fn(bool, bool) -> bool) -> Self {
        let mut times: Vec<S> = self.edges.iter().chain(other.edges.iter()).copied().collect();
        times.sort_by(|a, b| a.partial_cmp(b).expect("ordered scalar"));
        times.dedup();
        let before = f(self.before, other.before);
        let mut level = before;
        let mut edges = Vec::new();
        for t in times {
            let v = f(self.at(t), other.at(t));
            if v != level {
                edges.push(t);
                level = v;
            }
        }
        IntervalSignal { before, edges }
    }

    pub fn and(&self, other: &Self) -> Self {
        self.combine(other, |a, b| a && b)
    }

    pub fn or(&self, other: &Self) -> Self {
        self.combine(other, |a, b| a || b)
    }

    pub fn nand(&self, other: &Self) -> Self {
        self.combine(other, |a, b| !(a && b))
    }

    pub fn nor(&self, other: &Self) -> Self {
        self.combine(other, |a, b| !(a || b))
    }

    pub fn truncate(&self, t_end: S) -> Self {
        IntervalSignal { before: self.before, edges: self.edges.iter().copied().filter(|&e| e <= t_end).collect() }
    }
}

impl IntervalSignal<i64> {
    /// Converts an X-free waveform; `None` if it carries X.
    pub fn from_waveform(w: &Waveform) -> Option<Self> {
        if w.has_x() {
            return None;
        }
        Some(IntervalSignal {
            before: w.initial() == Logic::L1,
            edges: w.transitions().iter().map(|&(t, _)| t.0 as i64).collect(),
        })
    }

    /// Converts to a waveform; edges must be positive.
    pub fn to_waveform(&self) -> Waveform {
        let mut w = Waveform::new(Logic::from_bool(self.before));
        let mut v = self.before;
        for &e in &self.edges {
            v = !v;
            w.push(Ticks(e.max(0) as u64), Logic::from_bool(v)).expect("edges strictly increase");
        }
        w
    }
}

/// Gate and line delays used by the oracle circuits.
#[derive(Clone, Copy, Debug)]
pub struct OracleDelays<S> {
    pub gate: S,
    pub period: S,
}

/// Pulse shaper output for input `x`, mirroring [`crate::shaper::build_shaper`].
pub fn shaper<S: Scalar>(x: &IntervalSignal<S>, spec: &ShaperSpec, d: OracleDelays<S>) -> IntervalSignal<S> {
    let f = |r: Rational| frac(d.period, r);
    shaper_with(x, spec.shorten.map(f), &spec.stages.iter().map(|&r| f(r)).collect::<Vec<_>>(), d.gate)
}

/// `period * r` in the scalar type; integer scalars round to nearest.
pub fn frac<S: Scalar>(period: S, r: Rational) -> S {
    period.scale_ratio(*r.numer(), *r.denom())
}

/// Shaper with explicit delays.
pub fn shaper_with<S: Scalar>(x: &IntervalSignal<S>, shorten: Option<S>, stages: &[S], g: S) -> IntervalSignal<S> {
    let mut x = x.clone();
    if let Some(s) = shorten {
        x = x.and(&x.shift(s)).shift(g);
    }
    for (k, &dk) in stages.iter().enumerate() {
        let dl = if k == 0 && dk > g { x.shift(dk - g) } else { x.shift(dk) };
        x = if k == 0 {
            x.nand(&dl.not().shift(g)).shift(g)
        } else if k % 2 == 1 {
            x.nand(&dl).shift(g)
        } else {
            x.nor(&dl).shift(g)
        };
    }
    if stages.len() % 2 == 1 {
        x = x.not().shift(g);
    }
    x
}

/// Delay element clock path with a constant steering bit (`fast` = 1 sampled).
pub fn delay_element<S: Scalar>(
    clk_in: &IntervalSignal<S>,
    fast: bool,
    quarter: S,
    fast_path: S,
    shorten: Option<S>,
    stages: &[S],
    g: S,
) -> IntervalSignal<S> {
    let clk_d = clk_in.shift(fast_path);
    let t4n = clk_d.shift(quarter).not().shift(g);
    let filt = if fast { clk_d.not().shift(g) } else { IntervalSignal::constant(true) };
    let combined = filt.nand(&t4n).shift(g);
    shaper_with(&combined, shorten, stages, g)
}

/// Four phases from a double-rate input clock: `BUF(Q1), BUF(Q2), NOT(Q1), NOT(Q2)`
/// where `Q1` toggles on rising input edges and `Q2` on rising edges of the inverted input.
/// `q_delay` is the flip-flop clock-to-q.
pub fn phase_set<S: Scalar>(clk_in: &IntervalSignal<S>, gate: S, q_delay: S) -> [IntervalSignal<S>; 4] {
    let toggle = |clk: &IntervalSignal<S>| {
        let mut rises = Vec::new();
        let mut v = clk.before();
        for &e in clk.edges() {
            v = !v;
            if v {
                rises.push(e + q_delay);
            }
        }
        IntervalSignal::from_edges(false, rises)
    };
    let q1 = toggle(&clk_in.shift(gate));
    let q2 = toggle(&clk_in.not().shift(gate));
    [q1.shift(gate), q2.shift(gate), q1.not().shift(gate), q2.not().shift(gate)]
}
