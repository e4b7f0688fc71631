// SPDX-License-Identifier: Apache-2.0

//! Combinational gates, delay lines, the 4:1 multiplexer, flip-flops, the Gray counter
//! and stimulus sources.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::kernel::{Component, Ctx, DiagKind, Logic, MetaOutcome, MetastabilityEvent, NetId, NetlistBuilder, SimError, Ticks, Waveform};
use crate::timing::{sample_resolution, DelaySpec, MetastabilityConfig, TimingProfile, VoltageMap, VoltageProfile};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum GateKind {
    Not,
    Buf,
    And,
    Nand,
    Or,
    Nor,
}

impl GateKind {
    pub fn name(self) -> &'static str {
        match self {
            GateKind::Not => "not",
            GateKind::Buf => "buf",
            GateKind::And => "and",
            GateKind::Nand => "nand",
            GateKind::Or => "or",
            GateKind::Nor => "nor",
        }
    }

    fn arity_ok(self, n: usize) -> bool {
        match self {
            GateKind::Not | GateKind::Buf => n == 1,
            _ => n >= 2,
        }
    }
}

/// Strong Kleene evaluation.
pub fn eval_combinational(kind: GateKind, inputs: &[Logic]) -> Result<Logic, SimError> {
    if !kind.arity_ok(inputs.len()) {
        let expected = if matches!(kind, GateKind::Not | GateKind::Buf) { 1 } else { 2 };
        return Err(SimError::Arity { kind: kind.name(), expected, got: inputs.len() });
    }
    let and = || inputs.iter().fold(Logic::L1, |a, &b| a.and(b));
    let or = || inputs.iter().fold(Logic::L0, |a, &b| a.or(b));
    Ok(match kind {
        GateKind::Not => !inputs[0],
        GateKind::Buf => inputs[0],
        GateKind::And => and(),
        GateKind::Nand => !and(),
        GateKind::Or => or(),
        GateKind::Nor => !or(),
    })
}

#[derive(Clone, Debug)]
pub struct Gate {
    pub kind: GateKind,
    pub arity: usize,
    pub delay: DelaySpec,
}

impl Gate {
    pub fn new(kind: GateKind, arity: usize, delay: DelaySpec) -> Result<Gate, SimError> {
        eval_combinational(kind, &vec![Logic::L0; arity])?;
        Ok(Gate { kind, arity, delay })
    }
}

impl Component for Gate {
    fn kind(&self) -> &'static str {
        self.kind.name()
    }

    fn ports(&self) -> (usize, usize) {
        (self.arity, 1)
    }

    fn min_delay(&self) -> Option<Ticks> {
        Some(self.delay.min())
    }

    fn settle(&mut self, inputs: &[Logic]) -> Vec<Logic> {
        vec![eval_combinational(self.kind, inputs).unwrap_or(Logic::X)]
    }

    fn react(&mut self, ctx: &mut Ctx<'_>) -> Result<(), SimError> {
        let ins: Vec<Logic> = (0..self.arity).map(|i| ctx.input(i)).collect();
        let v = eval_combinational(self.kind, &ins)?;
        ctx.drive_after(0, self.delay.for_level(v), v)
    }

    fn box_clone(&self) -> Box<dyn Component> {
        Box::new(self.clone())
    }
}

/// Transport delay line.
#[derive(Clone, Debug)]
pub struct DelayLine {
    pub delay: Ticks,
}

impl Component for DelayLine {
    fn kind(&self) -> &'static str {
        "delay"
    }

    fn ports(&self) -> (usize, usize) {
        (1, 1)
    }

    fn min_delay(&self) -> Option<Ticks> {
        Some(self.delay)
    }

    fn settle(&mut self, inputs: &[Logic]) -> Vec<Logic> {
        vec![inputs[0]]
    }

    fn react(&mut self, ctx: &mut Ctx<'_>) -> Result<(), SimError> {
        let v = ctx.input(0);
        ctx.drive_after(0, self.delay, v)
    }

    fn box_clone(&self) -> Box<dyn Component> {
        Box::new(self.clone())
    }
}

/// Buffer whose delay scales with the supply voltage at the moment an edge enters it.
#[derive(Clone, Debug)]
pub struct VddBuffer {
    pub delay: DelaySpec,
    pub map: VoltageMap,
    pub vdd: Arc<VoltageProfile>,
}

impl VddBuffer {
    fn delay_at(&self, t: Ticks, level: Logic) -> Ticks {
        self.delay.for_level(level).scale(self.map.scale(self.vdd.at(t))).max(Ticks(1))
    }
}

impl Component for VddBuffer {
    fn kind(&self) -> &'static str {
        "vdd_buf"
    }

    fn ports(&self) -> (usize, usize) {
        (1, 1)
    }

    fn min_delay(&self) -> Option<Ticks> {
        Some(Ticks(1))
    }

    fn settle(&mut self, inputs: &[Logic]) -> Vec<Logic> {
        vec![inputs[0]]
    }

    fn react(&mut self, ctx: &mut Ctx<'_>) -> Result<(), SimError> {
        let v = ctx.input(0);
        let d = self.delay_at(ctx.now(), v);
        ctx.drive_after(0, d, v)
    }

    fn box_clone(&self) -> Box<dyn Component> {
        Box::new(self.clone())
    }
}

/// 4:1 multiplexer. Ports: `in0..in3, s1, s0`; select `(s1, s0)` picks input `2*s1 + s0`.
/// A select change between inputs carrying the same level produces no output event.
#[derive(Clone, Debug)]
pub struct Mux4 {
    pub delay: DelaySpec,
}

pub fn mux4(inputs: [Logic; 4], s1: Logic, s0: Logic) -> Logic {
    match (s1.to_bool(), s0.to_bool()) {
        (Some(a), Some(b)) => inputs[2 * a as usize + b as usize],
        _ => Logic::X,
    }
}

impl Component for Mux4 {
    fn kind(&self) -> &'static str {
        "mux4"
    }

    fn ports(&self) -> (usize, usize) {
        (6, 1)
    }

    fn min_delay(&self) -> Option<Ticks> {
        Some(self.delay.min())
    }

    fn settle(&mut self, i: &[Logic]) -> Vec<Logic> {
        vec![mux4([i[0], i[1], i[2], i[3]], i[4], i[5])]
    }

    fn react(&mut self, ctx: &mut Ctx<'_>) -> Result<(), SimError> {
        let v = mux4([ctx.input(0), ctx.input(1), ctx.input(2), ctx.input(3)], ctx.input(4), ctx.input(5));
        ctx.drive_after(0, self.delay.for_level(v), v)
    }

    fn box_clone(&self) -> Box<dyn Component> {
        Box::new(self.clone())
    }
}

/// Capture bookkeeping shared by edge-triggered elements.
#[derive(Clone, Debug)]
struct Capture {
    instance: String,
    ctq: Ticks,
    meta: MetastabilityConfig,
    cycle: u64,
    /// `(edge time, sampled value, violated)` awaiting the end of the hold window.
    open: Option<(Ticks, Logic, bool)>,
}

const HOLD_TAG: u64 = 1;

impl Capture {
    /// Handles a capturing edge with the data on input port `d`. Returns the value to
    /// emit once the decision is final, or `None` if it was deferred.
    fn edge(&mut self, ctx: &mut Ctx<'_>, d: usize, value: Logic) -> Result<(), SimError> {
        let now = ctx.now();
        let lc = ctx.last_change(d);
        let in_setup = lc > Ticks::ZERO && lc >= now.saturating_sub(self.meta.setup);
        let violated = value.is_x() || (self.meta.enabled && in_setup);
        if self.meta.hold > Ticks::ZERO {
            self.open = Some((now, value, violated));
            ctx.wake_at(now + self.meta.hold, HOLD_TAG)
        } else {
            self.decide(ctx, now, value, violated)
        }
    }

    fn data_changed(&mut self, now: Ticks) {
        if let Some((t, _, ref mut v)) = self.open {
            if now > t && now <= t + self.meta.hold && self.meta.enabled {
                *v = true;
            }
        }
    }

    fn hold_elapsed(&mut self, ctx: &mut Ctx<'_>) -> Result<(), SimError> {
        if let Some((t, v, bad)) = self.open.take() {
            self.decide(ctx, t, v, bad)?;
        }
        Ok(())
    }

    fn decide(&mut self, ctx: &mut Ctx<'_>, t: Ticks, value: Logic, violated: bool) -> Result<(), SimError> {
        let cycle = self.cycle;
        self.cycle += 1;
        let out_at = t + self.ctq;
        if !violated {
            return ctx.drive(0, out_at, value);
        }
        if !self.meta.enabled {
            return ctx.drive(0, out_at, value);
        }
        let r = sample_resolution(&self.meta, &self.instance, cycle);
        ctx.drive(0, out_at, Logic::X)?;
        ctx.drive(0, out_at + r.delay.max(Ticks(1)), r.value)?;
        ctx.log_metastability(MetastabilityEvent {
            instance: self.instance.clone(),
            cycle,
            entered_at: t,
            delay: r.delay,
            value: r.value,
            forced: r.forced,
            outcome: MetaOutcome::Resolved,
        });
        Ok(())
    }
}

fn clock_edge(ctx: &Ctx<'_>, port: usize) -> Result<bool, SimError> {
    if ctx.input(port).is_x() {
        return Err(ctx.error(format!("X on clock net {}", ctx.input_net_name(port))));
    }
    Ok(ctx.rose(port))
}

/// Rising-edge D flip-flop. Ports: `d, clk` → `q`. A sampling-window violation drives X
/// from clock-to-q until the drawn resolution.
#[derive(Clone, Debug)]
pub struct Dff {
    cap: Capture,
    init: Logic,
}

impl Dff {
    pub fn new(instance: &str, ctq: Ticks, meta: MetastabilityConfig, init: Logic) -> Dff {
        Dff { cap: Capture { instance: instance.into(), ctq, meta, cycle: 0, open: None }, init }
    }
}

impl Component for Dff {
    fn kind(&self) -> &'static str {
        "dff"
    }

    fn ports(&self) -> (usize, usize) {
        (2, 1)
    }

    fn min_delay(&self) -> Option<Ticks> {
        Some(self.cap.ctq)
    }

    fn settle(&mut self, _: &[Logic]) -> Vec<Logic> {
        vec![self.init]
    }

    fn react(&mut self, ctx: &mut Ctx<'_>) -> Result<(), SimError> {
        if ctx.changed(0) {
            self.cap.data_changed(ctx.now());
        }
        if ctx.wakes().contains(&HOLD_TAG) {
            self.cap.hold_elapsed(ctx)?;
        }
        if clock_edge(ctx, 1)? {
            let d = ctx.input(0);
            self.cap.edge(ctx, 0, d)?;
        }
        Ok(())
    }

    fn box_clone(&self) -> Box<dyn Component> {
        Box::new(self.clone())
    }
}

/// Rising-edge toggle flip-flop. Ports: `t, clk` → `q`.
#[derive(Clone, Debug)]
pub struct Tff {
    cap: Capture,
    init: Logic,
}

impl Tff {
    pub fn new(instance: &str, ctq: Ticks, meta: MetastabilityConfig, init: Logic) -> Tff {
        Tff { cap: Capture { instance: instance.into(), ctq, meta, cycle: 0, open: None }, init }
    }
}

impl Component for Tff {
    fn kind(&self) -> &'static str {
        "tff"
    }

    fn ports(&self) -> (usize, usize) {
        (2, 1)
    }

    fn min_delay(&self) -> Option<Ticks> {
        Some(self.cap.ctq)
    }

    fn settle(&mut self, _: &[Logic]) -> Vec<Logic> {
        vec![self.init]
    }

    fn react(&mut self, ctx: &mut Ctx<'_>) -> Result<(), SimError> {
        if ctx.changed(0) {
            self.cap.data_changed(ctx.now());
        }
        if ctx.wakes().contains(&HOLD_TAG) {
            self.cap.hold_elapsed(ctx)?;
        }
        if clock_edge(ctx, 1)? {
            let q = ctx.projected_output(0);
            let next = match ctx.input(0) {
                Logic::L1 => !q,
                Logic::L0 => q,
                Logic::X => Logic::X,
            };
            self.cap.edge(ctx, 0, next)?;
        }
        Ok(())
    }

    fn box_clone(&self) -> Box<dyn Component> {
        Box::new(self.clone())
    }
}

/// Successor in the 2-bit Gray sequence 00 → 01 → 11 → 10 → 00 (bit 1 is the MSB).
pub fn gray_next(state: u8) -> u8 {
    match state & 3 {
        0b00 => 0b01,
        0b01 => 0b11,
        0b11 => 0b10,
        _ => 0b00,
    }
}

/// One counter step: advance when enabled. X enables are rejected.
pub fn gray_step(state: u8, enable: Logic) -> Result<u8, SimError> {
    match enable {
        Logic::L1 => Ok(gray_next(state)),
        Logic::L0 => Ok(state & 3),
        Logic::X => Err(SimError::Component {
            instance: "gray_counter".into(),
            time: Ticks::ZERO,
            message: "X on count enable".into(),
        }),
    }
}

/// Falling-edge 2-bit Gray up-counter. Ports: `en, clk` → `q1, q0`.
/// The enable is the level held just before the edge. An X enable holds the state and
/// logs a diagnostic.
#[derive(Clone, Debug)]
pub struct GrayCounter {
    pub ctq: Ticks,
    pub state: u8,
}

impl Component for GrayCounter {
    fn kind(&self) -> &'static str {
        "gray_counter"
    }

    fn ports(&self) -> (usize, usize) {
        (2, 2)
    }

    fn min_delay(&self) -> Option<Ticks> {
        Some(self.ctq)
    }

    fn settle(&mut self, _: &[Logic]) -> Vec<Logic> {
        vec![Logic::from_bool(self.state & 2 != 0), Logic::from_bool(self.state & 1 != 0)]
    }

    fn react(&mut self, ctx: &mut Ctx<'_>) -> Result<(), SimError> {
        if ctx.input(1).is_x() {
            return Err(ctx.error("X on counter clock"));
        }
        if !ctx.fell(1) {
            return Ok(());
        }
        let en = if ctx.changed(0) { ctx.prev_input(0) } else { ctx.input(0) };
        if en.is_x() {
            ctx.diagnose(DiagKind::Hypothesis, "X on count enable; state held");
            return Ok(());
        }
        self.state = gray_step(self.state, en)?;
        let at = ctx.now() + self.ctq;
        ctx.drive(0, at, Logic::from_bool(self.state & 2 != 0))?;
        ctx.drive(1, at, Logic::from_bool(self.state & 1 != 0))
    }

    fn box_clone(&self) -> Box<dyn Component> {
        Box::new(self.clone())
    }
}

/// Replays a fixed waveform.
#[derive(Clone, Debug)]
pub struct WaveformSource {
    pub wave: Waveform,
}

impl Component for WaveformSource {
    fn kind(&self) -> &'static str {
        "source"
    }

    fn ports(&self) -> (usize, usize) {
        (0, 1)
    }

    fn min_delay(&self) -> Option<Ticks> {
        None
    }

    fn settle(&mut self, _: &[Logic]) -> Vec<Logic> {
        vec![self.wave.sample(Ticks::ZERO)]
    }

    fn start(&mut self, ctx: &mut Ctx<'_>) -> Result<(), SimError> {
        for &(t, l) in self.wave.transitions() {
            if t > Ticks::ZERO {
                ctx.drive(0, t, l)?;
            }
        }
        Ok(())
    }

    fn react(&mut self, _: &mut Ctx<'_>) -> Result<(), SimError> {
        Ok(())
    }

    fn box_clone(&self) -> Box<dyn Component> {
        Box::new(self.clone())
    }
}

/// Free-running clock: low until `first_rise`, then high for `high` of every `period`.
#[derive(Clone, Debug)]
pub struct ClockSource {
    pub first_rise: Ticks,
    pub high: Ticks,
    pub period: Ticks,
    next: Ticks,
    next_level: Logic,
}

impl ClockSource {
    pub fn new(first_rise: Ticks, high: Ticks, period: Ticks) -> Result<ClockSource, SimError> {
        if high == Ticks::ZERO || high >= period {
            return Err(SimError::Config("clock high time must lie inside the period".into()));
        }
        Ok(ClockSource { first_rise, high, period, next: Ticks::ZERO, next_level: Logic::L1 })
    }

    fn advance(&mut self) {
        if self.next_level == Logic::L1 {
            self.next += self.high;
            self.next_level = Logic::L0;
        } else {
            self.next = self.next - self.high + self.period;
            self.next_level = Logic::L1;
        }
    }
}

impl Component for ClockSource {
    fn kind(&self) -> &'static str {
        "clock"
    }

    fn ports(&self) -> (usize, usize) {
        (0, 1)
    }

    fn min_delay(&self) -> Option<Ticks> {
        None
    }

    fn settle(&mut self, _: &[Logic]) -> Vec<Logic> {
        vec![Logic::from_bool(self.first_rise == Ticks::ZERO)]
    }

    fn start(&mut self, ctx: &mut Ctx<'_>) -> Result<(), SimError> {
        self.next = self.first_rise;
        self.next_level = Logic::L1;
        if self.first_rise == Ticks::ZERO {
            self.advance();
        }
        ctx.drive(0, self.next, self.next_level)?;
        ctx.wake_at(self.next, 0)
    }

    fn react(&mut self, ctx: &mut Ctx<'_>) -> Result<(), SimError> {
        if ctx.wakes().is_empty() {
            return Ok(());
        }
        self.advance();
        ctx.drive(0, self.next, self.next_level)?;
        ctx.wake_at(self.next, 0)
    }

    fn box_clone(&self) -> Box<dyn Component> {
        Box::new(self.clone())
    }
}

// Builder helpers. Each creates an output net named after the instance in the current scope.

pub fn gate(b: &mut NetlistBuilder, tp: &TimingProfile, kind: GateKind, name: &str, inputs: &[NetId]) -> Result<NetId, SimError> {
    let delay = tp.gate_delay(&b.local(name));
    let out = b.local_net(name);
    b.add(name, Gate::new(kind, inputs.len(), delay)?, inputs, &[out])?;
    Ok(out)
}

/// Delay line with nominal `delay`, scaled by the instance's variation multiplier.
pub fn delay_line(b: &mut NetlistBuilder, tp: &TimingProfile, name: &str, input: NetId, delay: Ticks) -> Result<NetId, SimError> {
    let d = tp.line_delay(delay, &b.local(name));
    let out = b.local_net(name);
    b.add(name, DelayLine { delay: d }, &[input], &[out])?;
    Ok(out)
}

pub fn source(b: &mut NetlistBuilder, name: &str, wave: Waveform) -> Result<NetId, SimError> {
    let out = b.local_net(name);
    b.add(name, WaveformSource { wave }, &[], &[out])?;
    Ok(out)
}

pub fn clock(b: &mut NetlistBuilder, name: &str, first_rise: Ticks, high: Ticks, period: Ticks) -> Result<NetId, SimError> {
    let out = b.local_net(name);
    b.add(name, ClockSource::new(first_rise, high, period)?, &[], &[out])?;
    Ok(out)
}
