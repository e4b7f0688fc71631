// SPDX-License-Identifier: Apache-2.0

//! The conditional T/4 delay element and chains of it.
//!
//! Each element is a synchronizer stage (mask-01 master, plain data slave) whose
//! clock-path slave (mask-0) decides whether the rising clock flank takes the fast path
//! or waits for the quarter-period line. The combined signal is re-shaped to a fixed
//! high time by a pulse shaper.
//!
//! Clock and data run in opposite directions along a chain: element 0 receives the
//! clock first and hands its output clock to element 1, while the droop bit enters at
//! element `n - 1` and leaves through element 0's `e_out`.

use serde::{Deserialize, Serialize};

use crate::checkers::{check_envelope, check_glitch, check_no_x, default_min_pulse, RisingSchedule, ViolationKind, ViolationReport};
use crate::gates::{delay_line, gate, source, DelayLine, GateKind};
use crate::kernel::{run_until, Logic, MetastabilityEvent, NetId, Netlist, NetlistBuilder, SimError, SimOptions, SimResult, Ticks, Waveform};
use crate::latch::{latch_init, LatchVariant, Transparent};
use crate::shaper::{build_shaper, ShaperSpec, ShaperStages};
use crate::timing::TimingProfile;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DelayElementConfig {
    pub period: Ticks,
    /// Nominal `T / 4`.
    pub quarter_delay: Ticks,
    /// Delay of the clock into the fast-path filter and the quarter line. Must exceed one
    /// gate plus one clock-to-q so the clock slave settles before the fast path opens.
    pub fast_path_delay: Ticks,
    pub shaper: ShaperStages,
    pub timing: TimingProfile,
    /// Power-up level of the stored bits (L1 = no droop).
    pub idle: Logic,
}

impl DelayElementConfig {
    pub fn new(period: Ticks, shaper: &ShaperSpec, timing: TimingProfile) -> DelayElementConfig {
        let fast_path_delay = (timing.clk_to_q + timing.gate.max()) * 2;
        DelayElementConfig {
            period,
            quarter_delay: period.frac(1, 4),
            fast_path_delay,
            shaper: shaper.to_ticks(period),
            timing,
            idle: Logic::L1,
        }
    }

    pub fn validate(&self) -> Result<(), SimError> {
        self.timing.validate()?;
        self.shaper.validate()?;
        if self.idle.is_x() {
            return Err(SimError::Config("idle level must be 0 or 1".into()));
        }
        let eps = self.timing.variation.epsilon;
        let worst = (self.timing.clk_to_q + self.timing.gate.max()).scale(1.0 + eps);
        if self.fast_path_delay.scale(1.0 - eps) <= worst {
            return Err(SimError::Config("fast_path_delay must exceed gate + clock-to-q under variation".into()));
        }
        if self.quarter_delay == Ticks::ZERO || (self.quarter_delay + self.fast_path_delay).scale(1.0 + eps) * 2 >= self.period {
            return Err(SimError::Config("quarter_delay + fast_path_delay must stay below T/2".into()));
        }
        Ok(())
    }
}

/// Nets of one element, all inside the element's scope.
#[derive(Clone, Debug)]
pub struct ElementNets {
    pub scope: String,
    pub clk_out: NetId,
    pub e_out: NetId,
    pub clk_gated: NetId,
    pub master_q0: NetId,
    pub master_q1: NetId,
    pub slave_q0: NetId,
    pub combined: NetId,
    /// Latched reset, when built with one.
    pub rst: Option<NetId>,
}

/// Adds an element under scope `name`.
pub fn build_delay_element(
    b: &mut NetlistBuilder,
    cfg: &DelayElementConfig,
    name: &str,
    clk_in: NetId,
    droop_in: NetId,
) -> Result<ElementNets, SimError> {
    build_delay_element_rst(b, cfg, name, clk_in, droop_in, None)
}

/// Reset input of an element: `release` is the upstream reset level to pass on and
/// `rst_n` the asynchronous active-low reset.
#[derive(Clone, Copy, Debug)]
pub struct ElementReset {
    pub release: NetId,
    pub rst_n: NetId,
}

/// [`build_delay_element`] with a reset on all three latches. Reset stores 0, the droop
/// level. The release is latched on the element's own input clock (latch `rst`, open
/// while the clock is high), so it travels along the chain with the first clean pulse.
pub fn build_delay_element_rst(
    b: &mut NetlistBuilder,
    cfg: &DelayElementConfig,
    name: &str,
    clk_in: NetId,
    droop_in: NetId,
    reset: Option<ElementReset>,
) -> Result<ElementNets, SimError> {
    cfg.validate()?;
    let tp = &cfg.timing;
    b.push_scope(name);
    let r = (|| {
        let rst_n = match reset {
            Some(r) => Some(latch_init(b, tp, "rst", LatchVariant::Plain, Transparent::High, r.release, clk_in, Some(r.rst_n), Logic::L0)?[0]),
            None => None,
        };
        let clk_d = delay_line(b, tp, "clk_d", clk_in, cfg.fast_path_delay)?;
        let t4 = delay_line(b, tp, "clk_t4", clk_d, cfg.quarter_delay)?;
        let t4n = gate(b, tp, GateKind::Not, "clk_t4n", &[t4])?;
        let gated = gate(b, tp, GateKind::And, "clk_gated", &[clk_in, t4n])?;
        let m = latch_init(b, tp, "master", LatchVariant::Mask01, Transparent::High, droop_in, gated, rst_n, cfg.idle)?;
        let e_out = latch_init(b, tp, "dslave", LatchVariant::Plain, Transparent::Low, m[0], gated, rst_n, cfg.idle)?[0];
        let s = latch_init(b, tp, "cslave", LatchVariant::Mask0, Transparent::Low, m[1], gated, rst_n, cfg.idle)?[0];
        let fast = gate(b, tp, GateKind::Nand, "fast", &[clk_d, s])?;
        let combined = gate(b, tp, GateKind::Nand, "combined", &[fast, t4n])?;
        let clk_out = build_shaper(b, tp, "shaper", combined, &cfg.shaper)?;
        Ok(ElementNets {
            scope: b.local(""),
            clk_out,
            e_out,
            clk_gated: gated,
            master_q0: m[0],
            master_q1: m[1],
            slave_q0: s,
            combined,
            rst: rst_n,
        })
    })();
    b.pop_scope();
    let mut nets = r?;
    nets.scope.pop();
    Ok(nets)
}

/// Chain of `cfgs.len()` elements named `de0`, `de1`, ...
#[derive(Clone, Debug)]
pub struct ChainNets {
    pub elements: Vec<ElementNets>,
}

impl ChainNets {
    /// Clock leaving the last element.
    pub fn clk_out(&self) -> NetId {
        self.elements.last().expect("non-empty chain").clk_out
    }

    /// Synchronized droop bit leaving element 0.
    pub fn data_out(&self) -> NetId {
        self.elements[0].e_out
    }
}

pub fn build_chain(b: &mut NetlistBuilder, cfgs: &[DelayElementConfig], clk_in: NetId, droop_in: NetId) -> Result<ChainNets, SimError> {
    build_chain_rst(b, cfgs, clk_in, droop_in, None)
}

/// Chain whose reset release enters element 0 and is handed from element to element.
pub fn build_chain_rst(
    b: &mut NetlistBuilder,
    cfgs: &[DelayElementConfig],
    clk_in: NetId,
    droop_in: NetId,
    reset: Option<ElementReset>,
) -> Result<ChainNets, SimError> {
    if cfgs.is_empty() {
        return Err(SimError::Config("delay chain needs at least one element".into()));
    }
    let n = cfgs.len();
    // data enters at the far end, so element i reads element i + 1's e_out
    let data: Vec<NetId> = (0..n).map(|i| b.local_net(&format!("de{i}.dslave.q"))).collect();
    let mut elements = Vec::with_capacity(n);
    let mut clk = clk_in;
    let mut reset = reset;
    for (i, cfg) in cfgs.iter().enumerate() {
        let d = if i + 1 < n { data[i + 1] } else { droop_in };
        let e = build_delay_element_rst(b, cfg, &format!("de{i}"), clk, d, reset)?;
        debug_assert_eq!(e.e_out, data[i]);
        clk = e.clk_out;
        reset = reset.zip(e.rst).map(|(r, q)| ElementReset { release: q, rst_n: r.rst_n });
        elements.push(e);
    }
    Ok(ChainNets { elements })
}

/// Stand-alone chain netlist driven by two waveforms, with every element's interface
/// nets probed and a one-tick buffer `clk_out` on the final clock.
pub fn chain_netlist(cfgs: &[DelayElementConfig], clk_in: Waveform, droop_in: Waveform) -> Result<(Netlist, ChainNets), SimError> {
    let mut b = NetlistBuilder::new();
    let c = source(&mut b, "clk_in", clk_in)?;
    let d = source(&mut b, "droop_in", droop_in)?;
    let chain = build_chain(&mut b, cfgs, c, d)?;
    b.probe(c);
    b.probe(d);
    for e in &chain.elements {
        for n in [e.clk_out, e.e_out, e.clk_gated, e.master_q0, e.master_q1, e.slave_q0, e.combined] {
            b.probe(n);
        }
    }
    let out = b.net("clk_out");
    b.add("clk_out", DelayLine { delay: Ticks(1) }, &[chain.clk_out()], &[out])?;
    b.probe(out);
    Ok((b.build()?, chain))
}

/// Metastability case of one clock pulse through one element.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum CaseTag {
    #[serde(rename = "none")]
    None,
    /// Delay `delta + x`, `x > 0`, and the data path carries 0.
    #[serde(rename = "5a")]
    Fractional,
    /// Delay `delta`.
    #[serde(rename = "5b")]
    Fast,
}

impl CaseTag {
    pub fn label(self) -> &'static str {
        match self {
            CaseTag::None => "none",
            CaseTag::Fractional => "5a",
            CaseTag::Fast => "5b",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CycleRecord {
    pub index: usize,
    pub rise_in: Ticks,
    pub rise_out: Ticks,
    pub delay: Ticks,
    /// Master output at the rising input flank: the bit steering this pulse, X if the
    /// two master outputs disagree.
    pub sampled: Logic,
    /// Data-path level held while the data slave is opaque during this pulse.
    pub e_out: Logic,
    pub case: CaseTag,
    /// Extra delay beyond `delta` for 5a cycles.
    pub x: Option<Ticks>,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DelayElementReport {
    pub element: String,
    /// Fast-path delay measured from the first stable-1 cycle.
    pub delta: Option<Ticks>,
    pub cycles: Vec<CycleRecord>,
    /// Input-clock precondition breaches; simulation still runs.
    pub hypothesis: Vec<String>,
    pub findings: Vec<ViolationReport>,
}

impl DelayElementReport {
    /// `delay - delta` per cycle.
    pub fn offsets(&self) -> Vec<i64> {
        let d = self.delta.unwrap_or(Ticks::ZERO);
        self.cycles.iter().map(|c| c.delay.diff(d)).collect()
    }

    pub fn count(&self, tag: CaseTag) -> usize {
        self.cycles.iter().filter(|c| c.case == tag).count()
    }
}

/// Acceptance limits for the element properties.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ElementLimits {
    /// Relative tolerance on the input clock and the quarter delay.
    pub epsilon: f64,
    /// Relative tolerance on the output high time around the shaper target.
    pub eps_out: f64,
    /// Absolute slack added to every timing bound.
    pub tol: Ticks,
    pub min_pulse: Ticks,
}

impl ElementLimits {
    pub fn for_config(cfg: &DelayElementConfig) -> ElementLimits {
        let eps = cfg.timing.variation.epsilon;
        ElementLimits {
            epsilon: eps,
            eps_out: eps,
            tol: if eps == 0.0 { Ticks::ZERO } else { cfg.timing.gate.max() * 8 },
            min_pulse: default_min_pulse(cfg.period),
        }
    }
}

/// Input-clock preconditions: glitch-free, high `(1 +- eps) T/2`, low at least
/// `(1 - eps) T/2`, rising flanks `T` apart.
pub fn clock_hypothesis(clk: &Waveform, period: Ticks, eps: f64, tol: Ticks) -> Vec<String> {
    let mut out = Vec::new();
    let half = period.frac(1, 2);
    for (a, b, l) in clk.pulses() {
        let w = b - a;
        match l {
            Logic::L1 if w + tol < half.scale(1.0 - eps) || w > half.scale(1.0 + eps) + tol => {
                out.push(format!("high time {w} at {a} outside (1 +- {eps}) T/2"))
            }
            Logic::L0 if w + tol < half.scale(1.0 - eps) => out.push(format!("low time {w} at {a} below (1 - {eps}) T/2")),
            Logic::X => out.push(format!("X on clock at {a}")),
            _ => {}
        }
    }
    for p in clk.rising_edges().windows(2) {
        let g = p[1] - p[0];
        if g.diff(period).unsigned_abs() > tol.0 {
            out.push(format!("rising flanks {} and {} are {g} apart", p[0], p[1]));
        }
    }
    out
}

/// Measures one element of a finished run. `clk_in` is the element's input clock.
pub fn element_report(
    res: &SimResult,
    nl: &Netlist,
    nets: &ElementNets,
    cfg: &DelayElementConfig,
    clk_in: &Waveform,
    limits: &ElementLimits,
) -> DelayElementReport {
    let name = |n: &str| format!("{}.{n}", nets.scope);
    let clk_out = res.wave(nl.net_name(nets.clk_out));
    let e_out = res.wave(&name("dslave.q"));
    let q0 = res.wave(&name("master.q0"));
    let q1 = res.wave(&name("master.q1"));
    let gated = res.wave(&name("clk_gated"));
    let meta: Vec<&MetastabilityEvent> = res.metastability.iter().filter(|m| m.instance.starts_with(&format!("{}.", nets.scope))).collect();

    let ins = clk_in.rising_edges();
    let outs = clk_out.rising_edges();
    let gated_falls = gated.falling_edges();
    let master = name("master");
    let mut cycles = Vec::new();
    // each input flank pairs with the next output flank not before it
    let mut later = outs.iter().copied().peekable();
    for (k, &ri) in ins.iter().enumerate() {
        while later.next_if(|&ro| ro < ri).is_some() {}
        let Some(ro) = later.next() else { break };
        let prev = if k == 0 { Ticks::ZERO } else { ins[k - 1] };
        let window_end = ri + cfg.period.frac(1, 2);
        let involved = meta.iter().any(|m| {
            if m.instance == master {
                m.entered_at > prev && m.entered_at <= ri
            } else {
                m.entered_at > ri && m.entered_at <= window_end
            }
        });
        let (a, b) = (q0.sample(ri), q1.sample(ri));
        let sampled = if a == b { a } else { Logic::X };
        let close = gated_falls.iter().copied().find(|&t| t > ri).unwrap_or(window_end);
        cycles.push(CycleRecord {
            index: k,
            rise_in: ri,
            rise_out: ro,
            delay: ro - ri,
            sampled,
            e_out: e_out.sample_before(close),
            case: if involved { CaseTag::Fast } else { CaseTag::None },
            x: None,
        });
    }

    let delta = cycles
        .iter()
        .find(|c| c.case == CaseTag::None && c.sampled == Logic::L1)
        .map(|c| c.delay)
        .or_else(|| {
            cycles
                .iter()
                .find(|c| c.case == CaseTag::None && c.sampled == Logic::L0)
                .and_then(|c| c.delay.checked_sub(cfg.quarter_delay))
        });

    let mut findings = Vec::new();
    let out_net = name("clk_out");
    if let Some(d) = delta {
        for c in cycles.iter_mut().filter(|c| c.case != CaseTag::None) {
            if c.delay > d + limits.tol {
                c.case = CaseTag::Fractional;
                c.x = Some(c.delay - d);
            }
        }
        let q = cfg.quarter_delay;
        let (q_lo, q_hi) = (q.scale(1.0 - limits.epsilon).saturating_sub(limits.tol), q.scale(1.0 + limits.epsilon) + limits.tol);
        for c in &cycles {
            let off = c.delay.diff(d);
            let (lo, hi) = match (c.case, c.sampled) {
                (CaseTag::None, Logic::L1) | (CaseTag::Fast, _) => (-(limits.tol.0 as i64), limits.tol.0 as i64),
                (CaseTag::None, _) => (q_lo.0 as i64, q_hi.0 as i64),
                (CaseTag::Fractional, _) => (0, q_hi.0 as i64),
            };
            if off < lo || off > hi {
                findings.push(ViolationReport {
                    kind: ViolationKind::FixedDelayDrift,
                    net: out_net.clone(),
                    time: c.rise_out,
                    measured: off,
                    bound_lo: lo,
                    bound_hi: hi,
                    reproducer: Default::default(),
                });
            }
            if c.case == CaseTag::Fractional && c.e_out != Logic::L0 {
                findings.push(ViolationReport {
                    kind: ViolationKind::PipelineMismatch,
                    net: name("dslave.q"),
                    time: c.rise_in,
                    measured: if c.e_out == Logic::L1 { 1 } else { -1 },
                    bound_lo: 0,
                    bound_hi: 0,
                    reproducer: Default::default(),
                });
            }
        }
    }
    let target = cfg.shaper.stages.iter().copied().sum::<Ticks>();
    findings.extend(check_glitch(clk_out, &out_net, limits.min_pulse));
    findings.extend(check_no_x(clk_out, &out_net));
    findings.extend(check_envelope(
        clk_out,
        &out_net,
        &RisingSchedule::None,
        target.scale(1.0 - limits.eps_out).saturating_sub(limits.tol),
        target.scale(1.0 + limits.eps_out) + limits.tol,
        limits.tol,
    ));
    DelayElementReport {
        element: nets.scope.clone(),
        delta,
        cycles,
        hypothesis: clock_hypothesis(clk_in, cfg.period, limits.epsilon, limits.tol),
        findings,
    }
}

/// Result of simulating a single element.
#[derive(Clone, Debug)]
pub struct ElementRun {
    pub clk_out: Waveform,
    pub e_out: Waveform,
    pub report: DelayElementReport,
    pub result: SimResult,
}

/// Simulates one element driven by `clk_in` and `droop_in` up to `t_end`.
pub fn run_element(cfg: &DelayElementConfig, clk_in: &Waveform, droop_in: &Waveform, t_end: Ticks) -> Result<ElementRun, SimError> {
    let mut run = run_chain(std::slice::from_ref(cfg), clk_in, droop_in, t_end)?;
    let report = run.reports.pop().expect("one element");
    Ok(ElementRun { clk_out: run.clk_out, e_out: run.data_out, report, result: run.result })
}

/// Result of simulating a chain.
#[derive(Clone, Debug)]
pub struct ChainRun {
    pub clk_out: Waveform,
    pub data_out: Waveform,
    /// One report per element, element 0 first.
    pub reports: Vec<DelayElementReport>,
    pub result: SimResult,
}

pub fn run_chain(cfgs: &[DelayElementConfig], clk_in: &Waveform, droop_in: &Waveform, t_end: Ticks) -> Result<ChainRun, SimError> {
    let (nl, chain) = chain_netlist(cfgs, clk_in.clone(), droop_in.clone())?;
    let res = run_until(&nl, t_end, &SimOptions::default())?;
    let mut reports = Vec::with_capacity(cfgs.len());
    let mut input = clk_in.clone();
    for (e, cfg) in chain.elements.iter().zip(cfgs) {
        let r = element_report(&res, &nl, e, cfg, &input, &ElementLimits::for_config(cfg));
        input = res.wave(nl.net_name(e.clk_out)).clone();
        reports.push(r);
    }
    let clk_out = res.wave(nl.net_name(chain.clk_out())).clone();
    let data_out = res.wave(nl.net_name(chain.data_out())).clone();
    Ok(ChainRun { clk_out, data_out, reports, result: res })
}
