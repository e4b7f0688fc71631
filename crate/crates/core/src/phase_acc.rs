// SPDX-License-Identifier: Apache-2.0

//! Phase accumulator: divides a double-rate input clock by two and, whenever the
//! sampled droop bit is asserted (active-low), lengthens the current low phase by T/4.
//!
//! Two toggle flip-flops on the input clock and its inverse give phases at 0 and T/4;
//! their inverses give T/2 and 3T/4. A Gray counter clocked on the falling output flank
//! steps through the phases and its bits reach the mux select after `select_delay`, so
//! the switch happens while both the old and the new phase are low.

use serde::{Deserialize, Serialize};

use crate::checkers::{check_envelope, check_glitch, check_low_times, check_no_x, default_min_pulse, RisingSchedule, ViolationKind, ViolationReport};
use crate::gates::{delay_line, gate, source, GateKind, GrayCounter, Mux4, Tff};
use crate::kernel::{run_until, Logic, NetId, Netlist, NetlistBuilder, SimError, SimOptions, SimResult, Ticks, Waveform};
use crate::latch::{latch, LatchVariant, Transparent};
use crate::timing::TimingProfile;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhaseAccumulatorConfig {
    /// Output period; the input clock runs at `period / 2`.
    pub period: Ticks,
    /// Delay from counter bits to the mux select, nominally `0.33 T`.
    pub select_delay: Ticks,
    pub timing: TimingProfile,
}

impl PhaseAccumulatorConfig {
    pub fn new(period: Ticks, timing: TimingProfile) -> PhaseAccumulatorConfig {
        PhaseAccumulatorConfig { period, select_delay: period.frac(33, 100), timing }
    }

    /// Select changes land `ctq + select_delay` after the falling output flank; that must
    /// fall strictly inside `(T/4, T/2)` at both variation extremes.
    pub fn validate(&self) -> Result<(), SimError> {
        self.timing.validate()?;
        let eps = self.timing.variation.epsilon;
        let ctq = self.timing.clk_to_q;
        let g = self.timing.gate.max();
        let lo = (self.select_delay + ctq).scale(1.0 - eps);
        let hi = (self.select_delay + ctq + g).scale(1.0 + eps);
        if lo <= self.period.frac(1, 4) || hi >= self.period.frac(1, 2) {
            return Err(SimError::Config(format!(
                "select_delay {} puts select changes outside (T/4, T/2) after the falling flank",
                self.select_delay
            )));
        }
        Ok(())
    }
}

/// Mux input carrying phase `k` (offset `k T/4`) in Gray order: the counter walks
/// 00 → 01 → 11 → 10, and the mux picks input `2 s1 + s0`.
pub fn mux_input_for_phase(k: usize) -> usize {
    [0, 1, 3, 2][k & 3]
}

#[derive(Clone, Debug)]
pub struct PhaseAccNets {
    pub clk_out: NetId,
    /// Phases 0, T/4, T/2, 3T/4.
    pub phases: [NetId; 4],
    pub q_d: NetId,
    pub rst_sync: NetId,
    pub count_en: NetId,
    pub sel: [NetId; 2],
}

/// Adds an accumulator under scope `name`. `rst_n` is active low.
pub fn build_phase_accumulator(
    b: &mut NetlistBuilder,
    cfg: &PhaseAccumulatorConfig,
    name: &str,
    clk_in: NetId,
    g_in: NetId,
    rst_n: NetId,
) -> Result<PhaseAccNets, SimError> {
    cfg.validate()?;
    let tp = &cfg.timing;
    b.push_scope(name);
    let r = (|| {
        let vdd = source(b, "vdd", Waveform::constant(Logic::L1))?;
        let clk_p = gate(b, tp, GateKind::Buf, "clk_p", &[clk_in])?;
        let clk_n = gate(b, tp, GateKind::Not, "clk_n", &[clk_in])?;
        let q1 = b.local_net("t1.q");
        let q2 = b.local_net("t2.q");
        for (inst, clk, q) in [("t1", clk_p, q1), ("t2", clk_n, q2)] {
            let full = b.local(inst);
            b.add(inst, Tff::new(&full, tp.ctq(&full), tp.standard_meta(), Logic::L0), &[vdd, clk], &[q])?;
        }
        let phases = [
            gate(b, tp, GateKind::Buf, "p0", &[q1])?,
            gate(b, tp, GateKind::Buf, "p1", &[q2])?,
            gate(b, tp, GateKind::Not, "p2", &[q1])?,
            gate(b, tp, GateKind::Not, "p3", &[q2])?,
        ];
        let mut mux_in = [phases[0]; 4];
        for (k, &p) in phases.iter().enumerate() {
            mux_in[mux_input_for_phase(k)] = p;
        }
        let clk_out = b.local_net("clk_out");
        let rst_sync = latch(b, tp, "rst_sync", LatchVariant::Plain, Transparent::Low, rst_n, clk_out, Some(rst_n))?[0];
        let q_d = latch(b, tp, "ld", LatchVariant::Plain, Transparent::Low, g_in, clk_out, Some(rst_sync))?[0];
        let nqd = gate(b, tp, GateKind::Not, "nqd", &[q_d])?;
        let count_en = gate(b, tp, GateKind::And, "count_en", &[nqd, rst_sync])?;
        let c1 = b.local_net("cnt.q1");
        let c0 = b.local_net("cnt.q0");
        let full = b.local("cnt");
        b.add("cnt", GrayCounter { ctq: tp.ctq(&full), state: 0 }, &[count_en, clk_out], &[c1, c0])?;
        let s1 = delay_line(b, tp, "sel1", c1, cfg.select_delay)?;
        let s0 = delay_line(b, tp, "sel0", c0, cfg.select_delay)?;
        let full = b.local("mux");
        b.add("mux", Mux4 { delay: tp.gate_delay(&full) }, &[mux_in[0], mux_in[1], mux_in[2], mux_in[3], s1, s0], &[clk_out])?;
        Ok(PhaseAccNets { clk_out, phases, q_d, rst_sync, count_en, sel: [s1, s0] })
    })();
    b.pop_scope();
    r
}

pub fn phase_acc_netlist(cfg: &PhaseAccumulatorConfig, clk_in: Waveform, g_in: Waveform, rst_n: Waveform) -> Result<(Netlist, PhaseAccNets), SimError> {
    let mut b = NetlistBuilder::new();
    let c = source(&mut b, "clk_in", clk_in)?;
    let g = source(&mut b, "g_in", g_in)?;
    let r = source(&mut b, "rst_n", rst_n)?;
    let pa = build_phase_accumulator(&mut b, cfg, "pa", c, g, r)?;
    for n in [c, g, r, pa.clk_out, pa.q_d, pa.rst_sync, pa.count_en, pa.sel[0], pa.sel[1]].into_iter().chain(pa.phases) {
        b.probe(n);
    }
    Ok((b.build()?, pa))
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PaCycle {
    pub index: usize,
    pub rise: Ticks,
    pub fall: Ticks,
    /// Count enable seen by the counter at this falling flank (L1 = droop sampled).
    pub counted: Logic,
    /// Extra low time applied after this cycle.
    pub shift: Ticks,
    /// Accumulated phase in quarter periods, modulo 4.
    pub phase: u8,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PhaseAccReport {
    pub cycles: Vec<PaCycle>,
    pub hypothesis: Vec<String>,
    pub findings: Vec<ViolationReport>,
}

/// Limits for the accumulator properties.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PaLimits {
    pub epsilon: f64,
    pub tol: Ticks,
    pub min_pulse: Ticks,
}

impl PaLimits {
    pub fn for_config(cfg: &PhaseAccumulatorConfig) -> PaLimits {
        let eps = cfg.timing.variation.epsilon;
        PaLimits {
            epsilon: eps,
            tol: if eps == 0.0 { cfg.timing.gate.max() * 2 } else { cfg.timing.gate.max() * 8 },
            min_pulse: default_min_pulse(cfg.period),
        }
    }
}

/// Measures a finished run. `scope` is the accumulator's instance prefix.
pub fn phase_acc_report(res: &SimResult, nl: &Netlist, nets: &PhaseAccNets, scope: &str, cfg: &PhaseAccumulatorConfig, limits: &PaLimits) -> PhaseAccReport {
    let out_name = nl.net_name(nets.clk_out).to_string();
    let out = res.wave(&out_name);
    let en = res.wave(nl.net_name(nets.count_en));
    let rises = out.rising_edges();
    let falls = out.falling_edges();
    let q = cfg.period.frac(1, 4);
    let mut cycles = Vec::new();
    let mut phase = 0u8;
    for (k, &r) in rises.iter().enumerate() {
        let Some(&f) = falls.iter().find(|&&f| f > r) else { break };
        let counted = en.sample_before(f);
        if counted == Logic::L1 {
            phase = (phase + 1) % 4;
        }
        let shift = if counted == Logic::L1 { q } else { Ticks::ZERO };
        cycles.push(PaCycle { index: k, rise: r, fall: f, counted, shift, phase });
    }

    let mut findings = Vec::new();
    findings.extend(check_glitch(out, &out_name, limits.min_pulse));
    findings.extend(check_no_x(out, &out_name));
    let half = cfg.period.frac(1, 2);
    findings.extend(check_envelope(
        out,
        &out_name,
        &RisingSchedule::None,
        half.scale(1.0 - limits.epsilon).saturating_sub(limits.tol),
        half.scale(1.0 + limits.epsilon) + limits.tol,
        limits.tol,
    ));
    // the first complete low pulse starts at cycle 0's falling flank
    let expected: Vec<Ticks> = cycles.iter().map(|c| half + c.shift).collect();
    let slack = Ticks((half + q).scale(limits.epsilon).0) + limits.tol;
    findings.extend(check_low_times(out, &out_name, &expected, slack));

    // select changes must land while both the old and the new phase are low
    let (lo, hi) = (q, half);
    for &s in &nets.sel {
        let name = nl.net_name(s);
        for &(t, _) in res.wave(name).transitions() {
            let Some(&f) = falls.iter().rev().find(|&&f| f < t) else { continue };
            let dt = t - f;
            if dt <= lo || dt >= hi {
                findings.push(ViolationReport {
                    kind: ViolationKind::SelectWindow,
                    net: name.to_string(),
                    time: t,
                    measured: dt.0 as i64,
                    bound_lo: lo.0 as i64,
                    bound_hi: hi.0 as i64,
                    reproducer: Default::default(),
                });
            }
        }
    }

    let prefix = format!("{scope}.");
    let hypothesis = res
        .metastability
        .iter()
        .filter(|m| m.instance.starts_with(&prefix))
        .map(|m| format!("{} sampled inside its window at {}", m.instance, m.entered_at))
        .chain(res.diagnostics.iter().filter(|d| d.instance.starts_with(&prefix)).map(|d| format!("{} at {}: {}", d.instance, d.time, d.message)))
        .collect();
    PhaseAccReport { cycles, hypothesis, findings }
}

#[derive(Clone, Debug)]
pub struct PhaseAccRun {
    pub clk_out: Waveform,
    pub report: PhaseAccReport,
    pub result: SimResult,
}

pub fn run_phase_accumulator(
    cfg: &PhaseAccumulatorConfig,
    clk_in: &Waveform,
    g_in: &Waveform,
    rst_n: &Waveform,
    t_end: Ticks,
) -> Result<PhaseAccRun, SimError> {
    let (nl, nets) = phase_acc_netlist(cfg, clk_in.clone(), g_in.clone(), rst_n.clone())?;
    let res = run_until(&nl, t_end, &SimOptions::default())?;
    let report = phase_acc_report(&res, &nl, &nets, "pa", cfg, &PaLimits::for_config(cfg));
    Ok(PhaseAccRun { clk_out: res.wave(nl.net_name(nets.clk_out)).clone(), report, result: res })
}
