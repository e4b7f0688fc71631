// SPDX-License-Identifier: Apache-2.0

//! The complete adaptive clock: detector, delay-element chain and phase accumulator.
//!
//! The accumulator divides the double-rate input clock and feeds element 0; the clock
//! leaving the last element is the system clock. The detector's active-low flag enters
//! the last element, travels back through the chain's data latches and reaches the
//! accumulator's droop input through element 0's `e_out`.
//!
//! All element latches reset to 0 (droop). The accumulator leaves reset inside an output
//! low phase; the release then rides the next rising flank through the chain, so that
//! pulse is delayed at every element and is also the first one the accumulator may
//! count. From then on the accumulator takes over one quarter per cycle as the stored
//! zeros drain.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::checkers::{check_envelope, check_glitch, check_monotone_delay, check_no_x, default_min_pulse, RisingSchedule, ViolationReport};
use crate::delay_element::{build_chain_rst, element_report, ElementReset, ChainNets, DelayElementConfig, DelayElementReport, ElementLimits};
use crate::detector::{build_droop_detector, DetectorNets, DroopDetectorConfig};
use crate::gates::{source, DelayLine};
use crate::kernel::{run_until, NetId, Netlist, NetlistBuilder, SimError, SimOptions, SimResult, Ticks, Waveform};
use crate::phase_acc::{build_phase_accumulator, phase_acc_report, PaLimits, PhaseAccNets, PhaseAccReport, PhaseAccumulatorConfig};
use crate::shaper::ShaperSpec;
use crate::timing::{TimingProfile, VoltageProfile};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SystemConfig {
    pub period: Ticks,
    /// Element 0 first.
    pub chain: Vec<DelayElementConfig>,
    pub phase_acc: PhaseAccumulatorConfig,
    pub detector: DroopDetectorConfig,
}

impl SystemConfig {
    pub fn new(period: Ticks, chain_len: usize, shaper: &ShaperSpec, timing: TimingProfile) -> SystemConfig {
        SystemConfig {
            period,
            chain: vec![DelayElementConfig::new(period, shaper, timing.clone()); chain_len],
            phase_acc: PhaseAccumulatorConfig::new(period, timing.clone()),
            detector: DroopDetectorConfig::new(timing),
        }
    }

    pub fn validate(&self) -> Result<(), SimError> {
        if self.chain.is_empty() {
            return Err(SimError::Config("delay chain needs at least one element".into()));
        }
        for c in &self.chain {
            c.validate()?;
            if c.period != self.period {
                return Err(SimError::Config("element period differs from system period".into()));
            }
        }
        if self.phase_acc.period != self.period {
            return Err(SimError::Config("phase accumulator period differs from system period".into()));
        }
        self.phase_acc.validate()?;
        self.detector.validate()
    }
}

/// Where the chain's droop bit comes from.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DroopSource {
    /// The detector watching this supply profile.
    Detector(VoltageProfile),
    /// An active-low droop waveform driven straight into the last element.
    Direct(Waveform),
}

#[derive(Clone, Debug)]
pub struct SystemNets {
    pub clk_in: NetId,
    pub rst_n: NetId,
    pub droop_n: NetId,
    pub detector: Option<DetectorNets>,
    pub phase_acc: PhaseAccNets,
    pub chain: ChainNets,
    pub clk_out: NetId,
}

pub fn build_system(
    b: &mut NetlistBuilder,
    cfg: &SystemConfig,
    clk_in: NetId,
    droop: &DroopSource,
    rst_n: NetId,
) -> Result<SystemNets, SimError> {
    cfg.validate()?;
    let (droop_n, detector) = match droop {
        DroopSource::Detector(v) => {
            let d = build_droop_detector(b, &cfg.detector, "det", clk_in, Arc::new(v.clone()))?;
            (d.droop_n, Some(d))
        }
        DroopSource::Direct(w) => (source(b, "droop_in", w.clone())?, None),
    };
    let g_in = b.net("de0.dslave.q");
    let pa = build_phase_accumulator(b, &cfg.phase_acc, "pa", clk_in, g_in, rst_n)?;
    let chain = build_chain_rst(b, &cfg.chain, pa.clk_out, droop_n, Some(ElementReset { release: pa.rst_sync, rst_n }))?;
    debug_assert_eq!(chain.data_out(), g_in);
    let clk_out = b.net("clk_out");
    b.add("clk_out", DelayLine { delay: Ticks(1) }, &[chain.clk_out()], &[clk_out])?;
    Ok(SystemNets { clk_in, rst_n, droop_n, detector, phase_acc: pa, chain, clk_out })
}

/// Stand-alone system netlist with the interface nets of every block probed.
pub fn system_netlist(cfg: &SystemConfig, clk_in: Waveform, droop: &DroopSource, rst_n: Waveform) -> Result<(Netlist, SystemNets), SimError> {
    let mut b = NetlistBuilder::new();
    let c = source(&mut b, "clk_in", clk_in)?;
    let r = source(&mut b, "rst_n", rst_n)?;
    let s = build_system(&mut b, cfg, c, droop, r)?;
    let pa = &s.phase_acc;
    let mut probes = vec![c, r, s.droop_n, s.clk_out, pa.clk_out, pa.q_d, pa.rst_sync, pa.count_en, pa.sel[0], pa.sel[1]];
    if let Some(d) = &s.detector {
        probes.extend([d.detect, d.calibrate]);
    }
    for e in &s.chain.elements {
        probes.extend([e.clk_out, e.e_out, e.clk_gated, e.master_q0, e.master_q1, e.slave_q0, e.combined]);
        probes.extend(e.rst);
    }
    for n in probes {
        b.probe(n);
    }
    Ok((b.build()?, s))
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SystemReport {
    /// Element 0 first.
    pub elements: Vec<DelayElementReport>,
    pub phase_acc: PhaseAccReport,
    /// Rising flanks of the system clock.
    pub rises: Vec<Ticks>,
    /// `rise_k - (rise_0 + k T)`.
    pub offsets: Vec<i64>,
    /// First system rise minus the first accumulator rise.
    pub startup_offset: Option<Ticks>,
    /// Checks on the system clock only.
    pub findings: Vec<ViolationReport>,
}

impl SystemReport {
    /// Every finding from every block.
    pub fn all_findings(&self) -> Vec<ViolationReport> {
        let mut out = self.findings.clone();
        out.extend(self.phase_acc.findings.iter().cloned());
        for e in &self.elements {
            out.extend(e.findings.iter().cloned());
        }
        out
    }
}

/// Replacements for the per-block default checker limits.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct LimitOverrides {
    pub min_pulse: Option<Ticks>,
    pub tol: Option<Ticks>,
}

impl LimitOverrides {
    pub fn element(&self, cfg: &DelayElementConfig) -> ElementLimits {
        let mut l = ElementLimits::for_config(cfg);
        l.min_pulse = self.min_pulse.unwrap_or(l.min_pulse);
        l.tol = self.tol.unwrap_or(l.tol);
        l
    }

    pub fn phase_acc(&self, cfg: &PhaseAccumulatorConfig) -> PaLimits {
        let mut l = PaLimits::for_config(cfg);
        l.min_pulse = self.min_pulse.unwrap_or(l.min_pulse);
        l.tol = self.tol.unwrap_or(l.tol);
        l
    }
}

pub fn system_report(res: &SimResult, nl: &Netlist, nets: &SystemNets, cfg: &SystemConfig) -> SystemReport {
    system_report_with(res, nl, nets, cfg, &LimitOverrides::default())
}

pub fn system_report_with(res: &SimResult, nl: &Netlist, nets: &SystemNets, cfg: &SystemConfig, ov: &LimitOverrides) -> SystemReport {
    let mut elements = Vec::with_capacity(cfg.chain.len());
    let mut input = res.wave(nl.net_name(nets.phase_acc.clk_out)).clone();
    for (e, c) in nets.chain.elements.iter().zip(&cfg.chain) {
        elements.push(element_report(res, nl, e, c, &input, &ov.element(c)));
        input = res.wave(nl.net_name(e.clk_out)).clone();
    }
    let phase_acc = phase_acc_report(res, nl, &nets.phase_acc, "pa", &cfg.phase_acc, &ov.phase_acc(&cfg.phase_acc));

    let name = nl.net_name(nets.clk_out);
    let out = res.wave(name);
    let rises = out.rising_edges();
    let grid: Vec<Ticks> = (0..rises.len() as u64).map(|k| rises[0] + cfg.period * k).collect();
    let offsets = rises.iter().zip(&grid).map(|(r, g)| r.diff(*g)).collect();
    let startup_offset = rises.first().zip(phase_acc.cycles.first()).and_then(|(&r, c)| r.checked_sub(c.rise));

    let last = cfg.chain.last().expect("validated chain");
    let eps = last.timing.variation.epsilon;
    let tol = ov.tol.unwrap_or(if eps == 0.0 { Ticks::ZERO } else { last.timing.gate.max() * 8 });
    let target = last.shaper.stages.iter().copied().sum::<Ticks>();
    let mut findings = Vec::new();
    findings.extend(check_glitch(out, name, ov.min_pulse.unwrap_or(default_min_pulse(cfg.period))));
    findings.extend(check_no_x(out, name));
    findings.extend(check_envelope(
        out,
        name,
        &RisingSchedule::None,
        target.scale(1.0 - eps).saturating_sub(tol),
        target.scale(1.0 + eps) + tol,
        tol,
    ));
    findings.extend(check_monotone_delay(&rises, &grid, name, cfg.period.frac(1, 4), eps, tol));
    SystemReport { elements, phase_acc, rises, offsets, startup_offset, findings }
}

#[derive(Clone, Debug)]
pub struct SystemRun {
    pub clk_out: Waveform,
    pub report: SystemReport,
    pub result: SimResult,
}

/// Simulates the system. `clk_in` runs at twice the output frequency.
pub fn run_system(cfg: &SystemConfig, clk_in: &Waveform, droop: &DroopSource, rst_n: &Waveform, t_end: Ticks) -> Result<SystemRun, SimError> {
    let (nl, nets) = system_netlist(cfg, clk_in.clone(), droop, rst_n.clone())?;
    let res = run_until(&nl, t_end, &SimOptions::default())?;
    let report = system_report(&res, &nl, &nets, cfg);
    Ok(SystemRun { clk_out: res.wave(nl.net_name(nets.clk_out)).clone(), report, result: res })
}
