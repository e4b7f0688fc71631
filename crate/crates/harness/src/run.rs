// SPDX-License-Identifier: Apache-2.0

//! Running one scenario: build, simulate, check, report, and write artifacts.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::fs;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use droopsim_core::checkers::{check_glitch, check_monotone_delay, check_no_x, default_min_pulse, high_pulses, stamp, Reproducer, ViolationReport};
use droopsim_core::delay_element::{chain_netlist, element_report, CaseTag, DelayElementReport, ElementNets};
use droopsim_core::detector::detector_netlist;
use droopsim_core::kernel::{run_until, MetaOutcome, SimOptions, SimResult};
use droopsim_core::phase_acc::{phase_acc_netlist, phase_acc_report, PhaseAccReport};
use droopsim_core::shaper::shaper_netlist;
use droopsim_core::timing::TimingProfile;
use droopsim_core::system::{system_netlist, system_report_with};
use droopsim_core::{Logic, Netlist, Ticks, Waveform};
use serde::{Deserialize, Serialize};

use crate::scenario::{Module, Resolved, Scenario, Topology};
use crate::{trace, HarnessError};

pub const SCHEMA_VERSION: u32 = 1;

/// One entry into metastability.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MetaEntry {
    pub instance: String,
    pub cycle: u64,
    pub entered_at: Ticks,
    pub resolution_delay: Ticks,
    pub value: Logic,
    pub forced: bool,
    /// Set when the latch reopened before resolving.
    pub choked_off_at: Option<Ticks>,
    /// Case of the element pulse the event steered, for delay-element latches.
    pub case: Option<CaseTag>,
}

/// Masking-latch outputs: X occurrences and opaque phases with more than one transition.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct MaskingSummary {
    pub outputs_checked: usize,
    pub x_samples: usize,
    pub multi_transition_phases: usize,
}

impl MaskingSummary {
    pub fn clean(&self) -> bool {
        self.x_samples == 0 && self.multi_transition_phases == 0
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SystemSummary {
    /// Rising flanks of the system clock.
    pub rises: usize,
    /// `rise_k - (rise_0 + k T)` in femtoseconds.
    pub offsets: Vec<i64>,
    pub startup_offset: Option<Ticks>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub schema_version: u32,
    pub name: Option<String>,
    pub topology: String,
    pub scenario_hash: String,
    pub seed: u64,
    pub epsilon: f64,
    pub period: Ticks,
    pub t_end: Ticks,
    pub passed: bool,
    pub findings: Vec<ViolationReport>,
    /// Measured fast-path delay per element.
    pub delta: Vec<Option<Ticks>>,
    pub elements: Vec<DelayElementReport>,
    pub phase_acc: Option<PhaseAccReport>,
    pub system: Option<SystemSummary>,
    /// Distinct output high times of a stand-alone shaper.
    pub shaper_high_times: Vec<Ticks>,
    pub masking: MaskingSummary,
    pub metastability: Vec<MetaEntry>,
    /// Input preconditions that did not hold; the run went ahead anyway.
    pub hypothesis: Vec<String>,
    pub diagnostics: Vec<String>,
    pub events: u64,
}

impl RunReport {
    pub fn case_count(&self, tag: CaseTag) -> usize {
        self.elements.iter().map(|e| e.count(tag)).sum()
    }
}

/// A finished run with its raw waveforms.
#[derive(Clone, Debug)]
pub struct Run {
    pub report: RunReport,
    pub result: SimResult,
    /// Nets written to the trace, sorted.
    pub dumped: Vec<String>,
}

impl Run {
    pub fn trace_waves(&self) -> impl Iterator<Item = (&str, &Waveform)> {
        self.dumped.iter().map(|n| (n.as_str(), self.result.wave(n)))
    }
}

/// Pulse-by-pulse case of the element cycle steered by a latch event.
fn case_for(ev_instance: &str, at: Ticks, elements: &[DelayElementReport], period: Ticks) -> Option<CaseTag> {
    let scope = ev_instance.split('.').next()?;
    let e = elements.iter().find(|e| e.element == scope)?;
    let slack = period.frac(1, 8);
    e.cycles.iter().rev().find(|c| c.rise_in <= at + slack).map(|c| c.case)
}

/// X on a masked output, or two transitions inside one opaque phase.
fn masking_of(res: &SimResult, nl: &Netlist, elements: &[ElementNets], tp: &TimingProfile) -> MaskingSummary {
    let mut m = MaskingSummary::default();
    for e in elements {
        let gated = res.wave(nl.net_name(e.clk_gated));
        // master is opaque while the gated clock is low, the clock slave while it is high
        for (net, opaque) in [(e.master_q0, Logic::L0), (e.master_q1, Logic::L0), (e.slave_q0, Logic::L1)] {
            let name = nl.net_name(net);
            let w = res.wave(name);
            let ctq = tp.ctq(name.rsplit_once('.').map_or(name, |(inst, _)| inst));
            m.outputs_checked += 1;
            m.x_samples += usize::from(w.initial().is_x()) + w.transitions().iter().filter(|t| t.1.is_x()).count();
            // the masked level at close + clock-to-q is the capture itself
            for (a, b, l) in gated.pulses() {
                if l == opaque && w.transitions().iter().filter(|(t, _)| *t > a + ctq && *t <= b).count() > 1 {
                    m.multi_transition_phases += 1;
                }
            }
        }
    }
    m
}

fn sim_err(s: &Scenario, hash: &str) -> impl Fn(droopsim_core::SimError) -> HarnessError {
    let name = s.name.clone().unwrap_or_else(|| s.topology.to_string());
    let hash = hash.to_string();
    move |e| HarnessError::Sim { scenario: name.clone(), hash: hash.clone(), source: e }
}

/// Simulates a scenario and runs its checkers.
pub fn run_scenario(s: &Scenario) -> Result<Run, HarnessError> {
    let r: Resolved = s.resolve()?;
    let hash = s.hash();
    let err = sim_err(s, &hash);
    let opts = SimOptions { record_all: !s.probes.is_empty(), ..SimOptions::default() };
    let min_pulse = r.limits.min_pulse.unwrap_or(default_min_pulse(r.period));

    let mut findings = Vec::new();
    let mut elements = Vec::new();
    let mut phase_acc = None;
    let mut system = None;
    let mut shaper_high_times = Vec::new();
    let mut hypothesis = Vec::new();
    let mut masking = MaskingSummary::default();

    let (nl, res) = match s.topology {
        Topology::FullSystem => {
            let cfg = r.system();
            let (nl, nets) = system_netlist(&cfg, r.clock.clone(), &r.droop_source(s), r.reset.clone()).map_err(&err)?;
            let res = run_until(&nl, r.t_end, &opts).map_err(&err)?;
            let rep = system_report_with(&res, &nl, &nets, &cfg, &r.limits);
            findings = rep.all_findings();
            masking = masking_of(&res, &nl, &nets.chain.elements, &r.timing);
            system = Some(SystemSummary { rises: rep.rises.len(), offsets: rep.offsets, startup_offset: rep.startup_offset });
            elements = rep.elements;
            phase_acc = Some(rep.phase_acc);
            (nl, res)
        }
        Topology::Single(Module::Shaper) => {
            let nl = shaper_netlist(&r.shaper, &r.timing, r.clock.clone()).map_err(&err)?;
            let res = run_until(&nl, r.t_end + Ticks(1), &opts).map_err(&err)?;
            let out = res.wave("out");
            findings.extend(check_glitch(out, "out", min_pulse));
            findings.extend(check_no_x(out, "out"));
            let highs: BTreeSet<Ticks> = high_pulses(out).into_iter().map(|(a, b)| b - a).collect();
            shaper_high_times = highs.into_iter().collect();
            (nl, res)
        }
        Topology::Single(Module::DelayElement | Module::Chain) => {
            let (nl, chain) = chain_netlist(&r.chain, r.clock.clone(), r.droop.clone()).map_err(&err)?;
            let res = run_until(&nl, r.t_end, &opts).map_err(&err)?;
            let mut input = r.clock.clone();
            for (e, c) in chain.elements.iter().zip(&r.chain) {
                let rep = element_report(&res, &nl, e, c, &input, &r.limits.element(c));
                input = res.wave(nl.net_name(e.clk_out)).clone();
                findings.extend(rep.findings.iter().cloned());
                // an onset that is never released may only push edges later
                if let (Some(d), true) = (rep.delta, r.droop.rising_edges().is_empty()) {
                    let outs: Vec<Ticks> = rep.cycles.iter().map(|c| c.rise_out).collect();
                    let base: Vec<Ticks> = rep.cycles.iter().map(|c| c.rise_in + d).collect();
                    let lim = r.limits.element(c);
                    findings.extend(check_monotone_delay(&outs, &base, nl.net_name(e.clk_out), c.quarter_delay, lim.epsilon, lim.tol));
                }
                elements.push(rep);
            }
            masking = masking_of(&res, &nl, &chain.elements, &r.timing);
            (nl, res)
        }
        Topology::Single(Module::PhaseAccumulator) => {
            let (nl, nets) = phase_acc_netlist(&r.phase_acc, r.clock.clone(), r.g_in.clone(), r.reset.clone()).map_err(&err)?;
            let res = run_until(&nl, r.t_end, &opts).map_err(&err)?;
            let rep = phase_acc_report(&res, &nl, &nets, "pa", &r.phase_acc, &r.limits.phase_acc(&r.phase_acc));
            findings.extend(rep.findings.iter().cloned());
            phase_acc = Some(rep);
            (nl, res)
        }
        Topology::Single(Module::Detector) => {
            let vdd = r.vdd.clone().expect("resolve demands a profile");
            let (nl, nets) = detector_netlist(&r.detector, r.clock.clone(), &vdd).map_err(&err)?;
            let res = run_until(&nl, r.t_end, &opts).map_err(&err)?;
            let name = nl.net_name(nets.droop_n);
            findings.extend(check_glitch(res.wave(name), name, min_pulse));
            findings.extend(check_no_x(res.wave(name), name));
            (nl, res)
        }
    };

    for e in &elements {
        hypothesis.extend(e.hypothesis.iter().map(|h| format!("{}: {h}", e.element)));
    }
    if let Some(p) = &phase_acc {
        hypothesis.extend(p.hypothesis.iter().map(|h| format!("pa: {h}")));
    }

    let mut dumped: BTreeSet<String> = nl.probes().map(str::to_string).collect();
    for p in &s.probes {
        if nl.net(p).is_none() {
            return Err(crate::scenario::ScenarioError::Invalid { field: "probes".into(), message: format!("no net named `{p}`") }.into());
        }
        dumped.insert(p.clone());
    }

    let seed = s.timing.seed;
    stamp(&mut findings, &Reproducer { seed, scenario_hash: hash.clone() });
    findings.sort_by(|a, b| (a.time, a.kind, &a.net).cmp(&(b.time, b.kind, &b.net)));
    let metastability = res
        .metastability
        .iter()
        .map(|m| MetaEntry {
            instance: m.instance.clone(),
            cycle: m.cycle,
            entered_at: m.entered_at,
            resolution_delay: m.delay,
            value: m.value,
            forced: m.forced,
            choked_off_at: match m.outcome {
                MetaOutcome::Resolved => None,
                MetaOutcome::ChokedOff { at } => Some(at),
            },
            case: case_for(&m.instance, m.entered_at, &elements, r.period),
        })
        .collect();
    let diagnostics = res.diagnostics.iter().map(|d| format!("{} {} {:?}: {}", d.time, d.instance, d.kind, d.message)).collect();
    let report = RunReport {
        schema_version: SCHEMA_VERSION,
        name: s.name.clone(),
        topology: s.topology.to_string(),
        scenario_hash: hash,
        seed,
        epsilon: s.timing.epsilon,
        period: r.period,
        t_end: r.t_end,
        passed: findings.is_empty(),
        findings,
        delta: elements.iter().map(|e| e.delta).collect(),
        elements,
        phase_acc,
        system,
        shaper_high_times,
        masking,
        metastability,
        hypothesis,
        diagnostics,
        events: res.events,
    };
    Ok(Run { report, result: res, dumped: dumped.into_iter().collect() })
}

fn io_err(path: &Path) -> impl Fn(std::io::Error) -> HarnessError + '_ {
    move |e| HarnessError::Io { path: path.to_path_buf(), source: e }
}

/// Human-readable run log.
pub fn log_text(s: &Scenario, rep: &RunReport) -> String {
    let mut t = String::new();
    let _ = writeln!(t, "scenario {} ({})", s.name.as_deref().unwrap_or("-"), rep.topology);
    let _ = writeln!(t, "hash {}", rep.scenario_hash);
    let _ = writeln!(t, "seed {} epsilon {} period {} t_end {}", rep.seed, rep.epsilon, rep.period, rep.t_end);
    let _ = writeln!(t, "events {}", rep.events);
    for (e, d) in rep.elements.iter().zip(&rep.delta) {
        let _ = writeln!(
            t,
            "{}: delta {} none {} 5a {} 5b {}",
            e.element,
            d.map_or("-".to_string(), |d| d.to_string()),
            e.count(CaseTag::None),
            e.count(CaseTag::Fractional),
            e.count(CaseTag::Fast)
        );
    }
    if let Some(sys) = &rep.system {
        let _ = writeln!(t, "system: {} rises, startup offset {:?}, final offset {:?}", sys.rises, sys.startup_offset, sys.offsets.last());
    }
    for m in &rep.metastability {
        let _ = writeln!(t, "meta {} cycle {} at {} -> {} after {}", m.instance, m.cycle, m.entered_at, m.value.as_char(), m.resolution_delay);
    }
    for h in &rep.hypothesis {
        let _ = writeln!(t, "hypothesis {h}");
    }
    for d in &rep.diagnostics {
        let _ = writeln!(t, "diag {d}");
    }
    for f in &rep.findings {
        let _ = writeln!(t, "FINDING {f}");
    }
    let _ = writeln!(t, "{}", if rep.passed { "PASS" } else { "FAIL" });
    t
}

/// Writes `report.json`, `trace.vcd` and `log` under `out/<hash>/`.
pub fn write_artifacts(s: &Scenario, run: &Run, out: &Path) -> Result<PathBuf, HarnessError> {
    let dir = out.join(&run.report.scenario_hash);
    fs::create_dir_all(&dir).map_err(io_err(&dir))?;
    let p = dir.join("report.json");
    let json = serde_json::to_string_pretty(&run.report).expect("report serializes");
    fs::write(&p, json + "\n").map_err(io_err(&p))?;
    let p = dir.join("trace.vcd");
    let f = fs::File::create(&p).map_err(io_err(&p))?;
    trace::write_vcd(BufWriter::new(f), run.trace_waves()).map_err(io_err(&p))?;
    let p = dir.join("log");
    fs::write(&p, log_text(s, &run.report)).map_err(io_err(&p))?;
    let p = dir.join("scenario.json");
    fs::write(&p, s.to_json() + "\n").map_err(io_err(&p))?;
    Ok(dir)
}
