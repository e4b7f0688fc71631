// SPDX-License-Identifier: Apache-2.0

//! Idealized-mode cross-check of a scenario against the interval-algebra model.

use droopsim_core::delay_element::chain_netlist;
use droopsim_core::kernel::{run_until, SimOptions};
use droopsim_core::oracle::{self, IntervalSignal};
use droopsim_core::phase_acc::run_phase_accumulator;
use droopsim_core::shaper::shape;
use droopsim_core::{Logic, Ticks, Waveform};
use serde::{Deserialize, Serialize};

use crate::scenario::{Module, Scenario, ScenarioError, Topology};
use crate::HarnessError;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct OracleNet {
    pub net: String,
    pub matched: bool,
    pub simulated_edges: usize,
    pub oracle_edges: usize,
    /// Earliest time the two disagree.
    pub first_mismatch: Option<Ticks>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct OracleReport {
    pub scenario_hash: String,
    pub nets: Vec<OracleNet>,
}

impl OracleReport {
    pub fn matched(&self) -> bool {
        self.nets.iter().all(|n| n.matched)
    }
}

fn compare(net: &str, sim: &Waveform, want: &Waveform) -> OracleNet {
    let (a, b) = (sim.transitions(), want.transitions());
    let first_mismatch = if sim.initial() != want.initial() {
        Some(Ticks::ZERO)
    } else {
        a.iter().zip(b).find(|(x, y)| x != y).map(|(x, y)| x.0.min(y.0)).or_else(|| match a.len().cmp(&b.len()) {
            std::cmp::Ordering::Less => Some(b[a.len()].0),
            std::cmp::Ordering::Greater => Some(a[b.len()].0),
            std::cmp::Ordering::Equal => None,
        })
    };
    OracleNet { net: net.to_string(), matched: first_mismatch.is_none(), simulated_edges: a.len(), oracle_edges: b.len(), first_mismatch }
}

fn unsupported(msg: &str) -> HarnessError {
    ScenarioError::Invalid { field: "topology".into(), message: msg.into() }.into()
}

fn signal(w: &Waveform, field: &str) -> Result<IntervalSignal<i64>, HarnessError> {
    IntervalSignal::from_waveform(w).ok_or_else(|| ScenarioError::Invalid { field: field.into(), message: "the oracle needs a two-valued stimulus".into() }.into())
}

/// Simulates the scenario's block and compares it edge for edge with the oracle.
pub fn oracle_check(s: &Scenario) -> Result<OracleReport, HarnessError> {
    if !s.idealized || s.timing.epsilon != 0.0 {
        return Err(ScenarioError::Invalid { field: "idealized".into(), message: "oracle cross-checks need an idealized scenario with epsilon 0".into() }.into());
    }
    let r = s.resolve()?;
    let hash = s.hash();
    let name = s.name.clone().unwrap_or_else(|| s.topology.to_string());
    let err = |e| HarnessError::Sim { scenario: name.clone(), hash: hash.clone(), source: e };
    let g = r.timing.gate.rise.0 as i64;
    let t_end = r.t_end;
    let input = signal(&r.clock, "stimulus.clock")?;
    let mut nets = Vec::new();
    match s.topology {
        Topology::Single(Module::Shaper) => {
            let sim = shape(&r.clock, &r.shaper, &r.timing, t_end).map_err(&err)?;
            let want = oracle::shaper_with(
                &input,
                r.shaper.shorten.map(|t| t.0 as i64),
                &r.shaper.stages.iter().map(|t| t.0 as i64).collect::<Vec<_>>(),
                g,
            );
            nets.push(compare("out", &sim, &want.truncate(t_end.0 as i64).to_waveform()));
        }
        Topology::Single(Module::DelayElement | Module::Chain) => {
            if !r.droop.is_empty() || r.droop.initial().is_x() {
                return Err(unsupported("the oracle covers stable droop inputs only"));
            }
            let level = r.droop.initial();
            let mut cfgs = r.chain.clone();
            for c in &mut cfgs {
                c.idle = level;
            }
            let (nl, chain) = chain_netlist(&cfgs, r.clock.clone(), r.droop.clone()).map_err(&err)?;
            let res = run_until(&nl, t_end, &SimOptions::default()).map_err(&err)?;
            let mut x = input;
            for (i, c) in cfgs.iter().enumerate() {
                let st: Vec<i64> = c.shaper.stages.iter().map(|t| t.0 as i64).collect();
                x = oracle::delay_element(
                    &x,
                    level == Logic::L1,
                    c.quarter_delay.0 as i64,
                    c.fast_path_delay.0 as i64,
                    c.shaper.shorten.map(|t| t.0 as i64),
                    &st,
                    g,
                );
                let net = nl.net_name(chain.elements[i].clk_out);
                nets.push(compare(net, res.wave(net), &x.to_waveform().truncated(t_end)));
            }
        }
        Topology::Single(Module::PhaseAccumulator) => {
            let run = run_phase_accumulator(&r.phase_acc, &r.clock, &r.g_in, &r.reset, t_end).map_err(&err)?;
            let want = oracle::phase_set(&input, g, r.timing.clk_to_q.0 as i64);
            for (k, w) in want.iter().enumerate() {
                let net = format!("pa.p{k}");
                nets.push(compare(&net, run.result.wave(&net), &w.to_waveform().truncated(t_end)));
            }
        }
        _ => return Err(unsupported("the oracle covers shaper, delay_element, chain and phase_accumulator")),
    }
    Ok(OracleReport { scenario_hash: hash, nets })
}
