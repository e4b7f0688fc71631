// SPDX-License-Identifier: Apache-2.0

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::netlist::{CompId, Ctx, NetId, Netlist};
use super::{EventQueue, Logic, Target, Ticks, Waveform};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SimError {
    #[error("event scheduled at {at} while current time is {now}")]
    Causality { now: Ticks, at: Ticks },
    #[error("netlist validation failed: {0}")]
    Validation(String),
    #[error("event storm on net {net}: {count} transitions within {window} ending at {time}")]
    EventStorm { net: String, time: Ticks, window: Ticks, count: u32 },
    #[error("{instance} at {time}: {message}")]
    Component { instance: String, time: Ticks, message: String },
    #[error("{kind} expects {expected} inputs, got {got}")]
    Arity { kind: &'static str, expected: usize, got: usize },
    #[error("invalid configuration: {0}")]
    Config(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum MetaOutcome {
    /// Resolved while the element was still opaque.
    Resolved,
    /// The element turned transparent again before resolving; the pending resolution was dropped.
    ChokedOff { at: Ticks },
}

/// One entry into the metastable state.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MetastabilityEvent {
    pub instance: String,
    /// Index of the capturing edge at this instance (0-based).
    pub cycle: u64,
    pub entered_at: Ticks,
    pub delay: Ticks,
    pub value: Logic,
    pub forced: bool,
    pub outcome: MetaOutcome,
}

impl MetastabilityEvent {
    pub fn resolves_at(&self) -> Ticks {
        self.entered_at + self.delay
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum DiagKind {
    ChokeOff,
    /// A timing precondition of a block was not met at run time.
    Hypothesis,
    Note,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Diagnostic {
    pub time: Ticks,
    pub instance: String,
    pub kind: DiagKind,
    pub message: String,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SimOptions {
    /// Window for the oscillation guard.
    pub storm_window: Ticks,
    /// Maximum level changes of one net inside one window.
    pub storm_cap: u32,
    /// Record every net instead of only the probes.
    pub record_all: bool,
}

impl Default for SimOptions {
    fn default() -> Self {
        SimOptions { storm_window: Ticks::DEFAULT_PERIOD, storm_cap: 64, record_all: false }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SimResult {
    pub t_end: Ticks,
    pub waveforms: BTreeMap<String, Waveform>,
    pub metastability: Vec<MetastabilityEvent>,
    pub diagnostics: Vec<Diagnostic>,
    pub events: u64,
}

impl SimResult {
    pub fn get(&self, net: &str) -> Option<&Waveform> {
        self.waveforms.get(net)
    }

    /// Waveform of a recorded net; panics if the net was not recorded.
    pub fn wave(&self, net: &str) -> &Waveform {
        self.waveforms.get(net).unwrap_or_else(|| panic!("net {net} not recorded"))
    }
}

#[derive(Debug)]
pub(super) struct Engine {
    pub queue: EventQueue,
    pub values: Vec<Logic>,
    pub prev: Vec<Logic>,
    pub last_change: Vec<Ticks>,
    /// Per net: pending `(time, seq, level)`, sorted by time.
    pub pending: Vec<Vec<(Ticks, u64, Logic)>>,
    pub net_names: Vec<String>,
    pub meta: Vec<MetastabilityEvent>,
    pub diags: Vec<Diagnostic>,
}

impl Engine {
    pub fn cancel_from(&mut self, net: usize, from: Ticks) {
        let p = &mut self.pending[net];
        let keep = p.partition_point(|e| e.0 < from);
        p.truncate(keep);
    }

    pub fn enqueue_net(&mut self, net: usize, at: Ticks, level: Logic) -> Result<(), SimError> {
        let seq = self.queue.schedule(at, Target::Net(NetId(net)), level)?;
        self.pending[net].push((at, seq, level));
        Ok(())
    }

    pub fn enqueue_wake(&mut self, comp: CompId, at: Ticks, tag: u64) -> Result<(), SimError> {
        self.queue.schedule(at, Target::Wake(comp, tag), Logic::X).map(|_| ())
    }
}

/// Simulates `netlist` on `[0, t_end]`.
pub fn run_until(netlist: &Netlist, t_end: Ticks, opts: &SimOptions) -> Result<SimResult, SimError> {
    let n = netlist.net_count();
    let mut comps: Vec<_> = netlist.slots.iter().map(|s| s.comp.clone()).collect();

    // Fixpoint for time-zero levels.
    let mut values = vec![Logic::X; n];
    let limit = 4 * (n + comps.len()) + 8;
    for _ in 0..limit {
        let mut changed = false;
        for (slot, comp) in netlist.slots.iter().zip(comps.iter_mut()) {
            let ins: Vec<Logic> = slot.inputs.iter().map(|i| values[i.0]).collect();
            let outs = comp.settle(&ins);
            for (o, v) in slot.outputs.iter().zip(outs) {
                if values[o.0] != v {
                    values[o.0] = v;
                    changed = true;
                }
            }
        }
        if !changed {
            break;
        }
    }

    let recorded: Vec<bool> = if opts.record_all || netlist.probes.is_empty() {
        vec![true; n]
    } else {
        let mut r = vec![false; n];
        for p in &netlist.probes {
            r[p.0] = true;
        }
        r
    };
    let mut waves: Vec<Waveform> = values.iter().map(|&v| Waveform::new(v)).collect();
    let mut eng = Engine {
        queue: EventQueue::new(),
        prev: values.clone(),
        values,
        last_change: vec![Ticks::ZERO; n],
        pending: vec![Vec::new(); n],
        net_names: netlist.net_names.clone(),
        meta: Vec::new(),
        diags: Vec::new(),
    };

    for (i, (slot, comp)) in netlist.slots.iter().zip(comps.iter_mut()).enumerate() {
        let mut ctx = Ctx {
            eng: &mut eng,
            name: &slot.name,
            comp: CompId(i),
            inputs: &slot.inputs,
            outputs: &slot.outputs,
            wakes: &[],
        };
        comp.start(&mut ctx)?;
    }

    let mut storm: Vec<(Ticks, u32)> = vec![(Ticks::ZERO, 0); n];
    let mut events = 0u64;
    let mut dirty: BTreeMap<CompId, Vec<u64>> = BTreeMap::new();
    let mut changed: Vec<usize> = Vec::new();

    while let Some(t) = eng.queue.peek_time() {
        if t > t_end {
            break;
        }
        while eng.queue.peek_time() == Some(t) {
            let e = eng.queue.pop().expect("peeked");
            events += 1;
            match e.target {
                Target::Net(NetId(net)) => {
                    if eng.pending[net].first().map(|p| p.1) != Some(e.seq) {
                        continue;
                    }
                    eng.pending[net].remove(0);
                    if eng.values[net] == e.level {
                        continue;
                    }
                    eng.values[net] = e.level;
                    eng.last_change[net] = t;
                    if recorded[net] {
                        waves[net].push(t, e.level).expect("kernel produces increasing times");
                    }
                    let s = &mut storm[net];
                    if t.diff(s.0) >= opts.storm_window.0 as i64 {
                        *s = (t, 0);
                    }
                    s.1 += 1;
                    if s.1 > opts.storm_cap {
                        return Err(SimError::EventStorm {
                            net: netlist.net_names[net].clone(),
                            time: t,
                            window: opts.storm_window,
                            count: s.1,
                        });
                    }
                    changed.push(net);
                    for &r in &netlist.readers[net] {
                        dirty.entry(r).or_default();
                    }
                }
                Target::Wake(c, tag) => dirty.entry(c).or_default().push(tag),
            }
        }
        for (c, tags) in std::mem::take(&mut dirty) {
            let slot = &netlist.slots[c.0];
            let mut ctx = Ctx {
                eng: &mut eng,
                name: &slot.name,
                comp: c,
                inputs: &slot.inputs,
                outputs: &slot.outputs,
                wakes: &tags,
            };
            comps[c.0].react(&mut ctx)?;
        }
        for net in changed.drain(..) {
            eng.prev[net] = eng.values[net];
        }
    }

    let waveforms = waves
        .into_iter()
        .enumerate()
        .filter(|(i, _)| recorded[*i])
        .map(|(i, w)| (netlist.net_names[i].clone(), w))
        .collect();
    Ok(SimResult { t_end, waveforms, metastability: eng.meta, diagnostics: eng.diags, events })
}
