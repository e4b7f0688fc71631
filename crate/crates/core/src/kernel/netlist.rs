// SPDX-License-Identifier: Apache-2.0

use std::collections::BTreeMap;
use std::fmt;

use super::sim::{DiagKind, Diagnostic, Engine, MetastabilityEvent};
use super::{Logic, SimError, Ticks};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct NetId(pub usize);

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct CompId(pub usize);

/// A behavioral component. Components own their state; the kernel owns nets.
pub trait Component: fmt::Debug + Send + Sync {
    fn kind(&self) -> &'static str;

    /// `(inputs, outputs)` port counts.
    fn ports(&self) -> (usize, usize);

    /// Smallest input-to-output delay, or `None` for components without inputs.
    fn min_delay(&self) -> Option<Ticks>;

    /// Output levels at time zero given the current input levels. Called repeatedly
    /// until the netlist reaches a fixpoint; stateful components may update their state.
    fn settle(&mut self, inputs: &[Logic]) -> Vec<Logic>;

    /// Called once at time zero after settling.
    fn start(&mut self, _ctx: &mut Ctx<'_>) -> Result<(), SimError> {
        Ok(())
    }

    /// Called at most once per time step when an input changed or a wake fired.
    fn react(&mut self, ctx: &mut Ctx<'_>) -> Result<(), SimError>;

    fn box_clone(&self) -> Box<dyn Component>;
}

impl Clone for Box<dyn Component> {
    fn clone(&self) -> Self {
        self.box_clone()
    }
}

/// A component's view of the simulation during `start` / `react`.
pub struct Ctx<'a> {
    pub(super) eng: &'a mut Engine,
    pub(super) name: &'a str,
    pub(super) comp: CompId,
    pub(super) inputs: &'a [NetId],
    pub(super) outputs: &'a [NetId],
    pub(super) wakes: &'a [u64],
}

impl<'a> Ctx<'a> {
    pub fn now(&self) -> Ticks {
        self.eng.queue.now()
    }

    pub fn instance(&self) -> &str {
        self.name
    }

    pub fn input(&self, port: usize) -> Logic {
        self.eng.values[self.inputs[port].0]
    }

    /// Input level before the current time step.
    pub fn prev_input(&self, port: usize) -> Logic {
        self.eng.prev[self.inputs[port].0]
    }

    pub fn changed(&self, port: usize) -> bool {
        self.input(port) != self.prev_input(port)
    }

    pub fn rose(&self, port: usize) -> bool {
        self.prev_input(port) == Logic::L0 && self.input(port) == Logic::L1
    }

    pub fn fell(&self, port: usize) -> bool {
        self.prev_input(port) == Logic::L1 && self.input(port) == Logic::L0
    }

    /// Time of the most recent level change of an input (zero if it never changed).
    pub fn last_change(&self, port: usize) -> Ticks {
        self.eng.last_change[self.inputs[port].0]
    }

    pub fn input_net_name(&self, port: usize) -> &str {
        &self.eng.net_names[self.inputs[port].0]
    }

    pub fn output(&self, port: usize) -> Logic {
        self.eng.values[self.outputs[port].0]
    }

    /// Output level once every pending transaction has been applied.
    pub fn projected_output(&self, port: usize) -> Logic {
        let n = self.outputs[port].0;
        self.eng.pending[n].last().map_or(self.eng.values[n], |p| p.2)
    }

    /// Schedules an output transaction at `at`, cancelling pending ones at or after `at`.
    pub fn drive(&mut self, port: usize, at: Ticks, level: Logic) -> Result<(), SimError> {
        let now = self.now();
        if at <= now {
            return Err(SimError::Causality { now, at });
        }
        let n = self.outputs[port].0;
        self.eng.cancel_from(n, at);
        if self.eng.pending[n].last().map_or(self.eng.values[n], |p| p.2) != level {
            self.eng.enqueue_net(n, at, level)?;
        }
        Ok(())
    }

    pub fn drive_after(&mut self, port: usize, delay: Ticks, level: Logic) -> Result<(), SimError> {
        let at = self.now() + delay;
        self.drive(port, at, level)
    }

    /// Cancels pending transactions on an output at or after `from`.
    pub fn cancel_from(&mut self, port: usize, from: Ticks) {
        let n = self.outputs[port].0;
        self.eng.cancel_from(n, from);
    }

    /// Requests a `react` call at `at` with `tag` among the wakes.
    pub fn wake_at(&mut self, at: Ticks, tag: u64) -> Result<(), SimError> {
        let now = self.now();
        if at <= now {
            return Err(SimError::Causality { now, at });
        }
        self.eng.enqueue_wake(self.comp, at, tag)
    }

    /// Wake tags that fired in this time step.
    pub fn wakes(&self) -> &[u64] {
        self.wakes
    }

    pub fn log_metastability(&mut self, ev: MetastabilityEvent) -> usize {
        self.eng.meta.push(ev);
        self.eng.meta.len() - 1
    }

    pub fn metastability_mut(&mut self, idx: usize) -> &mut MetastabilityEvent {
        &mut self.eng.meta[idx]
    }

    pub fn diagnose(&mut self, kind: DiagKind, message: impl Into<String>) {
        let d = Diagnostic { time: self.now(), instance: self.name.to_string(), kind, message: message.into() };
        self.eng.diags.push(d);
    }

    pub fn error(&self, message: impl Into<String>) -> SimError {
        SimError::Component { instance: self.name.to_string(), time: self.now(), message: message.into() }
    }
}

#[derive(Debug, Clone)]
pub(super) struct Slot {
    pub name: String,
    pub comp: Box<dyn Component>,
    pub inputs: Vec<NetId>,
    pub outputs: Vec<NetId>,
}

/// A validated, immutable wiring of components. Runs clone the components, so one
/// netlist can be simulated many times, including from several threads.
#[derive(Debug, Clone)]
pub struct Netlist {
    pub(super) net_names: Vec<String>,
    pub(super) drivers: Vec<Option<(CompId, usize)>>,
    pub(super) readers: Vec<Vec<CompId>>,
    pub(super) slots: Vec<Slot>,
    pub(super) probes: Vec<NetId>,
    index: BTreeMap<String, NetId>,
}

impl Netlist {
    pub fn net(&self, name: &str) -> Option<NetId> {
        self.index.get(name).copied()
    }

    pub fn net_name(&self, id: NetId) -> &str {
        &self.net_names[id.0]
    }

    pub fn net_count(&self) -> usize {
        self.net_names.len()
    }

    pub fn component_count(&self) -> usize {
        self.slots.len()
    }

    pub fn net_names(&self) -> impl Iterator<Item = &str> {
        self.net_names.iter().map(String::as_str)
    }

    /// `(instance name, kind)` of every component in id order.
    pub fn components(&self) -> impl Iterator<Item = (&str, &'static str)> {
        self.slots.iter().map(|s| (s.name.as_str(), s.comp.kind()))
    }

    /// Instance name and output port driving a net.
    pub fn driver(&self, id: NetId) -> Option<(&str, usize)> {
        self.drivers[id.0].map(|(c, p)| (self.slots[c.0].name.as_str(), p))
    }

    pub fn probes(&self) -> impl Iterator<Item = &str> {
        self.probes.iter().map(|p| self.net_names[p.0].as_str())
    }
}

/// Incremental netlist construction with hierarchical naming.
#[derive(Debug, Default)]
pub struct NetlistBuilder {
    net_names: Vec<String>,
    drivers: Vec<Option<(CompId, usize)>>,
    readers: Vec<Vec<CompId>>,
    slots: Vec<Slot>,
    probes: Vec<NetId>,
    index: BTreeMap<String, NetId>,
    scope: Vec<String>,
}

impl NetlistBuilder {
    pub fn new() -> NetlistBuilder {
        NetlistBuilder::default()
    }

    /// Net with an absolute name, created on first use.
    pub fn net(&mut self, name: &str) -> NetId {
        if let Some(&id) = self.index.get(name) {
            return id;
        }
        let id = NetId(self.net_names.len());
        self.net_names.push(name.to_string());
        self.drivers.push(None);
        self.readers.push(Vec::new());
        self.index.insert(name.to_string(), id);
        id
    }

    /// Name qualified by the current scope.
    pub fn local(&self, name: &str) -> String {
        if self.scope.is_empty() {
            name.to_string()
        } else {
            format!("{}.{}", self.scope.join("."), name)
        }
    }

    /// Net named relative to the current scope.
    pub fn local_net(&mut self, name: &str) -> NetId {
        let full = self.local(name);
        self.net(&full)
    }

    pub fn push_scope(&mut self, scope: &str) {
        self.scope.push(scope.to_string());
    }

    pub fn pop_scope(&mut self) {
        self.scope.pop();
    }

    pub fn lookup(&self, name: &str) -> Option<NetId> {
        self.index.get(name).copied()
    }

    pub fn net_name(&self, id: NetId) -> &str {
        &self.net_names[id.0]
    }

    pub fn probe(&mut self, id: NetId) {
        if !self.probes.contains(&id) {
            self.probes.push(id);
        }
    }

    /// Adds a component; `name` is qualified by the current scope.
    pub fn add(
        &mut self,
        name: &str,
        comp: impl Component + 'static,
        inputs: &[NetId],
        outputs: &[NetId],
    ) -> Result<CompId, SimError> {
        self.add_boxed(name, Box::new(comp), inputs, outputs)
    }

    pub fn add_boxed(
        &mut self,
        name: &str,
        comp: Box<dyn Component>,
        inputs: &[NetId],
        outputs: &[NetId],
    ) -> Result<CompId, SimError> {
        let name = self.local(name);
        let (ni, no) = comp.ports();
        if ni != inputs.len() || no != outputs.len() {
            return Err(SimError::Validation(format!(
                "{name}: {} expects {ni} inputs / {no} outputs, got {} / {}",
                comp.kind(),
                inputs.len(),
                outputs.len()
            )));
        }
        if let Some(d) = comp.min_delay() {
            if d < Ticks(1) {
                return Err(SimError::Validation(format!("{name}: delay below one tick")));
            }
        }
        let id = CompId(self.slots.len());
        for (p, &o) in outputs.iter().enumerate() {
            if let Some((c, _)) = self.drivers[o.0] {
                return Err(SimError::Validation(format!(
                    "net {} driven by both {} and {name}",
                    self.net_names[o.0], self.slots[c.0].name
                )));
            }
            self.drivers[o.0] = Some((id, p));
        }
        for &i in inputs {
            if !self.readers[i.0].contains(&id) {
                self.readers[i.0].push(id);
            }
        }
        self.slots.push(Slot { name, comp, inputs: inputs.to_vec(), outputs: outputs.to_vec() });
        Ok(id)
    }

    pub fn build(self) -> Result<Netlist, SimError> {
        let undriven: Vec<&str> = self
            .drivers
            .iter()
            .enumerate()
            .filter(|(_, d)| d.is_none())
            .map(|(i, _)| self.net_names[i].as_str())
            .collect();
        if !undriven.is_empty() {
            return Err(SimError::Validation(format!("undriven nets: {}", undriven.join(", "))));
        }
        Ok(Netlist {
            net_names: self.net_names,
            drivers: self.drivers,
            readers: self.readers,
            slots: self.slots,
            probes: self.probes,
            index: self.index,
        })
    }
}
