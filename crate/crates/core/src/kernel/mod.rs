// SPDX-License-Identifier: Apache-2.0

//! Deterministic discrete-event engine.
//!
//! Time is integer femtoseconds. All components use transport-delay semantics: a
//! newly scheduled output transaction removes every pending transaction on the same
//! net at or after its own time, and pulses of any width propagate. Every component
//! delay is at least one tick, so a time step never schedules work for itself and
//! no delta cycles are needed.

mod logic;
mod netlist;
mod queue;
mod sim;
mod time;
mod waveform;

pub use logic::Logic;
pub use netlist::{CompId, Component, Ctx, NetId, Netlist, NetlistBuilder};
pub use queue::{Event, EventQueue, Target};
pub use sim::{
    run_until, DiagKind, Diagnostic, MetaOutcome, MetastabilityEvent, SimError, SimOptions, SimResult,
};
pub use time::Ticks;
pub use waveform::{Waveform, WaveformError};
