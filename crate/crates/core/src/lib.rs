// SPDX-License-Identifier: Apache-2.0

//! Deterministic discrete-event, gate-level timing simulation of a latch-based,
//! PLL-free voltage-droop clock adaptation circuit.
//!
//! The crate is organized bottom-up:
//!
//! * [`kernel`]: time base, 3-valued logic, waveforms, event queue, netlists and the run loop.
//! * [`timing`]: delays, static variation, voltage scaling and metastability resolution.
//! * [`gates`]: combinational primitives, delay lines, the glitch-free mux, flip-flops and
//!   the Gray counter.
//! * [`latch`]: plain and masking (mask-0 / mask-1 / mask-01) transparent latches.
//! * [`shaper`], [`delay_element`], [`phase_acc`], [`detector`]: the circuit blocks.
//! * [`system`]: the blocks wired into the complete adaptive clock.
//! * [`checkers`]: waveform monitors that turn the correctness properties into findings.
//! * [`oracle`]: an independent interval-algebra model used to cross-check simulations.
//!
//! Analysis code that does not depend on the integer time base is generic over a
//! [`Scalar`]; the aliases below fix the common instantiations.

pub mod checkers;
pub mod delay_element;
pub mod detector;
pub mod gates;
pub mod kernel;
pub mod latch;
pub mod oracle;
pub mod phase_acc;
pub mod scalar;
pub mod shaper;
pub mod system;
pub mod timing;

pub use kernel::{Logic, Netlist, NetlistBuilder, SimError, SimOptions, SimResult, Ticks, Waveform};
pub use scalar::{Real, Scalar};

/// Exact rational scalar.
pub type Rational = num_rational::Ratio<i64>;

/// Interval signal over integer femtosecond ticks.
pub type TickSignal = oracle::IntervalSignal<i64>;
/// Interval signal over exact fractions (typically in units of the clock period).
pub type ExactSignal = oracle::IntervalSignal<Rational>;
/// Interval signal over `f64`.
pub type FloatSignal = oracle::IntervalSignal<f64>;

/// Pulse-shaper constraint analysis solved in exact rational arithmetic.
pub type ExactConstraintReport = shaper::ConstraintReport<Rational>;
/// Pulse-shaper constraint analysis solved in `f64`.
pub type ConstraintReportF64 = shaper::ConstraintReport<f64>;
