// SPDX-License-Identifier: Apache-2.0

//! Dual delay-line droop detector.
//!
//! The clock races down a reference line of `x + 2` buffers and a test line of `x`
//! buffers powered from the monitored supply. The detect flip-flop samples the
//! reference line on the test line's edge; it reads 1 once the test line has slowed
//! past the reference. The calibrate flip-flop samples the other way round.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::gates::{source, Dff, Gate, GateKind, VddBuffer};
use crate::kernel::{run_until, Logic, NetId, Netlist, NetlistBuilder, SimError, SimOptions, SimResult, Ticks, Waveform};
use crate::timing::{DelaySpec, TimingProfile, VoltageMap, VoltageProfile};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DroopDetectorConfig {
    /// Test-line length; the reference line has `x + 2` buffers.
    pub x: usize,
    pub buffer_delay: DelaySpec,
    pub voltage_map: VoltageMap,
    pub timing: TimingProfile,
}

impl DroopDetectorConfig {
    pub fn new(timing: TimingProfile) -> DroopDetectorConfig {
        DroopDetectorConfig {
            x: 8,
            buffer_delay: DelaySpec::symmetric(Ticks::ps(200)),
            voltage_map: VoltageMap::default(),
            timing,
        }
    }

    pub fn validate(&self) -> Result<(), SimError> {
        self.timing.validate()?;
        if self.x == 0 {
            return Err(SimError::Config("detector needs at least one test buffer".into()));
        }
        if self.buffer_delay.min() < Ticks(1) {
            return Err(SimError::Config("buffer delay below one tick".into()));
        }
        Ok(())
    }

    /// Supply voltage at which both lines are equally long (nominal delays).
    pub fn threshold_voltage(&self) -> f64 {
        self.voltage_map.voltage_for((self.x + 2) as f64 / self.x as f64)
    }
}

#[derive(Clone, Debug)]
pub struct DetectorNets {
    pub calibrate: NetId,
    pub detect: NetId,
    pub droop_n: NetId,
}

/// Adds a detector under scope `name`. The test line reads `vdd`.
pub fn build_droop_detector(
    b: &mut NetlistBuilder,
    cfg: &DroopDetectorConfig,
    name: &str,
    clk_in: NetId,
    vdd: Arc<VoltageProfile>,
) -> Result<DetectorNets, SimError> {
    cfg.validate()?;
    let tp = &cfg.timing;
    b.push_scope(name);
    let r = (|| {
        let mut r = clk_in;
        for i in 0..cfg.x + 2 {
            let n = format!("ref{i}");
            let d = tp.variation.apply(cfg.buffer_delay, &b.local(&n));
            let out = b.local_net(&n);
            b.add(&n, Gate::new(GateKind::Buf, 1, d)?, &[r], &[out])?;
            r = out;
        }
        let mut t = clk_in;
        for i in 0..cfg.x {
            let n = format!("test{i}");
            let d = tp.variation.apply(cfg.buffer_delay, &b.local(&n));
            let out = b.local_net(&n);
            b.add(&n, VddBuffer { delay: d, map: cfg.voltage_map, vdd: vdd.clone() }, &[t], &[out])?;
            t = out;
        }
        let detect = b.local_net("detect");
        let calibrate = b.local_net("calibrate");
        for (inst, d, clk, q) in [("detect", r, t, detect), ("calibrate", t, r, calibrate)] {
            let full = b.local(inst);
            b.add(inst, Dff::new(&full, tp.ctq(&full), tp.standard_meta(), Logic::L0), &[d, clk], &[q])?;
        }
        let droop_n = b.local_net("droop_n");
        b.add("droop_n", Gate::new(GateKind::Not, 1, DelaySpec::symmetric(Ticks(1)))?, &[detect], &[droop_n])?;
        Ok(DetectorNets { calibrate, detect, droop_n })
    })();
    b.pop_scope();
    r
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DetectorOutputs {
    pub calibrate: Waveform,
    pub detect: Waveform,
    /// Active-low droop flag for the delay chain.
    pub droop_detected_n: Waveform,
}

#[derive(Clone, Debug)]
pub struct DetectorRun {
    pub outputs: DetectorOutputs,
    pub result: SimResult,
}

pub fn detector_netlist(cfg: &DroopDetectorConfig, clk_in: Waveform, vdd: &VoltageProfile) -> Result<(Netlist, DetectorNets), SimError> {
    let mut b = NetlistBuilder::new();
    let c = source(&mut b, "clk_in", clk_in)?;
    let nets = build_droop_detector(&mut b, cfg, "det", c, Arc::new(vdd.clone()))?;
    for n in [c, nets.calibrate, nets.detect, nets.droop_n] {
        b.probe(n);
    }
    Ok((b.build()?, nets))
}

pub fn run_detector(cfg: &DroopDetectorConfig, clk_in: &Waveform, vdd: &VoltageProfile, t_end: Ticks) -> Result<DetectorRun, SimError> {
    let (nl, nets) = detector_netlist(cfg, clk_in.clone(), vdd)?;
    let res = run_until(&nl, t_end, &SimOptions::default())?;
    let w = |n: NetId| res.wave(nl.net_name(n)).clone();
    let outputs = DetectorOutputs { calibrate: w(nets.calibrate), detect: w(nets.detect), droop_detected_n: w(nets.droop_n) };
    Ok(DetectorRun { outputs, result: res })
}
