// SPDX-License-Identifier: Apache-2.0

//! Scenario documents: JSON with every section optional and unknown keys rejected.
//!
//! ```json
//! {
//!   "topology": "full_system",
//!   "timing": { "epsilon": 0.02, "seed": 7 },
//!   "stimulus": { "cycles": 60, "vdd": [["0", 1.2], ["20T", 1.2], ["20T", 0.95], ["23T", 0.95], ["23T", 1.2]] }
//! }
//! ```

use std::fmt;

use droopsim_core::delay_element::DelayElementConfig;
use droopsim_core::detector::DroopDetectorConfig;
use droopsim_core::phase_acc::PhaseAccumulatorConfig;
use droopsim_core::shaper::{ShaperSpec, ShaperStages};
use droopsim_core::system::{DroopSource, LimitOverrides, SystemConfig};
use droopsim_core::timing::{DelaySpec, ForcedResolution, TimingProfile, VoltageProfile};
use droopsim_core::{Logic, SimError, Ticks, Waveform};
use serde::de::{self, Visitor};
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use sha2::{Digest, Sha256};

use crate::delay::Delay;

#[derive(Debug, thiserror::Error)]
pub enum ScenarioError {
    #[error("line {line}, column {column}, at `{path}`: {message}")]
    Parse { path: String, line: usize, column: usize, message: String },
    #[error("`{field}`: {message}")]
    Invalid { field: String, message: String },
}

fn invalid(field: impl Into<String>, message: impl fmt::Display) -> ScenarioError {
    ScenarioError::Invalid { field: field.into(), message: message.to_string() }
}

/// 0, 1 or X. Written as `0`, `1` or `"x"`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Level(pub Logic);

impl Serialize for Level {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self.0 {
            Logic::L0 => s.serialize_u8(0),
            Logic::L1 => s.serialize_u8(1),
            Logic::X => s.serialize_str("x"),
        }
    }
}

impl<'de> Deserialize<'de> for Level {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Level, D::Error> {
        struct V;
        impl Visitor<'_> for V {
            type Value = Level;

            fn expecting(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str("a logic level: 0, 1 or \"x\"")
            }

            fn visit_u64<E: de::Error>(self, v: u64) -> Result<Level, E> {
                match v {
                    0 => Ok(Level(Logic::L0)),
                    1 => Ok(Level(Logic::L1)),
                    _ => Err(E::custom(format!("logic level {v} is not 0 or 1"))),
                }
            }

            fn visit_i64<E: de::Error>(self, v: i64) -> Result<Level, E> {
                u64::try_from(v).map_err(|_| E::custom("negative logic level")).and_then(|v| self.visit_u64(v))
            }

            fn visit_bool<E: de::Error>(self, v: bool) -> Result<Level, E> {
                Ok(Level(Logic::from_bool(v)))
            }

            fn visit_str<E: de::Error>(self, v: &str) -> Result<Level, E> {
                match v {
                    "0" => Ok(Level(Logic::L0)),
                    "1" => Ok(Level(Logic::L1)),
                    "x" | "X" => Ok(Level(Logic::X)),
                    _ => Err(E::custom(format!("unknown logic level `{v}`"))),
                }
            }
        }
        d.deserialize_any(V)
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Topology {
    /// Detector, delay chain and phase accumulator.
    #[default]
    FullSystem,
    Single(Module),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Module {
    Shaper,
    DelayElement,
    Chain,
    PhaseAccumulator,
    Detector,
}

impl fmt::Display for Topology {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Topology::FullSystem => "full_system",
            Topology::Single(Module::Shaper) => "shaper",
            Topology::Single(Module::DelayElement) => "delay_element",
            Topology::Single(Module::Chain) => "chain",
            Topology::Single(Module::PhaseAccumulator) => "phase_accumulator",
            Topology::Single(Module::Detector) => "detector",
        };
        f.write_str(s)
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimingSpec {
    #[serde(default)]
    pub epsilon: f64,
    #[serde(default)]
    pub seed: u64,
    pub gate: Option<Delay>,
    pub clk_to_q: Option<Delay>,
    pub setup: Option<Delay>,
    pub hold: Option<Delay>,
    /// Resolution constant of masking latches.
    pub tau: Option<Delay>,
    pub tau_standard: Option<Delay>,
    pub metastability: Option<bool>,
    pub resolve_bias: Option<f64>,
    #[serde(default)]
    pub forced: Vec<ForcedSpec>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ForcedSpec {
    pub instance: String,
    pub cycle: u64,
    pub delay: Delay,
    pub value: Level,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum ShaperChoice {
    /// Two stages `T/3, T/6`.
    Old,
    /// Pre-stage `T/10`, stages `T/3, T/6`.
    #[default]
    IdealizedNew,
    /// Pre-stage `T/10`, stages `T/4, T/5`.
    Implemented,
    Custom {
        #[serde(default)]
        shorten: Option<Delay>,
        stages: Vec<Delay>,
    },
}

impl ShaperChoice {
    pub fn stages(&self, period: Ticks) -> ShaperStages {
        match self {
            ShaperChoice::Old => ShaperSpec::old().to_ticks(period),
            ShaperChoice::IdealizedNew => ShaperSpec::idealized_new().to_ticks(period),
            ShaperChoice::Implemented => ShaperSpec::implemented().to_ticks(period),
            ShaperChoice::Custom { shorten, stages } => ShaperStages {
                shorten: shorten.map(|d| d.resolve(period)),
                stages: stages.iter().map(|d| d.resolve(period)).collect(),
            },
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ElementOverride {
    pub index: usize,
    pub quarter_delay: Option<Delay>,
    pub fast_path_delay: Option<Delay>,
    /// Power-up level of the stored droop bits.
    pub idle: Option<Level>,
    pub shaper: Option<ShaperChoice>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhaseAccSpec {
    pub select_delay: Option<Delay>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DetectorSpec {
    /// Test-line length in buffers.
    pub x: Option<usize>,
    pub buffer_delay: Option<Delay>,
    pub v_nominal: Option<f64>,
    pub sensitivity: Option<f64>,
}

/// Piecewise-constant waveform: initial level and `[time, level]` edges.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WaveSpec {
    #[serde(default = "level_one")]
    pub initial: Level,
    #[serde(default)]
    pub edges: Vec<(Delay, Level)>,
}

fn level_one() -> Level {
    Level(Logic::L1)
}

impl WaveSpec {
    pub fn to_waveform(&self, period: Ticks) -> Result<Waveform, String> {
        Waveform::from_transitions(self.initial.0, self.edges.iter().map(|&(t, l)| (t.resolve(period), l.0))).map_err(|e| e.to_string())
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClockSpec {
    pub first_rise: Option<Delay>,
    pub high: Option<Delay>,
    pub period: Option<Delay>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Stimulus {
    /// Run length in output periods.
    #[serde(default = "default_cycles")]
    pub cycles: u64,
    #[serde(default)]
    pub clock: ClockSpec,
    /// Piecewise-linear supply, `[time, volts]` pairs.
    pub vdd: Option<Vec<(Delay, f64)>>,
    /// Active-low droop bit driven straight into the chain.
    pub droop: Option<WaveSpec>,
    /// Active-low reset.
    pub reset: Option<WaveSpec>,
    /// Accumulator droop input when the accumulator runs alone.
    pub g_in: Option<WaveSpec>,
}

fn default_cycles() -> u64 {
    100
}

impl Default for Stimulus {
    fn default() -> Self {
        Stimulus { cycles: default_cycles(), clock: ClockSpec::default(), vdd: None, droop: None, reset: None, g_in: None }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CheckSpec {
    /// Shortest legitimate pulse for the glitch checker.
    pub min_pulse: Option<Delay>,
    /// Absolute slack added to every timing bound.
    pub tolerance: Option<Delay>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    #[serde(default)]
    pub name: Option<String>,
    #[serde(default)]
    pub topology: Topology,
    #[serde(default = "default_period")]
    pub period: Delay,
    #[serde(default = "default_chain")]
    pub chain_length: usize,
    /// 1 ps gates and latches, zero sampling window.
    #[serde(default)]
    pub idealized: bool,
    #[serde(default)]
    pub timing: TimingSpec,
    #[serde(default)]
    pub shaper: ShaperChoice,
    #[serde(default)]
    pub elements: Vec<ElementOverride>,
    #[serde(default)]
    pub phase_acc: PhaseAccSpec,
    #[serde(default)]
    pub detector: DetectorSpec,
    #[serde(default)]
    pub stimulus: Stimulus,
    /// Extra nets to record and dump.
    #[serde(default)]
    pub probes: Vec<String>,
    #[serde(default)]
    pub checks: CheckSpec,
}

fn default_period() -> Delay {
    Delay::Abs(Ticks::DEFAULT_PERIOD)
}

fn default_chain() -> usize {
    4
}

impl Default for Scenario {
    fn default() -> Self {
        serde_json::from_str("{}").expect("empty scenario")
    }
}

/// Parses and validates a scenario document.
pub fn load_scenario(text: &str) -> Result<Scenario, ScenarioError> {
    let mut de = serde_json::Deserializer::from_str(text);
    let s: Scenario = serde_path_to_error::deserialize(&mut de).map_err(|e| {
        let path = e.path().to_string();
        let inner = e.into_inner();
        let message = inner.to_string();
        // serde_json appends the position; keep the message itself
        let message = message.split(" at line ").next().unwrap_or(&message).to_string();
        ScenarioError::Parse { path, line: inner.line(), column: inner.column(), message }
    })?;
    de.end().map_err(|e| ScenarioError::Parse { path: ".".into(), line: e.line(), column: e.column(), message: "trailing characters".into() })?;
    s.resolve()?;
    Ok(s)
}

/// Everything a run needs, in ticks.
#[derive(Clone, Debug)]
pub struct Resolved {
    pub period: Ticks,
    pub t_end: Ticks,
    pub timing: TimingProfile,
    pub shaper: ShaperStages,
    pub chain: Vec<DelayElementConfig>,
    pub phase_acc: PhaseAccumulatorConfig,
    pub detector: DroopDetectorConfig,
    pub clock: Waveform,
    pub clock_high: Ticks,
    pub vdd: Option<VoltageProfile>,
    pub droop: Waveform,
    pub reset: Waveform,
    pub g_in: Waveform,
    pub limits: LimitOverrides,
}

impl Resolved {
    pub fn system(&self) -> SystemConfig {
        SystemConfig { period: self.period, chain: self.chain.clone(), phase_acc: self.phase_acc.clone(), detector: self.detector.clone() }
    }

    /// The system's droop source: a direct waveform wins over a supply profile.
    pub fn droop_source(&self, s: &Scenario) -> DroopSource {
        match (&s.stimulus.droop, &self.vdd) {
            (None, Some(v)) => DroopSource::Detector(v.clone()),
            _ => DroopSource::Direct(self.droop.clone()),
        }
    }
}

fn config(field: &str) -> impl Fn(SimError) -> ScenarioError + '_ {
    move |e| match e {
        SimError::Config(m) => invalid(field, m),
        other => invalid(field, other),
    }
}

impl Scenario {
    pub fn is_idealized(&self) -> bool {
        self.idealized
    }

    /// SHA-256 of the canonical JSON form, hex encoded.
    pub fn hash(&self) -> String {
        let bytes = serde_json::to_vec(self).expect("scenario serializes");
        Sha256::digest(&bytes).iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("scenario serializes")
    }

    pub fn with_seed(&self, seed: u64) -> Scenario {
        let mut s = self.clone();
        s.timing.seed = seed;
        s
    }

    pub fn with_epsilon(&self, epsilon: f64) -> Scenario {
        let mut s = self.clone();
        s.timing.epsilon = epsilon;
        s
    }

    /// Moves the droop stimulus so that it starts at `onset`. A direct droop waveform is
    /// shifted as a whole; a supply profile keeps its first point and shifts the rest so
    /// that the first change of voltage lands at `onset`.
    pub fn with_onset(&self, onset: Ticks) -> Result<Scenario, ScenarioError> {
        let period = self.period_ticks()?;
        let shift = |t: Delay, by: i128, field: &str| -> Result<Delay, ScenarioError> {
            let v = t.resolve(period).0 as i128 + by;
            u64::try_from(v).map(|v| Delay::Abs(Ticks(v))).map_err(|_| invalid(field, "onset moves a point before time zero"))
        };
        let mut s = self.clone();
        if let Some(w) = &mut s.stimulus.droop {
            let Some(&(first, _)) = w.edges.first() else {
                return Err(invalid("stimulus.droop", "onset sweep needs at least one droop edge"));
            };
            let by = onset.0 as i128 - first.resolve(period).0 as i128;
            for e in &mut w.edges {
                e.0 = shift(e.0, by, "stimulus.droop")?;
            }
        } else if let Some(v) = &mut s.stimulus.vdd {
            let v0 = v.first().map(|p| p.1).ok_or_else(|| invalid("stimulus.vdd", "empty profile"))?;
            let Some(anchor) = v.iter().skip(1).position(|p| p.1 != v0).map(|i| i + 1) else {
                return Err(invalid("stimulus.vdd", "onset sweep needs a profile that changes"));
            };
            // the ramp into the first change starts at the point before it
            let start = if anchor > 1 { anchor - 1 } else { anchor };
            let by = onset.0 as i128 - v[start].0.resolve(period).0 as i128;
            for p in v.iter_mut().skip(1) {
                p.0 = shift(p.0, by, "stimulus.vdd")?;
            }
        } else {
            return Err(invalid("stimulus", "onset sweep needs stimulus.droop or stimulus.vdd"));
        }
        Ok(s)
    }

    pub fn period_ticks(&self) -> Result<Ticks, ScenarioError> {
        match self.period {
            Delay::Abs(t) if t >= Ticks(1000) => Ok(t),
            Delay::Abs(_) => Err(invalid("period", "period below 1 ps")),
            Delay::Period { .. } => Err(invalid("period", "the period must be an absolute time")),
        }
    }

    fn timing_profile(&self, period: Ticks) -> Result<TimingProfile, ScenarioError> {
        let t = &self.timing;
        if !(0.0..1.0).contains(&t.epsilon) {
            return Err(invalid("timing.epsilon", "must lie in [0, 1)"));
        }
        let mut tp = if self.idealized { TimingProfile::idealized() } else { TimingProfile::realistic(t.epsilon, t.seed) };
        tp.variation.epsilon = t.epsilon;
        tp.variation.seed = t.seed;
        tp.meta.seed = t.seed;
        let r = |d: Delay| d.resolve(period);
        if let Some(g) = t.gate {
            tp.gate = DelaySpec::symmetric(r(g));
        }
        if let Some(c) = t.clk_to_q {
            tp.clk_to_q = r(c);
        }
        if let Some(s) = t.setup {
            tp.meta.setup = r(s);
        }
        if let Some(h) = t.hold {
            tp.meta.hold = r(h);
        }
        if let Some(tau) = t.tau {
            tp.tau_masking = r(tau);
        }
        if let Some(tau) = t.tau_standard {
            tp.tau_standard = r(tau);
        }
        tp.meta.tau = tp.tau_masking;
        if let Some(m) = t.metastability {
            tp.meta.enabled = m;
        }
        if let Some(b) = t.resolve_bias {
            tp.meta.resolve_bias = b;
        }
        for (i, f) in t.forced.iter().enumerate() {
            if f.value.0.is_x() {
                return Err(invalid(format!("timing.forced[{i}].value"), "a resolution must be 0 or 1"));
            }
            tp.meta.forced.push(ForcedResolution { instance: f.instance.clone(), cycle: f.cycle, delay: r(f.delay), value: f.value.0 });
        }
        tp.validate().map_err(config("timing"))?;
        Ok(tp)
    }

    /// Checks the scenario and converts it to tick-based configurations.
    pub fn resolve(&self) -> Result<Resolved, ScenarioError> {
        let period = self.period_ticks()?;
        let r = |d: Delay| d.resolve(period);
        let timing = self.timing_profile(period)?;
        let st = &self.stimulus;
        if st.cycles == 0 {
            return Err(invalid("stimulus.cycles", "must be positive"));
        }
        let t_end = period * st.cycles;

        let shaper = self.shaper.stages(period);
        shaper.validate().map_err(config("shaper"))?;

        let single_element = matches!(self.topology, Topology::Single(Module::DelayElement));
        let n = if single_element { 1 } else { self.chain_length };
        if n == 0 {
            return Err(invalid("chain_length", "must be at least 1"));
        }
        let mut chain = vec![DelayElementConfig { shaper: shaper.clone(), ..DelayElementConfig::new(period, &ShaperSpec::old(), timing.clone()) }; n];
        for (i, o) in self.elements.iter().enumerate() {
            let field = format!("elements[{i}]");
            let c = chain.get_mut(o.index).ok_or_else(|| invalid(format!("{field}.index"), format!("no element {} in a chain of {n}", o.index)))?;
            if let Some(q) = o.quarter_delay {
                c.quarter_delay = r(q);
            }
            if let Some(f) = o.fast_path_delay {
                c.fast_path_delay = r(f);
            }
            if let Some(l) = o.idle {
                c.idle = l.0;
            }
            if let Some(s) = &o.shaper {
                c.shaper = s.stages(period);
            }
        }
        for (i, c) in chain.iter().enumerate() {
            c.validate().map_err(config(&format!("elements[{i}]")))?;
        }

        let mut phase_acc = PhaseAccumulatorConfig::new(period, timing.clone());
        if let Some(d) = self.phase_acc.select_delay {
            phase_acc.select_delay = r(d);
        }
        phase_acc.validate().map_err(config("phase_acc"))?;

        let mut detector = DroopDetectorConfig::new(timing.clone());
        let ds = &self.detector;
        if let Some(x) = ds.x {
            detector.x = x;
        }
        if let Some(b) = ds.buffer_delay {
            detector.buffer_delay = DelaySpec::symmetric(r(b));
        }
        if let Some(v) = ds.v_nominal {
            detector.voltage_map.v_nominal = v;
        }
        if let Some(k) = ds.sensitivity {
            detector.voltage_map.sensitivity = k;
        }
        detector.validate().map_err(config("detector"))?;

        // double-rate input for the accumulator and the detector, output rate otherwise
        let double = matches!(self.topology, Topology::FullSystem | Topology::Single(Module::PhaseAccumulator | Module::Detector));
        let (def_first, def_high, def_period) =
            if double { (period.frac(1, 2), period.frac(1, 4), period.frac(1, 2)) } else { (period, period.frac(1, 2), period) };
        let cp = st.clock.period.map(r).unwrap_or(def_period);
        let high = st.clock.high.map(r).unwrap_or(def_high);
        let first = st.clock.first_rise.map(r).unwrap_or(def_first);
        if high == Ticks::ZERO || high >= cp {
            return Err(invalid("stimulus.clock.high", "must lie strictly inside the clock period"));
        }
        let clock = Waveform::clock(first, high, cp, t_end);

        let vdd = match &st.vdd {
            Some(points) => Some(
                VoltageProfile::new(points.iter().map(|&(t, v)| (r(t), v)).collect()).map_err(config("stimulus.vdd"))?,
            ),
            None => None,
        };
        let wave = |w: &Option<WaveSpec>, field: &str| -> Result<Waveform, ScenarioError> {
            match w {
                Some(w) => w.to_waveform(period).map_err(|m| invalid(field, m)),
                None => Ok(Waveform::constant(Logic::L1)),
            }
        };
        let droop = wave(&st.droop, "stimulus.droop")?;
        let reset = wave(&st.reset, "stimulus.reset")?;
        let g_in = wave(&st.g_in, "stimulus.g_in")?;
        if st.droop.is_some() && st.vdd.is_some() && self.topology == Topology::FullSystem {
            return Err(invalid("stimulus", "droop and vdd are alternatives; give one"));
        }
        if self.topology == Topology::Single(Module::Detector) && vdd.is_none() {
            return Err(invalid("stimulus.vdd", "the detector needs a supply profile"));
        }

        let limits = LimitOverrides { min_pulse: self.checks.min_pulse.map(r), tol: self.checks.tolerance.map(r) };
        Ok(Resolved { period, t_end, timing, shaper, chain, phase_acc, detector, clock, clock_high: high, vdd, droop, reset, g_in, limits })
    }
}
