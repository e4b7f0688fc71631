// SPDX-License-Identifier: Apache-2.0

//! Delays, static variation, supply-voltage scaling and metastability resolution.

use num_traits::Float;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::kernel::{Logic, SimError, Ticks, Waveform};

/// Nominal rise / fall delay of a component.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DelaySpec {
    pub rise: Ticks,
    pub fall: Ticks,
}

impl DelaySpec {
    pub const fn symmetric(d: Ticks) -> DelaySpec {
        DelaySpec { rise: d, fall: d }
    }

    pub fn new(rise: Ticks, fall: Ticks) -> Result<DelaySpec, SimError> {
        if rise < Ticks(1) || fall < Ticks(1) {
            return Err(SimError::Config("delays must be at least one tick".into()));
        }
        Ok(DelaySpec { rise, fall })
    }

    /// Delay of a transition to `level`; transitions to X use the faster edge.
    pub fn for_level(&self, level: Logic) -> Ticks {
        match level {
            Logic::L1 => self.rise,
            Logic::L0 => self.fall,
            Logic::X => self.min(),
        }
    }

    pub fn min(&self) -> Ticks {
        self.rise.min(self.fall)
    }

    pub fn max(&self) -> Ticks {
        self.rise.max(self.fall)
    }

    /// Scaled by `m`, rounded, never below one tick.
    pub fn scaled(&self, m: f64) -> DelaySpec {
        DelaySpec { rise: self.rise.scale(m).max(Ticks(1)), fall: self.fall.scale(m).max(Ticks(1)) }
    }
}

/// 64-bit FNV-1a hash of an instance name.
pub fn instance_key(name: &str) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in name.bytes() {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

fn stream(seed: u64, key: u64, index: u64, domain: u64) -> ChaCha8Rng {
    let mut s = [0u8; 32];
    s[..8].copy_from_slice(&seed.to_le_bytes());
    s[8..16].copy_from_slice(&key.to_le_bytes());
    s[16..24].copy_from_slice(&index.to_le_bytes());
    s[24..].copy_from_slice(&domain.to_le_bytes());
    ChaCha8Rng::from_seed(s)
}

const DOMAIN_VARIATION: u64 = 1;
const DOMAIN_RESOLUTION: u64 = 2;

/// Static per-instance delay multipliers, uniform in `[1 - epsilon, 1 + epsilon]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct VariationModel {
    pub epsilon: f64,
    pub seed: u64,
}

impl Default for VariationModel {
    fn default() -> Self {
        VariationModel { epsilon: 0.0, seed: 0 }
    }
}

impl VariationModel {
    pub fn new(epsilon: f64, seed: u64) -> Result<VariationModel, SimError> {
        if !(0.0..1.0).contains(&epsilon) {
            return Err(SimError::Config(format!("epsilon {epsilon} outside [0, 1)")));
        }
        Ok(VariationModel { epsilon, seed })
    }

    pub fn multiplier(&self, instance: &str) -> f64 {
        self.multiplier_for_key(instance_key(instance))
    }

    pub fn multiplier_for_key(&self, key: u64) -> f64 {
        if self.epsilon == 0.0 {
            return 1.0;
        }
        let mut rng = stream(self.seed, key, 0, DOMAIN_VARIATION);
        rng.gen_range(1.0 - self.epsilon..=1.0 + self.epsilon)
    }

    pub fn apply(&self, nominal: DelaySpec, instance: &str) -> DelaySpec {
        nominal.scaled(self.multiplier(instance))
    }

    pub fn apply_ticks(&self, nominal: Ticks, instance: &str) -> Ticks {
        nominal.scale(self.multiplier(instance)).max(Ticks(1))
    }
}

/// Monotone supply-voltage delay multiplier `m(v) = 1 + s (v_nominal - v) / v_nominal`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct VoltageMap {
    pub v_nominal: f64,
    pub sensitivity: f64,
}

impl Default for VoltageMap {
    fn default() -> Self {
        VoltageMap { v_nominal: 1.2, sensitivity: 2.0 }
    }
}

impl VoltageMap {
    /// Multiplier at supply `v`, floored at 0.05 so delays stay positive above nominal.
    pub fn scale(&self, v: f64) -> f64 {
        (1.0 + self.sensitivity * (self.v_nominal - v) / self.v_nominal).max(0.05)
    }

    /// Supply voltage at which the multiplier equals `m`.
    pub fn voltage_for(&self, m: f64) -> f64 {
        self.v_nominal * (1.0 - (m - 1.0) / self.sensitivity)
    }
}

/// Piecewise-linear supply voltage over time; constant before the first and after the last point.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VoltageProfile {
    points: Vec<(Ticks, f64)>,
}

impl VoltageProfile {
    pub fn constant(v: f64) -> VoltageProfile {
        VoltageProfile { points: vec![(Ticks::ZERO, v)] }
    }

    pub fn new(points: Vec<(Ticks, f64)>) -> Result<VoltageProfile, SimError> {
        if points.is_empty() {
            return Err(SimError::Config("empty voltage profile".into()));
        }
        if points.windows(2).any(|w| w[1].0 < w[0].0) {
            return Err(SimError::Config("voltage profile times must be non-decreasing".into()));
        }
        Ok(VoltageProfile { points })
    }

    /// Nominal supply with a rectangular dip to `v_low` on `[start, start + len)`.
    /// Edges are one tick wide.
    pub fn step(v_nom: f64, v_low: f64, start: Ticks, len: Ticks) -> VoltageProfile {
        let mut points = vec![(Ticks::ZERO, v_nom)];
        if start > Ticks::ZERO {
            points.push((start - Ticks(1), v_nom));
        }
        points.push((start, v_low));
        points.push((start + len - Ticks(1), v_low));
        points.push((start + len, v_nom));
        VoltageProfile { points }
    }

    pub fn points(&self) -> &[(Ticks, f64)] {
        &self.points
    }

    pub fn at(&self, t: Ticks) -> f64 {
        let i = self.points.partition_point(|p| p.0 <= t);
        if i == 0 {
            return self.points[0].1;
        }
        if i == self.points.len() {
            return self.points[i - 1].1;
        }
        let (t0, v0) = self.points[i - 1];
        let (t1, v1) = self.points[i];
        if t1 == t0 {
            return v1;
        }
        v0 + (v1 - v0) * (t.diff(t0) as f64 / t1.diff(t0) as f64)
    }
}

/// A pinned resolution for one capture of one instance.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ForcedResolution {
    pub instance: String,
    pub cycle: u64,
    pub delay: Ticks,
    pub value: Logic,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetastabilityConfig {
    pub enabled: bool,
    pub tau: Ticks,
    pub setup: Ticks,
    pub hold: Ticks,
    pub resolve_bias: f64,
    pub seed: u64,
    pub forced: Vec<ForcedResolution>,
}

/// Resolution time constant of masking latches (108 ps).
pub const TAU_MASKING: Ticks = Ticks(108_000);
/// Resolution time constant of standard latches and flip-flops (106 ps).
pub const TAU_STANDARD: Ticks = Ticks(106_000);

impl Default for MetastabilityConfig {
    fn default() -> Self {
        MetastabilityConfig {
            enabled: true,
            tau: TAU_MASKING,
            setup: Ticks::ps(20),
            hold: Ticks::ps(20),
            resolve_bias: 0.5,
            seed: 0,
            forced: Vec::new(),
        }
    }
}

impl MetastabilityConfig {
    pub fn validate(&self) -> Result<(), SimError> {
        if self.tau == Ticks::ZERO {
            return Err(SimError::Config("tau must be positive".into()));
        }
        if !(0.0..=1.0).contains(&self.resolve_bias) {
            return Err(SimError::Config("resolve_bias outside [0, 1]".into()));
        }
        Ok(())
    }

    pub fn with_tau(&self, tau: Ticks) -> MetastabilityConfig {
        MetastabilityConfig { tau, ..self.clone() }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ResolutionDraw {
    pub delay: Ticks,
    pub value: Logic,
    pub forced: bool,
}

/// Resolution of capture `cycle` at `instance`: a forced override if one matches,
/// else an exponential delay with mean `tau` and a Bernoulli(`resolve_bias`) value.
pub fn sample_resolution(cfg: &MetastabilityConfig, instance: &str, cycle: u64) -> ResolutionDraw {
    if let Some(f) = cfg.forced.iter().find(|f| f.instance == instance && f.cycle == cycle) {
        return ResolutionDraw { delay: f.delay, value: f.value, forced: true };
    }
    let mut rng = stream(cfg.seed, instance_key(instance), cycle, DOMAIN_RESOLUTION);
    let u = 1.0 - rng.gen::<f64>();
    let delay = Ticks((-(cfg.tau.0 as f64) * u.ln()).round() as u64);
    let value = Logic::from_bool(rng.gen_bool(cfg.resolve_bias));
    ResolutionDraw { delay, value, forced: false }
}

/// True iff `data` changes in `[t - setup, t + hold]` or is X at `t`.
pub fn detect_violation(data: &Waveform, t: Ticks, cfg: &MetastabilityConfig) -> bool {
    data.sample(t).is_x() || !data.transitions_in(t.saturating_sub(cfg.setup), t + cfg.hold).is_empty()
}

/// Synchronizer mean time between failures in seconds:
/// `exp(stages * t_r / tau) / (t_w * f_clock * f_data)`, times in seconds, rates in hertz.
pub fn mtbf<F: Float>(tau: F, t_r: F, t_w: F, f_clock: F, f_data: F, stages: u32) -> F {
    let k = F::from(stages).expect("stage count fits");
    (k * t_r / tau).exp() / (t_w * f_clock * f_data)
}

/// Complete timing parameterization for building circuits.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TimingProfile {
    /// Gate, inverter and buffer delay.
    pub gate: DelaySpec,
    /// Latch / flip-flop clock-to-q and data-to-q delay.
    pub clk_to_q: Ticks,
    pub variation: VariationModel,
    pub meta: MetastabilityConfig,
    /// Resolution constant of non-masking storage elements.
    pub tau_standard: Ticks,
    /// Resolution constant of masking latches.
    pub tau_masking: Ticks,
}

impl TimingProfile {
    /// 1 ps gates and latches, zero-width sampling window, no variation.
    pub fn idealized() -> TimingProfile {
        TimingProfile {
            gate: DelaySpec::symmetric(Ticks::ps(1)),
            clk_to_q: Ticks::ps(1),
            variation: VariationModel::default(),
            meta: MetastabilityConfig { setup: Ticks::ZERO, hold: Ticks::ZERO, ..Default::default() },
            tau_standard: TAU_STANDARD,
            tau_masking: TAU_MASKING,
        }
    }

    /// 50 ps gates, 80 ps clock-to-q, 20 ps setup and hold.
    pub fn realistic(epsilon: f64, seed: u64) -> TimingProfile {
        TimingProfile {
            gate: DelaySpec::symmetric(Ticks::ps(50)),
            clk_to_q: Ticks::ps(80),
            variation: VariationModel { epsilon, seed },
            meta: MetastabilityConfig { seed, ..Default::default() },
            tau_standard: TAU_STANDARD,
            tau_masking: TAU_MASKING,
        }
    }

    pub fn validate(&self) -> Result<(), SimError> {
        VariationModel::new(self.variation.epsilon, self.variation.seed)?;
        self.meta.validate()?;
        if self.gate.min() < Ticks(1) {
            return Err(SimError::Config("gate delay below one tick".into()));
        }
        if self.clk_to_q <= self.meta.setup + self.meta.hold {
            return Err(SimError::Config("clock-to-q must exceed setup + hold".into()));
        }
        Ok(())
    }

    pub fn gate_delay(&self, instance: &str) -> DelaySpec {
        self.variation.apply(self.gate, instance)
    }

    pub fn line_delay(&self, nominal: Ticks, instance: &str) -> Ticks {
        self.variation.apply_ticks(nominal, instance)
    }

    /// Clock-to-q after variation, kept above the sampling window.
    pub fn ctq(&self, instance: &str) -> Ticks {
        let d = self.variation.apply_ticks(self.clk_to_q, instance);
        d.max(self.meta.setup + self.meta.hold + Ticks(1))
    }

    pub fn standard_meta(&self) -> MetastabilityConfig {
        self.meta.with_tau(self.tau_standard)
    }

    pub fn masking_meta(&self) -> MetastabilityConfig {
        self.meta.with_tau(self.tau_masking)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_epsilon_is_identity() {
        let v = VariationModel { epsilon: 0.0, seed: 9 };
        assert_eq!(v.multiplier("a"), 1.0);
        assert_eq!(v.multiplier("b"), 1.0);
    }

    #[test]
    fn multiplier_support_and_determinism() {
        let v = VariationModel { epsilon: 0.1, seed: 3 };
        let (mut lo, mut hi) = (f64::MAX, f64::MIN);
        for i in 0..10_000 {
            let m = v.multiplier(&format!("g{i}"));
            lo = lo.min(m);
            hi = hi.max(m);
        }
        assert!(lo >= 0.9 && hi <= 1.1);
        assert_eq!(v.multiplier("x.y"), v.multiplier("x.y"));
    }

    #[test]
    fn forced_override_wins() {
        let cfg = MetastabilityConfig {
            forced: vec![ForcedResolution { instance: "m".into(), cycle: 3, delay: Ticks::ns(5), value: Logic::L1 }],
            ..Default::default()
        };
        let d = sample_resolution(&cfg, "m", 3);
        assert_eq!((d.delay, d.value, d.forced), (Ticks::ns(5), Logic::L1, true));
        assert!(!sample_resolution(&cfg, "m", 4).forced);
    }

    #[test]
    fn full_bias_resolves_high() {
        let cfg = MetastabilityConfig { resolve_bias: 1.0, ..Default::default() };
        assert!((0..1000).all(|c| sample_resolution(&cfg, "i", c).value == Logic::L1));
    }

    #[test]
    fn violation_window_edges() {
        let cfg = MetastabilityConfig::default();
        let t = Ticks::ns(10);
        let before = Waveform::from_transitions(Logic::L0, [(t - cfg.setup - Ticks(1), Logic::L1)]).unwrap();
        assert!(!detect_violation(&before, t, &cfg));
        let at = Waveform::from_transitions(Logic::L0, [(t, Logic::L1)]).unwrap();
        assert!(detect_violation(&at, t, &cfg));
        assert!(detect_violation(&Waveform::constant(Logic::X), t, &cfg));
    }

    #[test]
    fn voltage_map_inverse() {
        let m = VoltageMap::default();
        assert_eq!(m.scale(1.2), 1.0);
        assert!((m.voltage_for(1.25) - 1.05).abs() < 1e-12);
    }

    #[test]
    fn profile_interpolates() {
        let p = VoltageProfile::new(vec![(Ticks(0), 1.0), (Ticks(100), 2.0)]).unwrap();
        assert_eq!(p.at(Ticks(50)), 1.5);
        assert_eq!(p.at(Ticks(500)), 2.0);
    }
}
