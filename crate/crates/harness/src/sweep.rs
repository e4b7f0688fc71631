// SPDX-License-Identifier: Apache-2.0

//! Monte Carlo sweeps. Points run in parallel and independently; the aggregate is built
//! from the runs sorted by their sweep key, so it does not depend on execution order.

use std::collections::BTreeMap;
use std::str::FromStr;

use droopsim_core::delay_element::CaseTag;
use droopsim_core::Ticks;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::delay::Delay;
use crate::run::{run_scenario, RunReport, SCHEMA_VERSION};
use crate::scenario::Scenario;
use crate::HarnessError;

#[derive(Clone, Debug, PartialEq)]
pub enum Sweep {
    /// Seeds `start..end`, end exclusive.
    Seeds { start: u64, end: u64 },
    Epsilon(Vec<f64>),
    /// Droop onset from `start` to `end` inclusive.
    Onset { start: Delay, end: Delay, step: Delay },
}

impl Sweep {
    /// `A..B` or `A..=B`.
    pub fn parse_seeds(s: &str) -> Result<Sweep, String> {
        let (a, b, inclusive) = if let Some((a, b)) = s.split_once("..=") {
            (a, b, true)
        } else if let Some((a, b)) = s.split_once("..") {
            (a, b, false)
        } else {
            return Err(format!("seed range `{s}` is not A..B"));
        };
        let p = |x: &str| x.trim().parse::<u64>().map_err(|e| format!("seed range `{s}`: {e}"));
        let (start, mut end) = (p(a)?, p(b)?);
        if inclusive {
            end += 1;
        }
        if end <= start {
            return Err(format!("seed range `{s}` is empty"));
        }
        Ok(Sweep::Seeds { start, end })
    }

    /// Comma-separated list.
    pub fn parse_epsilon(s: &str) -> Result<Sweep, String> {
        let v: Result<Vec<f64>, _> = s.split(',').map(|x| f64::from_str(x.trim())).collect();
        let v = v.map_err(|e| format!("epsilon list `{s}`: {e}"))?;
        if v.is_empty() || v.iter().any(|e| !(0.0..1.0).contains(e)) {
            return Err(format!("epsilon list `{s}` must hold values in [0, 1)"));
        }
        Ok(Sweep::Epsilon(v))
    }

    /// `start:end:step` in delay syntax.
    pub fn parse_onset(s: &str) -> Result<Sweep, String> {
        let parts: Vec<&str> = s.split(':').collect();
        let [a, b, c] = parts[..] else {
            return Err(format!("onset range `{s}` is not start:end:step"));
        };
        let d = |x: &str| x.parse::<Delay>().map_err(|e| e.to_string());
        Ok(Sweep::Onset { start: d(a)?, end: d(b)?, step: d(c)? })
    }

    pub fn kind(&self) -> &'static str {
        match self {
            Sweep::Seeds { .. } => "seeds",
            Sweep::Epsilon(_) => "epsilon",
            Sweep::Onset { .. } => "onset",
        }
    }
}

/// Identifies one point of a sweep; orders the aggregate.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PointKey {
    pub epsilon: f64,
    pub onset: Option<Ticks>,
    pub seed: u64,
}

impl PointKey {
    fn sort_key(&self) -> (u64, Option<Ticks>, u64) {
        (self.epsilon.to_bits(), self.onset, self.seed)
    }
}

#[derive(Clone, Debug)]
pub struct SweepPoint {
    pub key: PointKey,
    pub scenario: Scenario,
}

/// Expands a sweep into scenarios.
pub fn expand(s: &Scenario, sweep: &Sweep) -> Result<Vec<SweepPoint>, HarnessError> {
    let key = |sc: &Scenario, onset| PointKey { epsilon: sc.timing.epsilon, onset, seed: sc.timing.seed };
    let mut out = Vec::new();
    match sweep {
        Sweep::Seeds { start, end } => {
            for seed in *start..*end {
                let sc = s.with_seed(seed);
                out.push(SweepPoint { key: key(&sc, None), scenario: sc });
            }
        }
        Sweep::Epsilon(list) => {
            for &e in list {
                let sc = s.with_epsilon(e);
                out.push(SweepPoint { key: key(&sc, None), scenario: sc });
            }
        }
        Sweep::Onset { start, end, step } => {
            let period = s.period_ticks()?;
            let (a, b, d) = (start.resolve(period), end.resolve(period), step.resolve(period));
            if d == Ticks::ZERO || b < a {
                return Err(HarnessError::Sweep(format!("onset range {a}..={b} step {d} is empty")));
            }
            let mut t = a;
            while t <= b {
                let sc = s.with_onset(t)?;
                out.push(SweepPoint { key: key(&sc, Some(t)), scenario: sc });
                t += d;
            }
        }
    }
    Ok(out)
}

/// Per-point outcome kept in the aggregate.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub key: PointKey,
    pub scenario_hash: String,
    pub passed: bool,
    /// Set when the run itself failed.
    pub error: Option<String>,
    pub findings: BTreeMap<String, usize>,
    pub cases: BTreeMap<String, usize>,
    /// Fractional extra delays of all 5a cycles.
    pub x: Vec<Ticks>,
    pub resolution_delays: Vec<Ticks>,
    pub masking_clean: bool,
}

impl RunSummary {
    pub fn from_report(key: PointKey, r: &RunReport) -> RunSummary {
        let mut findings = BTreeMap::new();
        for f in &r.findings {
            *findings.entry(format!("{:?}", f.kind)).or_insert(0) += 1;
        }
        let mut cases = BTreeMap::new();
        for tag in [CaseTag::None, CaseTag::Fractional, CaseTag::Fast] {
            cases.insert(tag.label().to_string(), r.case_count(tag));
        }
        let x = r.elements.iter().flat_map(|e| e.cycles.iter().filter_map(|c| c.x)).collect();
        RunSummary {
            key,
            scenario_hash: r.scenario_hash.clone(),
            passed: r.passed,
            error: None,
            findings,
            cases,
            x,
            resolution_delays: r.metastability.iter().map(|m| m.resolution_delay).collect(),
            masking_clean: r.masking.clean(),
        }
    }

    fn failed(key: PointKey, scenario_hash: String, e: &HarnessError) -> RunSummary {
        RunSummary {
            key,
            scenario_hash,
            passed: false,
            error: Some(e.to_string()),
            findings: BTreeMap::new(),
            cases: BTreeMap::new(),
            x: Vec::new(),
            resolution_delays: Vec::new(),
            masking_clean: true,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub lo: Ticks,
    pub hi: Ticks,
    pub counts: Vec<u64>,
}

impl Histogram {
    pub fn new(lo: Ticks, hi: Ticks, bins: usize, values: impl IntoIterator<Item = Ticks>) -> Histogram {
        let mut counts = vec![0u64; bins];
        let span = hi.0.saturating_sub(lo.0).max(1) as u128;
        for v in values {
            let off = v.0.saturating_sub(lo.0).min(hi.0 - lo.0) as u128;
            let i = ((off * bins as u128) / span).min(bins as u128 - 1) as usize;
            counts[i] += 1;
        }
        Histogram { lo, hi, counts }
    }

    /// Bins holding at least one value.
    pub fn filled(&self) -> usize {
        self.counts.iter().filter(|&&c| c > 0).count()
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct DelayStats {
    pub count: usize,
    pub mean: f64,
    pub min: Option<Ticks>,
    pub max: Option<Ticks>,
}

impl DelayStats {
    pub fn of(values: &[Ticks]) -> DelayStats {
        if values.is_empty() {
            return DelayStats::default();
        }
        let sum: u128 = values.iter().map(|t| t.0 as u128).sum();
        DelayStats {
            count: values.len(),
            mean: sum as f64 / values.len() as f64,
            min: values.iter().min().copied(),
            max: values.iter().max().copied(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AggregateReport {
    pub schema_version: u32,
    pub sweep: String,
    pub base_hash: String,
    pub total: usize,
    pub passed: usize,
    pub failed: usize,
    pub errors: usize,
    pub findings: BTreeMap<String, usize>,
    pub cases: BTreeMap<String, usize>,
    /// Fractional delays over `[0, (1 + eps) T/4]`, 16 bins.
    pub x_histogram: Histogram,
    pub x: DelayStats,
    pub resolution: DelayStats,
    pub masking_clean: bool,
    /// Smallest epsilon whose run failed.
    pub first_failing_epsilon: Option<f64>,
    /// Sorted by key.
    pub runs: Vec<RunSummary>,
}

impl AggregateReport {
    pub fn all_passed(&self) -> bool {
        self.failed == 0
    }
}

/// Order-independent reduction of run summaries.
pub fn aggregate(sweep: &str, base_hash: &str, period: Ticks, max_eps: f64, mut runs: Vec<RunSummary>) -> AggregateReport {
    runs.sort_by(|a, b| a.key.sort_key().cmp(&b.key.sort_key()).then_with(|| a.scenario_hash.cmp(&b.scenario_hash)));
    let mut findings = BTreeMap::new();
    let mut cases = BTreeMap::new();
    let mut xs = Vec::new();
    let mut res = Vec::new();
    for r in &runs {
        for (k, v) in &r.findings {
            *findings.entry(k.clone()).or_insert(0) += v;
        }
        for (k, v) in &r.cases {
            *cases.entry(k.clone()).or_insert(0) += v;
        }
        xs.extend(r.x.iter().copied());
        res.extend(r.resolution_delays.iter().copied());
    }
    xs.sort();
    res.sort();
    let passed = runs.iter().filter(|r| r.passed).count();
    let mut eps_failed: Vec<f64> = runs.iter().filter(|r| !r.passed).map(|r| r.key.epsilon).collect();
    eps_failed.sort_by(f64::total_cmp);
    AggregateReport {
        schema_version: SCHEMA_VERSION,
        sweep: sweep.to_string(),
        base_hash: base_hash.to_string(),
        total: runs.len(),
        passed,
        failed: runs.len() - passed,
        errors: runs.iter().filter(|r| r.error.is_some()).count(),
        findings,
        cases,
        x_histogram: Histogram::new(Ticks::ZERO, period.frac(1, 4).scale(1.0 + max_eps), 16, xs.iter().copied()),
        x: DelayStats::of(&xs),
        resolution: DelayStats::of(&res),
        masking_clean: runs.iter().all(|r| r.masking_clean),
        first_failing_epsilon: eps_failed.first().copied(),
        runs,
    }
}

/// Runs every point (in parallel) and aggregates.
pub fn run_points(label: &str, base: &Scenario, points: Vec<SweepPoint>) -> Result<AggregateReport, HarnessError> {
    let period = base.period_ticks()?;
    let max_eps = points.iter().map(|p| p.key.epsilon).fold(0.0, f64::max);
    let runs: Vec<RunSummary> = points
        .into_par_iter()
        .map(|p| match run_scenario(&p.scenario) {
            Ok(run) => RunSummary::from_report(p.key, &run.report),
            Err(e) => RunSummary::failed(p.key, p.scenario.hash(), &e),
        })
        .collect();
    Ok(aggregate(label, &base.hash(), period, max_eps, runs))
}

pub fn monte_carlo(s: &Scenario, sweep: &Sweep) -> Result<AggregateReport, HarnessError> {
    let points = expand(s, sweep)?;
    run_points(sweep.kind(), s, points)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_ranges() {
        assert_eq!(Sweep::parse_seeds("3..6").unwrap(), Sweep::Seeds { start: 3, end: 6 });
        assert_eq!(Sweep::parse_seeds("3..=6").unwrap(), Sweep::Seeds { start: 3, end: 7 });
        assert!(Sweep::parse_seeds("6..3").is_err());
        assert_eq!(Sweep::parse_epsilon("0, 0.01,0.05").unwrap(), Sweep::Epsilon(vec![0.0, 0.01, 0.05]));
        assert!(Sweep::parse_epsilon("0.2,1.5").is_err());
        assert!(matches!(Sweep::parse_onset("10T:11T:1ns").unwrap(), Sweep::Onset { .. }));
        assert!(Sweep::parse_onset("10T:11T").is_err());
    }

    #[test]
    fn histogram_bins() {
        let h = Histogram::new(Ticks(0), Ticks(160), 16, [Ticks(0), Ticks(9), Ticks(10), Ticks(160), Ticks(500)]);
        assert_eq!(h.counts[0], 2);
        assert_eq!(h.counts[1], 1);
        assert_eq!(h.counts[15], 2);
    }
}
