// SPDX-License-Identifier: Apache-2.0

//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits non-zero
//! if any criterion fails.

use std::collections::BTreeMap;
use std::process::ExitCode;
use std::time::Instant;

use droopsim::oracle::oracle_check;
use droopsim::sweep::{run_points, AggregateReport, PointKey, SweepPoint};
use droopsim::{load_scenario, run_scenario, Scenario};
use droopsim_core::checkers::{high_pulses, ViolationKind};
use droopsim_core::gates::{clock, source};
use droopsim_core::kernel::{run_until, NetlistBuilder, SimOptions};
use droopsim_core::latch::{latch, LatchVariant, Transparent};
use droopsim_core::shaper::{analyze_constraints, analyze_spec, ShaperSpec};
use droopsim_core::timing::{sample_resolution, MetastabilityConfig, TimingProfile, TAU_MASKING};
use droopsim_core::{Logic, Rational, Ticks, Waveform};
use proptest::prelude::*;
use proptest::test_runner::{RngAlgorithm, TestRng};
use serde_json::{json, Value};

const T: Ticks = Ticks::DEFAULT_PERIOD;

type Verdict = Result<String, String>;

fn scenario(v: Value) -> Scenario {
    load_scenario(&v.to_string()).unwrap_or_else(|e| panic!("{e}: {v}"))
}

fn fs(t: Ticks) -> String {
    format!("{}fs", t.0)
}

fn r(n: i64, d: i64) -> Rational {
    Rational::new(n, d)
}

fn ensure(ok: bool, msg: impl Into<String>) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn rng(salt: u8) -> TestRng {
    let mut seed = [0u8; 32];
    seed[0] = salt;
    TestRng::from_seed(RngAlgorithm::ChaCha, &seed)
}

/// Masking summaries gathered from every suite for the masking criterion.
#[derive(Default)]
struct Masking {
    runs: usize,
    dirty: Vec<String>,
}

impl Masking {
    fn add_agg(&mut self, label: &str, agg: &AggregateReport) {
        self.runs += agg.runs.len();
        for run in agg.runs.iter().filter(|r| !r.masking_clean) {
            self.dirty.push(format!("{label} seed {} eps {} onset {:?}", run.key.seed, run.key.epsilon, run.key.onset));
        }
    }

    fn add(&mut self, label: &str, rep: &droopsim::RunReport) {
        self.runs += 1;
        if !rep.masking.clean() {
            self.dirty.push(format!("{label}: {:?}", rep.masking));
        }
    }
}

fn c1() -> Verdict {
    let base = |high: &str, idealized: bool| {
        scenario(json!({
            "topology": {"single": "shaper"}, "shaper": "old", "idealized": idealized,
            "timing": {"seed": 1}, "stimulus": {"cycles": 12, "clock": {"high": high}},
            "checks": {"min_pulse": "T/12"}
        }))
    };
    let target = T.frac(5, 12);
    let highs = |s: &Scenario| -> Result<Vec<Ticks>, String> {
        let run = run_scenario(s).map_err(|e| e.to_string())?;
        // the first pulse predates a full input period
        Ok(high_pulses(run.result.wave("out")).into_iter().skip(1).map(|(a, b)| b - a).collect())
    };
    let ideal = highs(&base("3T/4", true))?;
    ensure(!ideal.is_empty() && ideal.iter().all(|&h| h == target), format!("idealized high times {ideal:?}"))?;
    let s = base("3T/4", false);
    let gate = s.resolve().map_err(|e| e.to_string())?.timing.gate.max();
    let real = highs(&s)?;
    let worst = real.iter().map(|h| h.diff(target).unsigned_abs()).max().unwrap_or(u64::MAX);
    ensure(!real.is_empty() && worst <= (gate * 4).0, format!("realistic deviation {worst} fs exceeds 4 gates"))?;
    let glitch = run_scenario(&base("0.9T", true)).map_err(|e| e.to_string())?.report;
    let n = glitch.findings.iter().filter(|f| f.kind == ViolationKind::Glitch).count();
    ensure(n >= 1, "no glitch at 0.9T")?;
    Ok(format!("5T/12 on {} pulses exactly, realistic within {worst} fs, {n} glitch findings at 0.9T", ideal.len()))
}

fn c2(mask: &mut Masking) -> Verdict {
    let st = [r(1, 8), r(1, 10), r(1, 6), r(13, 120)];
    let exact = analyze_constraints::<Rational>(None, &st, Some(r(3, 4)), None).max_epsilon;
    let st_f: Vec<f64> = [1.0 / 8.0, 1.0 / 10.0, 1.0 / 6.0, 13.0 / 120.0].to_vec();
    let float = analyze_constraints::<f64>(None, &st_f, Some(0.75), None).max_epsilon;
    ensure(exact == r(1, 9), format!("exact bound {exact}"))?;
    ensure(((float - 1.0 / 9.0) * 9.0).abs() <= 1e-6, format!("f64 bound {float}"))?;
    let implemented = analyze_spec::<Rational>(&ShaperSpec::implemented(), Some(r(3, 4)), None).max_epsilon;

    let eps = [0.0, 0.01, 0.02, 0.05, 0.1, 0.15, 0.2];
    let element = scenario(json!({
        "topology": {"single": "delay_element"}, "shaper": "implemented",
        "stimulus": {"cycles": 30, "droop": {"edges": [["7.3T", 0], ["9.1T", 1], ["15.55T", 0], ["18T", 1]]}}
    }));
    let system = scenario(json!({
        "shaper": "implemented",
        "stimulus": {
            "cycles": 40,
            "reset": {"initial": 0, "edges": [["137ns", 1]]},
            "vdd": [[0, 1.2], ["20T", 1.2], ["20T", 0.95], ["23T", 0.95], ["23T", 1.2]]
        }
    }));
    let mut lines = Vec::new();
    let mut first_fail: Option<f64> = None;
    let mut ok_at_2pct = true;
    for (label, base) in [("element", &element), ("system", &system)] {
        let points: Vec<SweepPoint> = eps
            .iter()
            .flat_map(|&e| (0..12u64).map(move |seed| (e, seed)))
            .map(|(e, seed)| SweepPoint { key: PointKey { epsilon: e, onset: None, seed }, scenario: base.with_epsilon(e).with_seed(seed) })
            .collect();
        let agg = run_points("epsilon", base, points).map_err(|e| e.to_string())?;
        mask.add_agg(label, &agg);
        let bad_low: usize = agg.runs.iter().filter(|r| r.key.epsilon <= 0.02 && !r.passed).count();
        ok_at_2pct &= bad_low == 0;
        if let Some(f) = agg.first_failing_epsilon {
            first_fail = Some(first_fail.map_or(f, |g: f64| g.min(f)));
        }
        lines.push(format!("{label}: {}/{} runs clean, first failing eps {:?}", agg.passed, agg.total, agg.first_failing_epsilon));
    }
    let summary = format!(
        "eps_max = {exact} exactly (f64 {float:.9}); implemented shaper analytic bound {implemented}; {}; first failing eps overall {}",
        lines.join("; "),
        first_fail.map_or("none up to 0.2".to_string(), |f| f.to_string())
    );
    ensure(ok_at_2pct, format!("runs fail at eps <= 0.02: {summary}"))?;
    Ok(summary)
}

fn c3() -> Verdict {
    let mut checked = 0;
    for (g, idealized, eps, seed) in [(0, true, 0.0, 0), (1, true, 0.0, 0), (0, false, 0.02, 3), (1, false, 0.02, 4), (1, false, 0.02, 5)] {
        let s = scenario(json!({
            "topology": {"single": "phase_accumulator"}, "idealized": idealized,
            "timing": {"epsilon": eps, "seed": seed},
            // g_in low is a droop sample, which stretches the output period to 5T/4
            "stimulus": {"cycles": if g == 0 { 1260 } else { 1010 }, "g_in": {"initial": g}}
        }));
        let rep = run_scenario(&s).map_err(|e| e.to_string())?.report;
        ensure(rep.findings.is_empty(), format!("g={g} eps={eps}: {} findings, first {:?}", rep.findings.len(), rep.findings.first()))?;
        let pa = rep.phase_acc.as_ref().unwrap();
        ensure(pa.cycles.len() >= 1000, format!("only {} cycles", pa.cycles.len()))?;
        if idealized {
            for w in pa.cycles.windows(2) {
                ensure(w[0].fall - w[0].rise == T.frac(1, 2), format!("high time {} at {}", w[0].fall - w[0].rise, w[0].rise))?;
                // the shift lands in the low phase after a counted cycle
                let low = w[1].rise - w[0].fall;
                let want = if w[0].shift > Ticks::ZERO { T.frac(3, 4) } else { T.frac(1, 2) };
                ensure(low == want, format!("low time {low} at {} (shift {})", w[0].fall, w[0].shift))?;
            }
            if g == 0 {
                let counted = pa.cycles.iter().filter(|c| c.counted == Logic::L1).count();
                ensure(counted >= 990, format!("only {counted} droop-sampled cycles"))?;
            }
        }
        checked += pa.cycles.len();
    }
    Ok(format!("{checked} accumulator cycles over 5 runs of at least 1000, zero findings, exact T/2 and 3T/4 in idealized mode"))
}

fn element(seed: u64, eps: f64) -> Value {
    json!({"topology": {"single": "delay_element"}, "timing": {"epsilon": eps, "seed": seed}, "stimulus": {"cycles": 12}})
}

fn c4(mask: &mut Masking) -> Verdict {
    // properties 3 and 4, idealized
    let mut v = element(0, 0.0);
    v["idealized"] = json!(true);
    let quiet = run_scenario(&scenario(v.clone())).map_err(|e| e.to_string())?.report;
    let e = &quiet.elements[0];
    let delta = e.delta.ok_or("no delta")?;
    ensure(e.cycles.iter().all(|c| c.delay == delta), "delay not constant without droop")?;
    v["stimulus"]["droop"] = json!({"initial": 0});
    let held = run_scenario(&scenario(v)).map_err(|e| e.to_string())?.report;
    let q = T.frac(1, 4);
    // the element powers up storing 1, so the first pulse is not yet delayed
    let held_ok = held.elements[0].cycles.iter().skip(1).all(|c| c.delay == delta + q);
    ensure(held_ok, format!("stable droop delays {:?}", held.elements[0].cycles.iter().map(|c| c.delay).collect::<Vec<_>>()))?;

    // onset sweep across the sampling window of capture K
    const K: usize = 5;
    const SEEDS: u64 = 100;
    const STEPS: u64 = 100;
    let eps = 0.02;
    let mut points = Vec::new();
    for seed in 0..SEEDS {
        let mut b = element(seed, eps);
        b["probes"] = json!(["de0.clk_gated"]);
        let base = scenario(b);
        let run = run_scenario(&base).map_err(|e| e.to_string())?;
        let gated = run.result.wave("de0.clk_gated");
        let close = gated.falling_edges()[K];
        let reopen = gated.rising_edges().into_iter().find(|&t| t > close).ok_or("gated clock never reopens")?;
        let tp = base.resolve().map_err(|e| e.to_string())?.timing;
        let (lo, hi) = (close - tp.meta.setup - Ticks::ps(5), close + tp.meta.hold + Ticks::ps(5));
        // resolving here makes the clock slave sample the master's late change
        let edge = reopen - close - tp.ctq("de0.master");
        for i in 0..STEPS {
            let onset = lo + (hi - lo).frac(i, STEPS - 1);
            let mut v = element(seed, eps);
            v["stimulus"]["droop"] = json!({"edges": [[fs(onset), 0]]});
            // odd seeds pin resolutions to cover the fractional cases; even seeds draw them
            if seed % 2 == 1 {
                let spread = (seed * 37 + i * 13) % 101;
                let forced = if i % 2 == 0 {
                    json!([
                        {"instance": "de0.master", "cycle": K, "delay": fs(edge), "value": 0},
                        {"instance": "de0.cslave", "cycle": K + 1, "delay": fs(T.frac(3, 10).frac(spread, 100)), "value": (i / 2) % 2}
                    ])
                } else {
                    json!([{"instance": "de0.master", "cycle": K, "delay": fs(edge.frac(spread, 100)), "value": (i / 2) % 2}])
                };
                v["timing"]["forced"] = forced;
            }
            points.push(SweepPoint { key: PointKey { epsilon: eps, onset: Some(onset), seed }, scenario: scenario(v) });
        }
    }
    let base = scenario(element(0, eps));
    let agg = run_points("onset", &base, points).map_err(|e| e.to_string())?;
    mask.add_agg("element onset", &agg);
    let count = |k: ViolationKind| agg.findings.get(&format!("{k:?}")).copied().unwrap_or(0);
    let x_max = T.frac(1, 4).scale(1.0 + eps);
    let detail = format!(
        "{} runs, cases {:?}, x in [{}, {}] fs over {}/16 bins, findings {:?}",
        agg.total,
        agg.cases,
        agg.x.min.unwrap_or_default().0,
        agg.x.max.unwrap_or_default().0,
        agg.x_histogram.filled(),
        agg.findings
    );
    ensure(agg.total >= 10_000 && agg.errors == 0, format!("run errors: {detail}"))?;
    ensure(agg.cases.keys().all(|k| ["none", "5a", "5b"].contains(&k.as_str())), format!("unexpected tag: {detail}"))?;
    // a pulse whose delay fits none of the three cases shows up as drift or a pipeline mismatch
    ensure(count(ViolationKind::FixedDelayDrift) + count(ViolationKind::PipelineMismatch) == 0, format!("unclassified pulses: {detail}"))?;
    ensure(agg.x.max.is_none_or(|m| m <= x_max), format!("x above (1+eps)T/4: {detail}"))?;
    ensure(count(ViolationKind::Glitch) == 0 && count(ViolationKind::MonotoneDelayBreach) == 0, format!("glitch or breach: {detail}"))?;
    ensure(agg.cases.get("5a").copied().unwrap_or(0) > 0 && agg.cases.get("5b").copied().unwrap_or(0) > 0, format!("a case was never hit: {detail}"))?;
    Ok(format!("delta {} constant, delta+T/4 on stable droop; {detail}", delta))
}

fn system(idealized: bool, eps: f64, seed: u64, cycles: u64) -> Value {
    json!({"idealized": idealized, "timing": {"epsilon": eps, "seed": seed}, "stimulus": {"cycles": cycles}, "probes": ["clk_out"]})
}

fn c5(mask: &mut Masking) -> Verdict {
    let run = run_scenario(&scenario(system(true, 0.0, 0, 1000))).map_err(|e| e.to_string())?;
    mask.add("quiet", &run.report);
    ensure(run.report.findings.is_empty(), format!("quiet run findings {:?}", run.report.findings.first()))?;
    let out = run.result.wave("clk_out");
    let rises = out.rising_edges();
    ensure(rises.len() >= 995 && rises.windows(2).all(|w| w[1] - w[0] == T), "output period differs from T")?;
    ensure(high_pulses(out).iter().all(|(a, b)| *b - *a == T.frac(1, 2)), "output high time differs from T/2")?;
    for seed in [1, 2, 3] {
        let rep = run_scenario(&scenario(system(false, 0.02, seed, 200))).map_err(|e| e.to_string())?.report;
        mask.add("quiet realistic", &rep);
        ensure(rep.findings.is_empty(), format!("realistic seed {seed}: {:?}", rep.findings.first()))?;
    }

    // one droop sample: low across one closing of the last element's master
    let mut v = system(true, 0.0, 0, 40);
    v["stimulus"]["droop"] = json!({"edges": [[fs(T * 20 + Ticks::ns(10)), 0], [fs(T * 21 + Ticks::ns(10)), 1]]});
    let rep = run_scenario(&scenario(v)).map_err(|e| e.to_string())?.report;
    mask.add("single droop", &rep);
    ensure(rep.findings.is_empty(), format!("single droop findings {:?}", rep.findings.first()))?;
    let offs = &rep.system.as_ref().unwrap().offsets;
    let q = T.frac(1, 4).0 as i64;
    let first = offs.iter().position(|&o| o != 0).ok_or("no shift")?;
    ensure(offs[first..].iter().all(|&o| o == q), format!("offsets after the droop {:?}", &offs[first..]))?;

    let mut startup = Vec::new();
    for release in [Ticks::ns(10), Ticks::ns(137), Ticks::ns(203), T * 9 + Ticks::ns(31) + Ticks::ps(7)] {
        let mut v = system(true, 0.0, 0, 40);
        v["stimulus"]["reset"] = json!({"initial": 0, "edges": [[fs(release), 1]]});
        let rep = run_scenario(&scenario(v)).map_err(|e| e.to_string())?.report;
        mask.add("reset", &rep);
        ensure(rep.findings.is_empty(), format!("release {release}: {:?}", rep.findings.first()))?;
        let sys = rep.system.as_ref().unwrap();
        ensure(sys.offsets.iter().all(|&o| o == 0), format!("release {release}: offsets move"))?;
        startup.push(sys.startup_offset.ok_or("no startup offset")?);
    }
    ensure(startup.windows(2).all(|w| w[0] == w[1]), format!("startup offsets differ: {startup:?}"))?;
    Ok(format!("1000 cycles of period T and high T/2; one droop sample shifts by T/4 from output pulse {first} on; startup offset {} for 4 release times", startup[0]))
}

fn run_latch(variant: LatchVariant, d: Waveform, tp: &TimingProfile) -> droopsim_core::SimResult {
    let mut b = NetlistBuilder::new();
    let dn = source(&mut b, "d", d).unwrap();
    let en = clock(&mut b, "en", Ticks::ns(5), Ticks::ns(5), Ticks::ns(10)).unwrap();
    for o in latch(&mut b, tp, "m", variant, Transparent::High, dn, en, None).unwrap() {
        b.probe(o);
    }
    run_until(&b.build().unwrap(), Ticks::ns(100), &SimOptions::default()).unwrap()
}

fn c6(mask: &Masking) -> Verdict {
    ensure(mask.dirty.is_empty(), format!("{} of {} runs: {:?}", mask.dirty.len(), mask.runs, &mask.dirty[..mask.dirty.len().min(5)]))?;
    let mut tp = TimingProfile::realistic(0.0, 3);
    tp.meta.enabled = false;
    let mut g = rng(6);
    let cases = 200;
    for case in 0..cases {
        let mut t = 0u64;
        let mut v = g.random_bool(0.5);
        let init = Logic::from_bool(v);
        let pts: Vec<(Ticks, Logic)> = (0..g.random_range(1..60))
            .map(|_| {
                t += g.random_range(1..4_000_000);
                v = !v;
                (Ticks(t), Logic::from_bool(v))
            })
            .collect();
        let d = Waveform::from_transitions(init, pts).unwrap();
        let plain = run_latch(LatchVariant::Plain, d.clone(), &tp);
        let want = plain.wave("m.q");
        for (variant, port) in [(LatchVariant::Mask01, "m.q0"), (LatchVariant::Mask01, "m.q1"), (LatchVariant::Mask0, "m.q0"), (LatchVariant::Mask1, "m.q1")] {
            let got = run_latch(variant, d.clone(), &tp);
            ensure(got.wave(port) == want, format!("case {case}: {variant:?} {port} differs from the plain latch"))?;
        }
    }
    Ok(format!("{} suite runs with no X and at most one late transition per opaque phase; {cases} random stimuli identical to plain latches without metastability", mask.runs))
}

fn c7() -> Verdict {
    let cfg = MetastabilityConfig { seed: 108, ..Default::default() };
    let n = 100_000usize;
    let mut d: Vec<f64> = (0..n).map(|i| sample_resolution(&cfg, "acceptance", i as u64).delay.0 as f64).collect();
    let tau = TAU_MASKING.0 as f64;
    let mean = d.iter().sum::<f64>() / n as f64;
    d.sort_by(f64::total_cmp);
    let ks = d
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = 1.0 - (-x / tau).exp();
            (f - i as f64 / n as f64).abs().max(((i + 1) as f64 / n as f64 - f).abs())
        })
        .fold(0.0, f64::max);
    let crit = (100f64.ln() / (2.0 * n as f64)).sqrt();
    let detail = format!("mean {:.1} fs ({:+.3}% of tau), KS {ks:.5} vs {crit:.5}", mean, (mean / tau - 1.0) * 100.0);
    ensure((mean / tau - 1.0).abs() <= 0.02 && ks < crit, detail.clone())?;
    Ok(detail)
}

fn c8() -> Verdict {
    let mut g = rng(8);
    let mut per_kind: BTreeMap<&str, usize> = BTreeMap::new();
    let total = 150;
    for i in 0..total {
        let (kind, v) = match i % 5 {
            k @ 0..=2 => {
                let shaper = ["old", "idealized_new", "implemented"][k];
                let high = format!("{}T/100", g.random_range(5..96));
                (shaper, json!({"topology": {"single": "shaper"}, "shaper": shaper, "stimulus": {"cycles": g.random_range(2..7), "clock": {"high": high}}}))
            }
            3 => {
                let chain = g.random_range(1..3usize);
                let high = format!("{}T/100", g.random_range(42..58));
                let first = format!("{}ps", g.random_range(500..20_000));
                let topo = if chain == 1 { json!({"single": "delay_element"}) } else { json!({"single": "chain"}) };
                let v = json!({
                    "topology": topo, "chain_length": chain,
                    "stimulus": {"cycles": g.random_range(4..12), "clock": {"first_rise": first, "high": high}, "droop": {"initial": g.random_range(0..2)}}
                });
                ("delay_element", v)
            }
            _ => ("phase_set", json!({"topology": {"single": "phase_accumulator"}, "stimulus": {"cycles": g.random_range(4..24)}})),
        };
        let mut v = v;
        v["idealized"] = json!(true);
        let s = scenario(v.clone());
        let rep = oracle_check(&s).map_err(|e| format!("{v}: {e}"))?;
        if let Some(n) = rep.nets.iter().find(|n| !n.matched) {
            return Err(format!("{v}: {} differs from {:?}", n.net, n.first_mismatch));
        }
        *per_kind.entry(kind).or_default() += 1;
    }
    Ok(format!("{total} randomized configurations match transition for transition: {per_kind:?}"))
}

fn main() -> ExitCode {
    let mut mask = Masking::default();
    let mut failed = 0;
    let mut report = |n: u8, f: &mut dyn FnMut() -> Verdict| {
        let t = Instant::now();
        let v = f();
        let secs = t.elapsed().as_secs_f64();
        match v {
            Ok(d) => println!("PASS criterion {n}: {d} ({secs:.1} s)"),
            Err(d) => {
                failed += 1;
                println!("FAIL criterion {n}: {d} ({secs:.1} s)");
            }
        }
    };
    report(1, &mut c1);
    report(2, &mut || c2(&mut mask));
    report(3, &mut c3);
    report(4, &mut || c4(&mut mask));
    report(5, &mut || c5(&mut mask));
    report(6, &mut || c6(&mask));
    report(7, &mut c7);
    report(8, &mut c8);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failed} criteria failed");
        ExitCode::FAILURE
    }
}
