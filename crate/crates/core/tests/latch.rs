// SPDX-License-Identifier: Apache-2.0

use droopsim_core::gates::{clock, source, Dff, Tff};
use droopsim_core::kernel::{run_until, DiagKind, Logic, MetaOutcome, NetlistBuilder, SimOptions, SimResult, Ticks, Waveform};
use droopsim_core::latch::{latch, LatchVariant, Transparent};
use droopsim_core::timing::{ForcedResolution, TimingProfile};
use proptest::prelude::*;

use Logic::*;

const EN_PERIOD: Ticks = Ticks::ns(10);

// Enable: transparent on [5, 10) ns, [15, 20) ns, ...; closes at 10 ns, 20 ns, ...
fn run_latch(variant: LatchVariant, d: Waveform, tp: &TimingProfile, t_end: Ticks) -> SimResult {
    let mut b = NetlistBuilder::new();
    let dn = source(&mut b, "d", d).unwrap();
    let en = clock(&mut b, "en", Ticks::ns(5), Ticks::ns(5), EN_PERIOD).unwrap();
    let outs = latch(&mut b, tp, "m", variant, Transparent::High, dn, en, None).unwrap();
    for o in outs {
        b.probe(o);
    }
    b.probe(en);
    run_until(&b.build().unwrap(), t_end, &SimOptions::default()).unwrap()
}

fn forced(delay: Ticks, value: Logic) -> TimingProfile {
    let mut tp = TimingProfile::realistic(0.0, 1);
    tp.meta.forced.push(ForcedResolution { instance: "m".into(), cycle: 0, delay, value });
    tp
}

fn close() -> Ticks {
    Ticks::ns(10)
}

#[test]
fn plain_latch_tracks_while_transparent() {
    let tp = TimingProfile::realistic(0.0, 1);
    let d = Waveform::from_transitions(L0, [(Ticks::ns(6), L1), (Ticks::ns(7), L0)]).unwrap();
    let r = run_latch(LatchVariant::Plain, d, &tp, Ticks::ns(30));
    let ctq = tp.clk_to_q;
    assert_eq!(r.wave("m.q").transitions(), &[(Ticks::ns(6) + ctq, L1), (Ticks::ns(7) + ctq, L0)]);
}

#[test]
fn stable_capture_is_stable() {
    let tp = TimingProfile::realistic(0.0, 1);
    let d = Waveform::from_transitions(L0, [(Ticks::ns(2), L1)]).unwrap();
    let r = run_latch(LatchVariant::Mask01, d, &tp, Ticks::ns(30));
    assert_eq!(r.wave("m.q0").sample(Ticks::ns(12)), L1);
    assert_eq!(r.wave("m.q1").sample(Ticks::ns(12)), L1);
    assert!(r.metastability.is_empty());
}

#[test]
fn late_rise_on_mask0_only() {
    let tp = forced(Ticks::ns(3), L1);
    // D high for a long time, falls inside the setup window
    let d = Waveform::from_transitions(L1, [(close() - Ticks::ps(5), L0)]).unwrap();
    let r = run_latch(LatchVariant::Mask01, d, &tp, Ticks::ns(15));
    let t0 = close() + tp.clk_to_q;
    assert_eq!(r.wave("m.q0").transitions_in(close(), Ticks::ns(15)), &[(t0, L0), (t0 + Ticks::ns(3), L1)]);
    assert!(r.wave("m.q1").transitions_in(close(), Ticks::ns(15)).is_empty());
    assert_eq!(r.wave("m.q1").sample(Ticks::ns(12)), L1);
    assert_eq!(r.metastability.len(), 1);
    assert!(r.metastability[0].forced);
}

#[test]
fn late_fall_on_mask1_only() {
    let tp = forced(Ticks::ns(3), L0);
    let d = Waveform::from_transitions(L0, [(close() - Ticks::ps(5), L1)]).unwrap();
    let r = run_latch(LatchVariant::Mask01, d, &tp, Ticks::ns(15));
    let t0 = close() + tp.clk_to_q;
    assert!(r.wave("m.q0").transitions_in(close(), Ticks::ns(15)).is_empty());
    assert_eq!(r.wave("m.q1").transitions_in(close(), Ticks::ns(15)), &[(t0, L1), (t0 + Ticks::ns(3), L0)]);
}

#[test]
fn choke_off_on_reopen() {
    let tp = forced(Ticks::ns(20), L1);
    let d = Waveform::from_transitions(L0, [(close() - Ticks::ps(5), L1), (Ticks::ns(12), L0)]).unwrap();
    let r = run_latch(LatchVariant::Mask01, d, &tp, Ticks::ns(19));
    let reopen = Ticks::ns(15);
    assert_eq!(r.wave("m.q0").sample(Ticks::ns(18)), L0);
    assert_eq!(r.wave("m.q1").sample(Ticks::ns(18)), L0);
    assert_eq!(r.wave("m.q1").sample(reopen), L1);
    assert_eq!(r.metastability[0].outcome, MetaOutcome::ChokedOff { at: reopen });
    assert!(r.diagnostics.iter().any(|d| d.kind == DiagKind::ChokeOff));
}

#[test]
fn resolution_just_before_reopen_wins() {
    let tp0 = TimingProfile::realistic(0.0, 1);
    let reopen = Ticks::ns(15);
    let delay = reopen - close() - tp0.clk_to_q - Ticks(1);
    let tp = forced(delay, L1);
    let d = Waveform::from_transitions(L1, [(close() - Ticks::ps(5), L0)]).unwrap();
    let r = run_latch(LatchVariant::Mask01, d, &tp, Ticks::ns(19));
    let q0 = r.wave("m.q0");
    assert_eq!(q0.sample(reopen - Ticks(1)), L1);
    assert_eq!(q0.sample(Ticks::ns(18)), L0);
    assert_eq!(r.metastability[0].outcome, MetaOutcome::Resolved);
    assert!(r.diagnostics.is_empty());
}

#[test]
fn dff_forced_resolution_drives_x() {
    let mut tp = TimingProfile::realistic(0.0, 1);
    tp.meta.forced.push(ForcedResolution { instance: "ff".into(), cycle: 0, delay: Ticks::ns(2), value: L1 });
    let mut b = NetlistBuilder::new();
    let tcap = Ticks::ns(5);
    let d = source(&mut b, "d", Waveform::from_transitions(L0, [(tcap, L1)]).unwrap()).unwrap();
    let c = clock(&mut b, "clk", tcap, Ticks::ns(5), Ticks::ns(10)).unwrap();
    let q = b.net("q");
    b.add("ff", Dff::new("ff", tp.clk_to_q, tp.standard_meta(), L0), &[d, c], &[q]).unwrap();
    let r = run_until(&b.build().unwrap(), Ticks::ns(12), &SimOptions::default()).unwrap();
    let t0 = tcap + tp.clk_to_q;
    assert_eq!(r.wave("q").transitions(), &[(t0, X), (t0 + Ticks::ns(2), L1)]);
}

#[test]
fn tff_divides_by_two() {
    let tp = TimingProfile::realistic(0.0, 1);
    let mut b = NetlistBuilder::new();
    let one = source(&mut b, "one", Waveform::constant(L1)).unwrap();
    let c = clock(&mut b, "clk", Ticks::ns(25), Ticks::ns(12) + Ticks::ps(500), Ticks::ns(25)).unwrap();
    let q = b.net("q");
    b.add("t", Tff::new("t", tp.clk_to_q, tp.standard_meta(), L0), &[one, c], &[q]).unwrap();
    let r = run_until(&b.build().unwrap(), Ticks::ns(300), &SimOptions::default()).unwrap();
    let rises = r.wave("q").rising_edges();
    assert!(rises.windows(2).all(|w| w[1] - w[0] == Ticks::ns(50)));
    assert_eq!(rises[0], Ticks::ns(25) + tp.clk_to_q);
}

fn arb_data() -> impl Strategy<Value = Waveform> {
    (any::<bool>(), prop::collection::vec(1u64..4_000_000, 1..60)).prop_map(|(init, gaps)| {
        let mut t = 0;
        let mut v = Logic::from_bool(init);
        let pts: Vec<_> = gaps
            .into_iter()
            .map(|g| {
                t += g;
                v = !v;
                (Ticks(t), v)
            })
            .collect();
        Waveform::from_transitions(Logic::from_bool(init), pts).unwrap()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn masking_outputs_never_x_and_change_once(d in arb_data(), seed in any::<u64>(), near in prop::collection::vec(0u64..40_000, 0..6)) {
        // pile extra data transitions close to closing edges to force violations
        let mut pts: Vec<(Ticks, Logic)> = d.transitions().to_vec();
        for (i, &off) in near.iter().enumerate() {
            pts.push((Ticks::ns(10 * (i as u64 + 1)) + Ticks(off) - Ticks::ps(20), L0));
        }
        pts.sort();
        let d = Waveform::from_levels(d.initial(), pts.into_iter().enumerate().map(|(i, (t, _))| (t, Logic::from_bool(i % 2 == 0))));
        let tp = TimingProfile::realistic(0.0, seed);
        let r = run_latch(LatchVariant::Mask01, d, &tp, Ticks::ns(100));
        for port in ["m.q0", "m.q1"] {
            let w = r.wave(port);
            prop_assert!(!w.has_x());
            for k in 1..10u64 {
                let lo = Ticks::ns(10 * k) + tp.clk_to_q;
                let hi = Ticks::ns(10 * k + 5);
                let n = w.transitions().iter().filter(|(t, _)| *t > lo && *t <= hi).count();
                prop_assert!(n <= 1, "{port} changed {n} times in opaque phase {k}");
            }
        }
        for ev in &r.metastability {
            let from = ev.entered_at + tp.clk_to_q;
            let to = match ev.outcome {
                MetaOutcome::Resolved => ev.entered_at + tp.clk_to_q + ev.delay,
                MetaOutcome::ChokedOff { at } => at,
            };
            for t in [from, from + (to - from).frac(1, 2), to.saturating_sub(Ticks(1)).max(from)] {
                prop_assert_eq!(r.wave("m.q0").sample(t), L0);
                prop_assert_eq!(r.wave("m.q1").sample(t), L1);
            }
        }
    }

    #[test]
    fn masking_equals_plain_without_metastability(d in arb_data()) {
        let mut tp = TimingProfile::realistic(0.0, 3);
        tp.meta.enabled = false;
        let plain = run_latch(LatchVariant::Plain, d.clone(), &tp, Ticks::ns(100));
        let mask = run_latch(LatchVariant::Mask01, d.clone(), &tp, Ticks::ns(100));
        let m0 = run_latch(LatchVariant::Mask0, d.clone(), &tp, Ticks::ns(100));
        let m1 = run_latch(LatchVariant::Mask1, d, &tp, Ticks::ns(100));
        prop_assert_eq!(plain.wave("m.q"), mask.wave("m.q0"));
        prop_assert_eq!(plain.wave("m.q"), mask.wave("m.q1"));
        prop_assert_eq!(plain.wave("m.q"), m0.wave("m.q0"));
        prop_assert_eq!(plain.wave("m.q"), m1.wave("m.q1"));
    }
}
