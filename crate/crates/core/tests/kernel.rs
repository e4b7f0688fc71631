// SPDX-License-Identifier: Apache-2.0

use droopsim_core::gates::{clock, gate, source, DelayLine, GateKind};
use droopsim_core::kernel::{run_until, Logic, NetlistBuilder, SimError, SimOptions, Ticks, Waveform};
use droopsim_core::timing::TimingProfile;
use proptest::prelude::*;

fn inverter_netlist() -> droopsim_core::Netlist {
    let tp = TimingProfile::realistic(0.0, 1);
    let mut b = NetlistBuilder::new();
    let c = clock(&mut b, "clk", Ticks::ns(25), Ticks::ns(25), Ticks::ns(50)).unwrap();
    let o = gate(&mut b, &tp, GateKind::Not, "inv", &[c]).unwrap();
    b.probe(c);
    b.probe(o);
    b.build().unwrap()
}

#[test]
fn inverter_shifts_and_inverts() {
    let nl = inverter_netlist();
    let r = run_until(&nl, Ticks::ns(200), &SimOptions::default()).unwrap();
    let c = r.wave("clk");
    let o = r.wave("inv");
    assert_eq!(o.initial(), !c.initial());
    let expect = c.negated().shifted(Ticks::ps(50)).truncated(Ticks::ns(200));
    assert_eq!(o, &expect);
}

#[test]
fn repeated_runs_are_identical() {
    let nl = inverter_netlist();
    let a = run_until(&nl, Ticks::ns(500), &SimOptions::default()).unwrap();
    let b = run_until(&nl, Ticks::ns(500), &SimOptions::default()).unwrap();
    assert_eq!(a, b);
}

#[test]
fn cross_coupled_nands_trip_the_storm_guard() {
    // Both outputs start high with the enable low; raising the enable makes both NANDs
    // fall together, then rise together, forever.
    let mut b = NetlistBuilder::new();
    let en = source(&mut b, "en", Waveform::from_transitions(Logic::L0, [(Ticks::ns(1), Logic::L1)]).unwrap()).unwrap();
    let a = b.net("a");
    let c = b.net("c");
    let g = droopsim_core::gates::Gate::new(GateKind::Nand, 2, droopsim_core::timing::DelaySpec::symmetric(Ticks(1))).unwrap();
    b.add("a", g.clone(), &[en, c], &[a]).unwrap();
    b.add("c", g, &[en, a], &[c]).unwrap();
    let nl = b.build().unwrap();
    let err = run_until(&nl, Ticks::ns(10), &SimOptions::default()).unwrap_err();
    assert!(matches!(err, SimError::EventStorm { .. }), "{err}");
}

#[test]
fn undriven_and_double_driven_nets_rejected() {
    let mut b = NetlistBuilder::new();
    let x = b.net("x");
    let y = b.net("y");
    b.add("d", DelayLine { delay: Ticks(5) }, &[x], &[y]).unwrap();
    assert!(matches!(b.build(), Err(SimError::Validation(_))));

    let mut b = NetlistBuilder::new();
    let x = source(&mut b, "x", Waveform::constant(Logic::L0)).unwrap();
    let y = b.net("y");
    b.add("d1", DelayLine { delay: Ticks(5) }, &[x], &[y]).unwrap();
    assert!(b.add("d2", DelayLine { delay: Ticks(5) }, &[x], &[y]).is_err());
    assert!(b.add("d3", DelayLine { delay: Ticks(0) }, &[x], &[x]).is_err());
}

#[test]
fn narrow_pulse_survives_long_line() {
    let mut b = NetlistBuilder::new();
    let w = Waveform::from_transitions(Logic::L0, [(Ticks::ns(1), Logic::L1), (Ticks::ns(1) + Ticks::ps(1), Logic::L0)]).unwrap();
    let i = source(&mut b, "in", w.clone()).unwrap();
    let o = b.net("out");
    b.add("line", DelayLine { delay: Ticks::ns(10) }, &[i], &[o]).unwrap();
    b.probe(o);
    let r = run_until(&b.build().unwrap(), Ticks::ns(20), &SimOptions::default()).unwrap();
    assert_eq!(r.wave("out"), &w.shifted(Ticks::ns(10)));
}

fn arb_wave() -> impl Strategy<Value = Waveform> {
    (any::<bool>(), prop::collection::vec(1u64..5_000, 0..30)).prop_map(|(init, gaps)| {
        let mut t = 0;
        let mut v = Logic::from_bool(init);
        let mut pts = Vec::new();
        for g in gaps {
            t += g;
            v = !v;
            pts.push((Ticks(t), v));
        }
        Waveform::from_transitions(Logic::from_bool(init), pts).unwrap()
    })
}

fn run_line(w: &Waveform, delays: &[u64]) -> Waveform {
    let mut b = NetlistBuilder::new();
    let mut x = source(&mut b, "in", w.clone()).unwrap();
    for (i, &d) in delays.iter().enumerate() {
        let o = b.net(&format!("n{i}"));
        b.add(&format!("l{i}"), DelayLine { delay: Ticks(d) }, &[x], &[o]).unwrap();
        x = o;
    }
    b.probe(x);
    let last = b.net_name(x).to_string();
    let r = run_until(&b.build().unwrap(), Ticks(1_000_000), &SimOptions { storm_cap: u32::MAX, ..Default::default() }).unwrap();
    r.wave(&last).clone()
}

proptest! {
    #[test]
    fn delay_lines_compose(w in arb_wave(), d1 in 1u64..10_000, d2 in 1u64..10_000) {
        prop_assert_eq!(run_line(&w, &[d1, d2]), run_line(&w, &[d1 + d2]));
        prop_assert_eq!(run_line(&w, &[d1]), w.shifted(Ticks(d1)));
    }

    #[test]
    fn delay_commutes_with_negation(w in arb_wave(), d in 1u64..10_000) {
        prop_assert_eq!(run_line(&w.negated(), &[d]), run_line(&w, &[d]).negated());
    }

    #[test]
    fn queue_pops_sorted(times in prop::collection::vec(0u64..1000, 1..200)) {
        use droopsim_core::kernel::{EventQueue, NetId, Target};
        let mut q = EventQueue::new();
        for &t in &times {
            q.schedule(Ticks(t), Target::Net(NetId(0)), Logic::L0).unwrap();
        }
        let mut last = (Ticks(0), 0);
        while let Some(e) = q.pop() {
            prop_assert!((e.time, e.seq) >= last);
            last = (e.time, e.seq);
        }
    }
}
