// SPDX-License-Identifier: Apache-2.0

use droopsim_core::checkers::high_pulses;
use droopsim_core::kernel::{Logic, Ticks, Waveform};
use droopsim_core::shaper::ShaperSpec;
use droopsim_core::system::{run_system, DroopSource, SystemConfig, SystemRun};
use droopsim_core::timing::{TimingProfile, VoltageProfile};
use proptest::prelude::*;

const T: Ticks = Ticks::DEFAULT_PERIOD;

fn q(x: u64) -> Ticks {
    T.frac(x, 4)
}

fn cfg(tp: TimingProfile) -> SystemConfig {
    SystemConfig::new(T, 4, &ShaperSpec::idealized_new(), tp)
}

fn clk_in(cycles: u64) -> Waveform {
    Waveform::clock(T.frac(1, 2), T.frac(1, 4), T.frac(1, 2), T * cycles)
}

fn released() -> Waveform {
    Waveform::constant(Logic::L1)
}

fn quiet() -> DroopSource {
    DroopSource::Direct(Waveform::constant(Logic::L1))
}

fn droop_between(a: Ticks, b: Ticks) -> DroopSource {
    DroopSource::Direct(Waveform::from_transitions(Logic::L1, [(a, Logic::L0), (b, Logic::L1)]).unwrap())
}

fn run(c: &SystemConfig, cycles: u64, droop: &DroopSource, rst: &Waveform) -> SystemRun {
    run_system(c, &clk_in(cycles), droop, rst, T * cycles).unwrap()
}

#[test]
fn no_droop_thousand_cycles() {
    let r = run(&cfg(TimingProfile::idealized()), 1000, &quiet(), &released());
    let rep = &r.report;
    assert!(rep.all_findings().is_empty(), "{:?}", &rep.all_findings()[..3.min(rep.all_findings().len())]);
    assert!(rep.rises.len() >= 995);
    for w in rep.rises.windows(2) {
        assert_eq!(w[1] - w[0], T);
    }
    for (a, b) in high_pulses(&r.clk_out) {
        assert_eq!(b - a, T.frac(1, 2));
    }
    assert!(r.result.metastability.is_empty());
}

#[test]
fn reset_release_leaves_a_constant_offset() {
    let c = cfg(TimingProfile::idealized());
    let delta: Ticks = c.chain.iter().map(|e| e.fast_path_delay + Ticks::ps(5) + T.frac(1, 10)).sum();
    let mut seen = Vec::new();
    for release in [Ticks::ns(10), Ticks::ns(137), Ticks::ns(203), T * 9 + Ticks::ns(31) + Ticks::ps(7)] {
        let rst = Waveform::from_transitions(Logic::L0, [(release, Logic::L1)]).unwrap();
        let r = run(&c, 40, &quiet(), &rst);
        let rep = &r.report;
        assert!(rep.all_findings().is_empty(), "release {release}: {:?}", rep.all_findings());
        assert!(rep.offsets.iter().all(|&o| o == 0), "release {release}: {:?}", rep.offsets);
        assert!(r.result.metastability.is_empty());
        // one quarter per element, absorbed by exactly as many accumulator steps
        assert_eq!(rep.phase_acc.cycles.iter().filter(|p| p.counted == Logic::L1).count(), 4);
        seen.push(rep.startup_offset.unwrap());
    }
    assert!(seen.iter().all(|&s| s == delta + q(4) + Ticks(1)), "{seen:?}");
}

#[test]
fn one_droop_sample_shifts_every_later_edge_once() {
    let c = cfg(TimingProfile::idealized());
    let base = run(&c, 40, &quiet(), &released());
    // low across one closing of the last element's master
    let r = run(&c, 40, &droop_between(T * 20 + Ticks::ns(10), T * 21 + Ticks::ns(10)), &released());
    assert!(r.report.all_findings().is_empty(), "{:?}", r.report.all_findings());
    let (b, s) = (&base.report.rises, &r.report.rises);
    let first = s.iter().zip(b).position(|(x, y)| x != y).unwrap();
    for (x, y) in s.iter().zip(b).skip(first) {
        assert_eq!(*x, *y + q(1));
    }
    // past the power-up drain, each element delays exactly one pulse
    for e in &r.report.elements {
        assert_eq!(e.offsets().iter().skip(8).filter(|&&o| o != 0).count(), 1, "{}", e.element);
    }
}

#[test]
fn detector_step_droop_reaches_the_accumulator_through_the_chain() {
    let c = cfg(TimingProfile::idealized());
    let vdd = VoltageProfile::step(1.2, 0.95, T * 20 + Ticks::ns(3), T * 3);
    let r = run(&c, 40, &DroopSource::Detector(vdd), &released());
    let rep = &r.report;
    assert!(rep.all_findings().is_empty(), "{:?}", rep.all_findings());
    let counted: Vec<_> = rep.phase_acc.cycles.iter().skip(4).filter(|p| p.counted == Logic::L1).collect();
    assert_eq!(counted.len(), 3);
    // shifts accumulate one quarter per droop cycle and then hold
    let last = *rep.offsets.last().unwrap();
    assert_eq!(last, q(3).0 as i64);
    assert!(rep.offsets.windows(2).all(|w| w[1] >= w[0]));
    // the droop bit is latched by the accumulator on its fourth rising flank after detection
    let detect = r.result.wave("det.droop_n").falling_edges()[0];
    let pa = r.result.wave("pa.clk_out").rising_edges();
    let latched = counted[0].rise;
    let flanks = pa.iter().filter(|&&t| t > detect && t <= latched).count();
    assert_eq!(flanks, 4, "detected {detect}, latched {latched}");
}

#[test]
fn realistic_system_keeps_the_contract() {
    let c = cfg(TimingProfile::realistic(0.02, 17));
    let rst = Waveform::from_transitions(Logic::L0, [(Ticks::ns(137), Logic::L1)]).unwrap();
    let vdd = VoltageProfile::step(1.2, 0.95, T * 20 + Ticks::ns(3), T * 3);
    let r = run(&c, 60, &DroopSource::Detector(vdd), &rst);
    assert!(r.report.all_findings().is_empty(), "{:?}", r.report.all_findings());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    /// Every droop cycle adds one quarter period, never more, never less.
    #[test]
    fn shifts_match_droop_cycles(bits in proptest::collection::vec(any::<bool>(), 16)) {
        let c = cfg(TimingProfile::idealized());
        let mut w = Waveform::new(Logic::L1);
        let mut last = Logic::L1;
        let mut t = T * 10 + Ticks::ns(10);
        for &b in &bits {
            let l = Logic::from_bool(!b);
            if l != last {
                w.push(t, l).unwrap();
                last = l;
            }
            // keep edges away from the last element's sampling instants
            t += if b { T + q(1) } else { T };
        }
        if last == Logic::L0 {
            w.push(t, Logic::L1).unwrap();
        }
        let r = run(&c, 60, &DroopSource::Direct(w), &released());
        let rep = &r.report;
        prop_assert!(rep.all_findings().is_empty(), "{:?}", rep.all_findings());
        let n = bits.iter().filter(|&&b| b).count() as i64;
        prop_assert_eq!(*rep.offsets.last().unwrap(), n * q(1).0 as i64);
    }
}
