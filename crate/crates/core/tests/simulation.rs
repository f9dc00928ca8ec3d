mod common;

use chanalloc::estimation::SensorWeight;
use chanalloc::rfsim::{Emitter, EmitterKind, Point, RfScenario};
use chanalloc::scenario::Scenario;
use chanalloc::sensors::{
    make_channel_report, BinaryParams, ReportMeta, RssiParams, Sensor, SensorKind, SensorReport,
};
use chanalloc::sim::{simulate, RunReport, Simulation};
use chanalloc::spectrum::ChannelId;
use common::ch;
use proptest::prelude::*;

#[test]
fn jammer_switching_on_moves_the_ap_within_two_rounds() {
    let sc = Scenario::bundled("jammer_toggle").unwrap();
    let on_slot = sc.emitters.iter().find_map(|e| e.active_from_slot).unwrap();
    let on_round = on_slot / sc.allocator.collection_window_slots;
    let report = simulate(sc, 12).unwrap();
    assert!(report.assignments.iter().all(|a| a.round >= on_round));
    let first = report
        .assignments
        .first()
        .expect("the AP leaves the jammed channel");
    assert!(first.round <= on_round + 2);
    assert_eq!(first.from, ch(1));
    assert!(first.to.distance(ch(1)) >= 4);
}

#[test]
fn same_seed_same_report_and_seeds_matter() {
    let sc = Scenario::bundled("jammer_toggle").unwrap();
    let a = simulate(sc.clone(), 8).unwrap();
    let b = simulate(sc.clone(), 8).unwrap();
    assert_eq!(a.to_json(), b.to_json());
    assert_eq!(a.to_csv(), b.to_csv());
    let c = simulate(sc.with_seed(Some(12345)), 8).unwrap();
    assert_ne!(a.occupancy, c.occupancy);
}

#[test]
fn stepping_equals_running() {
    let sc = Scenario::bundled("static_office").unwrap();
    let mut sim = Simulation::new(sc.clone()).unwrap();
    for _ in 0..5 {
        sim.step().unwrap();
    }
    assert_eq!(sim.report(), &simulate(sc, 5).unwrap());
}

#[test]
fn reports_survive_both_output_formats() {
    let report = simulate(Scenario::bundled("jammer_toggle").unwrap(), 8).unwrap();
    assert_eq!(RunReport::from_json(&report.to_json()).unwrap(), report);
    assert_eq!(RunReport::from_csv(&report.to_csv()).unwrap(), report);
}

#[test]
fn allowed_channels_are_respected() {
    let mut sc = Scenario::bundled("static_office").unwrap();
    sc.allocator.allowed_channels = [ch(1), ch(6), ch(11)].into();
    let report = simulate(sc, 10).unwrap();
    for c in report.final_channels.values() {
        assert!([1, 6, 11].contains(&c.index()));
    }
}

fn levels(sensor: &Sensor, rf: &RfScenario, chans: &[ChannelId]) -> Vec<f64> {
    let meta = ReportMeta {
        device_id: sensor.id.clone(),
        weight: SensorWeight::UNIT,
        seq: 0,
        slot: 0,
    };
    let SensorReport::Channels(r) = make_channel_report(&sensor.scan(rf, 0), meta, chans) else {
        panic!("analyzers produce channel reports");
    };
    chans.iter().map(|&c| r.level(c).unwrap().dbm()).collect()
}

fn order(xs: &[f64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..xs.len()).collect();
    idx.sort_by(|&a, &b| xs[a].total_cmp(&xs[b]));
    idx
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    /// RSSI and binary analyzers at one spot rank a quiet channel and two
    /// occupied channels the same way when the levels are 6 dB apart.
    #[test]
    fn analyzers_agree_on_channel_order(
        quiet_level in -67.0f64..-64.0,
        gap in 6.0f64..8.0,
        swap in any::<bool>(),
        seed in any::<u64>(),
    ) {
        let (a, b) = if swap { (ch(11), ch(1)) } else { (ch(1), ch(11)) };
        let at_1m = |rx: f64| rx + 40.0;
        let rf = RfScenario {
            emitters: vec![
                Emitter::wifi("quiet", a, Point::new(1.0, 0.0), at_1m(quiet_level)),
                Emitter::wifi("loud", b, Point::new(0.0, 1.0), at_1m(quiet_level + gap)),
            ],
            rng_seed: seed,
            ..RfScenario::default()
        };
        let chans = [a, ch(6), b];
        let rssi = Sensor::new("rssi", Point::default(), SensorKind::Rssi(RssiParams::default()));
        let binary = Sensor::new("nrf", Point::default(), SensorKind::Binary(BinaryParams::default()));
        let r = levels(&rssi, &rf, &chans);
        let h = levels(&binary, &rf, &chans);
        prop_assert_eq!(order(&r), vec![1, 0, 2]);
        prop_assert_eq!(order(&h), vec![1, 0, 2], "binary levels {:?}", h);
    }
}

#[test]
fn card_scanner_ignores_non_wifi_emitters() {
    let rf = RfScenario {
        emitters: vec![
            Emitter {
                id: "bt".into(),
                kind: EmitterKind::BluetoothHopper {
                    hop_set: (0..79).collect(),
                },
                position: Point::new(1.0, 0.0),
                tx_power_dbm: 10.0,
                active_from_slot: None,
                active_until_slot: None,
            },
            Emitter::wifi("net", ch(6), Point::new(2.0, 0.0), 15.0),
        ],
        ..RfScenario::default()
    };
    let card = Sensor::new(
        "card",
        Point::default(),
        SensorKind::WifiCard(Default::default()),
    );
    match card.scan(&rf, 0) {
        chanalloc::sensors::SensorOutput::Networks(entries) => {
            assert_eq!(entries.len(), 1);
            assert_eq!(entries[0].network_channel, ch(6));
        }
        other => panic!("{other:?}"),
    }
}
