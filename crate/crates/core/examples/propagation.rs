//! Received power around a Wi-Fi transmitter and a Bluetooth headset.

use chanalloc::rfsim::{received_power, Emitter, EmitterKind, Point, RfScenario, SlotTime};
use chanalloc::spectrum::{standard_grid, ChannelId};

fn main() {
    let ap = Emitter::wifi("ap", ChannelId::new(6).unwrap(), Point::new(0.0, 0.0), 20.0);
    let headset = Emitter {
        id: "headset".into(),
        kind: EmitterKind::BluetoothHopper {
            hop_set: (0..79).collect(),
        },
        position: Point::new(2.0, 0.0),
        tx_power_dbm: 4.0,
        active_from_slot: None,
        active_until_slot: None,
    };
    let scenario = RfScenario {
        emitters: vec![ap, headset],
        rng_seed: 1,
        ..RfScenario::default()
    };
    let grid = standard_grid();
    let on_channel = grid[37];

    println!("distance  level at {:.1} MHz", on_channel.center_mhz);
    for d in [0.5, 1.0, 2.0, 5.0, 10.0, 20.0, 50.0] {
        let level = received_power(&scenario, Point::new(0.0, d), &on_channel, SlotTime::at(0));
        println!("{d:>6} m  {level}");
    }

    // the headset lands on a different 1 MHz hop every sub-slot
    let near_headset = Point::new(2.0, 0.5);
    let busy = |sub| {
        grid.iter()
            .filter(|b| b.center_mhz > 2460.0)
            .filter(|b| {
                received_power(&scenario, near_headset, b, SlotTime { slot: 0, sub }).dbm() > -90.0
            })
            .count()
    };
    let counts: Vec<usize> = (0..10).map(busy).collect();
    println!("\nbins above 2460 MHz lit by the headset per sub-slot: {counts:?}");
}
