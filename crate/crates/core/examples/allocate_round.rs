//! Drives the allocator by hand with three synthetic analyzer reports.

use chanalloc::allocator::{AllocationState, AllocatorConfig};
use chanalloc::protocol::{ChannelLevel, DeviceKind, Message};
use chanalloc::spectrum::ChannelId;

fn report(device: &str, busy: &[u8]) -> Message {
    Message::ChannelReport {
        device_id: device.into(),
        seq: 1,
        slot: 0,
        channels: ChannelId::all()
            .map(|c| ChannelLevel {
                channel: c,
                level_dbm: if busy.contains(&c.index()) {
                    -55.0
                } else {
                    -95.0
                },
            })
            .collect(),
    }
}

fn main() {
    let mut config = AllocatorConfig::default();
    config
        .sensor_binding
        .insert("ap-north".into(), ["s-north".to_string()].into());
    config
        .sensor_binding
        .insert("ap-south".into(), ["s-south".to_string()].into());
    let mut state = AllocationState::new(config).unwrap();
    state.register_ap("ap-north", ChannelId::new(1).unwrap());
    state.register_ap("ap-south", ChannelId::new(1).unwrap());

    for (id, busy) in [
        ("s-north", vec![1, 2, 3]),
        ("s-south", vec![11, 12, 13]),
        ("s-hall", vec![6]),
    ] {
        state
            .ingest(&Message::hello(id, DeviceKind::RssiSensor, 1.0))
            .unwrap();
        state.ingest(&report(id, &busy)).unwrap();
    }

    let outcome = state.allocate_round();
    for a in &outcome.assignments {
        println!("{}: channel {} -> {}", a.ap_id, a.from, a.to);
    }
    for (ap, ch) in state.ap_channels() {
        let level = outcome.occupancy[ap][ch];
        println!("{ap} now on {ch}, occupancy {level}");
    }
}
