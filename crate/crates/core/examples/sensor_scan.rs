//! One scan from each sensor type in the bundled single_jammer scenario.

use chanalloc::estimation::SensorWeight;
use chanalloc::scenario::Scenario;
use chanalloc::sensors::{make_channel_report, ReportMeta, SensorReport};
use chanalloc::spectrum::ChannelId;

fn main() {
    let sc = Scenario::bundled("single_jammer").unwrap();
    let channels: Vec<ChannelId> = ChannelId::all().collect();
    for sensor in &sc.sensors {
        let rf = sc.rf_for_sensor(sensor, &sc.initial_channels());
        let meta = ReportMeta {
            device_id: sensor.id.clone(),
            weight: SensorWeight::UNIT,
            seq: 0,
            slot: 0,
        };
        match make_channel_report(&sensor.scan(&rf, 0), meta, &channels) {
            SensorReport::Channels(r) => {
                let row: Vec<String> = r
                    .levels
                    .iter()
                    .map(|(_, l)| format!("{:.1}", l.dbm()))
                    .collect();
                println!("{:<7} {}", r.device_id, row.join(" "));
                println!("        emptiest channel {}", r.emptiest().unwrap());
            }
            SensorReport::Card(c) => {
                for e in &c.entries {
                    println!(
                        "{:<7} network on channel {} at {}",
                        c.device_id, e.network_channel, e.level
                    );
                }
            }
        }
    }
}
