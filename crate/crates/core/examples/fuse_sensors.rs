//! Combines analyzer averages and Wi-Fi card scans into one occupancy value.

use chanalloc::estimation::{
    card_channel_estimate, channel_average, fuse_external, normalize_weights, CardMode,
    PointMeasurementSet, SensorWeight, WifiScanEntry,
};
use chanalloc::spectrum::{standard_grid, ChannelId, LevelDbm};

fn lvl(x: f64) -> LevelDbm {
    LevelDbm::new(x).unwrap()
}

fn main() {
    let ch6 = ChannelId::new(6).unwrap();
    let grid = standard_grid();

    // an analyzer that sees -60 dBm on the lower half of channel 6
    let points = PointMeasurementSet::from_levels(grid.iter().map(|b| {
        (
            *b,
            if b.center_mhz < ch6.center_mhz() {
                lvl(-60.0)
            } else {
                lvl(-90.0)
            },
        )
    }));
    let analyzer = channel_average(&points, ch6).unwrap();
    println!("analyzer average on channel 6: {analyzer}");

    let weights = normalize_weights(&[
        SensorWeight::new(2.0).unwrap(),
        SensorWeight::new(1.0).unwrap(),
    ]);
    let external = fuse_external(&[(weights[0], analyzer), (weights[1], lvl(-80.0))], ch6).unwrap();
    println!("fused external estimate: {external}");

    let scan = vec![
        WifiScanEntry {
            network_channel: ChannelId::new(5).unwrap(),
            level: lvl(-70.0),
        },
        WifiScanEntry {
            network_channel: ChannelId::new(11).unwrap(),
            level: lvl(-50.0),
        },
    ];
    let cards = [(SensorWeight::UNIT, scan)];
    for mode in [CardMode::LinearPower, CardMode::LogDomain] {
        let est = card_channel_estimate(&cards, ch6, mode, lvl(-100.0)).unwrap();
        println!("card estimate ({mode:?}): {est}");
    }
}
