//! Prints the channel plan, the crossing coefficients and the quality grades.

use chanalloc::spectrum::{
    bins_for_channel, classify_quality, crossing_coefficient, standard_grid, ChannelId, LevelDbm,
};

fn main() {
    let grid = standard_grid();
    println!("channel  center  bins");
    for ch in ChannelId::all() {
        let bins = bins_for_channel(ch, &grid).unwrap();
        println!("{:>7}  {:>6}  {}", ch.index(), ch.center_mhz(), bins.len());
    }

    let one = ChannelId::new(1).unwrap();
    println!("\ndistance  coefficient");
    for k in 1..=6 {
        let other = ChannelId::new(k).unwrap();
        println!(
            "{:>8}  {}",
            one.distance(other),
            crossing_coefficient(one, other)
        );
    }

    println!("\nlevel     grade");
    for x in [-95.0, -90.0, -85.0, -81.0, -75.0, -70.0, -67.0, -60.0] {
        let level = LevelDbm::new(x).unwrap();
        println!("{:<9} {}", level.to_string(), classify_quality(level).label);
    }
}
