//! Turns flag hit counts from a threshold detector into level estimates.

use chanalloc::estimation::{binary_estimate, BinaryEstimatorConfig};
use chanalloc::sensors::BinaryParams;

fn main() {
    let cfg = BinaryEstimatorConfig::nrf24();
    println!(
        "L_min {} L_av {} N {}: {} dB per hit, ceiling {} dBm",
        cfg.l_min,
        cfg.l_av,
        cfg.n_samples,
        cfg.slope(),
        cfg.ceiling()
    );
    let hits = [0, 25, 50, 100, 150, 200];
    for (h, level) in hits.iter().zip(binary_estimate(&hits, &cfg).unwrap()) {
        println!("{h:>4} hits -> {level}");
    }

    // expected hits for a detector with 2 dB of threshold jitter
    let p = BinaryParams::default();
    println!("\ntruth    expected hits");
    for truth in [-72.0, -68.0, -64.0, -60.0, -56.0] {
        println!(
            "{truth:>6.1}   {:>6.1}",
            p.hit_probability(truth) * f64::from(p.n_samples)
        );
    }
}
