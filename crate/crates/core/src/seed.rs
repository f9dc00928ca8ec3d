//! Stable seed derivation. Every stochastic draw in the crate is keyed by
//! the scenario seed plus a label and counters, so results do not depend on
//! call order or thread scheduling.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn fnv1a(label: &str) -> u64 {
    label.bytes().fold(0xcbf2_9ce4_8422_2325, |h, b| {
        (h ^ u64::from(b)).wrapping_mul(0x0000_0100_0000_01B3)
    })
}

/// Mixes a base seed, a string label and counters into one 64-bit seed.
pub fn derive(base: u64, label: &str, counters: &[u64]) -> u64 {
    let mut h = splitmix64(base ^ fnv1a(label));
    for &c in counters {
        h = splitmix64(h ^ c);
    }
    h
}

pub fn rng(base: u64, label: &str, counters: &[u64]) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive(base, label, counters))
}
