//! Seed splitting: one 64-bit run seed feeds independent labelled streams.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Stream label for intrinsic-frequency draws.
pub const FREQUENCIES: &str = "frequencies";
/// Stream label for initial phases.
pub const PHASES: &str = "phases";
/// Stream label for Bernoulli edge draws.
pub const EDGES: &str = "edges";
/// Stream label for random grid points.
pub const GRID: &str = "grid";

fn fnv1a(label: &str) -> u64 {
    let mut hash: u64 = 0xcbf2_9ce4_8422_2325;
    for byte in label.bytes() {
        hash ^= byte as u64;
        hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
    }
    hash
}

fn splitmix(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    x ^ (x >> 31)
}

/// Derive the sub-seed for `label` from the run seed.
pub fn derive_seed(seed: u64, label: &str) -> u64 {
    splitmix(seed ^ splitmix(fnv1a(label)))
}

/// A deterministic generator for the labelled stream.
pub fn stream(seed: u64, label: &str) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(seed, label))
}
