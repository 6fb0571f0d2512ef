//! Reproducible random streams.
//!
//! Every independent unit of work (a sampled path, a simulated trial) gets
//! its own xoshiro256++ generator seeded from `mix64(mix64(seed) ^ index)`,
//! so results do not depend on thread count or scheduling.

use rand::SeedableRng;
use rand_xoshiro::Xoshiro256PlusPlus;

pub type StreamRng = Xoshiro256PlusPlus;

/// SplitMix64 finalizer.
pub fn mix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

/// Generator for work item `index` under the run seed `seed`.
pub fn stream(seed: u64, index: u64) -> StreamRng {
    StreamRng::seed_from_u64(mix64(mix64(seed) ^ index))
}
