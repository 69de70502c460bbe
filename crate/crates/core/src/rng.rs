//! Seeded, splittable random streams.
//!
//! Every independent unit of work (an individual, a chain, a replication)
//! draws from its own stream derived from `(seed, domain, index)`, so results
//! do not depend on how work is scheduled across threads.

use rand::SeedableRng;
use rand_xoshiro::Xoshiro256PlusPlus;

pub type StreamRng = Xoshiro256PlusPlus;

// SplitMix64 finalizer.
fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Child seed for stream `index` of `domain` under `seed`.
pub fn derive_seed(seed: u64, domain: u64, index: u64) -> u64 {
    mix(mix(mix(seed) ^ domain.wrapping_mul(0xD6E8_FEB8_6659_FD93)) ^ index)
}

pub fn substream(seed: u64, domain: u64, index: u64) -> StreamRng {
    StreamRng::seed_from_u64(derive_seed(seed, domain, index))
}

/// Stream domains used across the crate.
pub mod domain {
    pub const GROUP_PARAMS: u64 = 1;
    pub const INDIVIDUAL: u64 = 2;
    pub const CHAIN: u64 = 3;
    pub const CHAIN_GROUP: u64 = 4;
    pub const CHAIN_INDIVIDUAL: u64 = 5;
    pub const REPLICATION_DATA: u64 = 6;
    pub const REPLICATION_FIT: u64 = 7;
    pub const PPC: u64 = 8;
    pub const START: u64 = 9;
}
