//! Seeded random streams.
//!
//! Every randomized stage derives its own stream from the master seed, a
//! domain tag, and an index, so parallel calls are deterministic and
//! independent of scheduling.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Stream domains; each randomized stage owns one tag.
pub mod domain {
    pub const ENCODER_INIT: u64 = 1;
    pub const BATCH: u64 = 2;
    pub const CORRUPT: u64 = 3;
    pub const PROMPT_INIT: u64 = 4;
    pub const ANCHOR: u64 = 5;
    pub const SPLIT: u64 = 6;
    pub const BENCH: u64 = 7;
}

// splitmix64 finalizer
fn mix(mut x: u64) -> u64 {
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    x ^ (x >> 31)
}

/// Deterministic sub-stream for `(master seed, domain, index)`.
pub fn stream(master: u64, domain: u64, index: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(mix(master ^ mix(domain.wrapping_add(mix(index)))))
}
