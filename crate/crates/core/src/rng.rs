//! Seeded randomness.
//!
//! Every random choice in the crate comes from ChaCha8, which produces the
//! same stream on every platform. Independent streams for the same seed are
//! separated with ChaCha's 64-bit stream id instead of reseeding.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

/// Stream-id namespaces, kept in the high 32 bits.
pub mod domain {
    pub const NEGATIVES: u64 = 1;
    pub const POSITIVES: u64 = 2;
    pub const DATASET_SHUFFLE: u64 = 3;
    pub const INIT: u64 = 4;
    pub const EPOCH_SHUFFLE: u64 = 5;
    pub const FOLDS: u64 = 6;
    pub const SPLIT: u64 = 7;
}

pub fn seeded(seed: u64) -> Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Stream `index` within `domain` for `seed`.
pub fn substream(seed: u64, domain: u64, index: u64) -> Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream((domain << 32) | (index & 0xffff_ffff));
    rng
}

/// Mix a base seed with an index into a new seed (splitmix64 finalizer).
pub fn derive_seed(base: u64, index: u64) -> u64 {
    let mut z = base ^ index.wrapping_add(1).wrapping_mul(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}
