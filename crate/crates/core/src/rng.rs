//! Seed derivation for reproducible, order-independent random streams.
//!
//! Every scenario index gets its own ChaCha stream whose seed is a
//! SplitMix64 mix of the master seed, a stream tag and the index, so that
//! scenario `i` draws the same numbers no matter which worker produces it.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// `splitmix64(splitmix64(master ^ tag) ^ index)`, the documented counter mix.
pub fn derive_seed(master: u64, tag: u64, index: u64) -> u64 {
    splitmix64(splitmix64(master ^ tag.wrapping_mul(0xA24B_AED4_963E_E407)) ^ index)
}

pub fn stream(master: u64, tag: u64, index: u64) -> Rng {
    Rng::seed_from_u64(derive_seed(master, tag, index))
}

pub fn seeded(seed: u64) -> Rng {
    Rng::seed_from_u64(seed)
}

/// Stream tags keep the different consumers of one master seed apart.
pub mod tags {
    pub const LOADS: u64 = 1;
    pub const NOISE: u64 = 2;
    pub const KDE: u64 = 3;
    pub const SPLIT: u64 = 4;
    pub const INIT: u64 = 5;
    pub const SHUFFLE: u64 = 6;
    pub const DROPOUT: u64 = 7;
    pub const METER: u64 = 8;
    pub const SVM: u64 = 9;
}
