//! Deterministic seeding. Every stochastic routine takes an explicit seed or
//! RNG; independent streams are derived from one master seed.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

/// Named sub-streams of the master seed.
pub mod stream {
    pub const DATA: u64 = 1;
    pub const VALIDATION: u64 = 2;
    pub const SURROGATE: u64 = 3;
    pub const SC_PROBES: u64 = 4;
}

/// SplitMix64 finalizer applied to `master` combined with `stream`.
pub fn derive_seed(master: u64, stream: u64) -> u64 {
    let mut z = master ^ stream.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn rng_from_seed(seed: u64) -> Rng {
    Rng::seed_from_u64(seed)
}

pub fn substream(master: u64, stream: u64) -> Rng {
    rng_from_seed(derive_seed(master, stream))
}
