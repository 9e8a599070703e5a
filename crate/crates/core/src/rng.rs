//! Seeded random streams.
//!
//! Every stochastic routine in the crate takes an explicit `u64` seed and
//! draws from a [`ChaCha12Rng`]. ChaCha is counter based, so independent
//! sub-streams are obtained from one seed by selecting a different stream
//! id ([`stream`]) instead of re-seeding with correlated values.

use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;

/// Generator used throughout the crate.
pub type Rng = ChaCha12Rng;

/// Generator for `seed`, stream 0.
pub fn from_seed(seed: u64) -> Rng {
    ChaCha12Rng::seed_from_u64(seed)
}

/// Independent sub-stream `id` of `seed`.
pub fn stream(seed: u64, id: u64) -> Rng {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}

/// Derives a child seed; used when a seed must cross an API that takes `u64`.
pub fn child_seed(seed: u64, id: u64) -> u64 {
    // SplitMix64 finaliser over the pair.
    let mut z = seed ^ id.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
