//! Seeded random streams.
//!
//! Every stochastic step in the toolkit draws from a [`ChaCha8Rng`] built
//! from a `u64` seed, so outputs are a pure function of the seed on any
//! platform. Independent sub-streams (per scene, per epoch, ...) derive
//! their seeds with [`derive_seed`], a splitmix64 finalizer over the parent
//! seed and a stream index.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

pub fn seeded(seed: u64) -> Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// splitmix64 output function.
pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Seed for sub-stream `stream` of `parent`.
pub fn derive_seed(parent: u64, stream: u64) -> u64 {
    splitmix64(splitmix64(parent) ^ stream.wrapping_mul(0xd1b5_4a32_d192_ed03))
}
