//! Seeded randomness for simulation runs.
//!
//! Every stochastic choice in a run (channel, timing law, policies) draws
//! from a single ChaCha stream in a fixed order, so a scenario plus a seed
//! replays bit-identically on any platform.

pub use rand::Rng;
pub use rand::SeedableRng;

/// The simulation RNG. ChaCha8 is fast, portable and stable across releases.
pub type SimRng = rand_chacha::ChaCha8Rng;

/// Create the RNG for a run.
pub fn seeded(seed: u64) -> SimRng {
    SimRng::seed_from_u64(seed)
}

/// Derive the seed for run `index` of a batch from the batch's base seed.
///
/// SplitMix64 finalizer; adjacent indices map to well-separated streams.
pub fn derive_seed(base: u64, index: u64) -> u64 {
    let mut z = base ^ index.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
