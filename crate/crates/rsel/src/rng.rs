//! Deterministic stream derivation for reproducible parallel experiments.
//!
//! Every consumer of randomness gets its own ChaCha8 stream whose seed is a
//! pure function of (master seed, replication index, alternative index).
//! Results are therefore independent of scheduling: any number of worker
//! threads replays exactly the same sample paths.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// splitmix64 finalizer; the standard 64-bit mixer.
fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e3779b97f4a7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
    z ^ (z >> 31)
}

/// Derive a child seed from a parent seed and an index.
pub fn derive(seed: u64, index: u64) -> u64 {
    splitmix64(seed ^ splitmix64(index.wrapping_add(0xa076_1d64_78bd_642f)))
}

/// Stream for the samples of one alternative within one replication.
pub fn sample_stream(master_seed: u64, replication: u64, alternative: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive(derive(master_seed, replication), alternative))
}

/// Stream for auxiliary draws (instance generation, oracles).
pub fn aux_stream(seed: u64, purpose: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive(seed, purpose))
}
