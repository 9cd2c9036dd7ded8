//! Deterministic random streams.
//!
//! Every run owns a ChaCha8 generator keyed by its seed; independent
//! purposes (array initialization, learning) use separate ChaCha streams of
//! the same key, and sweep jobs derive their seed from
//! `(master seed, cv index, seed index)` with a SplitMix64 finalizer.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub const INIT_STREAM: u64 = 0;
pub const LEARN_STREAM: u64 = 1;

pub fn stream(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed for sweep job `(cv_index, seed_index)` under `master`.
pub fn job_seed(master: u64, cv_index: u64, seed_index: u64) -> u64 {
    splitmix64(splitmix64(splitmix64(master) ^ cv_index) ^ seed_index)
}
