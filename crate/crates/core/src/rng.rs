//! Deterministic random streams.
//!
//! Every random draw in the crate comes from a ChaCha8 generator keyed by a
//! 64-bit seed and addressed by a path of integers (replication, auction,
//! purpose tag...). Streams with different paths are independent, so work can
//! be split across threads without changing any result.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

/// Purpose tags keeping simulation and resampling streams apart.
pub mod tag {
    pub const SIMULATE: u64 = 0x5349_4d55;
    pub const BOOTSTRAP: u64 = 0x424f_4f54;
    pub const COVARIATE: u64 = 0x434f_5641;
}

#[inline]
pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

fn hash_path(path: &[u64]) -> u64 {
    path.iter()
        .fold(0x243f_6a88_85a3_08d3, |h, &p| splitmix64(h ^ splitmix64(p)))
}

/// Generator for the stream addressed by `path` under `seed`.
pub fn stream(seed: u64, path: &[u64]) -> StreamRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(hash_path(path));
    rng
}

/// Derive a child seed, used when a component receives a plain `u64` seed.
pub fn child_seed(seed: u64, path: &[u64]) -> u64 {
    splitmix64(seed ^ hash_path(path))
}
