//! Counter-based seed derivation.
//!
//! A run has one 64-bit root seed. The generator for task `(stream, index)`
//! is seeded with `splitmix64(splitmix64(root ^ stream) ^ index)`. Every task
//! therefore owns an independent stream that depends only on its
//! coordinates, not on scheduling order.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[inline]
pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn derive_seed(root: u64, stream: u64, index: u64) -> u64 {
    splitmix64(splitmix64(root ^ stream) ^ index)
}

pub fn task_rng(root: u64, stream: u64, index: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(root, stream, index))
}

/// Stream tags used by the sweeps, kept in one place so that seeds stay
/// stable across releases.
pub mod streams {
    pub const STRICHARTZ: u64 = 0x5354_5249;
    pub const BILINEAR_HIGH: u64 = 0x4249_4c48;
    pub const BILINEAR_LOW: u64 = 0x4249_4c4c;
    pub const MULTILINEAR: u64 = 0x4d55_4c54;
    pub const KERNEL: u64 = 0x4b45_524e;
    pub const SOLVER: u64 = 0x534f_4c56;
    pub const BOOST: u64 = 0x424f_4f53;
}
