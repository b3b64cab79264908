//! Counter-based random streams.
//!
//! Every random draw in the library is keyed by a tuple of integers (master
//! seed, purpose tag, iteration, particle index, ...). Streams never share
//! state, so the order in which workers consume them cannot change results.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Purpose tags mixed into stream keys so different consumers never collide.
pub mod tag {
    pub const SELECT: u64 = 0x5e1e_c7;
    pub const EVAL: u64 = 0xe7a1;
    pub const EVAL_DUP: u64 = 0xe7a1_d0;
    pub const ROOT_EVAL: u64 = 0x0007_e7a1;
    pub const ACTION: u64 = 0xac71;
    pub const GUMBEL: u64 = 0x6b3e1;
    pub const EPISODE: u64 = 0xe915;
    pub const GAME: u64 = 0x6a3e;
    pub const TREE: u64 = 0x7233;
    pub const ENV: u64 = 0xe7f;
    pub const PRIOR: u64 = 0x9210;
    pub const BOOK: u64 = 0xb00c;
}

/// SplitMix64 finalizer.
#[inline]
pub fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Combines two words into one key; not symmetric in its arguments.
#[inline]
pub fn mix(a: u64, b: u64) -> u64 {
    splitmix64(a.rotate_left(23) ^ splitmix64(b))
}

/// Folds a sequence of words into a single stream key.
pub fn key(parts: &[u64]) -> u64 {
    parts.iter().fold(0x6a09_e667_f3bc_c908, |acc, &p| mix(acc, p))
}

/// Uniform draw in [0, 1) that is a pure function of `key`.
#[inline]
pub fn unit(key: u64) -> f64 {
    (splitmix64(key) >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Uniform draw in (0, 1) for use with logarithms.
#[inline]
pub fn open_unit(key: u64) -> f64 {
    ((splitmix64(key) >> 11) as f64 + 0.5) * (1.0 / (1u64 << 53) as f64)
}

/// A full generator seeded from a key, for consumers that need many draws.
pub fn stream(key: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(key)
}
