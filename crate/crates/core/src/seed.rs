//! Hierarchical seed derivation.
//!
//! Every random stream in the crate is a [`StreamRng`] (ChaCha with 8 rounds)
//! seeded from a 64-bit child seed. Child seeds are derived from a master seed
//! and a path of `(tag, index...)` elements by iterating the SplitMix64
//! finalizer:
//!
//! ```text
//! h = splitmix64(master)
//! h = splitmix64(h ^ fnv1a64(tag))
//! for i in indices: h = splitmix64(h.rotate_left(17) ^ i)
//! ```
//!
//! The function is pure and order sensitive, so runs derived from the same
//! path produce the same stream no matter which worker executes them.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// The random stream type used everywhere in the crate.
pub type StreamRng = ChaCha8Rng;

/// Human-readable identity of the stream algorithm, recorded in output metadata.
pub const RNG_ALGORITHM: &str =
    "ChaCha8Rng(rand_chacha 0.9, seed_from_u64); child seeds via splitmix64 path hash";

const GOLDEN_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

/// The SplitMix64 output function applied to `x + gamma`.
#[inline]
pub fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(GOLDEN_GAMMA);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in bytes {
        h ^= u64::from(*b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

/// Derives a child seed from `master` along the path `(tag, indices...)`.
pub fn derive_seed(master: u64, tag: &str, indices: &[u64]) -> u64 {
    let mut h = splitmix64(master);
    h = splitmix64(h ^ fnv1a64(tag.as_bytes()));
    for &i in indices {
        h = splitmix64(h.rotate_left(17) ^ i);
    }
    h
}

/// Builds the stream for a given seed.
pub fn stream(seed: u64) -> StreamRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// A master seed plus the derivation scheme.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SeedScheme {
    pub master_seed: u64,
}

impl SeedScheme {
    pub fn new(master_seed: u64) -> Self {
        Self { master_seed }
    }

    pub fn child(&self, tag: &str, indices: &[u64]) -> u64 {
        derive_seed(self.master_seed, tag, indices)
    }

    pub fn rng(&self, tag: &str, indices: &[u64]) -> StreamRng {
        stream(self.child(tag, indices))
    }
}
