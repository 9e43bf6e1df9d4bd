//! Seeded hash families and seed derivation.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// SplitMix64 finalizer. Used to derive independent seeds from a master seed.
pub fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

/// Counter-based seed split: the derived seed depends only on the master seed
/// and the given path of counters.
pub fn derive_seed(master: u64, path: &[u64]) -> u64 {
    path.iter()
        .fold(splitmix64(master), |acc, &c| splitmix64(acc ^ splitmix64(c.wrapping_add(0xA24B_AED4_963E_E407))))
}

pub fn rng_from_seed(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Multiply-add-shift hash over 64-bit keys with 128-bit multipliers
/// (pairwise independent on the top 64 output bits).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MultiplyShift {
    a: u128,
    b: u128,
}

impl MultiplyShift {
    pub fn from_rng<R: Rng>(rng: &mut R) -> Self {
        let a = (rng.random::<u128>()) | 1;
        let b = rng.random::<u128>();
        Self { a, b }
    }

    #[inline]
    pub fn hash(&self, key: u64) -> u64 {
        (self.a.wrapping_mul(key as u128).wrapping_add(self.b) >> 64) as u64
    }

    /// Maps `key` into `[0, buckets)`.
    #[inline]
    pub fn bucket(&self, key: u64, buckets: usize) -> usize {
        ((self.hash(key) as u128 * buckets as u128) >> 64) as usize
    }
}

/// Multiply-add-shift hash for keys below 2^32, returning 32 pairwise
/// independent bits. Cheaper than [`MultiplyShift`]; used where one hash is
/// evaluated per sampler per update.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MultiplyShift32 {
    a: u64,
    b: u64,
}

impl MultiplyShift32 {
    pub fn from_rng<R: Rng>(rng: &mut R) -> Self {
        Self {
            a: rng.random::<u64>() | 1,
            b: rng.random::<u64>(),
        }
    }

    #[inline]
    pub fn hash(&self, key: u32) -> u32 {
        (self.a.wrapping_mul(key as u64).wrapping_add(self.b) >> 32) as u32
    }
}
