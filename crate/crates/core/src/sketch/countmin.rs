use rand::Rng;

use crate::error::{bad_params, Result};
use crate::hashing::MultiplyShift;

/// Count-min sketch with signed counters.
#[derive(Debug, Clone, PartialEq)]
pub struct CountMin {
    width: usize,
    depth: usize,
    hashes: Vec<MultiplyShift>,
    counters: Vec<i64>,
}

impl CountMin {
    pub fn new<R: Rng>(width: usize, depth: usize, rng: &mut R) -> Result<Self> {
        if width == 0 || depth == 0 {
            return Err(bad_params("count-min width and depth must be positive"));
        }
        Ok(Self {
            width,
            depth,
            hashes: (0..depth).map(|_| MultiplyShift::from_rng(rng)).collect(),
            counters: vec![0; width * depth],
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    #[inline]
    pub fn update(&mut self, key: u64, delta: i64) {
        for (r, h) in self.hashes.iter().enumerate() {
            self.counters[r * self.width + h.bucket(key, self.width)] += delta;
        }
    }

    /// Minimum over rows; an upper bound on the true count under strict turnstile.
    pub fn estimate(&self, key: u64) -> i64 {
        self.hashes
            .iter()
            .enumerate()
            .map(|(r, h)| self.counters[r * self.width + h.bucket(key, self.width)])
            .min()
            .expect("depth >= 1")
    }

    /// Counter-wise sum. Both sketches must share dimensions and hash seeds.
    pub fn merge(&mut self, other: &CountMin) -> Result<()> {
        if self.width != other.width || self.hashes != other.hashes {
            return Err(bad_params("count-min sketches are not compatible"));
        }
        for (a, b) in self.counters.iter_mut().zip(&other.counters) {
            *a += b;
        }
        Ok(())
    }

    pub fn words(&self) -> usize {
        self.counters.len()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hashing::rng_from_seed;

    #[test]
    fn never_underestimates_nonnegative_counts() {
        let mut rng = rng_from_seed(1);
        let mut cm = CountMin::new(16, 3, &mut rng).unwrap();
        for k in 0..200u64 {
            cm.update(k, (k % 5) as i64 + 1);
        }
        for k in 0..200u64 {
            assert!(cm.estimate(k) >= (k % 5) as i64 + 1);
        }
    }

    #[test]
    fn cancellation_is_exact() {
        let mut rng = rng_from_seed(2);
        let mut cm = CountMin::new(8, 2, &mut rng).unwrap();
        cm.update(7, 5);
        cm.update(7, -5);
        assert!(cm.counters.iter().all(|&c| c == 0));
    }
}
