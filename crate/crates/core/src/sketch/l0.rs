use crate::error::{bad_params, Result};
use crate::hashing::{rng_from_seed, MultiplyShift, MultiplyShift32};
use crate::stream::StreamUpdate;

/// Linear summary that recovers `(x, c)` when its input is exactly `c` copies of `x`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct OneSparseUnit {
    pub count_sum: i64,
    pub index_sum: i128,
    pub index_sq_sum: i128,
}

impl OneSparseUnit {
    #[inline]
    pub fn update(&mut self, item: u64, delta: i64) {
        let x = item as i128;
        let d = delta as i128;
        self.count_sum += delta;
        self.index_sum += x * d;
        self.index_sq_sum += x * x * d;
    }

    #[inline]
    fn add(&mut self, other: &OneSparseUnit) {
        self.count_sum += other.count_sum;
        self.index_sum += other.index_sum;
        self.index_sq_sum += other.index_sq_sum;
    }

    pub fn is_zero(&self) -> bool {
        *self == Self::default()
    }

    /// `Some((item, count))` iff the summarized non-negative vector is 1-sparse.
    ///
    /// With non-negative counts `c_j` summing to `C`, Cauchy-Schwarz gives
    /// `(sum c_j x_j)^2 <= C * sum c_j x_j^2` with equality iff a single `x_j`
    /// carries all the weight, so the test has no false positives.
    pub fn recover(&self) -> Option<(u64, u64)> {
        if self.count_sum <= 0 {
            return None;
        }
        let c = self.count_sum as i128;
        if self.index_sum <= 0 || self.index_sum % c != 0 {
            return None;
        }
        let x = self.index_sum / c;
        let expect = c.checked_mul(x)?.checked_mul(x)?;
        (expect == self.index_sq_sum).then_some((x as u64, self.count_sum as u64))
    }
}

/// Result of one L0 draw.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum L0Outcome {
    Sampled { item: u64, count: u64, mass: f64 },
    /// The (restricted) support is empty.
    EmptySupport,
    /// No repetition isolated a single item.
    Failed,
}

#[derive(Debug, Clone)]
enum LevelHash {
    Narrow(MultiplyShift32),
    Wide(MultiplyShift),
}

impl LevelHash {
    /// Geometric level: `P(level >= l) = 2^-l`.
    #[inline]
    fn level(&self, item: u64) -> u32 {
        match self {
            LevelHash::Narrow(h) => h.hash((item - 1) as u32).leading_zeros(),
            LevelHash::Wide(h) => h.hash(item - 1).leading_zeros(),
        }
    }
}

#[derive(Debug, Clone)]
struct Repetition {
    hash: LevelHash,
    units: Vec<OneSparseUnit>,
}

/// Number of independent repetitions for failure probability `delta`,
/// assuming each repetition fails with probability at most 1/3.
pub fn l0_repetitions(delta: f64) -> usize {
    ((1.0 / delta).ln() / 3f64.ln()).ceil().max(1.0) as usize
}

/// L0 sampler over a strict turnstile stream, optionally restricted to `[a, b]`.
///
/// Each repetition assigns items geometric levels and keeps one 1-sparse unit
/// per level holding the items at exactly that level; suffix sums give the
/// units for "this level or deeper". The deepest non-empty level isolates a
/// uniformly random support item unless two items tie there.
#[derive(Debug, Clone)]
pub struct L0Sampler {
    restriction: Option<(u64, u64)>,
    reps: Vec<Repetition>,
}

impl L0Sampler {
    pub fn new(n: u64, delta: f64, seed: u64) -> Result<Self> {
        Self::build(n, None, delta, seed)
    }

    pub fn restricted(n: u64, a: u64, b: u64, delta: f64, seed: u64) -> Result<Self> {
        if a == 0 || a > b || b > n {
            return Err(bad_params(format!("restriction [{a},{b}] not inside [1..{n}]")));
        }
        Self::build(n, Some((a, b)), delta, seed)
    }

    fn build(n: u64, restriction: Option<(u64, u64)>, delta: f64, seed: u64) -> Result<Self> {
        if n == 0 {
            return Err(bad_params("domain must be non-empty"));
        }
        if !(delta > 0.0 && delta < 1.0) {
            return Err(bad_params("delta must lie in (0,1)"));
        }
        let span = match restriction {
            Some((a, b)) => b - a + 1,
            None => n,
        };
        let narrow = n <= 1 << 32;
        let max_bits = if narrow { 32 } else { 64 };
        let levels = ((64 - span.leading_zeros()) as usize + 2).min(max_bits + 1);
        let mut rng = rng_from_seed(seed);
        let reps = (0..l0_repetitions(delta))
            .map(|_| Repetition {
                hash: if narrow {
                    LevelHash::Narrow(MultiplyShift32::from_rng(&mut rng))
                } else {
                    LevelHash::Wide(MultiplyShift::from_rng(&mut rng))
                },
                units: vec![OneSparseUnit::default(); levels],
            })
            .collect();
        Ok(Self { restriction, reps })
    }

    pub fn restriction(&self) -> Option<(u64, u64)> {
        self.restriction
    }

    #[inline]
    pub fn update(&mut self, u: StreamUpdate) {
        if let Some((a, b)) = self.restriction {
            if u.item < a || u.item > b {
                return;
            }
        }
        for rep in &mut self.reps {
            let top = (rep.hash.level(u.item) as usize).min(rep.units.len() - 1);
            rep.units[top].update(u.item, u.delta);
        }
    }

    /// Draws the sample; `m` is the stream's total count, used only to report `mass`.
    pub fn sample(&self, m: u64) -> L0Outcome {
        if self.reps[0].units.iter().all(|u| u.count_sum == 0) {
            return L0Outcome::EmptySupport;
        }
        for rep in &self.reps {
            let mut acc = OneSparseUnit::default();
            let found = rep.units.iter().rev().find_map(|u| {
                acc.add(u);
                acc.recover()
            });
            if let Some((item, count)) = found {
                let mass = if m == 0 { 0.0 } else { count as f64 / m as f64 };
                return L0Outcome::Sampled { item, count, mass };
            }
        }
        L0Outcome::Failed
    }

    pub fn words(&self) -> usize {
        self.reps.iter().map(|r| 3 * r.units.len()).sum()
    }

    #[cfg(test)]
    fn units(&self) -> impl Iterator<Item = &OneSparseUnit> {
        self.reps.iter().flat_map(|r| r.units.iter())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn one_sparse_recovery() {
        let mut u = OneSparseUnit::default();
        u.update(5, 7);
        assert_eq!(u.recover(), Some((5, 7)));
        u.update(9, 1);
        assert_eq!(u.recover(), None);
        u.update(9, -1);
        assert_eq!(u.recover(), Some((5, 7)));
        u.update(5, -7);
        assert!(u.is_zero());
        assert_eq!(u.recover(), None);
    }

    #[test]
    fn recovery_rejects_all_small_two_sparse_vectors() {
        for x in 1..30u64 {
            for y in x + 1..30 {
                for cx in 1..5 {
                    for cy in 1..5 {
                        let mut u = OneSparseUnit::default();
                        u.update(x, cx);
                        u.update(y, cy);
                        assert_eq!(u.recover(), None);
                    }
                }
            }
        }
    }

    #[test]
    fn singleton_support() {
        let mut s = L0Sampler::new(100, 0.01, 3).unwrap();
        s.update(StreamUpdate::new(5, 7));
        assert_eq!(
            s.sample(70),
            L0Outcome::Sampled {
                item: 5,
                count: 7,
                mass: 0.1
            }
        );
    }

    #[test]
    fn empty_and_filtered() {
        let mut s = L0Sampler::restricted(100, 10, 20, 0.01, 3).unwrap();
        s.update(StreamUpdate::new(5, 3));
        s.update(StreamUpdate::new(50, 3));
        assert!(s.units().all(OneSparseUnit::is_zero));
        assert_eq!(s.sample(6), L0Outcome::EmptySupport);
        s.update(StreamUpdate::new(12, 1));
        s.update(StreamUpdate::new(12, -1));
        assert!(s.units().all(OneSparseUnit::is_zero));
    }

    #[test]
    fn order_independent_state() {
        let ups = [(3u64, 2i64), (8, 1), (3, -1), (40, 5)];
        let mut a = L0Sampler::new(64, 0.05, 9).unwrap();
        let mut b = L0Sampler::new(64, 0.05, 9).unwrap();
        for &(i, d) in &ups {
            a.update(StreamUpdate::new(i, d));
        }
        for &(i, d) in ups.iter().rev() {
            b.update(StreamUpdate::new(i, d));
        }
        assert!(a.units().eq(b.units()));
    }

    #[test]
    fn two_items_split_evenly() {
        let trials = 20_000;
        let mut first = 0;
        for seed in 0..trials {
            let mut s = L0Sampler::new(1 << 20, 0.01, seed).unwrap();
            s.update(StreamUpdate::new(1000, 3));
            s.update(StreamUpdate::new(777_777, 1));
            if let L0Outcome::Sampled { item, .. } = s.sample(4) {
                if item == 1000 {
                    first += 1;
                }
            }
        }
        let frac = first as f64 / trials as f64;
        assert!((frac - 0.5).abs() < 0.02, "{frac}");
    }

    #[test]
    fn recovered_counts_are_exact() {
        let mut s = L0Sampler::new(1000, 0.01, 1).unwrap();
        let counts = [(10u64, 4u64), (20, 9), (999, 1)];
        for &(i, c) in &counts {
            s.update(StreamUpdate::new(i, c as i64));
        }
        for seed in 0..200 {
            let mut t = L0Sampler::new(1000, 0.01, seed).unwrap();
            for &(i, c) in &counts {
                t.update(StreamUpdate::new(i, c as i64));
            }
            if let L0Outcome::Sampled { item, count, .. } = t.sample(14) {
                assert!(counts.contains(&(item, count)));
            }
        }
    }
}
