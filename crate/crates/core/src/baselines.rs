//! Fixed-partition baselines: `k` equal-width pieces, each valued by the
//! median of a per-piece sample.

use rand::Rng;
use rustc_hash::FxHashMap;
use serde::Serialize;

use crate::error::{bad_params, Error, Result};
use crate::hashing::{derive_seed, rng_from_seed};
use crate::histogram::{lower_median, Histogram};
use crate::onepass::L0_DELTA;
use crate::sketch::{L0Outcome, L0Sampler};
use crate::stream::{replay_with, StreamSource};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum BaselineVariant {
    /// L0 samples restricted to each piece: medians over supported items only.
    Support,
    /// Uniform domain indices in each piece: zero masses take part in the median.
    Domain,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BaselineConfig {
    pub n: u64,
    pub k: usize,
    /// Total sample budget; each piece gets `floor(s/k)`.
    pub s: u64,
    pub seed: u64,
    pub variant: BaselineVariant,
}

impl BaselineConfig {
    pub fn new(n: u64, k: usize, s: u64, seed: u64, variant: BaselineVariant) -> Self {
        Self { n, k, s, seed, variant }
    }

    /// Number of pieces grows with the budget: `k = max(1, s / divisor)`.
    pub fn scaled(n: u64, s: u64, divisor: u64, seed: u64, variant: BaselineVariant) -> Self {
        let k = (s / divisor.max(1)).max(1) as usize;
        Self::new(n, k, s, seed, variant)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BaselineOutput {
    pub histogram: Histogram,
    pub space: u64,
    pub words: u64,
}

/// `[floor(j*n/k)+1, floor((j+1)*n/k)]` for `j = 0..k`.
pub fn equal_width_pieces(n: u64, k: usize) -> Vec<(u64, u64)> {
    let k = k as u128;
    (0..k)
        .map(|j| {
            let a = (j * n as u128 / k) as u64 + 1;
            let b = ((j + 1) * n as u128 / k) as u64;
            (a, b)
        })
        .collect()
}

pub fn fixed_baseline(source: &dyn StreamSource, cfg: &BaselineConfig) -> Result<BaselineOutput> {
    let n = cfg.n;
    if n == 0 || cfg.k == 0 {
        return Err(bad_params("n and k must be positive"));
    }
    if cfg.k as u64 > cfg.s {
        return Err(bad_params("k must not exceed the sample budget"));
    }
    if cfg.k as u64 > n {
        return Err(bad_params("k must not exceed n"));
    }
    if source.domain_size() != n {
        return Err(bad_params(format!(
            "config is for n={n} but the stream has n={}",
            source.domain_size()
        )));
    }
    let pieces = equal_width_pieces(n, cfg.k);
    let per = cfg.s / cfg.k as u64;
    let mut total: i64 = 0;
    let (values, words) = match cfg.variant {
        BaselineVariant::Support => {
            let mut samplers: Vec<Vec<L0Sampler>> = pieces
                .iter()
                .enumerate()
                .map(|(t, &(a, b))| {
                    (0..per)
                        .map(|j| L0Sampler::restricted(n, a, b, L0_DELTA, derive_seed(cfg.seed, &[t as u64, j])))
                        .collect::<Result<Vec<_>>>()
                })
                .collect::<Result<_>>()?;
            replay_with(source, |u| {
                total += u.delta;
                let t = pieces.partition_point(|&(_, b)| b < u.item);
                for s in samplers[t].iter_mut() {
                    s.update(u);
                }
                Ok(())
            })?;
            if total <= 0 {
                return Err(Error::EmptyStream);
            }
            let m = total as u64;
            let values = samplers
                .iter()
                .map(|group| {
                    let masses: Vec<f64> = group
                        .iter()
                        .filter_map(|s| match s.sample(m) {
                            L0Outcome::Sampled { mass, .. } => Some(mass),
                            _ => None,
                        })
                        .collect();
                    lower_median(&masses).unwrap_or(0.0)
                })
                .collect::<Vec<_>>();
            let words = samplers.iter().flatten().map(|s| s.words() as u64).sum();
            (values, words)
        }
        BaselineVariant::Domain => {
            let mut rng = rng_from_seed(derive_seed(cfg.seed, &[u64::MAX]));
            let drawn: Vec<Vec<u64>> = pieces
                .iter()
                .map(|&(a, b)| (0..per).map(|_| rng.random_range(a..=b)).collect())
                .collect();
            let mut counters: FxHashMap<u64, i64> = drawn.iter().flatten().map(|&i| (i, 0)).collect();
            replay_with(source, |u| {
                total += u.delta;
                if let Some(c) = counters.get_mut(&u.item) {
                    *c += u.delta;
                }
                Ok(())
            })?;
            if total <= 0 {
                return Err(Error::EmptyStream);
            }
            let m = total as f64;
            let values = drawn
                .iter()
                .map(|idx| {
                    let masses: Vec<f64> = idx.iter().map(|i| counters[i].max(0) as f64 / m).collect();
                    lower_median(&masses).unwrap_or(0.0)
                })
                .collect();
            (values, 2 * counters.len() as u64)
        }
    };
    let ends: Vec<(u64, f64)> = pieces.iter().zip(values).map(|(&(_, b), v)| (b, v)).collect();
    Ok(BaselineOutput {
        histogram: Histogram::from_piece_ends(n, &ends)?,
        space: per * cfg.k as u64,
        words: words + 1,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::histogram::support_error;
    use crate::stream::{ExactDistribution, VecStream};

    #[test]
    fn equal_widths() {
        for (n, k) in [(10u64, 3usize), (100, 7), (5, 5), (1 << 20, 9)] {
            let p = equal_width_pieces(n, k);
            assert_eq!(p.len(), k);
            assert_eq!(p[0].0, 1);
            assert_eq!(p[k - 1].1, n);
            for w in p.windows(2) {
                assert_eq!(w[0].1 + 1, w[1].0);
            }
            for (a, b) in p {
                let len = b - a + 1;
                assert!(len == n / k as u64 || len == n.div_ceil(k as u64));
            }
        }
    }

    #[test]
    fn dense_uniform_is_fit_by_both() {
        let n = 500;
        let s = VecStream::from_items(n, 1..=n).unwrap();
        let p = ExactDistribution::from_source(&s).unwrap();
        for variant in [BaselineVariant::Support, BaselineVariant::Domain] {
            let out = fixed_baseline(&s, &BaselineConfig::new(n, 5, 50, 1, variant)).unwrap();
            assert_eq!(out.histogram.piece_count(), 5);
            assert!(support_error(&p, &out.histogram).unwrap() < 1e-12);
        }
    }

    #[test]
    fn sparse_support_separates_variants() {
        let n = 10_000;
        let s = VecStream::from_items(n, (0..100u64).map(|j| 1 + j * 100)).unwrap();
        let p = ExactDistribution::from_source(&s).unwrap();
        let dom = fixed_baseline(&s, &BaselineConfig::new(n, 5, 100, 2, BaselineVariant::Domain)).unwrap();
        assert!(dom.histogram.values().iter().all(|&v| v == 0.0));
        let sup = fixed_baseline(&s, &BaselineConfig::new(n, 5, 100, 2, BaselineVariant::Support)).unwrap();
        assert!(sup.histogram.values().iter().all(|&v| v == 0.01));
        assert!(support_error(&p, &sup.histogram).unwrap() < 1e-12);
        assert!((support_error(&p, &dom.histogram).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn one_sample_per_piece() {
        let n = 40;
        let s = VecStream::from_items(n, [3, 3, 15, 38]).unwrap();
        let out = fixed_baseline(&s, &BaselineConfig::new(n, 4, 4, 0, BaselineVariant::Support)).unwrap();
        assert_eq!(out.histogram.values(), &[0.5, 0.25, 0.0, 0.25]);
    }

    #[test]
    fn scaled_k() {
        let cfg = BaselineConfig::scaled(1000, 300, 3, 0, BaselineVariant::Domain);
        assert_eq!(cfg.k, 100);
        assert!(fixed_baseline(
            &VecStream::from_items(10, [1]).unwrap(),
            &BaselineConfig::new(10, 5, 4, 0, BaselineVariant::Domain)
        )
        .is_err());
    }
}
