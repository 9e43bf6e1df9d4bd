//! One-pass approximation: heavy hitters get their own pieces, the rest of
//! the distribution is fitted from a sample.

use rand::Rng;
use rustc_hash::{FxHashMap, FxHashSet};
use serde::Serialize;

use crate::dp::{optimal_histogram_samples, optimal_segments_samples};
use crate::error::{bad_params, Error, Result};
use crate::hashing::{derive_seed, rng_from_seed};
use crate::histogram::{lower_median, Histogram, WeightedPointSet};
use crate::sketch::{HeavyHitterSketch, L0Outcome, L0Sampler};
use crate::stream::{replay_with, StreamSource, StreamUpdate};

/// Failure probability of each L0 sampler.
pub const L0_DELTA: f64 = 0.01;

const L0_BATCH: usize = 256;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum OnePassMode {
    /// Sample size and heavy-hitter threshold from the worst-case analysis.
    Theoretical,
    /// A space budget split evenly between space-saving entries and L0 samples;
    /// inter-sample gaps take the median mass of all samples.
    Experimental,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OnePassConfig {
    pub n: u64,
    pub k: usize,
    pub eps: f64,
    /// Sample count (theoretical) or total space budget (experimental).
    pub s: u64,
    /// Heavy-hitter threshold parameter: items with mass `>= 1/ell` are isolated.
    pub ell: f64,
    pub seed: u64,
    /// Upper bound on the support size; switches sampling to L0 samplers.
    pub support_bound: Option<u64>,
    pub mode: OnePassMode,
}

/// `ceil(4 * sqrt(n) * log2(n) * k / eps^3)`, capped at `n`.
pub fn default_sample_count(n: u64, k: usize, eps: f64) -> u64 {
    let nf = n.max(2) as f64;
    let s = (4.0 * nf.sqrt() * nf.log2() * k as f64 / eps.powi(3)).ceil();
    (s as u64).clamp(1, n.max(1))
}

impl OnePassConfig {
    pub fn theoretical(n: u64, k: usize, eps: f64, seed: u64) -> Self {
        Self {
            n,
            k,
            eps,
            s: default_sample_count(n, k, eps),
            ell: (n as f64).sqrt() / (eps * eps),
            seed,
            support_bound: None,
            mode: OnePassMode::Theoretical,
        }
    }

    /// L0-sampling variant for supports of size at most `support_bound`:
    /// the sample count follows the same formula with `n` replaced by the bound.
    pub fn with_support_bound(mut self, support_bound: u64) -> Self {
        self.support_bound = Some(support_bound);
        self.s = default_sample_count(support_bound, self.k, self.eps);
        self
    }

    pub fn experimental(n: u64, k: usize, space: u64, seed: u64) -> Self {
        Self {
            n,
            k,
            eps: 0.5,
            s: space,
            ell: (space / 2).max(1) as f64,
            seed,
            support_bound: None,
            mode: OnePassMode::Experimental,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.n == 0 || self.k == 0 || self.s == 0 {
            return Err(bad_params("n, k and s must be positive"));
        }
        if !(self.eps > 0.0 && self.eps < 1.0) {
            return Err(bad_params("eps must lie in (0,1)"));
        }
        if self.mode == OnePassMode::Experimental && self.s < 2 {
            return Err(bad_params("experimental mode needs a space budget of at least 2"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OnePassOutput {
    pub histogram: Histogram,
    /// Samples drawn plus heavy-hitter entries kept.
    pub space: u64,
    /// Words held by all sketches and counters.
    pub words: u64,
    /// Number of isolated heavy items.
    pub heavy: usize,
}

enum Sampling {
    Uniform(FxHashMap<u64, i64>, Vec<u64>),
    L0(Vec<L0Sampler>),
}

pub fn onepass_run(source: &dyn StreamSource, cfg: &OnePassConfig) -> Result<OnePassOutput> {
    cfg.validate()?;
    if source.domain_size() != cfg.n {
        return Err(bad_params(format!(
            "config is for n={} but the stream has n={}",
            cfg.n,
            source.domain_size()
        )));
    }
    let n = cfg.n;
    let experimental = cfg.mode == OnePassMode::Experimental;
    let (mut hh, draws) = if experimental {
        let half = cfg.s / 2;
        (HeavyHitterSketch::with_capacity(n, half as usize)?, cfg.s - half)
    } else {
        (HeavyHitterSketch::turnstile(n, cfg.ell, cfg.eps, derive_seed(cfg.seed, &[0]))?, cfg.s)
    };
    let mut sampling = if experimental || cfg.support_bound.is_some() {
        Sampling::L0(
            (0..draws)
                .map(|j| L0Sampler::new(n, L0_DELTA, derive_seed(cfg.seed, &[1, j])))
                .collect::<Result<_>>()?,
        )
    } else {
        let mut rng = rng_from_seed(derive_seed(cfg.seed, &[2]));
        let drawn: Vec<u64> = (0..draws).map(|_| rng.random_range(1..=n)).collect();
        let counters = drawn.iter().map(|&i| (i, 0)).collect();
        Sampling::Uniform(counters, drawn)
    };

    // Updates are applied to the samplers in small batches so that each
    // sampler stays in cache while it absorbs a batch.
    let mut pending: Vec<StreamUpdate> = Vec::with_capacity(L0_BATCH);
    fn flush(sampling: &mut Sampling, pending: &mut Vec<StreamUpdate>) {
        if let Sampling::L0(samplers) = sampling {
            for s in samplers.iter_mut() {
                for &u in pending.iter() {
                    s.update(u);
                }
            }
        }
        pending.clear();
    }
    let mut total: i64 = 0;
    replay_with(source, |u| {
        hh.update(u)?;
        total += u.delta;
        match &mut sampling {
            Sampling::Uniform(counters, _) => {
                if let Some(c) = counters.get_mut(&u.item) {
                    *c += u.delta;
                }
            }
            Sampling::L0(_) => {
                pending.push(u);
                if pending.len() == L0_BATCH {
                    flush(&mut sampling, &mut pending);
                }
            }
        }
        Ok(())
    })?;
    flush(&mut sampling, &mut pending);
    if total <= 0 {
        return Err(Error::EmptyStream);
    }
    let m = total as u64;

    let z = if experimental { hh.monitored(m)? } else { hh.query(cfg.ell, m)? };
    let in_z: FxHashSet<u64> = z.iter().map(|&(i, _)| i).collect();
    let (all_samples, sample_words) = match &sampling {
        Sampling::Uniform(counters, drawn) => (
            drawn
                .iter()
                .map(|i| (*i, counters[i].max(0) as f64 / m as f64))
                .collect::<Vec<_>>(),
            2 * counters.len() as u64,
        ),
        Sampling::L0(samplers) => (
            samplers
                .iter()
                .filter_map(|s| match s.sample(m) {
                    L0Outcome::Sampled { item, mass, .. } => Some((item, mass)),
                    _ => None,
                })
                .collect(),
            samplers.iter().map(|s| s.words() as u64).sum(),
        ),
    };
    let points = WeightedPointSet::new(
        all_samples
            .iter()
            .copied()
            .filter(|&(i, mass)| mass > 0.0 && !in_z.contains(&i))
            .collect(),
    )?;

    let base = if experimental {
        let masses: Vec<f64> = all_samples.iter().map(|&(_, p)| p).collect();
        let fill = lower_median(&masses).unwrap_or(0.0);
        let segs = optimal_segments_samples(&points, cfg.k)?;
        let mut ends = Vec::with_capacity(2 * segs.len() + 1);
        let mut next = 1;
        for (first, last, v) in segs {
            if first > next {
                ends.push((first - 1, fill));
            }
            ends.push((last, v));
            next = last + 1;
        }
        if next <= n {
            ends.push((n, fill));
        }
        Histogram::from_piece_ends(n, &ends)?
    } else {
        optimal_histogram_samples(&points, cfg.k, n)?
    };
    let histogram = base.with_singletons(&z)?;
    Ok(OnePassOutput {
        histogram,
        space: draws + if experimental { cfg.s / 2 } else { z.len() as u64 },
        words: hh.words() as u64 + sample_words,
        heavy: z.len(),
    })
}
