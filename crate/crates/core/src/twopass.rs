//! Two-pass approximation: a heavy/light partition from hierarchical heavy
//! hitters, then exact heavy counts and sampled medians for light intervals.

use rand::Rng;
use rustc_hash::FxHashMap;
use serde::Serialize;

use crate::error::{bad_params, Error, Result};
use crate::hashing::{derive_seed, rng_from_seed};
use crate::hhh::{build_partition, experimental_threshold, hhh_exact, HhhBackend, IntervalPartition, StreamingHhh, Tile};
use crate::histogram::{lower_median, Histogram};
use crate::onepass::L0_DELTA;
use crate::sketch::{L0Outcome, L0Sampler};
use crate::stream::{replay_with, ExactDistribution, StreamSource};

/// Constant in the per-interval sample count `ceil(C * eps^-2 * ln(k/eps))`.
pub const C_MED: f64 = 16.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum HhhMode {
    /// Exact hierarchical heavy hitters from a full count of pass one.
    ExactOracle,
    Streaming(HhhBackend),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TwoPassConfig {
    pub n: u64,
    pub k: usize,
    pub eps: f64,
    /// Samplers per light interval (ignored when `space` is set).
    pub q: u64,
    pub seed: u64,
    pub hhh: HhhMode,
    /// Additive error of the streaming HHH estimates, as a fraction of `m`.
    pub eps_hh: f64,
    /// Space budget for experimental runs: heaviness threshold `log2(n)/space`
    /// and `space` samplers spread evenly over the light intervals.
    pub space: Option<u64>,
}

pub fn default_q(k: usize, eps: f64) -> u64 {
    let q = (C_MED / (eps * eps) * (k as f64 / eps).ln()).ceil();
    q.max(1.0) as u64
}

impl TwoPassConfig {
    pub fn new(n: u64, k: usize, eps: f64, seed: u64) -> Self {
        Self {
            n,
            k,
            eps,
            q: default_q(k, eps),
            seed,
            hhh: HhhMode::Streaming(HhhBackend::CountMin),
            eps_hh: eps / (8.0 * k as f64),
            space: None,
        }
    }

    pub fn with_hhh(mut self, hhh: HhhMode) -> Self {
        self.hhh = hhh;
        self
    }

    pub fn experimental(n: u64, k: usize, space: u64, seed: u64) -> Self {
        let mut cfg = Self::new(n, k, 0.5, seed);
        cfg.hhh = HhhMode::Streaming(HhhBackend::SpaceSaving);
        cfg.space = Some(space);
        cfg.eps_hh = (0.5 * experimental_threshold(n, space)).min(0.5);
        cfg
    }

    /// Heaviness threshold used in pass one.
    pub fn phi(&self) -> f64 {
        match self.space {
            Some(s) => experimental_threshold(self.n, s),
            None => self.eps / (2.0 * self.k as f64),
        }
    }

    fn validate(&self) -> Result<()> {
        if self.n == 0 || self.k == 0 || self.q == 0 {
            return Err(bad_params("n, k and q must be positive"));
        }
        if !(self.eps > 0.0 && self.eps < 1.0) {
            return Err(bad_params("eps must lie in (0,1)"));
        }
        if self.space == Some(0) {
            return Err(bad_params("space budget must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TwoPassOutput {
    pub histogram: Histogram,
    pub partition: IntervalPartition,
    /// Samplers plus exact heavy counters.
    pub space: u64,
    pub words: u64,
}

pub fn twopass_run(source: &dyn StreamSource, cfg: &TwoPassConfig) -> Result<TwoPassOutput> {
    cfg.validate()?;
    if !source.is_replayable() {
        return Err(Error::NonReplayableSource);
    }
    let n = cfg.n;
    if source.domain_size() != n {
        return Err(bad_params(format!(
            "config is for n={n} but the stream has n={}",
            source.domain_size()
        )));
    }
    let phi = cfg.phi();

    // pass 1
    let (m, hhh, hhh_words) = match cfg.hhh {
        HhhMode::ExactOracle => {
            let p = ExactDistribution::from_source(source)?;
            if p.total() == 0 {
                return Err(Error::EmptyStream);
            }
            (p.total(), hhh_exact(&p, phi)?, 0)
        }
        HhhMode::Streaming(backend) => {
            let mut sk = StreamingHhh::new(n, cfg.eps_hh, backend, derive_seed(cfg.seed, &[0]))?;
            replay_with(source, |u| sk.update(u))?;
            if sk.total() == 0 {
                return Err(Error::EmptyStream);
            }
            (sk.total(), sk.query(phi)?, sk.words())
        }
    };
    let partition = build_partition(&hhh, n, cfg.k, cfg.eps)?;

    // pass 2
    let light = &partition.light;
    let per_interval: Vec<u64> = match cfg.space {
        Some(s) => {
            let l = light.len() as u64;
            (0..l).map(|t| s / l + u64::from(t < s % l)).collect()
        }
        None => vec![cfg.q; light.len()],
    };
    let mut samplers: Vec<Vec<L0Sampler>> = light
        .iter()
        .zip(&per_interval)
        .enumerate()
        .map(|(t, (&(a, b), &cnt))| {
            (0..cnt)
                .map(|j| L0Sampler::restricted(n, a, b, L0_DELTA, derive_seed(cfg.seed, &[1, t as u64, j])))
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<_>>()?;
    let mut heavy: FxHashMap<u64, i64> = partition.heavy.iter().map(|&i| (i, 0)).collect();
    replay_with(source, |u| {
        if let Some(c) = heavy.get_mut(&u.item) {
            *c += u.delta;
            return Ok(());
        }
        let t = light.partition_point(|&(_, b)| b < u.item);
        if let Some(group) = samplers.get_mut(t) {
            for s in group.iter_mut() {
                s.update(u);
            }
        }
        Ok(())
    })?;

    let values: Vec<f64> = samplers
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
        .collect();
    let ends: Vec<(u64, f64)> = partition
        .tiles()
        .into_iter()
        .map(|tile| match tile {
            Tile::Heavy(i) => (i, heavy[&i].max(0) as f64 / m as f64),
            Tile::Light(a, b) => {
                let t = light.binary_search(&(a, b)).expect("light tile");
                (b, values[t])
            }
        })
        .collect();
    let histogram = Histogram::from_piece_ends(n, &ends)?;
    let sampler_count: u64 = per_interval.iter().sum();
    let words = hhh_words as u64
        + 2 * heavy.len() as u64
        + samplers.iter().flatten().map(|s| s.words() as u64).sum::<u64>();
    Ok(TwoPassOutput {
        histogram,
        space: sampler_count + heavy.len() as u64,
        words,
        partition,
    })
}

/// Monte-Carlo estimate of `P(cost(sample median) - cost(median) > eps * sum(masses))`
/// where the sample median is the lower median of `s` uniform draws (with
/// replacement) from `masses`, and `cost(v) = sum |x - v|`.
pub fn median_tail_check(masses: &[f64], s: usize, eps: f64, trials: usize, seed: u64) -> Result<f64> {
    if masses.is_empty() || s == 0 || trials == 0 {
        return Err(bad_params("need non-empty masses, s >= 1 and trials >= 1"));
    }
    if masses.iter().any(|x| !(0.0..=1.0).contains(x)) {
        return Err(bad_params("masses must lie in [0,1]"));
    }
    let cost = |v: f64| masses.iter().map(|&x| (x - v).abs()).sum::<f64>();
    let best = cost(lower_median(masses).expect("non-empty"));
    let beta: f64 = masses.iter().sum();
    let mut rng = rng_from_seed(seed);
    let mut draw = vec![0.0; s];
    let mut failures = 0usize;
    for _ in 0..trials {
        for d in draw.iter_mut() {
            *d = masses[rng.random_range(0..masses.len())];
        }
        let med = lower_median(&draw).expect("s >= 1");
        if cost(med) - best > eps * beta {
            failures += 1;
        }
    }
    Ok(failures as f64 / trials as f64)
}
