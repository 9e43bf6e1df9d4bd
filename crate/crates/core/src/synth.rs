//! Deterministic synthetic stream generators.

use rand::seq::{index, SliceRandom};
use rand::Rng;
use rand_distr::{Distribution, Zipf};
use serde::{Deserialize, Serialize};

use crate::error::{bad_params, Result};
use crate::hashing::rng_from_seed;
use crate::stream::{StreamUpdate, VecStream};

/// Largest domain for which Zipf ranks are scattered through a materialized permutation.
const MAX_SCATTER_DOMAIN: u64 = 1 << 26;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum SyntheticKind {
    /// Every even item inserted `count_per_item` times.
    EvenUniform { count_per_item: u64 },
    /// `length` i.i.d. Zipf draws. With `scatter`, ranks are mapped to items
    /// through a seeded permutation; otherwise rank `r` is item `r`.
    Zipf { exponent: f64, length: u64, scatter: bool },
    /// `length` uniform draws from `support` distinct random items.
    UniformSparse { support: u64, length: u64 },
    /// `mice` items of count `mice_count` and `elephants` items of count
    /// `elephant_count` at distinct random positions.
    MiceElephants {
        mice: u64,
        mice_count: u64,
        elephants: u64,
        elephant_count: u64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub n: u64,
    #[serde(flatten)]
    pub kind: SyntheticKind,
    /// Number of transient items interleaved into the stream: each is
    /// inserted and deleted again later, so the final distribution is unchanged
    /// but the stream exercises the turnstile path.
    #[serde(default)]
    pub transient: u64,
}

impl SyntheticSpec {
    pub fn new(n: u64, kind: SyntheticKind) -> Self {
        Self { n, kind, transient: 0 }
    }

    pub fn with_transient(mut self, transient: u64) -> Self {
        self.transient = transient;
        self
    }
}

pub fn generate_synthetic(spec: &SyntheticSpec, seed: u64) -> Result<VecStream> {
    let n = spec.n;
    if n < 2 {
        return Err(bad_params("domain size must be at least 2"));
    }
    let mut rng = rng_from_seed(seed);
    let mut updates: Vec<StreamUpdate> = match spec.kind {
        SyntheticKind::EvenUniform { count_per_item } => {
            if count_per_item == 0 {
                return Err(bad_params("count_per_item must be positive"));
            }
            (1..=n / 2)
                .flat_map(|j| std::iter::repeat_n(StreamUpdate::insert(2 * j), count_per_item as usize))
                .collect()
        }
        SyntheticKind::Zipf {
            exponent,
            length,
            scatter,
        } => {
            if !(exponent > 0.0) || length == 0 {
                return Err(bad_params("zipf needs exponent > 0 and length > 0"));
            }
            if scatter && n > MAX_SCATTER_DOMAIN {
                return Err(bad_params(format!("scattered zipf supports n <= {MAX_SCATTER_DOMAIN}")));
            }
            let zipf = Zipf::new(n as f64, exponent).map_err(|e| bad_params(e.to_string()))?;
            let perm: Option<Vec<u64>> = scatter.then(|| {
                let mut p: Vec<u64> = (1..=n).collect();
                p.shuffle(&mut rng);
                p
            });
            (0..length)
                .map(|_| {
                    let rank = (zipf.sample(&mut rng) as u64).clamp(1, n);
                    let item = perm.as_ref().map_or(rank, |p| p[(rank - 1) as usize]);
                    StreamUpdate::insert(item)
                })
                .collect()
        }
        SyntheticKind::UniformSparse { support, length } => {
            if support == 0 || support > n || length == 0 {
                return Err(bad_params("uniform-sparse needs 0 < support <= n and length > 0"));
            }
            let items = distinct_items(&mut rng, n, support)?;
            (0..length)
                .map(|_| StreamUpdate::insert(items[rng.random_range(0..items.len())]))
                .collect()
        }
        SyntheticKind::MiceElephants {
            mice,
            mice_count,
            elephants,
            elephant_count,
        } => {
            if mice + elephants == 0 || mice + elephants > n {
                return Err(bad_params("need 0 < mice + elephants <= n"));
            }
            if (mice > 0 && mice_count == 0) || (elephants > 0 && elephant_count == 0) {
                return Err(bad_params("mice and elephant counts must be positive"));
            }
            let items = distinct_items(&mut rng, n, mice + elephants)?;
            let (big, small) = items.split_at(elephants as usize);
            let mut ups = Vec::new();
            for &i in big {
                ups.extend(std::iter::repeat_n(StreamUpdate::insert(i), elephant_count as usize));
            }
            for &i in small {
                ups.extend(std::iter::repeat_n(StreamUpdate::insert(i), mice_count as usize));
            }
            ups.shuffle(&mut rng);
            ups
        }
    };
    if spec.transient > 0 {
        updates = interleave_transient(updates, n, spec.transient, &mut rng);
    }
    VecStream::new(n, updates)
}

fn distinct_items<R: Rng>(rng: &mut R, n: u64, amount: u64) -> Result<Vec<u64>> {
    let n_usize = usize::try_from(n).map_err(|_| bad_params("domain too large"))?;
    Ok(index::sample(rng, n_usize, amount as usize)
        .into_iter()
        .map(|i| i as u64 + 1)
        .collect())
}

/// Inserts `transient` (+1, later -1) pairs at random positions.
fn interleave_transient<R: Rng>(base: Vec<StreamUpdate>, n: u64, transient: u64, rng: &mut R) -> Vec<StreamUpdate> {
    // Keys place each update on a line; ties resolve by insertion order via the stable sort.
    let len = base.len() as u64 + 1;
    let mut keyed: Vec<(u64, u8, StreamUpdate)> = base
        .into_iter()
        .enumerate()
        .map(|(pos, u)| (pos as u64 * 2 + 1, 1, u))
        .collect();
    for _ in 0..transient {
        let item = rng.random_range(1..=n);
        let a = rng.random_range(0..len) * 2;
        let b = rng.random_range(0..len) * 2;
        let (ins, del) = if a <= b { (a, b) } else { (b, a) };
        keyed.push((ins, 0, StreamUpdate::new(item, 1)));
        keyed.push((del, 2, StreamUpdate::new(item, -1)));
    }
    keyed.sort_by_key(|&(pos, phase, _)| (pos, phase));
    keyed.into_iter().map(|(_, _, u)| u).collect()
}
