//! Adversarial stream constructions built from two-party inputs: Alice's
//! updates followed by Bob's (including deletions).

use serde::{Deserialize, Serialize};

use crate::error::{bad_params, Result};
use crate::stream::{StreamUpdate, VecStream};

/// Constants of the bicriteria construction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BicriteriaConstants {
    /// Fraction of a chunk turned into mice when Alice's bit is set.
    pub a: f64,
    /// Subintervals per chunk, as a fraction of the chunk length.
    pub b: f64,
    /// Fraction of Bob's indices the decoder looks at.
    pub c: f64,
    /// Allowed pieces, as a fraction of `sqrt(n)`.
    pub k: f64,
}

impl Default for BicriteriaConstants {
    fn default() -> Self {
        Self {
            a: 0.5,
            b: 0.125,
            c: 0.1,
            k: 0.025,
        }
    }
}

impl BicriteriaConstants {
    /// Largest error for which the construction still decodes: `min(c/2, a(c-k)/(2b) - b)`.
    pub fn eps_bound(&self) -> f64 {
        (self.c / 2.0).min(self.a * (self.c - self.k) / (2.0 * self.b) - self.b)
    }

    /// `a + b <= 1`, `a/b` integral, `b > c > k`, and a positive error bound.
    pub fn check(&self) -> Result<()> {
        let ratio = self.a / self.b;
        let ok = self.a > 0.0
            && self.b > 0.0
            && self.a + self.b <= 1.0
            && (ratio - ratio.round()).abs() < 1e-9
            && self.b > self.c
            && self.c > self.k
            && self.k > 0.0
            && self.eps_bound() > 0.0;
        if ok {
            Ok(())
        } else {
            Err(bad_params(format!("bicriteria constants violate the constraints: {self:?}")))
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "kebab-case")]
pub enum GadgetSpec {
    /// Alice inserts every `i` with `a_i = 1`, then Bob every `j` with `b_j = 1`.
    Disjointness { a: Vec<bool>, b: Vec<bool> },
    /// Universe `[1..3n]`, `n = t^2`: blocks `A_1, B_1, ..., A_t, B_t` of length
    /// `t`, then `n` items of count 1. Alice fills `A_i` with mice when `a_i = 1`;
    /// Bob (index `j`, 1-based) clears `A_1..A_{j-1}` and plants elephants of
    /// count `t`: `floor(t/(j-1))` in each earlier `B`, `round(gamma*t)` in `B_j`.
    Proper { n: u64, a: Vec<bool>, j: usize, gamma: f64 },
    /// Domain `[1..n]`, `n = t^2`, split into `t` chunks of `b*t` subintervals.
    /// Alice adds `a/b` mice per subinterval of chunk `i` when `x_i = 1`; Bob
    /// (index `i`, 1-based) deletes the mice of earlier chunks and adds `t`
    /// copies of the first index of each subinterval of chunk `i`.
    Bicriteria {
        n: u64,
        x: Vec<bool>,
        i: usize,
        #[serde(default)]
        constants: BicriteriaConstants,
    },
}

fn exact_sqrt(n: u64) -> Result<u64> {
    let t = (n as f64).sqrt().round() as u64;
    if t == 0 || t * t != n {
        return Err(bad_params(format!("n = {n} is not a positive square")));
    }
    Ok(t)
}

impl GadgetSpec {
    pub fn domain_size(&self) -> u64 {
        match self {
            GadgetSpec::Disjointness { a, .. } => a.len() as u64,
            GadgetSpec::Proper { n, .. } => 3 * n,
            GadgetSpec::Bicriteria { n, .. } => *n,
        }
    }

    /// Bob's block `B_j` of the proper construction as `[start, end]`.
    pub fn proper_block_b(t: u64, j: u64) -> (u64, u64) {
        ((2 * j - 1) * t + 1, 2 * j * t)
    }

    /// Alice's block `A_j` of the proper construction as `[start, end]`.
    pub fn proper_block_a(t: u64, j: u64) -> (u64, u64) {
        ((2 * j - 2) * t + 1, (2 * j - 1) * t)
    }
}

pub fn gadget_stream(spec: &GadgetSpec) -> Result<VecStream> {
    match spec {
        GadgetSpec::Disjointness { a, b } => {
            if a.is_empty() || a.len() != b.len() {
                return Err(bad_params("bit vectors must be non-empty and of equal length"));
            }
            let alice = a.iter().enumerate().filter(|(_, &x)| x).map(|(i, _)| i as u64 + 1);
            let bob = b.iter().enumerate().filter(|(_, &x)| x).map(|(i, _)| i as u64 + 1);
            VecStream::from_items(a.len() as u64, alice.chain(bob))
        }
        GadgetSpec::Proper { n, a, j, gamma } => {
            let t = exact_sqrt(*n)?;
            if a.len() as u64 != t {
                return Err(bad_params(format!("need {t} bits, got {}", a.len())));
            }
            if *j == 0 || *j as u64 > t {
                return Err(bad_params(format!("index j must lie in [1..{t}]")));
            }
            if !(*gamma > 0.0 && *gamma <= 1.0) {
                return Err(bad_params("gamma must lie in (0,1]"));
            }
            let j = *j as u64;
            let mut ups = Vec::new();
            for item in 2 * n + 1..=3 * n {
                ups.push(StreamUpdate::insert(item));
            }
            for (idx, _) in a.iter().enumerate().filter(|(_, &x)| x) {
                let (lo, hi) = GadgetSpec::proper_block_a(t, idx as u64 + 1);
                ups.extend((lo..=hi).map(StreamUpdate::insert));
            }
            for (idx, _) in a.iter().enumerate().take(j as usize - 1).filter(|(_, &x)| x) {
                let (lo, hi) = GadgetSpec::proper_block_a(t, idx as u64 + 1);
                ups.extend((lo..=hi).map(|i| StreamUpdate::new(i, -1)));
            }
            let per_earlier = if j > 1 { t / (j - 1) } else { 0 };
            let elephant = t as i64;
            for block in 1..j {
                let (lo, _) = GadgetSpec::proper_block_b(t, block);
                ups.extend((lo..lo + per_earlier).map(|i| StreamUpdate::new(i, elephant)));
            }
            let last = ((gamma * t as f64).round() as u64).min(t);
            let (lo, _) = GadgetSpec::proper_block_b(t, j);
            ups.extend((lo..lo + last).map(|i| StreamUpdate::new(i, elephant)));
            VecStream::new(3 * n, ups)
        }
        GadgetSpec::Bicriteria { n, x, i, constants } => {
            constants.check()?;
            let t = exact_sqrt(*n)?;
            if x.len() as u64 != t {
                return Err(bad_params(format!("need {t} bits, got {}", x.len())));
            }
            if *i == 0 || *i as u64 > t {
                return Err(bad_params(format!("index i must lie in [1..{t}]")));
            }
            let subs = (constants.b * t as f64).round() as u64;
            let mice = (constants.a / constants.b).round() as u64;
            if subs == 0 || t % subs != 0 || t / subs < mice + 1 {
                return Err(bad_params(format!(
                    "chunk length {t} cannot hold {subs} subintervals with {mice} mice each"
                )));
            }
            let width = t / subs;
            let alice_items = |chunk: u64| {
                (0..subs).flat_map(move |s| {
                    let first = chunk * t + s * width + 1;
                    first + 1..=first + mice
                })
            };
            let mut ups = Vec::new();
            for (c, _) in x.iter().enumerate().filter(|(_, &b)| b) {
                ups.extend(alice_items(c as u64).map(StreamUpdate::insert));
            }
            for (c, _) in x.iter().enumerate().take(*i - 1).filter(|(_, &b)| b) {
                ups.extend(alice_items(c as u64).map(|it| StreamUpdate::new(it, -1)));
            }
            let chunk = *i as u64 - 1;
            for s in 0..subs {
                ups.push(StreamUpdate::new(chunk * t + s * width + 1, t as i64));
            }
            VecStream::new(*n, ups)
        }
    }
}
