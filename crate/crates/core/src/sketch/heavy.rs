use std::cmp::Reverse;

use crate::error::{bad_params, Error, Result};
use crate::hashing::rng_from_seed;
use crate::sketch::{CountMin, SpaceSaving};
use crate::stream::StreamUpdate;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HhMode {
    /// Dyadic count-min hierarchy; accepts deletions.
    Turnstile,
    /// Space-saving; rejects negative deltas.
    InsertionOnly,
}

#[derive(Debug, Clone, PartialEq)]
enum Level {
    Exact(Vec<i64>),
    Sketch(CountMin),
}

impl Level {
    fn update(&mut self, node: u64, delta: i64) {
        match self {
            Level::Exact(c) => c[node as usize] += delta,
            Level::Sketch(cm) => cm.update(node, delta),
        }
    }

    fn estimate(&self, node: u64) -> i64 {
        match self {
            Level::Exact(c) => c[node as usize],
            Level::Sketch(cm) => cm.estimate(node),
        }
    }

    fn words(&self) -> usize {
        match self {
            Level::Exact(c) => c.len(),
            Level::Sketch(cm) => cm.words(),
        }
    }
}

#[derive(Debug, Clone)]
enum Inner {
    Dyadic(Vec<Level>),
    Saving(SpaceSaving),
}

/// L1 heavy hitters: every item with `p_i >= 1/ell` is reported with an
/// estimate within `eps/ell` of its mass (with high probability).
///
/// In turnstile mode level `d` of the hierarchy counts the dyadic blocks
/// `(item-1) >> d`. Levels small enough to fit in the count-min footprint are
/// kept as exact arrays.
#[derive(Debug, Clone)]
pub struct HeavyHitterSketch {
    n: u64,
    ell: f64,
    eps: f64,
    inner: Inner,
}

fn check(n: u64, ell: f64, eps: f64) -> Result<()> {
    if n == 0 {
        return Err(bad_params("domain must be non-empty"));
    }
    if !(ell >= 1.0) {
        return Err(bad_params("ell must be at least 1"));
    }
    if !(eps > 0.0 && eps < 1.0) {
        return Err(bad_params("eps must lie in (0,1)"));
    }
    Ok(())
}

/// Number of dyadic levels needed so the top level is a single node.
pub(crate) fn dyadic_levels(n: u64) -> usize {
    (64 - (n.max(2) - 1).leading_zeros()) as usize + 1
}

impl HeavyHitterSketch {
    pub fn turnstile(n: u64, ell: f64, eps: f64, seed: u64) -> Result<Self> {
        check(n, ell, eps)?;
        let levels = dyadic_levels(n);
        let width = (2.0 * ell / eps).ceil() as usize;
        let queries = levels as f64 * (4.0 * ell / eps).ceil();
        let depth = (queries * 20.0).log2().ceil().max(1.0) as usize;
        let mut rng = rng_from_seed(seed);
        let mut out = Vec::with_capacity(levels);
        for d in 0..levels {
            let nodes = ((n - 1) >> d) as usize + 1;
            if nodes <= width * depth {
                out.push(Level::Exact(vec![0; nodes]));
            } else {
                out.push(Level::Sketch(CountMin::new(width, depth, &mut rng)?));
            }
        }
        Ok(Self {
            n,
            ell,
            eps,
            inner: Inner::Dyadic(out),
        })
    }

    /// Space-saving sized so the additive error is at most `eps/(2 ell)` of the mass.
    pub fn insertion_only(n: u64, ell: f64, eps: f64) -> Result<Self> {
        check(n, ell, eps)?;
        let capacity = (2.0 * ell / eps).ceil() as usize;
        Ok(Self {
            n,
            ell,
            eps,
            inner: Inner::Saving(SpaceSaving::new(capacity)?),
        })
    }

    /// Space-saving with an explicit number of monitored items.
    pub fn with_capacity(n: u64, capacity: usize) -> Result<Self> {
        if n == 0 {
            return Err(bad_params("domain must be non-empty"));
        }
        let ell = capacity.max(1) as f64;
        Ok(Self {
            n,
            ell,
            eps: 0.5,
            inner: Inner::Saving(SpaceSaving::new(capacity)?),
        })
    }

    pub fn mode(&self) -> HhMode {
        match self.inner {
            Inner::Dyadic(_) => HhMode::Turnstile,
            Inner::Saving(_) => HhMode::InsertionOnly,
        }
    }

    /// Upper bound on `|Z|`.
    pub fn max_reported(&self) -> usize {
        (4.0 * self.ell / self.eps).ceil() as usize
    }

    pub fn update(&mut self, u: StreamUpdate) -> Result<()> {
        if u.item == 0 || u.item > self.n {
            return Err(Error::DomainViolation { item: u.item, n: self.n });
        }
        match &mut self.inner {
            Inner::Dyadic(levels) => {
                let x = u.item - 1;
                for (d, level) in levels.iter_mut().enumerate() {
                    level.update(x >> d, u.delta);
                }
                Ok(())
            }
            Inner::Saving(ss) => ss.update(u.item, u.delta),
        }
    }

    /// Estimated count of `item` (an overestimate, clamped at 0).
    pub fn estimate(&self, item: u64) -> u64 {
        match &self.inner {
            Inner::Dyadic(levels) => levels[0].estimate(item - 1).max(0) as u64,
            Inner::Saving(ss) => ss.upper(item),
        }
    }

    /// Items whose estimated mass reaches `1/ell`, with their estimated masses.
    /// At most [`max_reported`](Self::max_reported) items are returned, the
    /// largest estimates first; ties broken by item.
    pub fn query(&self, ell: f64, m: u64) -> Result<Vec<(u64, f64)>> {
        if m == 0 {
            return Err(Error::EmptyStream);
        }
        if !(ell > 0.0) {
            return Err(bad_params("ell must be positive"));
        }
        let heavy = |est: i64| est > 0 && est as f64 * ell >= m as f64 * (1.0 - 1e-12);
        let cap = self.max_reported();
        let mut found: Vec<(u64, i64)> = match &self.inner {
            Inner::Dyadic(levels) => {
                let mut frontier = vec![0u64];
                let mut leaves = Vec::new();
                for d in (0..levels.len()).rev() {
                    let mut next: Vec<(u64, i64)> = frontier
                        .iter()
                        .map(|&v| (v, levels[d].estimate(v)))
                        .filter(|&(_, e)| heavy(e))
                        .collect();
                    next.sort_by_key(|&(v, e)| (Reverse(e), v));
                    next.truncate(cap);
                    if d == 0 {
                        leaves = next.into_iter().map(|(v, e)| (v + 1, e)).collect();
                        break;
                    }
                    let last = (self.n - 1) >> (d - 1);
                    frontier = next
                        .iter()
                        .flat_map(|&(v, _)| [2 * v, 2 * v + 1])
                        .filter(|&c| c <= last)
                        .collect();
                }
                leaves
            }
            Inner::Saving(ss) => ss
                .entries()
                .into_iter()
                .map(|e| (e.item, e.count as i64))
                .filter(|&(_, c)| heavy(c))
                .collect(),
        };
        found.sort_by_key(|&(v, e)| (Reverse(e), v));
        Ok(self.finish(found, m, cap))
    }

    fn finish(&self, mut found: Vec<(u64, i64)>, m: u64, cap: usize) -> Vec<(u64, f64)> {
        found.truncate(cap);
        found
            .into_iter()
            .map(|(i, e)| (i, (e.max(0) as f64 / m as f64).clamp(0.0, 1.0)))
            .collect()
    }

    /// Every monitored item with its estimated mass (insertion-only mode);
    /// equals [`query`](Self::query) at `ell = m` in turnstile mode.
    pub fn monitored(&self, m: u64) -> Result<Vec<(u64, f64)>> {
        if m == 0 {
            return Err(Error::EmptyStream);
        }
        match &self.inner {
            Inner::Saving(ss) => Ok(ss
                .entries()
                .into_iter()
                .map(|e| (e.item, (e.count as f64 / m as f64).min(1.0)))
                .collect()),
            Inner::Dyadic(_) => self.query(m as f64, m),
        }
    }

    /// Counter-wise sum of two turnstile sketches built with the same parameters and seed.
    pub fn merge(&mut self, other: &HeavyHitterSketch) -> Result<()> {
        match (&mut self.inner, &other.inner) {
            (Inner::Dyadic(a), Inner::Dyadic(b)) if a.len() == b.len() => {
                for (x, y) in a.iter_mut().zip(b) {
                    match (x, y) {
                        (Level::Exact(p), Level::Exact(q)) if p.len() == q.len() => {
                            for (s, t) in p.iter_mut().zip(q) {
                                *s += t;
                            }
                        }
                        (Level::Sketch(p), Level::Sketch(q)) => p.merge(q)?,
                        _ => return Err(bad_params("incompatible heavy-hitter sketches")),
                    }
                }
                Ok(())
            }
            _ => Err(bad_params("only turnstile sketches of equal shape can be merged")),
        }
    }

    /// Stored words: counters, or three words per monitored slot.
    pub fn words(&self) -> usize {
        match &self.inner {
            Inner::Dyadic(levels) => levels.iter().map(Level::words).sum(),
            Inner::Saving(ss) => ss.words(),
        }
    }

    #[cfg(test)]
    fn counters_equal(&self, other: &Self) -> bool {
        match (&self.inner, &other.inner) {
            (Inner::Dyadic(a), Inner::Dyadic(b)) => a == b,
            _ => false,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stream::ExactDistribution;

    fn feed(sk: &mut HeavyHitterSketch, ups: &[(u64, i64)]) {
        for &(i, d) in ups {
            sk.update(StreamUpdate::new(i, d)).unwrap();
        }
    }

    #[test]
    fn single_item_and_cancellation() {
        let mut sk = HeavyHitterSketch::turnstile(1 << 20, 10.0, 0.5, 1).unwrap();
        feed(&mut sk, &[(77, 1)]);
        assert!(sk.estimate(77) >= 1);
        feed(&mut sk, &[(77, 4), (77, -5)]);
        assert_eq!(sk.estimate(77), 0);
    }

    #[test]
    fn one_item_stream_reports_mass_one() {
        for mut sk in [
            HeavyHitterSketch::turnstile(1 << 20, 10.0, 0.5, 3).unwrap(),
            HeavyHitterSketch::insertion_only(1 << 20, 10.0, 0.5).unwrap(),
        ] {
            feed(&mut sk, &[(123_456, 50)]);
            assert_eq!(sk.query(10.0, 50).unwrap(), vec![(123_456, 1.0)]);
        }
    }

    #[test]
    fn uniform_over_four_items() {
        let ell = 10.0;
        let eps = 0.5;
        let mut sk = HeavyHitterSketch::turnstile(1 << 24, ell, eps, 9).unwrap();
        let items = [5u64, 1_000_000, 7_777_777, 16_000_000];
        for _ in 0..25 {
            for &i in &items {
                sk.update(StreamUpdate::insert(i)).unwrap();
            }
        }
        let z = sk.query(ell, 100).unwrap();
        assert_eq!(z.len(), 4);
        for (i, zi) in z {
            assert!(items.contains(&i));
            assert!((zi - 0.25).abs() <= eps / ell);
        }
    }

    #[test]
    fn dense_uniform_has_no_false_claims() {
        let n = 10_000;
        let (ell, eps) = (10.0, 0.5);
        let mut sk = HeavyHitterSketch::turnstile(n, ell, eps, 4).unwrap();
        for i in 1..=n {
            sk.update(StreamUpdate::insert(i)).unwrap();
        }
        for (_, z) in sk.query(ell, n).unwrap() {
            assert!(z <= 1.0 / ell + eps / ell);
        }
    }

    #[test]
    fn merge_equals_concatenation() {
        let a = [(3u64, 2i64), (900, 5), (3, -1)];
        let b = [(900, -2), (4000, 7)];
        let mk = || HeavyHitterSketch::turnstile(1 << 16, 4.0, 0.25, 77).unwrap();
        let (mut sa, mut sb, mut sab) = (mk(), mk(), mk());
        feed(&mut sa, &a);
        feed(&mut sb, &b);
        feed(&mut sab, &a);
        feed(&mut sab, &b);
        sa.merge(&sb).unwrap();
        assert!(sa.counters_equal(&sab));
    }

    #[test]
    fn insertion_only_rejects_deletes() {
        let mut sk = HeavyHitterSketch::insertion_only(100, 4.0, 0.5).unwrap();
        assert_eq!(sk.update(StreamUpdate::new(3, -1)), Err(Error::NegativeDeltaUnsupported));
    }

    #[test]
    fn turnstile_with_deletions_matches_oracle() {
        let n = 1 << 18;
        let (ell, eps) = (8.0, 0.5);
        let mut sk = HeavyHitterSketch::turnstile(n, ell, eps, 5).unwrap();
        let mut p = ExactDistribution::new(n);
        let mut x = 99u64;
        for t in 0..20_000u64 {
            x = x.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            let item = if t % 4 == 0 { 31_337 } else { 1 + (x >> 20) % n };
            let u = StreamUpdate::insert(item);
            sk.update(u).unwrap();
            p.apply_update(u).unwrap();
        }
        // deletions shrink the heavy item but keep it above 1/ell
        for _ in 0..1000 {
            let u = StreamUpdate::new(31_337, -1);
            sk.update(u).unwrap();
            p.apply_update(u).unwrap();
        }
        let z = sk.query(ell, p.total()).unwrap();
        let pm = p.mass(31_337).unwrap();
        assert!(pm >= 1.0 / ell);
        let got = z.iter().find(|&&(i, _)| i == 31_337).expect("heavy item reported");
        assert!((got.1 - pm).abs() <= eps / ell);
    }
}
