//! Hierarchical heavy hitters over the dyadic tree on `[1..n]` and the
//! heavy/light interval partition built from them.

use std::collections::BTreeSet;

use rustc_hash::FxHashMap;
use serde::Serialize;

use crate::error::{bad_params, Error, Result};
use crate::hashing::rng_from_seed;
use crate::sketch::{CountMin, SpaceSaving};
use crate::stream::{replay_with, ExactDistribution, StreamSource, StreamUpdate};

/// Node of the complete binary tree over the padded domain `[1..2^L]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct DyadicNode {
    pub level: u32,
    pub index: u64,
}

impl DyadicNode {
    pub fn new(level: u32, index: u64) -> Self {
        Self { level, index }
    }

    pub fn leaf(item: u64) -> Self {
        Self::new(0, item - 1)
    }

    /// Leaves covered, `[index*2^level + 1, (index+1)*2^level]`.
    pub fn span(&self) -> (u64, u64) {
        ((self.index << self.level) + 1, (self.index + 1) << self.level)
    }

    pub fn parent(&self) -> Self {
        Self::new(self.level + 1, self.index >> 1)
    }

    pub fn contains(&self, other: &DyadicNode) -> bool {
        other.level <= self.level && other.index >> (self.level - other.level) == self.index
    }
}

/// Padded domain size (next power of two) and its tree height.
pub fn padded_domain(n: u64) -> (u64, u32) {
    let padded = n.max(1).next_power_of_two();
    (padded, padded.trailing_zeros())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HhhNode {
    pub node: DyadicNode,
    /// Mass of the residual set `S(h)` (an estimate for streaming output).
    pub residual_mass: f64,
}

/// Nodes flagged as hierarchical heavy hitters of a domain of size `n`.
#[derive(Debug, Clone, PartialEq)]
pub struct HhhSet {
    pub n: u64,
    pub nodes: Vec<HhhNode>,
}

impl HhhSet {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn contains(&self, node: DyadicNode) -> bool {
        self.nodes.iter().any(|h| h.node == node)
    }

    /// Residual leaf set of each node as sorted disjoint intervals, clipped
    /// to `[1..n]`: the node's span minus the spans of its marked descendants.
    pub fn residual_intervals(&self) -> Result<Vec<(DyadicNode, Vec<(u64, u64)>)>> {
        let (_, height) = padded_domain(self.n);
        let mut seen = BTreeSet::new();
        for h in &self.nodes {
            let node = h.node;
            if node.level > height || node.index >= 1u64 << (height - node.level) {
                return Err(Error::InvalidHhhSet(format!("node {node:?} outside the tree")));
            }
            if !seen.insert(node) {
                return Err(Error::InvalidHhhSet(format!("node {node:?} listed twice")));
            }
        }
        let nodes: Vec<DyadicNode> = seen.into_iter().collect();
        let mut out = Vec::with_capacity(nodes.len());
        for &h in &nodes {
            let mut holes: Vec<(u64, u64)> = nodes
                .iter()
                .filter(|&&d| d != h && h.contains(&d))
                .map(DyadicNode::span)
                .collect();
            holes.sort();
            let (lo, hi) = h.span();
            let hi = hi.min(self.n);
            let mut parts = Vec::new();
            let mut cursor = lo;
            for (a, b) in holes {
                if b < cursor {
                    continue;
                }
                if a > cursor {
                    parts.push((cursor, (a - 1).min(hi)));
                }
                cursor = b + 1;
            }
            if cursor <= hi {
                parts.push((cursor, hi));
            }
            parts.retain(|&(a, b)| a <= b && a <= hi);
            out.push((h, parts));
        }
        Ok(out)
    }
}

fn check_phi(phi: f64) -> Result<()> {
    if !(phi > 0.0) {
        return Err(bad_params("phi must be positive"));
    }
    Ok(())
}

/// Exact hierarchical heavy hitters: bottom-up, a node is marked when the mass
/// of its leaves not under an already-marked descendant is at least `phi`.
pub fn hhh_exact(p: &ExactDistribution, phi: f64) -> Result<HhhSet> {
    check_phi(phi)?;
    if p.total() == 0 {
        return Err(Error::EmptyStream);
    }
    let m = p.total() as f64;
    let (_, height) = padded_domain(p.domain_size());
    let mut nodes = Vec::new();
    let mut residual: FxHashMap<u64, u64> = p.iter().map(|(i, c)| (i - 1, c)).collect();
    for level in 0..=height {
        let mut keys: Vec<u64> = residual.keys().copied().collect();
        keys.sort_unstable();
        let mut up: FxHashMap<u64, u64> = FxHashMap::default();
        for v in keys {
            let r = residual[&v];
            if r as f64 >= phi * m {
                nodes.push(HhhNode {
                    node: DyadicNode::new(level, v),
                    residual_mass: r as f64 / m,
                });
            } else if r > 0 {
                *up.entry(v >> 1).or_insert(0) += r;
            }
        }
        residual = up;
    }
    Ok(HhhSet {
        n: p.domain_size(),
        nodes,
    })
}

/// Heaviness threshold for space-budgeted runs: `log2(n) / s`.
pub fn experimental_threshold(n: u64, space: u64) -> f64 {
    (n.max(2) as f64).log2() / space.max(1) as f64
}

/// Frequency summary used per tree level by [`StreamingHhh`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum HhhBackend {
    /// Count-min per level; accepts deletions.
    CountMin,
    /// Space-saving per level; insertion-only.
    SpaceSaving,
}

#[derive(Debug, Clone)]
enum LevelSummary {
    Exact(Vec<i64>),
    Cm(CountMin),
    Ss(SpaceSaving),
}

/// One-pass approximation of [`hhh_exact`] with additive error `eps_hh * m`
/// per node estimate.
#[derive(Debug, Clone)]
pub struct StreamingHhh {
    n: u64,
    backend: HhhBackend,
    eps_hh: f64,
    total: i64,
    levels: Vec<LevelSummary>,
}

impl StreamingHhh {
    pub fn new(n: u64, eps_hh: f64, backend: HhhBackend, seed: u64) -> Result<Self> {
        if n == 0 {
            return Err(bad_params("domain must be non-empty"));
        }
        if !(eps_hh > 0.0 && eps_hh < 1.0) {
            return Err(bad_params("eps_hh must lie in (0,1)"));
        }
        let (_, height) = padded_domain(n);
        let mut rng = rng_from_seed(seed);
        let mut levels = Vec::with_capacity(height as usize + 1);
        for level in 0..=height {
            let nodes = ((n - 1) >> level) as usize + 1;
            let summary = match backend {
                HhhBackend::CountMin => {
                    let width = (2.0 / eps_hh).ceil() as usize;
                    let depth = ((height as f64 + 1.0) * 20.0 / eps_hh).log2().ceil() as usize;
                    if nodes <= width * depth {
                        LevelSummary::Exact(vec![0; nodes])
                    } else {
                        LevelSummary::Cm(CountMin::new(width, depth, &mut rng)?)
                    }
                }
                HhhBackend::SpaceSaving => {
                    let capacity = (1.0 / eps_hh).ceil() as usize;
                    if nodes <= 3 * capacity {
                        LevelSummary::Exact(vec![0; nodes])
                    } else {
                        LevelSummary::Ss(SpaceSaving::new(capacity)?)
                    }
                }
            };
            levels.push(summary);
        }
        Ok(Self {
            n,
            backend,
            eps_hh,
            total: 0,
            levels,
        })
    }

    pub fn update(&mut self, u: StreamUpdate) -> Result<()> {
        if u.item == 0 || u.item > self.n {
            return Err(Error::DomainViolation { item: u.item, n: self.n });
        }
        if u.delta < 0 && self.backend == HhhBackend::SpaceSaving {
            return Err(Error::NegativeDeltaUnsupported);
        }
        let x = u.item - 1;
        for (d, level) in self.levels.iter_mut().enumerate() {
            let v = x >> d;
            match level {
                LevelSummary::Exact(c) => c[v as usize] += u.delta,
                LevelSummary::Cm(cm) => cm.update(v, u.delta),
                LevelSummary::Ss(ss) => ss.update(v, u.delta)?,
            }
        }
        self.total += u.delta;
        Ok(())
    }

    pub fn total(&self) -> u64 {
        self.total.max(0) as u64
    }

    fn bounds(&self, level: usize, v: u64) -> (f64, f64) {
        let slack = self.eps_hh * self.total as f64;
        match &self.levels[level] {
            LevelSummary::Exact(c) => {
                let x = c[v as usize].max(0) as f64;
                (x, x)
            }
            LevelSummary::Cm(cm) => {
                let x = cm.estimate(v).max(0) as f64;
                ((x - slack).max(0.0), x)
            }
            LevelSummary::Ss(ss) => (ss.lower(v) as f64, ss.upper(v) as f64),
        }
    }

    /// Candidate nodes are found top-down with threshold `phi/2` on upper
    /// estimates; a candidate is marked, bottom-up, when its upper estimate
    /// minus the lower estimates of its maximal marked descendants reaches `phi`.
    pub fn query(&self, phi: f64) -> Result<HhhSet> {
        check_phi(phi)?;
        if self.total <= 0 {
            return Err(Error::EmptyStream);
        }
        let m = self.total as f64;
        let height = self.levels.len() - 1;
        let mut candidates: Vec<Vec<u64>> = vec![Vec::new(); height + 1];
        let mut frontier = vec![0u64];
        for d in (0..=height).rev() {
            let keep: Vec<u64> = frontier
                .into_iter()
                .filter(|&v| self.bounds(d, v).1 >= 0.5 * phi * m)
                .collect();
            frontier = if d > 0 {
                let last = (self.n - 1) >> (d - 1);
                keep.iter()
                    .flat_map(|&v| [2 * v, 2 * v + 1])
                    .filter(|&c| c <= last)
                    .collect()
            } else {
                Vec::new()
            };
            candidates[d] = keep;
        }
        let mut nodes = Vec::new();
        // lower-bound mass already claimed by marked descendants, per node
        let mut claimed: FxHashMap<u64, f64> = FxHashMap::default();
        for (d, cands) in candidates.iter().enumerate() {
            let mut up: FxHashMap<u64, f64> = FxHashMap::default();
            for &v in cands {
                let (lower, upper) = self.bounds(d, v);
                let below = claimed.get(&v).copied().unwrap_or(0.0);
                let resid = upper - below;
                let pass = if resid >= phi * m {
                    nodes.push(HhhNode {
                        node: DyadicNode::new(d as u32, v),
                        residual_mass: (resid / m).clamp(0.0, 1.0),
                    });
                    lower
                } else {
                    below
                };
                if pass > 0.0 {
                    *up.entry(v >> 1).or_insert(0.0) += pass;
                }
            }
            claimed = up;
        }
        Ok(HhhSet { n: self.n, nodes })
    }

    pub fn words(&self) -> usize {
        self.levels
            .iter()
            .map(|l| match l {
                LevelSummary::Exact(c) => c.len(),
                LevelSummary::Cm(cm) => cm.words(),
                LevelSummary::Ss(ss) => ss.words(),
            })
            .sum::<usize>()
            + 1
    }
}

/// One pass of `source` through a [`StreamingHhh`], then a query at `phi`.
pub fn hhh_stream(source: &dyn StreamSource, phi: f64, eps_hh: f64, backend: HhhBackend, seed: u64) -> Result<HhhSet> {
    let mut sk = StreamingHhh::new(source.domain_size(), eps_hh, backend, seed)?;
    replay_with(source, |u| sk.update(u))?;
    sk.query(phi)
}

/// Heavy singletons `H` and light intervals `L` tiling `[1..n]`.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct IntervalPartition {
    pub heavy: Vec<u64>,
    pub light: Vec<(u64, u64)>,
}

/// One tile of an [`IntervalPartition`], in domain order.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Tile {
    Heavy(u64),
    Light(u64, u64),
}

impl Tile {
    pub fn span(&self) -> (u64, u64) {
        match *self {
            Tile::Heavy(i) => (i, i),
            Tile::Light(a, b) => (a, b),
        }
    }
}

impl IntervalPartition {
    pub fn tiles(&self) -> Vec<Tile> {
        let mut t: Vec<Tile> = self
            .heavy
            .iter()
            .map(|&i| Tile::Heavy(i))
            .chain(self.light.iter().map(|&(a, b)| Tile::Light(a, b)))
            .collect();
        t.sort_by_key(|x| x.span().0);
        t
    }

    /// Whether the tiles cover `[1..n]` exactly once.
    pub fn tiles_domain(&self, n: u64) -> bool {
        let mut next = 1;
        for t in self.tiles() {
            let (a, b) = t.span();
            if a != next || b < a {
                return false;
            }
            next = b + 1;
        }
        next == n + 1
    }

    pub fn piece_count(&self) -> usize {
        self.heavy.len() + self.light.len()
    }
}

fn split_at(parts: &[(u64, u64)], mid: u64) -> Vec<(u64, u64)> {
    let mut out = Vec::new();
    for &(a, b) in parts {
        if a <= mid && mid < b {
            out.push((a, mid));
            out.push((mid + 1, b));
        } else {
            out.push((a, b));
        }
    }
    out
}

/// Turns an HHH set into heavy singletons and light intervals.
///
/// A node whose residual set is one item contributes that item to `H`. Any
/// other node contributes the maximal runs of its residual set inside its left
/// and right children to `L`. Whatever remains uncovered is split into maximal
/// runs and also joins `L`.
pub fn build_partition(t: &HhhSet, n: u64, k: usize, eps: f64) -> Result<IntervalPartition> {
    if t.n != n {
        return Err(Error::InvalidHhhSet(format!("set built for n={} used with n={n}", t.n)));
    }
    if k == 0 || !(eps > 0.0 && eps < 1.0) {
        return Err(bad_params("need k >= 1 and eps in (0,1)"));
    }
    let mut part = IntervalPartition::default();
    for (h, parts) in t.residual_intervals()? {
        let size: u64 = parts.iter().map(|&(a, b)| b - a + 1).sum();
        if size == 1 {
            part.heavy.push(parts[0].0);
        } else if h.level > 0 {
            let (lo, hi) = h.span();
            let mid = lo + (hi - lo) / 2;
            part.light.extend(split_at(&parts, mid));
        } else {
            part.light.extend(parts);
        }
    }
    let mut covered: Vec<(u64, u64)> = part
        .heavy
        .iter()
        .map(|&i| (i, i))
        .chain(part.light.iter().copied())
        .collect();
    covered.sort();
    let mut next = 1;
    for (a, b) in covered {
        if a < next {
            return Err(Error::InvalidHhhSet("residual sets overlap".into()));
        }
        if a > next {
            part.light.push((next, a - 1));
        }
        next = b + 1;
    }
    if next <= n {
        part.light.push((next, n));
    }
    part.heavy.sort_unstable();
    part.light.sort_unstable();
    Ok(part)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dist(n: u64, counts: &[(u64, u64)]) -> ExactDistribution {
        ExactDistribution::from_counts(n, counts.iter().copied()).unwrap()
    }

    fn example() -> ExactDistribution {
        dist(8, &[(1, 3), (2, 3), (5, 4)])
    }

    /// Direct recursive reading of the definition, independent of the
    /// bottom-up sweep: returns (marked nodes, unmarked residual count).
    fn recursive(p: &ExactDistribution, node: DyadicNode, phi_count: f64, out: &mut Vec<DyadicNode>) -> u64 {
        let resid = if node.level == 0 {
            p.count(node.index + 1)
        } else {
            let l = DyadicNode::new(node.level - 1, 2 * node.index);
            let r = DyadicNode::new(node.level - 1, 2 * node.index + 1);
            recursive(p, l, phi_count, out) + recursive(p, r, phi_count, out)
        };
        if resid > 0 && resid as f64 >= phi_count {
            out.push(node);
            0
        } else {
            resid
        }
    }

    #[test]
    fn spans_and_containment() {
        let h = DyadicNode::new(2, 1);
        assert_eq!(h.span(), (5, 8));
        assert!(h.contains(&DyadicNode::leaf(6)));
        assert!(!h.contains(&DyadicNode::leaf(4)));
        assert_eq!(DyadicNode::leaf(6).parent(), DyadicNode::new(1, 2));
    }

    #[test]
    fn exact_examples() {
        let single = dist(16, &[(7, 5)]);
        let t = hhh_exact(&single, 0.5).unwrap();
        assert_eq!(t.nodes.len(), 1);
        assert_eq!(t.nodes[0].node, DyadicNode::leaf(7));
        assert!(hhh_exact(&single, 1.5).unwrap().is_empty());

        let t = hhh_exact(&example(), 0.25).unwrap();
        let got: Vec<DyadicNode> = t.nodes.iter().map(|h| h.node).collect();
        assert_eq!(got, vec![DyadicNode::leaf(1), DyadicNode::leaf(2), DyadicNode::leaf(5)]);
        assert_eq!(hhh_exact(&ExactDistribution::new(8), 0.1), Err(Error::EmptyStream));
    }

    #[test]
    fn exact_matches_recursive_definition() {
        let mut x = 17u64;
        for trial in 0..200 {
            let n = 1 + trial % 70;
            let mut counts = Vec::new();
            for i in 1..=n {
                x = x.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                if x >> 62 == 0 {
                    counts.push((i, 1 + (x >> 50) % 9));
                }
            }
            if counts.is_empty() {
                continue;
            }
            let p = dist(n, &counts);
            for phi in [0.05, 0.1, 0.2, 0.5] {
                let (_, height) = padded_domain(n);
                let mut expect = Vec::new();
                recursive(&p, DyadicNode::new(height, 0), phi * p.total() as f64, &mut expect);
                let mut got: Vec<DyadicNode> = hhh_exact(&p, phi).unwrap().nodes.iter().map(|h| h.node).collect();
                expect.sort();
                got.sort();
                assert_eq!(got, expect);
            }
        }
    }

    #[test]
    fn residuals_are_disjoint_and_light_outside() {
        let p = dist(20, &[(1, 10), (2, 10), (3, 1), (4, 1), (9, 6), (10, 1), (17, 2)]);
        let t = hhh_exact(&p, 0.1).unwrap();
        let res = t.residual_intervals().unwrap();
        let mut seen = BTreeSet::new();
        for (_, parts) in &res {
            for &(a, b) in parts {
                for i in a..=b {
                    assert!(seen.insert(i), "item {i} in two residual sets");
                }
            }
        }
        for h in &t.nodes {
            let parts = &res.iter().find(|(n, _)| *n == h.node).unwrap().1;
            let mass: u64 = parts.iter().map(|&(a, b)| p.range_count(a, b)).sum();
            assert!((mass as f64 / p.total() as f64 - h.residual_mass).abs() < 1e-12);
        }
    }

    #[test]
    fn partition_examples() {
        let empty = HhhSet { n: 10, nodes: vec![] };
        let part = build_partition(&empty, 10, 1, 0.5).unwrap();
        assert!(part.heavy.is_empty());
        assert_eq!(part.light, vec![(1, 10)]);

        let one = HhhSet {
            n: 10,
            nodes: vec![HhhNode {
                node: DyadicNode::leaf(4),
                residual_mass: 1.0,
            }],
        };
        let part = build_partition(&one, 10, 1, 0.5).unwrap();
        assert_eq!(part.heavy, vec![4]);
        assert_eq!(part.light, vec![(1, 3), (5, 10)]);
        let edge = HhhSet {
            n: 10,
            nodes: vec![HhhNode {
                node: DyadicNode::leaf(1),
                residual_mass: 1.0,
            }],
        };
        assert_eq!(build_partition(&edge, 10, 1, 0.5).unwrap().light, vec![(2, 10)]);

        let t = hhh_exact(&example(), 0.25).unwrap();
        let part = build_partition(&t, 8, 1, 0.5).unwrap();
        assert_eq!(part.heavy, vec![1, 2, 5]);
        assert_eq!(part.light, vec![(3, 4), (6, 8)]);
        assert!(part.tiles_domain(8));
    }

    #[test]
    fn internal_node_splits_at_children() {
        // node [1..4] is heavy as a whole; its residual spans both children
        let p = dist(8, &[(1, 1), (2, 1), (3, 1), (4, 1), (8, 1)]);
        let t = hhh_exact(&p, 0.5).unwrap();
        assert_eq!(t.nodes.len(), 1);
        assert_eq!(t.nodes[0].node, DyadicNode::new(2, 0));
        let part = build_partition(&t, 8, 1, 0.5).unwrap();
        assert!(part.heavy.is_empty());
        assert_eq!(part.light, vec![(1, 2), (3, 4), (5, 8)]);
    }

    #[test]
    fn invalid_sets_rejected() {
        let node = HhhNode {
            node: DyadicNode::leaf(3),
            residual_mass: 0.5,
        };
        let dup = HhhSet {
            n: 8,
            nodes: vec![node, node],
        };
        assert!(matches!(build_partition(&dup, 8, 1, 0.5), Err(Error::InvalidHhhSet(_))));
        let out = HhhSet {
            n: 8,
            nodes: vec![HhhNode {
                node: DyadicNode::new(5, 0),
                residual_mass: 0.5,
            }],
        };
        assert!(matches!(build_partition(&out, 8, 1, 0.5), Err(Error::InvalidHhhSet(_))));
    }

    #[test]
    fn padding_is_trimmed() {
        let p = dist(5, &[(5, 1), (1, 1)]);
        let t = hhh_exact(&p, 0.9).unwrap();
        // only the root [1..8] collects both items
        assert_eq!(t.nodes.len(), 1);
        let part = build_partition(&t, 5, 1, 0.5).unwrap();
        assert_eq!(part.light, vec![(1, 4), (5, 5)]);
        assert!(part.tiles_domain(5));
    }

    #[test]
    fn streaming_superset_on_small_examples() {
        for backend in [HhhBackend::CountMin, HhhBackend::SpaceSaving] {
            let t = hhh_stream(&example().to_stream(), 0.25, 0.01, backend, 1).unwrap();
            for leaf in [1, 2, 5] {
                assert!(t.contains(DyadicNode::leaf(leaf)), "{backend:?}");
            }
            assert!(hhh_stream(&example().to_stream(), 1.5, 0.01, backend, 1).unwrap().is_empty());
        }
    }

    #[test]
    fn streaming_finds_elephant_among_mice() {
        let n = 1 << 16;
        let mut counts: Vec<(u64, u64)> = (1..=10_000u64).map(|j| (j * 6 + 1, 1)).collect();
        counts.push((33_333, 10_000));
        let p = dist(n, &counts);
        let mut items = Vec::new();
        for (i, c) in p.iter() {
            for _ in 0..c {
                items.push(i);
            }
        }
        // interleave so the elephant is not one contiguous run
        items.sort_by_key(|&i| (crate::hashing::splitmix64(i) % 97, i));
        let s = crate::stream::VecStream::from_items(n, items).unwrap();
        for backend in [HhhBackend::CountMin, HhhBackend::SpaceSaving] {
            for seed in 0..5 {
                let t = hhh_stream(&s, 0.1, 0.01, backend, seed).unwrap();
                assert!(t.contains(DyadicNode::leaf(33_333)));
            }
        }
    }

    #[test]
    fn space_saving_backend_rejects_deletions() {
        let s = crate::stream::VecStream::new(8, vec![StreamUpdate::new(1, 2), StreamUpdate::new(1, -1)]).unwrap();
        assert_eq!(
            hhh_stream(&s, 0.5, 0.1, HhhBackend::SpaceSaving, 0),
            Err(Error::NegativeDeltaUnsupported)
        );
        assert!(hhh_stream(&s, 0.5, 0.1, HhhBackend::CountMin, 0).is_ok());
    }
}
