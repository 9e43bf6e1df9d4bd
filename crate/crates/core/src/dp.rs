//! Optimal k-piece fits under support-aware (and support-oblivious) L1 error.
//!
//! The DP runs over blocks: maximal runs of consecutive points sharing one
//! value. Splitting a run never helps, since moving a breakpoint across an
//! equal-valued run changes the cost linearly in the run's length, so one of
//! its two ends is at least as good. Ties resolve toward fewer pieces, then
//! toward the earliest piece ends.

use std::cmp::{Ordering, Reverse};
use std::collections::BinaryHeap;
use std::fmt::Debug;
use std::ops::{Add, Sub};

use crate::error::{bad_params, Error, Result};
use crate::histogram::{Histogram, WeightedPointSet};
use crate::stream::ExactDistribution;

pub(crate) trait Magnitude: Copy + PartialOrd + Debug {
    type Acc: Copy + PartialOrd + Add<Output = Self::Acc> + Sub<Output = Self::Acc> + Default + Debug;
    fn times(self, weight: u64) -> Self::Acc;
}

impl Magnitude for u64 {
    type Acc = u128;
    fn times(self, weight: u64) -> u128 {
        self as u128 * weight as u128
    }
}

impl Magnitude for f64 {
    type Acc = f64;
    fn times(self, weight: u64) -> f64 {
        self * weight as f64
    }
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct Block<V> {
    pub value: V,
    pub weight: u64,
    pub first: u64,
    pub last: u64,
}

#[derive(Debug, Clone, Copy)]
struct Entry<V>(V, u64);

impl<V: PartialOrd> PartialEq for Entry<V> {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl<V: PartialOrd> Eq for Entry<V> {}
impl<V: PartialOrd> PartialOrd for Entry<V> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl<V: PartialOrd> Ord for Entry<V> {
    fn cmp(&self, other: &Self) -> Ordering {
        self.0.partial_cmp(&other.0).expect("NaN in DP input")
    }
}

/// Weighted lower median and absolute-deviation cost of a growing multiset.
struct RunningMedian<V: Magnitude> {
    lower: BinaryHeap<Entry<V>>,
    upper: BinaryHeap<Reverse<Entry<V>>>,
    w_lower: u64,
    w_upper: u64,
    sum_lower: V::Acc,
    sum_upper: V::Acc,
}

impl<V: Magnitude> RunningMedian<V> {
    fn new() -> Self {
        Self {
            lower: BinaryHeap::new(),
            upper: BinaryHeap::new(),
            w_lower: 0,
            w_upper: 0,
            sum_lower: V::Acc::default(),
            sum_upper: V::Acc::default(),
        }
    }

    fn insert(&mut self, value: V, weight: u64) {
        let goes_low = match self.lower.peek() {
            None => true,
            Some(top) => value <= top.0,
        };
        if goes_low {
            self.lower.push(Entry(value, weight));
            self.w_lower += weight;
            self.sum_lower = self.sum_lower + value.times(weight);
        } else {
            self.upper.push(Reverse(Entry(value, weight)));
            self.w_upper += weight;
            self.sum_upper = self.sum_upper + value.times(weight);
        }
        let target = (self.w_lower + self.w_upper).div_ceil(2);
        while self.w_lower < target {
            let Reverse(e) = self.upper.pop().expect("upper non-empty");
            self.w_upper -= e.1;
            self.sum_upper = self.sum_upper - e.0.times(e.1);
            self.w_lower += e.1;
            self.sum_lower = self.sum_lower + e.0.times(e.1);
            self.lower.push(e);
        }
        while let Some(&top) = self.lower.peek() {
            if self.w_lower - top.1 < target {
                break;
            }
            self.lower.pop();
            self.w_lower -= top.1;
            self.sum_lower = self.sum_lower - top.0.times(top.1);
            self.w_upper += top.1;
            self.sum_upper = self.sum_upper + top.0.times(top.1);
            self.upper.push(Reverse(top));
        }
    }

    fn median(&self) -> V {
        self.lower.peek().expect("non-empty").0
    }

    fn cost(&self) -> V::Acc {
        let med = self.median();
        (med.times(self.w_lower) - self.sum_lower) + (self.sum_upper - med.times(self.w_upper))
    }
}

/// Weighted lower median of a block slice.
fn block_median<V: Magnitude>(blocks: &[Block<V>]) -> V {
    let mut v: Vec<(V, u64)> = blocks.iter().map(|b| (b.value, b.weight)).collect();
    v.sort_by(|a, b| a.0.partial_cmp(&b.0).expect("NaN in DP input"));
    let total: u64 = v.iter().map(|x| x.1).sum();
    let target = total.div_ceil(2);
    let mut acc = 0;
    for (val, w) in v {
        acc += w;
        if acc >= target {
            return val;
        }
    }
    unreachable!("empty block slice")
}

/// Merges neighbouring blocks with equal value when `adjacent` allows it.
pub(crate) fn compress<V: Magnitude>(
    blocks: Vec<Block<V>>,
    adjacent: impl Fn(&Block<V>, &Block<V>) -> bool,
) -> Vec<Block<V>> {
    let mut out: Vec<Block<V>> = Vec::with_capacity(blocks.len());
    for b in blocks {
        if let Some(prev) = out.last_mut() {
            if prev.value == b.value && adjacent(prev, &b) {
                prev.weight += b.weight;
                prev.last = b.last;
                continue;
            }
        }
        out.push(b);
    }
    out
}

/// One piece of a DP solution: blocks `start..=end` fitted with `value`.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Segment<V> {
    pub first: u64,
    pub last: u64,
    pub value: V,
}

/// Optimal partition of `blocks` into at most `k` contiguous segments.
pub(crate) fn segment_blocks<V: Magnitude>(blocks: &[Block<V>], k: usize) -> (Vec<Segment<V>>, V::Acc) {
    let nb = blocks.len();
    if nb == 0 {
        return (Vec::new(), V::Acc::default());
    }
    let k = k.min(nb);
    // best[j][a]: cost of covering blocks a.. with at most j segments.
    let mut best: Vec<Vec<Option<V::Acc>>> = vec![vec![None; nb + 1]; k + 1];
    // choice[j][a]: end block of the first segment, or None for "use j-1".
    let mut choice: Vec<Vec<Option<usize>>> = vec![vec![None; nb + 1]; k + 1];
    for row in best.iter_mut() {
        row[nb] = Some(V::Acc::default());
    }
    for a in (0..nb).rev() {
        for j in 1..=k {
            best[j][a] = best[j - 1][a];
        }
        let mut rm = RunningMedian::new();
        for b in a..nb {
            rm.insert(blocks[b].value, blocks[b].weight);
            let c = rm.cost();
            for j in 1..=k {
                if let Some(rest) = best[j - 1][b + 1] {
                    let cand = c + rest;
                    let better = match best[j][a] {
                        None => true,
                        Some(cur) => cand < cur,
                    };
                    if better {
                        best[j][a] = Some(cand);
                        choice[j][a] = Some(b);
                    }
                }
            }
        }
    }
    let mut segs = Vec::new();
    let (mut j, mut a) = (k, 0);
    while a < nb {
        match choice[j][a] {
            Some(b) if best[j][a] != best[j - 1][a] || best[j - 1][a].is_none() => {
                segs.push(Segment {
                    first: blocks[a].first,
                    last: blocks[b].last,
                    value: block_median(&blocks[a..=b]),
                });
                a = b + 1;
            }
            _ => {}
        }
        j -= 1;
    }
    (segs, best[k][0].expect("k >= 1 covers all blocks"))
}

/// Result of an exact fit.
#[derive(Debug, Clone, PartialEq)]
pub struct OptimalFit {
    pub histogram: Histogram,
    /// Error as a mass (`cost_count / m`).
    pub err: f64,
    /// Error in raw counts, exact.
    pub cost_count: u128,
}

fn check_k(k: usize) -> Result<()> {
    if k == 0 {
        return Err(bad_params("k must be at least 1"));
    }
    Ok(())
}

fn fit_from_segments(p: &ExactDistribution, segs: &[Segment<u64>], cost: u128) -> Result<OptimalFit> {
    let m = p.total() as f64;
    let ends: Vec<(u64, f64)> = segs.iter().map(|s| (s.last, s.value as f64 / m)).collect();
    Ok(OptimalFit {
        histogram: Histogram::from_piece_ends(p.domain_size(), &ends)?,
        err: cost as f64 / m,
        cost_count: cost,
    })
}

/// Best histogram with at most `k` pieces under support-aware error.
/// Breakpoints sit on supported items.
pub fn optimal_histogram_exact(p: &ExactDistribution, k: usize) -> Result<OptimalFit> {
    check_k(k)?;
    if p.total() == 0 {
        return Err(Error::EmptyStream);
    }
    let blocks = compress(
        p.iter()
            .map(|(i, c)| Block {
                value: c,
                weight: 1,
                first: i,
                last: i,
            })
            .collect(),
        |_, _| true,
    );
    let (segs, cost) = segment_blocks(&blocks, k);
    fit_from_segments(p, &segs, cost)
}

/// Best histogram with at most `k` pieces under support-oblivious error,
/// where unsupported items count as zero-mass points.
pub fn optimal_histogram_domain(p: &ExactDistribution, k: usize) -> Result<OptimalFit> {
    check_k(k)?;
    if p.total() == 0 {
        return Err(Error::EmptyStream);
    }
    let n = p.domain_size();
    let mut raw = Vec::with_capacity(2 * p.support_size() + 1);
    let mut next = 1u64;
    for (i, c) in p.iter() {
        if i > next {
            raw.push(Block {
                value: 0,
                weight: i - next,
                first: next,
                last: i - 1,
            });
        }
        raw.push(Block {
            value: c,
            weight: 1,
            first: i,
            last: i,
        });
        next = i + 1;
    }
    if next <= n {
        raw.push(Block {
            value: 0,
            weight: n - next + 1,
            first: next,
            last: n,
        });
    }
    let blocks = compress(raw, |a, b| a.last + 1 == b.first);
    let (segs, cost) = segment_blocks(&blocks, k);
    fit_from_segments(p, &segs, cost)
}

fn sample_blocks(s: &WeightedPointSet) -> Vec<Block<f64>> {
    let mut raw: Vec<Block<f64>> = Vec::new();
    for &(i, mass) in s.points() {
        match raw.last_mut() {
            Some(b) if b.first == i && b.value == mass => b.weight += 1,
            _ => raw.push(Block {
                value: mass,
                weight: 1,
                first: i,
                last: i,
            }),
        }
    }
    // Points sharing an index must stay in one segment.
    let mut grouped: Vec<Vec<Block<f64>>> = Vec::new();
    for b in raw {
        match grouped.last_mut() {
            Some(g) if g[0].first == b.first => g.push(b),
            _ => grouped.push(vec![b]),
        }
    }
    if grouped.iter().all(|g| g.len() == 1) {
        return compress(grouped.into_iter().map(|g| g[0]).collect(), |_, _| true);
    }
    Vec::new()
}

/// Optimal segments over a sample multiset. Each segment spans from its first
/// to its last sampled index.
pub fn optimal_segments_samples(s: &WeightedPointSet, k: usize) -> Result<Vec<(u64, u64, f64)>> {
    check_k(k)?;
    let blocks = sample_blocks(s);
    if blocks.is_empty() && !s.is_empty() {
        return Ok(segments_with_groups(s, k)
            .into_iter()
            .map(|g| (g.first, g.last, g.value))
            .collect());
    }
    let (segs, _) = segment_blocks(&blocks, k);
    Ok(segs.into_iter().map(|g| (g.first, g.last, g.value)).collect())
}

/// Fallback for multisets where one index carries several distinct masses:
/// such a group is indivisible, so the DP runs over groups with an exact
/// (sort-based) segment cost.
fn segments_with_groups(s: &WeightedPointSet, k: usize) -> Vec<Segment<f64>> {
    let pts = s.points();
    let mut starts = vec![0usize];
    for t in 1..pts.len() {
        if pts[t].0 != pts[t - 1].0 {
            starts.push(t);
        }
    }
    let g = starts.len();
    starts.push(pts.len());
    let k = k.min(g);
    let cost = |a: usize, b: usize| -> (f64, f64) {
        let masses: Vec<f64> = pts[starts[a]..starts[b + 1]].iter().map(|p| p.1).collect();
        crate::histogram::interval_cost_masses(&masses).expect("non-empty group")
    };
    let mut best = vec![vec![None::<f64>; g + 1]; k + 1];
    let mut choice = vec![vec![None::<usize>; g + 1]; k + 1];
    for row in best.iter_mut() {
        row[g] = Some(0.0);
    }
    for a in (0..g).rev() {
        for j in 1..=k {
            best[j][a] = best[j - 1][a];
        }
        for b in a..g {
            let c = cost(a, b).1;
            for j in 1..=k {
                if let Some(rest) = best[j - 1][b + 1] {
                    if best[j][a].is_none_or(|cur| c + rest < cur) {
                        best[j][a] = Some(c + rest);
                        choice[j][a] = Some(b);
                    }
                }
            }
        }
    }
    let mut segs = Vec::new();
    let (mut j, mut a) = (k, 0);
    while a < g {
        if let Some(b) = choice[j][a] {
            if best[j - 1][a].is_none() || best[j][a] != best[j - 1][a] {
                segs.push(Segment {
                    first: pts[starts[a]].0,
                    last: pts[starts[b + 1] - 1].0,
                    value: cost(a, b).0,
                });
                a = b + 1;
            }
        }
        j -= 1;
    }
    segs
}

/// Best `k`-piece fit to a sample multiset, widened to a histogram on `[1..n]`:
/// each piece runs up to just before the next piece's first sample, the first
/// piece starts at 1 and the last ends at `n`. Empty `s` gives the zero histogram.
pub fn optimal_histogram_samples(s: &WeightedPointSet, k: usize, n: u64) -> Result<Histogram> {
    if let Some(&(i, _)) = s.points().last() {
        if i > n {
            return Err(Error::DomainViolation { item: i, n });
        }
    }
    let segs = optimal_segments_samples(s, k)?;
    let ends: Vec<(u64, f64)> = segs
        .iter()
        .enumerate()
        .map(|(t, &(_, _, v))| {
            let end = segs.get(t + 1).map_or(n, |next| next.0 - 1);
            (end, v)
        })
        .collect();
    Histogram::from_piece_ends(n, &ends)
}
