use std::cmp::Reverse;
use std::collections::BinaryHeap;

use rustc_hash::FxHashMap;

use crate::error::{bad_params, Error, Result};

/// A monitored item: `count` overestimates the true count by at most `overestimate`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SsEntry {
    pub item: u64,
    pub count: u64,
    pub overestimate: u64,
}

/// Space-saving summary for insertion-only streams (weighted increments allowed).
///
/// The min-heap is lazy: stale `(count, item)` entries are skipped on pop and
/// the heap is rebuilt once it grows past a few times the capacity.
#[derive(Debug, Clone)]
pub struct SpaceSaving {
    capacity: usize,
    entries: FxHashMap<u64, (u64, u64)>,
    heap: BinaryHeap<Reverse<(u64, u64)>>,
}

impl SpaceSaving {
    pub fn new(capacity: usize) -> Result<Self> {
        if capacity == 0 {
            return Err(bad_params("space-saving capacity must be positive"));
        }
        Ok(Self {
            capacity,
            entries: FxHashMap::default(),
            heap: BinaryHeap::new(),
        })
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn update(&mut self, item: u64, delta: i64) -> Result<()> {
        if delta < 0 {
            return Err(Error::NegativeDeltaUnsupported);
        }
        if delta == 0 {
            return Ok(());
        }
        let delta = delta as u64;
        if let Some(e) = self.entries.get_mut(&item) {
            e.0 += delta;
            self.heap.push(Reverse((e.0, item)));
        } else if self.entries.len() < self.capacity {
            self.entries.insert(item, (delta, 0));
            self.heap.push(Reverse((delta, item)));
        } else {
            let (min_count, victim) = self.pop_min();
            self.entries.remove(&victim);
            self.entries.insert(item, (min_count + delta, min_count));
            self.heap.push(Reverse((min_count + delta, item)));
        }
        if self.heap.len() > 4 * self.capacity + 16 {
            self.heap = self.entries.iter().map(|(&i, &(c, _))| Reverse((c, i))).collect();
        }
        Ok(())
    }

    fn pop_min(&mut self) -> (u64, u64) {
        while let Some(Reverse((c, i))) = self.heap.pop() {
            if self.entries.get(&i).is_some_and(|e| e.0 == c) {
                return (c, i);
            }
        }
        unreachable!("heap holds every monitored item")
    }

    pub fn entry(&self, item: u64) -> Option<SsEntry> {
        self.entries.get(&item).map(|&(count, overestimate)| SsEntry {
            item,
            count,
            overestimate,
        })
    }

    /// Monitored entries sorted by decreasing count, then item.
    pub fn entries(&self) -> Vec<SsEntry> {
        let mut v: Vec<SsEntry> = self.entries.keys().filter_map(|&i| self.entry(i)).collect();
        v.sort_by_key(|e| (Reverse(e.count), e.item));
        v
    }

    /// Upper bound on the count of `item` (unmonitored items are bounded by the minimum).
    pub fn upper(&self, item: u64) -> u64 {
        match self.entries.get(&item) {
            Some(&(c, _)) => c,
            None if self.entries.len() < self.capacity => 0,
            None => self.entries.values().map(|e| e.0).min().unwrap_or(0),
        }
    }

    /// Lower bound on the count of `item`.
    pub fn lower(&self, item: u64) -> u64 {
        self.entries.get(&item).map_or(0, |&(c, e)| c - e)
    }

    pub fn words(&self) -> usize {
        3 * self.capacity
    }
}
