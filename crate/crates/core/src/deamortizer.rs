//! Worst-case deletion-recourse reduction.
//!
//! Sets removed by an engine are not deleted from the output immediately; they
//! are moved into a garbage pool that is drained at a fixed rate per step. The
//! [`OutputLedger`] reference-counts every set over the containers that hold it
//! (foreground, buffers), routes releases through the [`GarbageSet`], and counts
//! the recourse of each step.

use crate::types::SetId;
use std::collections::{BTreeSet, HashMap, HashSet};

/// Sets removed by the engine but still present in the output.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct GarbageSet {
    pool: BTreeSet<SetId>,
    gc_rate: usize,
}

impl GarbageSet {
    /// Empty pool drained at `gc_rate` sets per step.
    pub fn new(gc_rate: usize) -> Self {
        GarbageSet { pool: BTreeSet::new(), gc_rate }
    }

    /// Sets removed per step.
    pub fn gc_rate(&self) -> usize {
        self.gc_rate
    }

    /// Move removed sets into the pool (no recourse).
    pub fn absorb(&mut self, removed: impl IntoIterator<Item = SetId>) {
        self.pool.extend(removed);
    }

    /// Take one set back out of the pool (it re-entered the engine's
    /// solution). Returns whether it was present.
    pub fn reclaim(&mut self, s: SetId) -> bool {
        self.pool.remove(&s)
    }

    /// Remove up to `gc_rate` sets (smallest ids first) and return them.
    pub fn collect(&mut self) -> Vec<SetId> {
        let mut removed = Vec::with_capacity(self.gc_rate.min(self.pool.len()));
        while removed.len() < self.gc_rate {
            match self.pool.pop_first() {
                Some(s) => removed.push(s),
                None => break,
            }
        }
        removed
    }

    /// Number of pending sets.
    pub fn len(&self) -> usize {
        self.pool.len()
    }

    /// Whether the pool is empty.
    pub fn is_empty(&self) -> bool {
        self.pool.is_empty()
    }

    /// Whether `s` is pending.
    pub fn contains(&self, s: SetId) -> bool {
        self.pool.contains(&s)
    }

    /// Pending sets in ascending order.
    pub fn iter(&self) -> impl Iterator<Item = SetId> + '_ {
        self.pool.iter().copied()
    }
}

/// `gc_rate = β + ⌈α⌉·δ` with `δ = 1`.
pub fn gc_rate(insertion_bound: usize, alpha: f64) -> usize {
    insertion_bound + alpha.max(0.0).ceil() as usize
}

/// Worst-case total recourse per step: `2β + gc_rate`.
pub fn total_recourse_bound(insertion_bound: usize, gc_rate: usize) -> usize {
    2 * insertion_bound + gc_rate
}

/// Reference-counted output with garbage routing and per-step recourse
/// counters. A set that enters and leaves the output within one step (or the
/// reverse) cancels out, so the counters equal the set differences of
/// consecutive output snapshots.
#[derive(Debug, Clone)]
pub struct OutputLedger {
    holders: HashMap<SetId, u32>,
    garbage: GarbageSet,
    deamortize: bool,
    /// Sets that entered the output during the current step.
    entered: HashSet<SetId>,
    /// Sets that left the output during the current step.
    left: HashSet<SetId>,
}

impl OutputLedger {
    /// Empty output. With `deamortize = false`, released sets leave the output
    /// immediately.
    pub fn new(gc_rate: usize, deamortize: bool) -> Self {
        OutputLedger {
            holders: HashMap::new(),
            garbage: GarbageSet::new(gc_rate),
            deamortize,
            entered: HashSet::new(),
            left: HashSet::new(),
        }
    }

    /// One more container holds `s`.
    pub fn acquire(&mut self, s: SetId) {
        let count = self.holders.entry(s).or_insert(0);
        *count += 1;
        if *count == 1 && !self.garbage.reclaim(s) && !self.left.remove(&s) {
            self.entered.insert(s);
        }
    }

    fn leave(&mut self, s: SetId) {
        if !self.entered.remove(&s) {
            self.left.insert(s);
        }
    }

    /// One container no longer holds `s`.
    pub fn release(&mut self, s: SetId) {
        let count = self.holders.get_mut(&s).expect("released set is held");
        *count -= 1;
        if *count == 0 {
            self.holders.remove(&s);
            if self.deamortize {
                self.garbage.absorb([s]);
            } else {
                self.leave(s);
            }
        }
    }

    /// Drain the garbage at the configured rate (end of step).
    pub fn collect(&mut self) {
        for s in self.garbage.collect() {
            self.leave(s);
        }
    }

    /// `(insertion, deletion)` recourse since the last call.
    pub fn take_recourse(&mut self) -> (usize, usize) {
        let counts = (self.entered.len(), self.left.len());
        self.entered.clear();
        self.left.clear();
        counts
    }

    /// Number of containers holding `s`.
    pub fn holders(&self, s: SetId) -> u32 {
        self.holders.get(&s).copied().unwrap_or(0)
    }

    /// The garbage pool.
    pub fn garbage(&self) -> &GarbageSet {
        &self.garbage
    }

    /// Number of sets in the output.
    pub fn output_size(&self) -> usize {
        self.holders.len() + self.garbage.len()
    }

    /// The output: held sets plus garbage.
    pub fn output(&self) -> BTreeSet<SetId> {
        self.holders.keys().copied().chain(self.garbage.iter()).collect()
    }
}
