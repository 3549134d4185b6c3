//! Max-priority queue over set ids keyed by small non-negative counts whose
//! keys change by one at a time.
//!
//! Each key owns a bitset of the sets currently holding it, so re-keying is two
//! bit flips and extraction returns the largest key with the smallest set id
//! (the tie-break used throughout the crate).

use crate::types::SetId;

const WORD: usize = 64;

/// Bucketed max-queue with smallest-id tie-breaking.
#[derive(Debug, Clone)]
pub struct BucketQueue {
    keys: Vec<u32>,
    buckets: Vec<Vec<u64>>,
    sizes: Vec<usize>,
    words: usize,
    top: usize,
    len: usize,
}

impl BucketQueue {
    /// Empty queue over set ids `0..num_sets`, all with key 0 (absent).
    pub fn new(num_sets: usize) -> Self {
        BucketQueue {
            keys: vec![0; num_sets],
            buckets: vec![Vec::new()],
            sizes: vec![0],
            words: num_sets.div_ceil(WORD),
            top: 0,
            len: 0,
        }
    }

    /// Current key of `s` (0 = not queued).
    pub fn key(&self, s: SetId) -> usize {
        self.keys[s as usize] as usize
    }

    /// Number of queued sets (key > 0).
    pub fn len(&self) -> usize {
        self.len
    }

    /// Whether no set is queued.
    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    fn flip(&mut self, key: usize, s: SetId, on: bool) {
        if key == 0 {
            return;
        }
        if self.buckets.len() <= key {
            self.buckets.resize_with(key + 1, Vec::new);
            self.sizes.resize(key + 1, 0);
        }
        let bucket = &mut self.buckets[key];
        if bucket.is_empty() {
            bucket.resize(self.words, 0);
        }
        let (word, bit) = (s as usize / WORD, s as usize % WORD);
        if on {
            bucket[word] |= 1 << bit;
            self.sizes[key] += 1;
            self.top = self.top.max(key);
        } else {
            bucket[word] &= !(1 << bit);
            self.sizes[key] -= 1;
        }
    }

    fn settle_top(&mut self) {
        while self.top > 0 && self.sizes[self.top] == 0 {
            self.top -= 1;
        }
    }

    /// Set the key of `s`.
    pub fn set_key(&mut self, s: SetId, key: usize) {
        let old = self.keys[s as usize] as usize;
        if old == key {
            return;
        }
        self.flip(old, s, false);
        self.flip(key, s, true);
        self.keys[s as usize] = key as u32;
        match (old, key) {
            (0, _) => self.len += 1,
            (_, 0) => self.len -= 1,
            _ => {}
        }
        self.settle_top();
    }

    /// Increase the key of `s` by one.
    pub fn increment(&mut self, s: SetId) {
        self.set_key(s, self.key(s) + 1);
    }

    /// Decrease the key of `s` by one (saturating at 0).
    pub fn decrement(&mut self, s: SetId) {
        self.set_key(s, self.key(s).saturating_sub(1));
    }

    /// The largest key and its smallest set id, without removing it.
    pub fn peek(&self) -> Option<(usize, SetId)> {
        if self.top == 0 {
            return None;
        }
        let bucket = &self.buckets[self.top];
        let (word, bits) = bucket.iter().enumerate().find(|(_, bits)| **bits != 0)?;
        Some((self.top, (word * WORD + bits.trailing_zeros() as usize) as SetId))
    }

    /// Remove and return the largest key with its smallest set id.
    pub fn pop(&mut self) -> Option<(usize, SetId)> {
        let (key, s) = self.peek()?;
        self.set_key(s, 0);
        Some((key, s))
    }

    /// All queued `(set, key)` pairs in ascending set order, read from the
    /// buckets (used by audits to cross-check the keys).
    pub fn entries(&self) -> Vec<(SetId, usize)> {
        let mut entries = Vec::with_capacity(self.len);
        for (key, bucket) in self.buckets.iter().enumerate().skip(1) {
            for (word, &bits) in bucket.iter().enumerate() {
                let mut rest = bits;
                while rest != 0 {
                    let bit = rest.trailing_zeros() as usize;
                    entries.push(((word * WORD + bit) as SetId, key));
                    rest &= rest - 1;
                }
            }
        }
        entries.sort_unstable();
        entries
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::collections::BTreeMap;

    #[test]
    fn pops_largest_key_then_smallest_id() {
        let mut queue = BucketQueue::new(130);
        queue.set_key(129, 3);
        queue.set_key(5, 3);
        queue.set_key(7, 4);
        assert_eq!(queue.pop(), Some((4, 7)));
        assert_eq!(queue.pop(), Some((3, 5)));
        queue.decrement(129);
        assert_eq!(queue.pop(), Some((2, 129)));
        assert_eq!(queue.pop(), None);
        assert!(queue.is_empty());
    }

    proptest! {
        #[test]
        fn agrees_with_ordered_map(ops in proptest::collection::vec((0u32..70, 0usize..3), 0..300)) {
            let mut queue = BucketQueue::new(70);
            let mut model: BTreeMap<SetId, usize> = BTreeMap::new();
            for (s, op) in ops {
                match op {
                    0 => { queue.increment(s); *model.entry(s).or_default() += 1; }
                    1 => {
                        queue.decrement(s);
                        if let Some(k) = model.get_mut(&s) { *k -= 1; if *k == 0 { model.remove(&s); } }
                    }
                    _ => {
                        let expected = model.iter().map(|(s, k)| (*k, *s)).max_by_key(|&(k, s)| (k, std::cmp::Reverse(s)));
                        prop_assert_eq!(queue.pop(), expected);
                        if let Some((_, s)) = expected { model.remove(&s); }
                    }
                }
                let entries: Vec<(SetId, usize)> = model.iter().map(|(s, k)| (*s, *k)).collect();
                prop_assert_eq!(queue.entries(), entries);
            }
        }
    }
}
