//! Ground-truth solvers: exact minimum set cover by branch-and-bound, the
//! offline greedy with level assignment, and the audit of extended background
//! solutions (a background thread cloned and run to completion).

use crate::audit::{AuditReport, Check};
use crate::hierarchy::Threshold;
use crate::types::{ElementId, Level, SetId};
use crate::SetSystem;
use std::collections::{BTreeSet, HashMap};

/// Default maximum number of live elements for [`exact_opt`].
pub const DEFAULT_EXACT_CAP: usize = 40;

/// Hard limit on live elements (bitmask width).
const BITMASK_LIMIT: usize = 128;

/// Errors of the exact oracle.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum OracleError {
    /// More live elements than the configured cap.
    #[error("{live} live elements exceed the oracle cap of {cap}")]
    CapExceeded {
        /// Number of live elements.
        live: usize,
        /// Configured cap.
        cap: usize,
    },
    /// A live element belongs to no set.
    #[error("element {0} is not contained in any set")]
    Infeasible(ElementId),
}

/// Minimum-cardinality cover of `live`, with a deterministic witness.
///
/// Branches on the uncovered element with the fewest candidate sets; prunes
/// with `chosen + ⌈uncovered / max gain⌉ ≥ best`, starting from the greedy
/// solution as incumbent.
pub fn exact_opt(
    system: &SetSystem,
    live: &BTreeSet<ElementId>,
    cap: usize,
) -> Result<(usize, BTreeSet<SetId>), OracleError> {
    let cap = cap.min(BITMASK_LIMIT);
    if live.len() > cap {
        return Err(OracleError::CapExceeded { live: live.len(), cap });
    }
    if live.is_empty() {
        return Ok((0, BTreeSet::new()));
    }
    let elements: Vec<ElementId> = live.iter().copied().collect();
    let position: HashMap<ElementId, usize> = elements.iter().enumerate().map(|(i, &e)| (e, i)).collect();

    // Restrict sets to the live elements; keep the smallest id per distinct mask.
    let mut by_mask: HashMap<u128, SetId> = HashMap::new();
    for &e in &elements {
        if system.incident(e).is_empty() {
            return Err(OracleError::Infeasible(e));
        }
        for &s in system.incident(e) {
            let mask = system
                .set(s)
                .iter()
                .filter_map(|x| position.get(x))
                .fold(0u128, |mask, &i| mask | (1u128 << i));
            by_mask.entry(mask).and_modify(|id| *id = (*id).min(s)).or_insert(s);
        }
    }
    let mut candidates: Vec<(SetId, u128)> = by_mask.into_iter().map(|(mask, s)| (s, mask)).collect();
    candidates.sort_unstable();

    let full: u128 = if elements.len() == 128 { u128::MAX } else { (1u128 << elements.len()) - 1 };
    let covering: Vec<Vec<usize>> = (0..elements.len())
        .map(|i| (0..candidates.len()).filter(|&c| candidates[c].1 >> i & 1 == 1).collect())
        .collect();

    let mut search = Search {
        candidates: &candidates,
        covering: &covering,
        full,
        best: greedy_masks(&candidates, full),
        chosen: Vec::new(),
    };
    search.branch(0);
    let witness: BTreeSet<SetId> = search.best.iter().map(|&c| candidates[c].0).collect();
    Ok((witness.len(), witness))
}

struct Search<'a> {
    candidates: &'a [(SetId, u128)],
    covering: &'a [Vec<usize>],
    full: u128,
    best: Vec<usize>,
    chosen: Vec<usize>,
}

impl Search<'_> {
    fn branch(&mut self, covered: u128) {
        if covered == self.full {
            if self.chosen.len() < self.best.len() {
                self.best = self.chosen.clone();
            }
            return;
        }
        let uncovered = self.full & !covered;
        let max_gain = self
            .candidates
            .iter()
            .map(|(_, mask)| (mask & uncovered).count_ones())
            .max()
            .unwrap_or(0) as usize;
        let remaining = uncovered.count_ones() as usize;
        let lower = remaining.div_ceil(max_gain.max(1));
        if self.chosen.len() + lower >= self.best.len() {
            return;
        }
        // Uncovered element with the fewest candidate sets.
        let pivot = (0..self.covering.len())
            .filter(|&i| uncovered >> i & 1 == 1)
            .min_by_key(|&i| (self.covering[i].len(), i))
            .expect("some element is uncovered");
        let mut options: Vec<usize> = self.covering[pivot].clone();
        options.sort_by_key(|&c| (std::cmp::Reverse((self.candidates[c].1 & uncovered).count_ones()), c));
        for c in options {
            self.chosen.push(c);
            self.branch(covered | self.candidates[c].1);
            self.chosen.pop();
        }
    }
}

fn greedy_masks(candidates: &[(SetId, u128)], full: u128) -> Vec<usize> {
    let mut covered = 0u128;
    let mut chosen = Vec::new();
    while covered != full {
        let (best, _) = candidates
            .iter()
            .enumerate()
            .map(|(c, (_, mask))| (c, (mask & !covered).count_ones()))
            .max_by_key(|&(c, gain)| (gain, std::cmp::Reverse(c)))
            .expect("candidates cover every element");
        covered |= candidates[best].1;
        chosen.push(best);
    }
    chosen
}

/// The smallest live element not contained in any set of `sets`, if any.
pub fn first_uncovered(system: &SetSystem, sets: &BTreeSet<SetId>, live: &BTreeSet<ElementId>) -> Option<ElementId> {
    live.iter()
        .copied()
        .find(|&e| !system.incident(e).iter().any(|s| sets.contains(s)))
}

/// Conservative approximation envelope of the greedy engine: output size is
/// expected to stay within `8·ln(max(n, 2))·OPT` for `n` live elements.
pub fn logn_envelope(live: usize) -> f64 {
    8.0 * (live.max(2) as f64).ln()
}

/// Conservative approximation envelope of the primal-dual engine: output size is
/// expected to stay within `10·f·OPT`.
pub fn f_envelope(f_max: usize) -> f64 {
    10.0 * f_max as f64
}

/// One set chosen by [`offline_greedy`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GreedyChoice {
    /// The chosen set.
    pub set: SetId,
    /// Elements newly covered by the set, ascending.
    pub coverage: Vec<ElementId>,
    /// Assigned level.
    pub level: Level,
}

/// Offline greedy on `live`: repeatedly pick the set covering the most
/// uncovered elements (smallest id on ties) and assign it level
/// `min(⌊log_1.5 |cov|⌋, p)`, then lower `p` to that level. `p` starts at
/// `start_pointer`.
pub fn offline_greedy(system: &SetSystem, live: &BTreeSet<ElementId>, start_pointer: Level) -> Vec<GreedyChoice> {
    let mut uncovered: BTreeSet<ElementId> = live.clone();
    let mut pointer = start_pointer;
    let mut choices = Vec::new();
    while !uncovered.is_empty() {
        let mut best: Option<(usize, SetId)> = None;
        for (s, members) in system.sets().iter().enumerate() {
            let gain = members.iter().filter(|e| uncovered.contains(e)).count();
            if gain > 0 && best.is_none_or(|(g, _)| gain > g) {
                best = Some((gain, s as SetId));
            }
        }
        let (gain, set) = best.expect("live elements are coverable");
        let coverage: Vec<ElementId> =
            system.set(set).iter().copied().filter(|e| uncovered.contains(e)).collect();
        let log_level = ((gain as f64).ln() / 1.5f64.ln()).floor() as Level;
        let level = log_level.min(pointer);
        pointer = pointer.min(level);
        for e in &coverage {
            uncovered.remove(e);
        }
        choices.push(GreedyChoice { set, coverage, level });
    }
    choices
}

/// Cumulative counts for the tidy check of an extended solution at one level:
/// `dirty` must stay within `θ · clean`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct TidyCounts {
    /// Passive (and, for primal-dual solutions, dormant) elements at levels `≤ j`.
    pub dirty: usize,
    /// Active (plus exposed) elements at levels `≤ j`.
    pub clean: usize,
}

/// Engines whose background threads can be cloned and run to completion.
pub trait ExtensionSource {
    /// Run a clone of thread `k` to completion without further updates and
    /// return the tidy counts of the result for levels `0..=k`, or `None` if the
    /// thread does not exist.
    fn extension_counts(&self, k: Level) -> Option<Vec<TidyCounts>>;

    /// Tidy threshold proven for extended background solutions at levels `≤ k`.
    fn extension_threshold(&self) -> Threshold;
}

/// Audit the extension of thread `k`: tidy at every level `≤ k`.
pub fn extended_audit(source: &dyn ExtensionSource, k: Level) -> AuditReport {
    let mut report = AuditReport::new();
    let theta = source.extension_threshold();
    match source.extension_counts(k) {
        None => report.pass(Check::Tidy),
        Some(counts) => {
            for (j, c) in counts.iter().enumerate().take(k + 1) {
                if !theta.admits(c.dirty, c.clean) {
                    report.fail(
                        Check::Tidy,
                        format!("extension of thread {k}, level {j}: {} > {}/{} · {}", c.dirty, theta.num, theta.den, c.clean),
                    );
                }
            }
            report.pass(Check::Tidy);
        }
    }
    report
}

#[cfg(test)]
mod tests {
    use super::*;

    fn e1() -> SetSystem {
        SetSystem::new(4, vec![vec![0, 1], vec![1, 2], vec![2, 3], vec![0, 3]], None).unwrap()
    }

    #[test]
    fn exact_on_e1_is_two() {
        let live: BTreeSet<ElementId> = (0..4).collect();
        let (size, witness) = exact_opt(&e1(), &live, DEFAULT_EXACT_CAP).unwrap();
        assert_eq!(size, 2);
        assert_eq!(witness, BTreeSet::from([0, 2]));
    }

    #[test]
    fn exact_on_empty_live_is_zero() {
        assert_eq!(exact_opt(&e1(), &BTreeSet::new(), 40).unwrap().0, 0);
    }

    #[test]
    fn exact_single_element() {
        let sys = SetSystem::new(3, vec![vec![1], vec![1, 2], vec![0]], None).unwrap();
        assert_eq!(exact_opt(&sys, &BTreeSet::from([1]), 40).unwrap().0, 1);
    }

    #[test]
    fn exact_rejects_over_cap() {
        let live: BTreeSet<ElementId> = (0..4).collect();
        assert_eq!(exact_opt(&e1(), &live, 3), Err(OracleError::CapExceeded { live: 4, cap: 3 }));
    }

    #[test]
    fn envelopes_match_their_formulas() {
        assert!((logn_envelope(0) - 8.0 * 2f64.ln()).abs() < 1e-12);
        assert!((logn_envelope(40) - 8.0 * 40f64.ln()).abs() < 1e-12);
        assert_eq!(f_envelope(3), 30.0);
    }

    #[test]
    fn greedy_on_e1() {
        let live: BTreeSet<ElementId> = (0..4).collect();
        let choices = offline_greedy(&e1(), &live, 7);
        assert_eq!(
            choices,
            vec![
                GreedyChoice { set: 0, coverage: vec![0, 1], level: 1 },
                GreedyChoice { set: 2, coverage: vec![2, 3], level: 1 },
            ]
        );
    }

    #[test]
    fn greedy_on_empty_and_singleton() {
        let sys = SetSystem::new(6, vec![vec![0, 1, 2, 3, 4], vec![5]], None).unwrap();
        assert!(offline_greedy(&sys, &BTreeSet::new(), 3).is_empty());
        let choices = offline_greedy(&sys, &BTreeSet::from([5]), 3);
        assert_eq!(choices, vec![GreedyChoice { set: 1, coverage: vec![5], level: 0 }]);
    }
}
