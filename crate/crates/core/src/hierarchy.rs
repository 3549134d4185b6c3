//! Hierarchical solutions: sets with integer levels and disjoint coverages,
//! elements with levels and passive levels, per-level ordered indexes, the
//! level splice used by background-thread switches, and structural auditors.
//!
//! Level `j` of a solution stores three ordered maps: the sets at level `j`
//! (with their coverage sizes), and the live and dormant covered elements at
//! level `j`. Every query that must locate a set or an element searches the
//! per-level maps, so moving whole levels between solutions is a constant number
//! of structure moves.
//!
//! Notation used throughout (for a level `k`):
//!
//! - `C_k`: covered elements (live or dormant) at levels `≤ k`;
//! - `L_k`: live covered elements at levels `≤ k` (the *sub-universe*);
//! - `A_k`: elements of `L_k` with `plev > k` (*active*);
//! - `P_k`: elements of `L_k` with `plev ≤ k` (*passive*).

use crate::audit::{AuditReport, Check};
use crate::metrics::OpTally;
use crate::types::{below_power_1_5, ElementId, Level, SetId};
use crate::SetSystem;
use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::fmt::Write as _;
use std::ops::Bound;
use std::rc::Rc;

/// Errors signalling misuse or structural corruption of a solution.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum HierarchyError {
    /// The element already has an owner.
    #[error("element {0} is already covered")]
    AlreadyCovered(ElementId),
    /// The element has no owner.
    #[error("element {0} is not covered")]
    NotCovered(ElementId),
    /// The element is covered but already dormant.
    #[error("element {0} is already dormant")]
    AlreadyDormant(ElementId),
    /// The element is covered and live.
    #[error("element {0} is live")]
    AlreadyLive(ElementId),
    /// A passive level below the element's level was requested.
    #[error("passive level {plev} is below level {lev}")]
    PassiveBelowLevel {
        /// Requested level.
        lev: Level,
        /// Requested passive level.
        plev: Level,
    },
    /// The owner set is not present at the requested level.
    #[error("set {set} is not present at level {level}")]
    SetMissing {
        /// Set id.
        set: SetId,
        /// Requested level.
        level: Level,
    },
    /// The set is already present in the solution.
    #[error("set {0} already appears in the solution")]
    DuplicateSet(SetId),
    /// A level above the solution's top level was used.
    #[error("level {level} exceeds the top level {top}")]
    LevelOutOfRange {
        /// Requested level.
        level: Level,
        /// Top level.
        top: Level,
    },
}

/// Per-element bookkeeping: level, passive level and owner set.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ElementNode {
    /// Level of the element (equals its owner's level).
    pub lev: Level,
    /// Passive level (`≥ lev`).
    pub plev: Level,
    /// The set whose coverage contains the element.
    pub owner: SetId,
}

/// Ordered indexes of one level.
#[derive(Debug, Clone, Default)]
struct LevelIndex {
    /// Sets at this level with their coverage sizes (live and dormant).
    sets: BTreeMap<SetId, usize>,
    /// Live covered elements at this level.
    live: BTreeMap<ElementId, ElementNode>,
    /// Dormant covered elements at this level.
    dormant: BTreeMap<ElementId, ElementNode>,
    /// Histogram of passive levels among the live elements of this level.
    live_by_plev: Vec<usize>,
}

impl LevelIndex {
    fn new(top: Level) -> Self {
        LevelIndex { live_by_plev: vec![0; top + 1], ..LevelIndex::default() }
    }
}

/// Tallies for one level `k` (cumulative over levels `≤ k`).
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct LevelCounts {
    /// `|C_k|`.
    pub covered: usize,
    /// `|L_k|`.
    pub live: usize,
    /// `|A_k|`.
    pub active: usize,
    /// `|P_k|`.
    pub passive: usize,
}

/// Cumulative per-level counts `|C_k|, |L_k|, |A_k|, |P_k|` for every `k`.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct LevelStats {
    /// Entry `k` holds the counts for levels `≤ k`.
    pub levels: Vec<LevelCounts>,
}

impl LevelStats {
    /// Counts for level `k` (saturating at the top level).
    pub fn at(&self, k: Level) -> LevelCounts {
        self.levels
            .get(k)
            .or_else(|| self.levels.last())
            .copied()
            .unwrap_or_default()
    }
}

/// Rational threshold `num / den` for tidiness checks.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Threshold {
    /// Numerator.
    pub num: u64,
    /// Denominator (positive).
    pub den: u64,
}

impl Threshold {
    /// `num / den`.
    pub const fn new(num: u64, den: u64) -> Self {
        Threshold { num, den }
    }

    /// Whether `lhs ≤ (num/den) · rhs`.
    pub fn admits(&self, lhs: usize, rhs: usize) -> bool {
        (lhs as u128) * (self.den as u128) <= (rhs as u128) * (self.num as u128)
    }
}

/// What [`HierarchicalSolution::audit`] should check beyond the structure.
#[derive(Debug, Clone, Copy, Default)]
pub struct AuditParams<'a> {
    /// Live elements that must be covered, and that are the only live covered
    /// elements allowed (feasibility check).
    pub live: Option<&'a BTreeSet<ElementId>>,
    /// Tidy threshold `θ`: `|P_k| ≤ θ·|A_k|` for all `k ≤ tidy_upto`.
    pub tidy: Option<Threshold>,
    /// Highest level for the tidy check (defaults to the top level).
    pub tidy_upto: Option<Level>,
    /// Whether to check stability with `ε = 0.5` against the whole set family.
    pub stable: bool,
}

/// A hierarchical solution with per-level ordered indexes.
#[derive(Debug, Clone)]
pub struct HierarchicalSolution {
    levels: Vec<LevelIndex>,
    set_count: usize,
    tally: Rc<OpTally>,
}

impl HierarchicalSolution {
    /// An empty solution with levels `0..=top`.
    pub fn new(top: Level) -> Self {
        Self::with_tally(top, OpTally::shared())
    }

    /// An empty solution that reports operations to a shared tally.
    pub fn with_tally(top: Level, tally: Rc<OpTally>) -> Self {
        HierarchicalSolution {
            levels: (0..=top).map(|_| LevelIndex::new(top)).collect(),
            set_count: 0,
            tally,
        }
    }

    /// Highest representable level.
    pub fn top_level(&self) -> Level {
        self.levels.len() - 1
    }

    /// Number of sets in the solution.
    pub fn num_sets(&self) -> usize {
        self.set_count
    }

    /// Whether the solution has no sets.
    pub fn is_empty(&self) -> bool {
        self.set_count == 0
    }

    fn check_level(&self, level: Level) -> Result<(), HierarchyError> {
        if level > self.top_level() {
            return Err(HierarchyError::LevelOutOfRange { level, top: self.top_level() });
        }
        Ok(())
    }

    /// Level of set `s`, searching the per-level set indexes.
    pub fn set_level(&self, s: SetId) -> Option<Level> {
        for (level, index) in self.levels.iter().enumerate().rev() {
            self.tally.ordered(1);
            if index.sets.contains_key(&s) {
                return Some(level);
            }
        }
        None
    }

    /// Whether set `s` is present at exactly `level`.
    pub fn has_set_at(&self, s: SetId, level: Level) -> bool {
        self.tally.ordered(1);
        self.levels.get(level).is_some_and(|index| index.sets.contains_key(&s))
    }

    /// Add set `s` at `level` with empty coverage (coverage is filled by
    /// [`assign`](Self::assign)).
    pub fn add_set(&mut self, s: SetId, level: Level) -> Result<(), HierarchyError> {
        self.check_level(level)?;
        if self.set_level(s).is_some() {
            return Err(HierarchyError::DuplicateSet(s));
        }
        self.tally.ordered(1);
        self.levels[level].sets.insert(s, 0);
        self.set_count += 1;
        Ok(())
    }

    /// Add a set the caller knows is absent (skips the duplicate search).
    pub(crate) fn add_set_fresh(&mut self, s: SetId, level: Level) {
        self.tally.ordered(1);
        let previous = self.levels[level].sets.insert(s, 0);
        debug_assert!(previous.is_none(), "set {s} added twice at level {level}");
        self.set_count += 1;
    }

    /// Locate a covered element: its node and whether it is live.
    pub fn locate(&self, e: ElementId) -> Option<(ElementNode, bool)> {
        for index in self.levels.iter().rev() {
            self.tally.ordered(2);
            if let Some(node) = index.live.get(&e) {
                return Some((*node, true));
            }
            if let Some(node) = index.dormant.get(&e) {
                return Some((*node, false));
            }
        }
        None
    }

    /// Level of a covered element (live or dormant).
    pub fn element_level(&self, e: ElementId) -> Option<Level> {
        self.locate(e).map(|(node, _)| node.lev)
    }

    /// Cover `e` by `s` at level `lev` with passive level `plev`.
    pub fn assign(&mut self, e: ElementId, s: SetId, lev: Level, plev: Level) -> Result<(), HierarchyError> {
        self.check_level(lev)?;
        if plev < lev {
            return Err(HierarchyError::PassiveBelowLevel { lev, plev });
        }
        if self.locate(e).is_some() {
            return Err(HierarchyError::AlreadyCovered(e));
        }
        if !self.levels[lev].sets.contains_key(&s) {
            return Err(HierarchyError::SetMissing { set: s, level: lev });
        }
        self.assign_fresh(e, s, lev, plev);
        Ok(())
    }

    /// Cover an element the caller knows is uncovered, by a set it knows is at
    /// `lev` (skips the validation searches).
    pub(crate) fn assign_fresh(&mut self, e: ElementId, s: SetId, lev: Level, plev: Level) {
        debug_assert!(plev >= lev);
        let top = self.top_level();
        let index = &mut self.levels[lev];
        self.tally.ordered(2);
        *index.sets.get_mut(&s).expect("owner present at level") += 1;
        index.live.insert(e, ElementNode { lev, plev, owner: s });
        index.live_by_plev[plev.min(top)] += 1;
    }

    /// Make a live covered element dormant, resetting `plev` to `lev`.
    pub fn mark_dormant(&mut self, e: ElementId) -> Result<ElementNode, HierarchyError> {
        let (node, live) = self.locate(e).ok_or(HierarchyError::NotCovered(e))?;
        if !live {
            return Err(HierarchyError::AlreadyDormant(e));
        }
        Ok(self.mark_dormant_at(e, node.lev))
    }

    /// Make the live element `e` at level `level` dormant.
    pub(crate) fn mark_dormant_at(&mut self, e: ElementId, level: Level) -> ElementNode {
        let top = self.top_level();
        let index = &mut self.levels[level];
        self.tally.ordered(2);
        let mut node = index.live.remove(&e).expect("live element at level");
        index.live_by_plev[node.plev.min(top)] -= 1;
        node.plev = node.lev;
        index.dormant.insert(e, node);
        node
    }

    /// Make a dormant covered element live again with `plev = lev`.
    pub fn reactivate(&mut self, e: ElementId) -> Result<ElementNode, HierarchyError> {
        let (node, live) = self.locate(e).ok_or(HierarchyError::NotCovered(e))?;
        if live {
            return Err(HierarchyError::AlreadyLive(e));
        }
        Ok(self.reactivate_at(e, node.lev))
    }

    /// Reactivate the dormant element `e` at level `level`.
    pub(crate) fn reactivate_at(&mut self, e: ElementId, level: Level) -> ElementNode {
        let index = &mut self.levels[level];
        self.tally.ordered(2);
        let node = index.dormant.remove(&e).expect("dormant element at level");
        index.live_by_plev[node.plev] += 1;
        index.live.insert(e, node);
        node
    }

    /// Among sets of the solution containing `e`, the one with the highest
    /// level; ties go to the smaller id.
    pub fn highest_covering_set(&self, system: &SetSystem, e: ElementId) -> Option<SetId> {
        self.highest_covering_set_with_level(system, e).map(|(s, _)| s)
    }

    /// Like [`highest_covering_set`](Self::highest_covering_set), also
    /// returning the level.
    pub fn highest_covering_set_with_level(&self, system: &SetSystem, e: ElementId) -> Option<(SetId, Level)> {
        for (level, index) in self.levels.iter().enumerate().rev() {
            if index.sets.is_empty() {
                continue;
            }
            for &s in system.incident(e) {
                self.tally.ordered(1);
                if index.sets.contains_key(&s) {
                    return Some((s, level));
                }
            }
        }
        None
    }

    /// Smallest live element at `level` with id greater than `after`, with its
    /// node.
    pub fn live_successor(&self, level: Level, after: Option<ElementId>) -> Option<(ElementId, ElementNode)> {
        self.tally.ordered(1);
        let index = &self.levels[level];
        match after {
            None => index.live.iter().next(),
            Some(after) => index.live.range((Bound::Excluded(after), Bound::Unbounded)).next(),
        }
        .map(|(e, node)| (*e, *node))
    }

    /// Node of a live element known to be at `level`.
    pub fn live_node_at(&self, level: Level, e: ElementId) -> Option<ElementNode> {
        self.tally.ordered(1);
        self.levels[level].live.get(&e).copied()
    }

    /// `|L_k|`: live covered elements at levels `≤ k`.
    pub fn live_upto(&self, k: Level) -> usize {
        self.levels.iter().take(k + 1).map(|index| index.live.len()).sum()
    }

    /// Total number of live covered elements.
    pub fn live_total(&self) -> usize {
        self.live_upto(self.top_level())
    }

    /// Incrementally maintained cumulative level statistics.
    pub fn stats(&self) -> LevelStats {
        let top = self.top_level();
        let mut levels = Vec::with_capacity(top + 1);
        let mut covered = 0;
        let mut live = 0;
        // plev_hist[p] = live elements at levels ≤ k with passive level p.
        let mut plev_hist = vec![0usize; top + 1];
        for (k, index) in self.levels.iter().enumerate() {
            covered += index.live.len() + index.dormant.len();
            live += index.live.len();
            for (p, count) in index.live_by_plev.iter().enumerate() {
                plev_hist[p] += count;
            }
            // Live elements with plev ≤ k plus every dormant element
            // (dormant elements have plev = lev, so they are passive).
            let live_passive: usize = plev_hist[..=k].iter().sum();
            let active = live - live_passive;
            levels.push(LevelCounts { covered, live, active, passive: covered - active });
        }
        LevelStats { levels }
    }

    /// Level statistics recomputed from the element nodes.
    pub fn recompute_stats(&self) -> LevelStats {
        let top = self.top_level();
        let mut levels = vec![LevelCounts::default(); top + 1];
        for index in &self.levels {
            for node in index.dormant.values() {
                for counts in levels.iter_mut().skip(node.lev) {
                    counts.covered += 1;
                    counts.passive += 1;
                }
            }
            for node in index.live.values() {
                for (k, counts) in levels.iter_mut().enumerate().skip(node.lev) {
                    counts.covered += 1;
                    counts.live += 1;
                    if node.plev > k {
                        counts.active += 1;
                    } else {
                        counts.passive += 1;
                    }
                }
            }
        }
        LevelStats { levels }
    }

    /// All sets with their levels, ascending by level then id.
    pub fn sets(&self) -> Vec<(SetId, Level)> {
        self.levels
            .iter()
            .enumerate()
            .flat_map(|(level, index)| index.sets.keys().map(move |&s| (s, level)))
            .collect()
    }

    /// Sets at one level, ascending by id.
    pub fn sets_at(&self, level: Level) -> impl Iterator<Item = SetId> + '_ {
        self.levels[level].sets.keys().copied()
    }

    /// All covered elements with their nodes and liveness.
    pub fn elements(&self) -> Vec<(ElementId, ElementNode, bool)> {
        let mut out = Vec::new();
        for index in &self.levels {
            out.extend(index.live.iter().map(|(e, n)| (*e, *n, true)));
            out.extend(index.dormant.iter().map(|(e, n)| (*e, *n, false)));
        }
        out.sort_by_key(|(e, _, _)| *e);
        out
    }

    /// Coverage of every set, each sorted ascending.
    pub fn coverages(&self) -> BTreeMap<SetId, Vec<ElementId>> {
        let mut out: BTreeMap<SetId, Vec<ElementId>> = BTreeMap::new();
        for index in &self.levels {
            for &s in index.sets.keys() {
                out.entry(s).or_default();
            }
            for (e, node) in index.live.iter().chain(index.dormant.iter()) {
                out.entry(node.owner).or_default().push(*e);
            }
        }
        for members in out.values_mut() {
            members.sort_unstable();
        }
        out
    }

    /// Replace levels `≤ k` by those of `source` and merge `source`'s level
    /// `k + 1` into level `k + 1`. Returns the sets evicted from levels `≤ k`.
    ///
    /// Each level is moved as a whole; the merge at `k + 1` is one structure
    /// merge.
    pub fn splice_levels(&mut self, mut source: HierarchicalSolution, k: Level) -> Result<Vec<SetId>, HierarchyError> {
        let top = self.top_level();
        if k + 1 > top || source.top_level() > top {
            return Err(HierarchyError::LevelOutOfRange { level: k + 1, top });
        }
        // Validate the no-duplicate precondition before mutating anything.
        let boundary: HashSet<SetId> = self.levels[k + 1..]
            .iter()
            .flat_map(|index| index.sets.keys().copied())
            .collect();
        for index in source.levels.iter().take(k + 2) {
            if let Some(&s) = index.sets.keys().find(|s| boundary.contains(s)) {
                return Err(HierarchyError::DuplicateSet(s));
            }
        }
        if let Some(level) = (k + 2..source.levels.len()).find(|&j| !source.levels[j].sets.is_empty()) {
            return Err(HierarchyError::LevelOutOfRange { level, top: k + 1 });
        }

        let mut evicted = Vec::new();
        for j in 0..=k {
            self.tally.ordered(1);
            let mut incoming = std::mem::take(&mut source.levels[j]);
            incoming.live_by_plev.resize(top + 1, 0);
            let outgoing = std::mem::replace(&mut self.levels[j], incoming);
            self.set_count -= outgoing.sets.len();
            self.set_count += self.levels[j].sets.len();
            evicted.extend(outgoing.sets.into_keys());
        }
        self.tally.ordered(1);
        let mut merged = std::mem::take(&mut source.levels[k + 1]);
        let target = &mut self.levels[k + 1];
        self.set_count += merged.sets.len();
        target.sets.append(&mut merged.sets);
        target.live.append(&mut merged.live);
        target.dormant.append(&mut merged.dormant);
        for (p, count) in merged.live_by_plev.iter().enumerate() {
            target.live_by_plev[p] += count;
        }
        Ok(evicted)
    }

    /// Audit structural invariants, and optionally feasibility, tidiness and
    /// stability.
    pub fn audit(&self, system: &SetSystem, params: AuditParams<'_>) -> AuditReport {
        let mut report = AuditReport::new();
        let top = self.top_level();

        // Set placement: no duplicates, coverage counts.
        let mut set_levels: HashMap<SetId, Level> = HashMap::new();
        for (level, index) in self.levels.iter().enumerate() {
            for &s in index.sets.keys() {
                if let Some(previous) = set_levels.insert(s, level) {
                    report.fail(Check::NoDuplicateSet, format!("set {s} at levels {previous} and {level}"));
                }
            }
        }
        report.pass(Check::NoDuplicateSet);

        let mut owned: HashMap<SetId, usize> = HashMap::new();
        let mut seen: HashSet<ElementId> = HashSet::new();
        for (level, index) in self.levels.iter().enumerate() {
            for (live, map) in [(true, &index.live), (false, &index.dormant)] {
                for (&e, node) in map {
                    if !seen.insert(e) {
                        report.fail(Check::DisjointCoverage, format!("element {e} has two owners"));
                    }
                    if node.lev != level {
                        report.fail(Check::OwnerLevel, format!("element {e} stored at level {level} has lev {}", node.lev));
                    }
                    match set_levels.get(&node.owner) {
                        Some(&owner_level) if owner_level == node.lev => {}
                        Some(&owner_level) => report.fail(
                            Check::OwnerLevel,
                            format!("element {e} at level {} owned by set {} at level {owner_level}", node.lev, node.owner),
                        ),
                        None => report.fail(Check::OwnerLevel, format!("element {e} owned by absent set {}", node.owner)),
                    }
                    if !system.set(node.owner).binary_search(&e).is_ok() {
                        report.fail(Check::DisjointCoverage, format!("element {e} is not a member of its owner {}", node.owner));
                    }
                    if node.plev < node.lev {
                        report.fail(Check::PassiveLevelInvariant, format!("element {e}: plev {} < lev {}", node.plev, node.lev));
                    }
                    if !live && node.plev != node.lev {
                        report.fail(Check::PassiveLevelInvariant, format!("dormant element {e}: plev {} ≠ lev {}", node.plev, node.lev));
                    }
                    *owned.entry(node.owner).or_default() += 1;
                }
            }
        }
        report.pass(Check::DisjointCoverage);
        report.pass(Check::OwnerLevel);
        report.pass(Check::PassiveLevelInvariant);

        for (level, index) in self.levels.iter().enumerate() {
            for (&s, &size) in &index.sets {
                let actual = owned.get(&s).copied().unwrap_or(0);
                if actual == 0 {
                    report.fail(Check::NonemptyCoverage, format!("set {s} at level {level} owns nothing"));
                }
                if actual != size {
                    report.fail(Check::LevelStats, format!("set {s}: stored coverage {size}, actual {actual}"));
                }
                // lev(s) ≤ log_1.5 |cov(s)|  ⇔  |cov(s)| ≥ 1.5^lev
                if below_power_1_5(actual, level) {
                    report.fail(Check::LevelInvariant, format!("set {s} at level {level} covers only {actual}"));
                }
            }
        }
        report.pass(Check::NonemptyCoverage);
        report.pass(Check::LevelInvariant);

        let stats = self.stats();
        report.ensure(Check::LevelStats, stats == self.recompute_stats(), || "incremental tallies differ from recount".into());

        if let Some(live) = params.live {
            let covered_live: BTreeSet<ElementId> =
                self.levels.iter().flat_map(|index| index.live.keys().copied()).collect();
            match live.iter().find(|e| !covered_live.contains(e)) {
                Some(e) => report.fail(Check::Feasibility, format!("live element {e} is uncovered")),
                None => match covered_live.iter().find(|e| !live.contains(e)) {
                    Some(e) => report.fail(Check::Feasibility, format!("element {e} is covered as live but is dormant")),
                    None => report.pass(Check::Feasibility),
                },
            }
        }

        if let Some(theta) = params.tidy {
            let upto = params.tidy_upto.unwrap_or(top).min(top);
            for k in 0..=upto {
                let counts = stats.at(k);
                if !theta.admits(counts.passive, counts.active) {
                    report.fail(
                        Check::Tidy,
                        format!("level {k}: |P| = {} > {}/{} · |A| = {}", counts.passive, theta.num, theta.den, counts.active),
                    );
                }
            }
            report.pass(Check::Tidy);
        }

        if params.stable {
            match self.stability_witness(system) {
                Some((s, k, count)) => report.fail(Check::Stable, format!("set {s} meets A_{k} in {count} elements")),
                None => report.pass(Check::Stable),
            }
        }
        report
    }

    /// First `(set, level, |A_k ∩ s|)` with `|A_k ∩ s| ≥ 1.5^{k+1}`, if any.
    ///
    /// A live element with level `lev` and passive level `plev` is in `A_k`
    /// exactly for `lev ≤ k < plev`, so each element contributes one interval of
    /// levels to each of its incident sets.
    pub fn stability_witness(&self, system: &SetSystem) -> Option<(SetId, Level, usize)> {
        let top = self.top_level();
        let mut diff: HashMap<SetId, Vec<i64>> = HashMap::new();
        for index in &self.levels {
            for (&e, node) in &index.live {
                if node.plev <= node.lev {
                    continue;
                }
                let end = node.plev.min(top + 1);
                for &s in system.incident(e) {
                    let row = diff.entry(s).or_insert_with(|| vec![0; top + 2]);
                    row[node.lev] += 1;
                    row[end] -= 1;
                }
            }
        }
        let mut witnesses: Vec<(SetId, Level, usize)> = Vec::new();
        for (s, row) in diff {
            let mut running = 0i64;
            for (k, delta) in row.iter().enumerate().take(top + 1) {
                running += delta;
                if !below_power_1_5(running as usize, k + 1) {
                    witnesses.push((s, k, running as usize));
                    break;
                }
            }
        }
        witnesses.into_iter().min()
    }

    /// Canonical text dump: levels ascending, sets ascending, then coverage
    /// with `(lev, plev)` and a `*` for dormant elements.
    pub fn dump(&self) -> String {
        let mut out = String::new();
        let coverages = self.coverages();
        for (level, index) in self.levels.iter().enumerate() {
            if index.sets.is_empty() {
                continue;
            }
            let _ = writeln!(out, "level {level}");
            for &s in index.sets.keys() {
                let _ = write!(out, "  set {s}:");
                for e in &coverages[&s] {
                    if let Some(node) = index.live.get(e) {
                        let _ = write!(out, " {e}(plev {})", node.plev);
                    } else if index.dormant.contains_key(e) {
                        let _ = write!(out, " {e}*");
                    }
                }
                out.push('\n');
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn system() -> SetSystem {
        // Sets 0..8 all contain element 0; set i also contains i+1.
        let sets = (0..8u32).map(|i| vec![0, i + 1]).collect();
        SetSystem::new(9, sets, None).unwrap()
    }

    #[test]
    fn first_assignment_counts() {
        let mut sol = HierarchicalSolution::new(4);
        sol.add_set(3, 0).unwrap();
        sol.assign(0, 3, 0, 0).unwrap();
        let stats = sol.stats();
        assert_eq!(stats.at(0).covered, 1);
        assert_eq!(stats.at(0).passive, 1);
        assert_eq!(stats.at(0).active, 0);
        let mut sol = HierarchicalSolution::new(4);
        sol.add_set(3, 0).unwrap();
        sol.assign(5, 3, 0, 1).unwrap();
        assert_eq!(sol.stats().at(0).active, 1);
        assert_eq!(sol.stats().at(0).covered, 1);
    }

    #[test]
    fn assign_errors() {
        let mut sol = HierarchicalSolution::new(4);
        sol.add_set(3, 2).unwrap();
        assert_eq!(sol.assign(1, 3, 2, 1), Err(HierarchyError::PassiveBelowLevel { lev: 2, plev: 1 }));
        sol.assign(1, 3, 2, 2).unwrap();
        assert_eq!(sol.assign(1, 3, 2, 2), Err(HierarchyError::AlreadyCovered(1)));
        assert_eq!(sol.assign(2, 4, 2, 2), Err(HierarchyError::SetMissing { set: 4, level: 2 }));
        assert_eq!(sol.add_set(3, 0), Err(HierarchyError::DuplicateSet(3)));
    }

    #[test]
    fn mark_dormant_resets_passive_level() {
        let mut sol = HierarchicalSolution::new(5);
        sol.add_set(1, 2).unwrap();
        sol.assign(7, 1, 2, 4).unwrap();
        let node = sol.mark_dormant(7).unwrap();
        assert_eq!(node.plev, 2);
        assert_eq!(sol.locate(7), Some((ElementNode { lev: 2, plev: 2, owner: 1 }, false)));
        assert_eq!(sol.mark_dormant(7), Err(HierarchyError::AlreadyDormant(7)));
        assert_eq!(sol.mark_dormant(8), Err(HierarchyError::NotCovered(8)));
        assert_eq!(sol.stats(), sol.recompute_stats());
    }

    #[test]
    fn highest_covering_set_breaks_ties_by_id() {
        let sys = system();
        let mut sol = HierarchicalSolution::new(5);
        sol.add_set(1, 3).unwrap();
        sol.add_set(7, 3).unwrap();
        sol.add_set(4, 1).unwrap();
        assert_eq!(sol.highest_covering_set(&sys, 0), Some(1));
        assert_eq!(sol.highest_covering_set(&sys, 3), None);
        let mut low = HierarchicalSolution::new(5);
        low.add_set(2, 0).unwrap();
        assert_eq!(low.highest_covering_set(&sys, 0), Some(2));
    }

    #[test]
    fn splice_replaces_low_levels_and_merges_next() {
        let mut target = HierarchicalSolution::new(3);
        target.add_set(1, 0).unwrap();
        target.assign(2, 1, 0, 0).unwrap();
        target.add_set(2, 1).unwrap();
        target.assign(3, 2, 1, 1).unwrap();
        let mut source = HierarchicalSolution::new(3);
        source.add_set(3, 0).unwrap();
        source.assign(4, 3, 0, 1).unwrap();
        source.add_set(4, 1).unwrap();
        source.assign(5, 4, 1, 1).unwrap();
        let evicted = target.splice_levels(source, 0).unwrap();
        assert_eq!(evicted, vec![1]);
        assert_eq!(target.sets(), vec![(3, 0), (2, 1), (4, 1)]);
        assert_eq!(target.stats(), target.recompute_stats());
        assert_eq!(target.num_sets(), 3);
    }

    #[test]
    fn splice_rejects_duplicates_across_boundary() {
        let mut target = HierarchicalSolution::new(3);
        target.add_set(5, 1).unwrap();
        let mut source = HierarchicalSolution::new(3);
        source.add_set(5, 1).unwrap();
        assert_eq!(target.splice_levels(source, 0), Err(HierarchyError::DuplicateSet(5)));
    }

    #[test]
    fn empty_solution_audits_clean() {
        let sys = system();
        let sol = HierarchicalSolution::new(3);
        let live = BTreeSet::new();
        let report = sol.audit(
            &sys,
            AuditParams { live: Some(&live), tidy: Some(Threshold::new(1, 2)), stable: true, ..AuditParams::default() },
        );
        assert!(report.passed(), "{report}");
    }

    #[test]
    fn tidy_failure_is_reported() {
        // |P_2| = 3, |A_2| = 4: 3 > 0.5 · 4.
        let sets = vec![(0..7).collect::<Vec<ElementId>>()];
        let sys = SetSystem::new(7, sets, None).unwrap();
        let mut sol = HierarchicalSolution::new(5);
        sol.add_set(0, 2).unwrap();
        for e in 0..3 {
            sol.assign(e, 0, 2, 2).unwrap();
        }
        for e in 3..7 {
            sol.assign(e, 0, 2, 5).unwrap();
        }
        let report = sol.audit(&sys, AuditParams { tidy: Some(Threshold::new(1, 2)), ..AuditParams::default() });
        assert!(!report.check_passed(Check::Tidy));
        let witness = report.verdict(Check::Tidy).unwrap().as_deref().unwrap();
        assert!(witness.starts_with("level 2"), "{witness}");
    }

    #[test]
    fn level_invariant_violation_is_reported() {
        let sys = system();
        let mut sol = HierarchicalSolution::new(4);
        sol.add_set(0, 2).unwrap();
        sol.assign(0, 0, 2, 2).unwrap();
        sol.assign(1, 0, 2, 2).unwrap();
        let report = sol.audit(&sys, AuditParams::default());
        assert!(!report.check_passed(Check::LevelInvariant));
    }
}
