//! The `O(f)`-approximate engine: a primal-dual foreground solution with exact
//! dual values, patched locally on every update, plus one background thread per
//! level that re-runs the primal-dual rebuild on levels `≤ k` by lazily raising
//! the duals of exposed elements, then copies and switches like the greedy
//! engine.

use crate::audit::{AuditReport, Check};
use crate::bucket_queue::BucketQueue;
use crate::deamortizer::{self, OutputLedger};
use crate::dual::{DualNum, DualScale};
use crate::hierarchy::Threshold;
use crate::metrics::{OpTally, StepReport};
use crate::oracle::{ExtensionSource, TidyCounts};
use crate::scheduler::{self, CopyGate, EngineConfig, Incident, IncidentLog, Phase};
use crate::types::{max_level, ElementId, Level, Op, SetId, Update};
use crate::{DynamicSetCover, EngineError, SetSystem};
use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::ops::Bound;
use std::rc::Rc;

/// Default speed constant.
pub const DEFAULT_C_SPD: usize = 500;

/// Tidy threshold proven for the foreground.
const FOREGROUND_TIDY: Threshold = Threshold::new(1, 2);

/// Tidy threshold proven for extended background solutions at levels `≤ k`.
const EXTENSION_TIDY: Threshold = Threshold::new(1, 10);

/// Lifetime bound `0.1·|L_k(F)|` as a ratio.
const LIFETIME: (u64, u64) = (1, 10);

/// Buffer-size bound `|S*(B_k)| ≤ 3·τ_sus` while copying.
const BUFFER_FACTOR: usize = 3;

// ───────────────────────── Primal-dual solutions ─────────────────────────

/// One level of a primal-dual solution.
#[derive(Debug, Clone, Default)]
struct PdLevel {
    sets: BTreeSet<SetId>,
    active: BTreeMap<ElementId, DualNum>,
    passive: BTreeMap<ElementId, DualNum>,
    dormant: BTreeMap<ElementId, DualNum>,
    /// Total dual of the covered elements at this level inside each set.
    incident: HashMap<SetId, DualNum>,
}

/// A covered element of a primal-dual solution.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CoveredElement {
    /// `lev_e`.
    pub level: Level,
    /// `w_e`.
    pub dual: DualNum,
    /// Whether the element is live.
    pub live: bool,
}

/// Cumulative counts of a primal-dual solution at levels `≤ k`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct PdCounts {
    /// `|A_k|`.
    pub active: usize,
    /// `|P_k|`.
    pub passive: usize,
    /// `|D_k|`.
    pub dormant: usize,
}

impl PdCounts {
    /// `|L_k| = |A_k| + |P_k|`.
    pub fn live(&self) -> usize {
        self.active + self.passive
    }
}

/// Covered part of a hierarchical primal-dual solution: per-level primal sets,
/// covered elements partitioned into active / passive / dormant with their
/// duals, and per-level incident dual totals.
#[derive(Debug, Clone)]
pub struct PrimalDualSolution {
    levels: Vec<PdLevel>,
    scale: Rc<DualScale>,
    set_count: usize,
    tally: Rc<OpTally>,
}

impl PrimalDualSolution {
    /// Empty solution with levels `0..=top`.
    pub fn new(scale: Rc<DualScale>, top: Level, tally: Rc<OpTally>) -> Self {
        PrimalDualSolution { levels: vec![PdLevel::default(); top + 1], scale, set_count: 0, tally }
    }

    /// Highest representable level.
    pub fn top_level(&self) -> Level {
        self.levels.len() - 1
    }

    /// The dual scale.
    pub fn scale(&self) -> &DualScale {
        &self.scale
    }

    /// Number of primal sets.
    pub fn num_sets(&self) -> usize {
        self.set_count
    }

    /// All primal sets with levels, ascending by level then id.
    pub fn sets(&self) -> Vec<(SetId, Level)> {
        self.levels
            .iter()
            .enumerate()
            .flat_map(|(level, index)| index.sets.iter().map(move |&s| (s, level)))
            .collect()
    }

    /// Level of primal set `s`, if present.
    pub fn set_level(&self, s: SetId) -> Option<Level> {
        self.levels.iter().enumerate().rev().find_map(|(level, index)| {
            self.tally.ordered(1);
            index.sets.contains(&s).then_some(level)
        })
    }

    /// Add `s` to the primal solution at `level`.
    pub fn add_set(&mut self, s: SetId, level: Level) {
        self.tally.ordered(1);
        let fresh = self.levels[level].sets.insert(s);
        debug_assert!(fresh, "set {s} added twice");
        self.set_count += 1;
    }

    fn status_map(&mut self, level: Level, dual: DualNum, live: bool) -> &mut BTreeMap<ElementId, DualNum> {
        let active = dual == self.scale.power(level);
        let index = &mut self.levels[level];
        match (live, active) {
            (false, _) => &mut index.dormant,
            (true, true) => &mut index.active,
            (true, false) => &mut index.passive,
        }
    }

    /// Cover `e` at `level` with dual `dual`.
    pub fn cover(&mut self, system: &SetSystem, e: ElementId, level: Level, dual: DualNum, live: bool) {
        self.tally.ordered(1);
        self.status_map(level, dual, live).insert(e, dual);
        if dual != 0 {
            let incident = &mut self.levels[level].incident;
            for &s in system.incident(e) {
                self.tally.dual(1);
                *incident.entry(s).or_insert(0) += dual;
            }
        }
    }

    /// Locate a covered element.
    pub fn locate(&self, e: ElementId) -> Option<CoveredElement> {
        for (level, index) in self.levels.iter().enumerate().rev() {
            self.tally.ordered(3);
            for (map, live) in [(&index.active, true), (&index.passive, true), (&index.dormant, false)] {
                if let Some(&dual) = map.get(&e) {
                    return Some(CoveredElement { level, dual, live });
                }
            }
        }
        None
    }

    /// Make the live covered element `e` at `level` dormant (dual kept).
    fn make_dormant_at(&mut self, e: ElementId, level: Level) {
        self.tally.ordered(2);
        let index = &mut self.levels[level];
        let dual = index.active.remove(&e).or_else(|| index.passive.remove(&e)).expect("live covered element");
        index.dormant.insert(e, dual);
    }

    /// Make the dormant covered element `e` at `level` live again (dual kept).
    fn reactivate_at(&mut self, e: ElementId, level: Level) {
        self.tally.ordered(2);
        let dual = self.levels[level].dormant.remove(&e).expect("dormant covered element");
        self.status_map(level, dual, true).insert(e, dual);
    }

    /// The highest primal set containing `e` (smallest id on ties).
    pub fn highest_set_containing(&self, system: &SetSystem, e: ElementId) -> Option<(SetId, Level)> {
        for (level, index) in self.levels.iter().enumerate().rev() {
            if index.sets.is_empty() {
                continue;
            }
            for &s in system.incident(e) {
                self.tally.ordered(1);
                if index.sets.contains(&s) {
                    return Some((s, level));
                }
            }
        }
        None
    }

    /// Total dual `w_s` of set `s` over the covered elements at levels `> k`
    /// (`k = None` sums every level).
    pub fn dual_above(&self, s: SetId, k: Option<Level>) -> DualNum {
        let start = k.map_or(0, |k| k + 1);
        self.levels
            .iter()
            .skip(start)
            .map(|index| {
                self.tally.dual(1);
                index.incident.get(&s).copied().unwrap_or(0)
            })
            .sum()
    }

    /// Total dual `w_s` of set `s`.
    pub fn set_dual(&self, s: SetId) -> DualNum {
        self.dual_above(s, None)
    }

    /// Cumulative counts at levels `≤ k`.
    pub fn counts(&self, k: Level) -> PdCounts {
        self.levels.iter().take(k + 1).fold(PdCounts::default(), |acc, index| PdCounts {
            active: acc.active + index.active.len(),
            passive: acc.passive + index.passive.len(),
            dormant: acc.dormant + index.dormant.len(),
        })
    }

    /// `|L_k|`.
    pub fn live_upto(&self, k: Level) -> usize {
        self.counts(k).live()
    }

    /// Smallest element with id greater than `after` among the active (and,
    /// with `include_passive`, passive) elements at `level`.
    fn successor(&self, level: Level, after: Option<ElementId>, include_passive: bool) -> Option<ElementId> {
        let index = &self.levels[level];
        let range = (after.map_or(Bound::Unbounded, Bound::Excluded), Bound::Unbounded);
        self.tally.ordered(1 + include_passive as u64);
        let active = index.active.range(range).next().map(|(e, _)| *e);
        if !include_passive {
            return active;
        }
        let passive = index.passive.range(range).next().map(|(e, _)| *e);
        match (active, passive) {
            (Some(a), Some(p)) => Some(a.min(p)),
            (a, p) => a.or(p),
        }
    }

    /// All covered elements as `(element, covered)` in ascending id order.
    pub fn elements(&self) -> Vec<(ElementId, CoveredElement)> {
        let mut all = Vec::new();
        for (level, index) in self.levels.iter().enumerate() {
            for (map, live) in [(&index.active, true), (&index.passive, true), (&index.dormant, false)] {
                all.extend(map.iter().map(|(&e, &dual)| (e, CoveredElement { level, dual, live })));
            }
        }
        all.sort_unstable_by_key(|(e, _)| *e);
        all
    }

    /// Replace levels `0..=k` with those of `source` and merge its level
    /// `k + 1` into this one. Returns the primal sets removed from levels `≤ k`.
    pub fn splice_levels(&mut self, mut source: PrimalDualSolution, k: Level) -> Result<Vec<SetId>, EngineError> {
        let top = self.top_level();
        if k + 1 > top || source.top_level() < k + 1 {
            return Err(EngineError::Internal(format!("splice at level {k} exceeds top level {top}")));
        }
        let incoming = std::mem::take(&mut source.levels[k + 1]);
        let target = &mut self.levels[k + 1];
        if let Some(&s) = incoming.sets.iter().find(|s| target.sets.contains(s)) {
            return Err(EngineError::Internal(format!("set {s} present in both solutions at level {}", k + 1)));
        }
        let mut evicted = Vec::new();
        let mut removed = 0;
        for level in 0..=k {
            std::mem::swap(&mut self.levels[level], &mut source.levels[level]);
            removed += source.levels[level].sets.len();
            evicted.extend(source.levels[level].sets.iter().copied());
        }
        let added: usize = self.levels[..=k].iter().map(|index| index.sets.len()).sum::<usize>() + incoming.sets.len();
        self.set_count = self.set_count + added - removed;
        // Mergeable per-level structures: one operation per merged index.
        self.tally.ordered(5);
        let target = &mut self.levels[k + 1];
        let PdLevel { mut sets, mut active, mut passive, mut dormant, incident } = incoming;
        target.sets.append(&mut sets);
        target.active.append(&mut active);
        target.passive.append(&mut passive);
        target.dormant.append(&mut dormant);
        for (s, dual) in incident {
            *target.incident.entry(s).or_insert(0) += dual;
        }
        Ok(evicted)
    }

    /// Audit the primal-dual invariants exactly: dual feasibility, tight sets,
    /// level and highest-level invariants, incident-total decomposition, and
    /// optionally feasibility against `live` and tidiness at levels
    /// `0..=tidy_upto` with `exposed` additional clean elements.
    pub fn audit(
        &self,
        system: &SetSystem,
        live: Option<&BTreeSet<ElementId>>,
        tidy: Option<(Threshold, Level, usize)>,
    ) -> AuditReport {
        let mut report = AuditReport::new();
        let elements = self.elements();
        let set_levels: HashMap<SetId, Level> = self.sets().into_iter().collect();

        let mut totals = vec![0 as DualNum; system.num_sets()];
        let mut per_level: Vec<HashMap<SetId, DualNum>> = vec![HashMap::new(); self.levels.len()];
        let mut seen = BTreeSet::new();
        for &(e, c) in &elements {
            if !seen.insert(e) {
                report.fail(Check::DisjointCoverage, format!("element {e} stored twice"));
            }
            if c.dual < 0 || c.dual > self.scale.power(c.level) {
                report.fail(Check::DualLevel, format!("element {e} at level {} has w = {}", c.level, c.dual));
            }
            let highest = system.incident(e).iter().filter_map(|s| set_levels.get(s)).max();
            if highest != Some(&c.level) {
                report.fail(
                    Check::HighestLevel,
                    format!("element {e} at level {} but highest containing set at {highest:?}", c.level),
                );
            }
            for &s in system.incident(e) {
                totals[s as usize] += c.dual;
                if c.dual != 0 {
                    *per_level[c.level].entry(s).or_insert(0) += c.dual;
                }
            }
        }
        report.pass(Check::DisjointCoverage);
        report.pass(Check::DualLevel);
        report.pass(Check::HighestLevel);

        let one = self.scale.one();
        match totals.iter().position(|&w| w > one) {
            Some(s) => report.fail(Check::DualFeasibility, format!("set {s} has w_s = {} > 1", self.scale.to_f64(totals[s]))),
            None => report.pass(Check::DualFeasibility),
        }
        let tight = self.scale.tight();
        match set_levels.keys().find(|&&s| totals[s as usize] < tight) {
            Some(&s) => report.fail(Check::TightSet, format!("set {s} has w_s = {} < 2/3", self.scale.to_f64(totals[s as usize]))),
            None => report.pass(Check::TightSet),
        }
        let decomposition_ok = self.levels.iter().zip(&per_level).all(|(index, recount)| {
            index.incident.iter().filter(|(_, &w)| w != 0).count() == recount.len()
                && recount.iter().all(|(s, w)| index.incident.get(s) == Some(w))
        });
        report.ensure(Check::DualDecomposition, decomposition_ok, || "incident totals differ from a recount".into());

        if let Some(live) = live {
            let covered_live: BTreeSet<ElementId> =
                elements.iter().filter(|(_, c)| c.live).map(|(e, _)| *e).collect();
            match live.iter().find(|e| !covered_live.contains(e)) {
                Some(e) => report.fail(Check::Feasibility, format!("live element {e} is uncovered")),
                None => match covered_live.iter().find(|e| !live.contains(e)) {
                    Some(e) => report.fail(Check::Feasibility, format!("element {e} is covered as live but is dormant")),
                    None => report.pass(Check::Feasibility),
                },
            }
        }

        if let Some((theta, upto, exposed)) = tidy {
            for k in 0..=upto.min(self.top_level()) {
                let c = self.counts(k);
                let dirty = c.dormant + c.passive;
                let clean = c.active + exposed;
                if !theta.admits(dirty, clean) {
                    report.fail(Check::Tidy, format!("level {k}: |D| + |P| = {dirty} > {}/{} · (|A| + |E|) = {clean}", theta.num, theta.den));
                }
            }
            report.pass(Check::Tidy);
        }
        report
    }
}

// ───────────────────────── Background threads ─────────────────────────

/// Element state marker: not in the explicit sub-universe.
const ABSENT: u8 = u8::MAX;
/// Element state marker: exposed.
const EXPOSED: u8 = u8::MAX - 1;

/// What a thread asks the engine to do after its work for the step.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Outcome {
    Continue,
    Terminate,
    Abort,
}

/// Which preparation loop is running.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum PrepLoop {
    /// Expose active foreground elements.
    Active,
    /// Route the remaining live foreground elements through the insertion rule.
    Remaining,
}

/// A set extracted by the rebuild whose exposed elements are being settled.
#[derive(Debug, Clone, Copy)]
struct PendingSet {
    set: SetId,
    cursor: usize,
}

/// Per-step context handed to a thread.
struct StepContext<'a> {
    system: &'a SetSystem,
    foreground: &'a PrimalDualSolution,
    ledger: &'a mut OutputLedger,
    gate: &'a mut CopyGate,
    incidents: &'a mut IncidentLog,
    time: u64,
    c_spd: usize,
    strict: bool,
}

/// Background thread `T_k` running the primal-dual rebuild.
#[derive(Debug, Clone)]
struct PrimalDualThread {
    level: Level,
    phase: Phase,
    created: u64,
    base: bool,
    /// Covered part `C*(B_k)` with primal sets `S*(B_k)`.
    background: PrimalDualSolution,
    /// Per element: `ABSENT`, `EXPOSED`, or its covered level.
    state: Vec<u8>,
    exposed: usize,
    /// `|s ∩ E(B_k)|`.
    exposed_by_set: Vec<u32>,
    /// Dual of `s` over `C*(B_k)`.
    covered_dual: Vec<DualNum>,
    /// Dual of `s` over the foreground at levels `> k` (constant while the
    /// thread lives), filled lazily.
    outer: Vec<Option<DualNum>>,
    /// Level of each set in `S*(B_k)`, or `ABSENT`.
    star: Vec<u8>,
    star_count: usize,
    /// Sets keyed by `1 +` the highest pointer at which they are tight.
    queue: BucketQueue,
    /// Level pointer `p_k`.
    pointer: Level,
    prep: PrepLoop,
    scan: Option<ElementId>,
    pending: Option<PendingSet>,
    added: Vec<SetId>,
    copied: usize,
    /// `R_k`.
    buffer: BTreeSet<SetId>,
    tau_sus: usize,
    t_sus: u64,
    scale: Rc<DualScale>,
    tally: Rc<OpTally>,
}

impl PrimalDualThread {
    fn new(system: &SetSystem, level: Level, created: u64, base: bool, foreground: &PrimalDualSolution) -> Self {
        let scale = Rc::clone(&foreground.scale);
        let tally = Rc::clone(&foreground.tally);
        PrimalDualThread {
            level,
            phase: Phase::Preparation,
            created,
            base,
            background: PrimalDualSolution::new(Rc::clone(&scale), foreground.top_level(), Rc::clone(&tally)),
            state: vec![ABSENT; system.universe_size()],
            exposed: 0,
            exposed_by_set: vec![0; system.num_sets()],
            covered_dual: vec![0; system.num_sets()],
            outer: vec![None; system.num_sets()],
            star: vec![ABSENT; system.num_sets()],
            star_count: 0,
            queue: BucketQueue::new(system.num_sets()),
            pointer: level + 1,
            prep: PrepLoop::Active,
            scan: None,
            pending: None,
            added: Vec::new(),
            copied: 0,
            buffer: BTreeSet::new(),
            tau_sus: 0,
            t_sus: 0,
            scale,
            tally,
        }
    }

    // ── Dual bookkeeping ──

    fn ensure_outer(&mut self, foreground: &PrimalDualSolution, s: SetId) -> DualNum {
        let slot = &mut self.outer[s as usize];
        *slot.get_or_insert_with(|| foreground.dual_above(s, Some(self.level)))
    }

    /// `w_s(B_k)`; the outer part must already be cached.
    fn set_total(&self, s: SetId) -> DualNum {
        let i = s as usize;
        self.outer[i].expect("outer dual cached")
            + self.covered_dual[i]
            + self.exposed_by_set[i] as DualNum * self.scale.power(self.pointer)
    }

    /// Highest pointer `p ∈ [0, L]` at which `s` is tight, i.e. the largest `p`
    /// with `2/3 − w*_s ≤ |s ∩ E| · (2/3)^p`.
    fn tight_level(&self, s: SetId) -> Level {
        let i = s as usize;
        let count = self.exposed_by_set[i] as DualNum;
        let numer = self.scale.tight() - self.outer[i].expect("outer dual cached") - self.covered_dual[i];
        let top = self.scale.exponent() as usize;
        if numer <= 0 {
            return top;
        }
        // power(p) is decreasing in p and power(0)·count ≥ 1 > numer.
        let (mut lo, mut hi) = (0, top);
        while lo < hi {
            let mid = (lo + hi).div_ceil(2);
            if numer <= count * self.scale.power(mid) {
                lo = mid;
            } else {
                hi = mid - 1;
            }
        }
        lo
    }

    fn requeue(&mut self, s: SetId) {
        self.tally.priority(1);
        let key = if self.exposed_by_set[s as usize] == 0 || self.pending.is_some_and(|p| p.set == s) {
            0
        } else {
            self.tight_level(s) + 1
        };
        self.queue.set_key(s, key);
    }

    fn expose(&mut self, system: &SetSystem, foreground: &PrimalDualSolution, e: ElementId) {
        self.tally.ordered(1);
        self.state[e as usize] = EXPOSED;
        self.exposed += 1;
        for &s in system.incident(e) {
            self.ensure_outer(foreground, s);
            self.exposed_by_set[s as usize] += 1;
            self.requeue(s);
        }
    }

    fn unexpose(&mut self, system: &SetSystem, e: ElementId) {
        self.tally.ordered(1);
        self.state[e as usize] = ABSENT;
        self.exposed -= 1;
        for &s in system.incident(e) {
            self.exposed_by_set[s as usize] -= 1;
            self.requeue(s);
        }
    }

    /// Cover a non-exposed element at `level` with dual `dual`.
    fn cover(&mut self, system: &SetSystem, e: ElementId, level: Level, dual: DualNum) {
        self.state[e as usize] = level as u8;
        self.background.cover(system, e, level, dual, true);
        if dual != 0 {
            for &s in system.incident(e) {
                self.tally.dual(1);
                self.covered_dual[s as usize] += dual;
                if self.exposed_by_set[s as usize] > 0 {
                    self.requeue(s);
                }
            }
        }
    }

    /// Move an exposed element into `C*(B_k)` at the current pointer.
    fn settle(&mut self, system: &SetSystem, e: ElementId) {
        let level = self.pointer;
        let dual = self.scale.power(level);
        self.tally.ordered(1);
        self.state[e as usize] = level as u8;
        self.exposed -= 1;
        self.background.cover(system, e, level, dual, true);
        for &s in system.incident(e) {
            let i = s as usize;
            self.tally.dual(1);
            self.exposed_by_set[i] -= 1;
            self.covered_dual[i] += dual;
            self.requeue(s);
        }
    }

    fn add_star(&mut self, s: SetId, level: Level) {
        self.star[s as usize] = level as u8;
        self.star_count += 1;
        self.background.add_set(s, level);
        self.added.push(s);
    }

    fn highest_star_set(&self, system: &SetSystem, e: ElementId) -> Option<(SetId, Level)> {
        let mut best: Option<(SetId, Level)> = None;
        for &s in system.incident(e) {
            self.tally.ordered(1);
            let level = self.star[s as usize];
            if level != ABSENT && best.is_none_or(|(_, l)| level as Level > l) {
                best = Some((s, level as Level));
            }
        }
        best
    }

    // ── Sub-universe updates ──

    /// The insertion rule: join the highest primal set containing `e`, or make
    /// the most loaded set tight, or expose `e`.
    fn f_insert(&mut self, system: &SetSystem, foreground: &PrimalDualSolution, e: ElementId) {
        if let Some((_, level)) = self.highest_star_set(system, e) {
            self.cover(system, e, level, 0);
            return;
        }
        let mut best: Option<(DualNum, SetId)> = None;
        for &s in system.incident(e) {
            self.ensure_outer(foreground, s);
            let total = self.set_total(s);
            if best.is_none_or(|(w, _)| total > w) {
                best = Some((total, s));
            }
        }
        let (max_dual, s) = best.expect("every element belongs to a set");
        let slack = self.scale.one() - max_dual;
        if slack < self.scale.power(self.pointer) {
            let level = self.pointer;
            self.add_star(s, level);
            self.cover(system, e, level, slack);
        } else {
            self.expose(system, foreground, e);
        }
    }

    /// The deletion rule.
    fn f_delete(&mut self, system: &SetSystem, e: ElementId) {
        match self.state[e as usize] {
            ABSENT => {}
            EXPOSED => {
                if self.highest_star_set(system, e).is_some() {
                    self.settle(system, e);
                    self.background.make_dormant_at(e, self.pointer);
                } else {
                    self.unexpose(system, e);
                }
            }
            level => self.background.make_dormant_at(e, level as Level),
        }
    }

    fn on_update(&mut self, system: &SetSystem, foreground: &PrimalDualSolution, update: Update) {
        let e = update.element;
        match update.op {
            Op::Delete => self.f_delete(system, e),
            Op::Insert => {
                if self.phase == Phase::Preparation && self.prep == PrepLoop::Active {
                    // Picked up by the second preparation loop.
                    return;
                }
                match self.state[e as usize] {
                    ABSENT => self.f_insert(system, foreground, e),
                    EXPOSED => {}
                    level => self.background.reactivate_at(e, level as Level),
                }
            }
        }
    }

    // ── Phases ──

    /// Run the preparation loops over `L_k(F)` in ascending id order; returns
    /// whether both loops finished.
    fn prepare(&mut self, system: &SetSystem, foreground: &PrimalDualSolution, budget: usize) -> bool {
        let k = self.level;
        let mut processed = 0;
        loop {
            let include_passive = self.prep == PrepLoop::Remaining;
            let mut heads: Vec<Option<ElementId>> =
                (0..=k).map(|j| foreground.successor(j, self.scan, include_passive)).collect();
            loop {
                let next = heads.iter().enumerate().filter_map(|(j, h)| h.map(|e| (e, j))).min();
                let Some((e, j)) = next else { break };
                if processed == budget {
                    return false;
                }
                processed += 1;
                if self.state[e as usize] == ABSENT {
                    match self.prep {
                        PrepLoop::Active => {
                            self.ensure_outer_all(system, foreground, e);
                            self.expose(system, foreground, e);
                        }
                        PrepLoop::Remaining => self.f_insert(system, foreground, e),
                    }
                }
                self.scan = Some(e);
                heads[j] = foreground.successor(j, Some(e), include_passive);
            }
            match self.prep {
                PrepLoop::Active => {
                    self.prep = PrepLoop::Remaining;
                    self.scan = None;
                }
                PrepLoop::Remaining => return true,
            }
        }
    }

    fn ensure_outer_all(&mut self, system: &SetSystem, foreground: &PrimalDualSolution, e: ElementId) {
        for &s in system.incident(e) {
            self.ensure_outer(foreground, s);
        }
    }

    /// Settle the pending set's exposed elements within `budget`; returns
    /// whether no set is pending afterwards.
    fn process_pending(&mut self, system: &SetSystem, budget: &mut usize) -> bool {
        while let Some(mut pending) = self.pending {
            let members = system.set(pending.set);
            while pending.cursor < members.len() && self.state[members[pending.cursor] as usize] != EXPOSED {
                pending.cursor += 1;
            }
            if pending.cursor == members.len() {
                self.pending = None;
                break;
            }
            if *budget == 0 {
                self.pending = Some(pending);
                return false;
            }
            let e = members[pending.cursor];
            pending.cursor += 1;
            self.pending = Some(pending);
            self.settle(system, e);
            *budget -= 1;
        }
        true
    }

    /// Extract the set that becomes tight first, lowering the pointer lazily.
    fn extract(&mut self) -> Option<SetId> {
        self.tally.priority(1);
        let (key, s) = self.queue.pop()?;
        let tight = key - 1;
        self.pointer = self.pointer.min(tight);
        if self.star[s as usize] == ABSENT {
            self.add_star(s, self.pointer);
        }
        self.pending = Some(PendingSet { set: s, cursor: 0 });
        Some(s)
    }

    /// Run the rebuild to completion (no budget, no phase changes).
    fn finish_rebuild(&mut self, system: &SetSystem) {
        let mut unlimited = usize::MAX;
        loop {
            self.process_pending(system, &mut unlimited);
            if self.exposed == 0 || self.extract().is_none() {
                break;
            }
        }
        debug_assert_eq!(self.exposed, 0);
    }

    fn run(&mut self, ctx: &mut StepContext<'_>) -> Outcome {
        if self.base {
            self.prepare(ctx.system, ctx.foreground, usize::MAX);
            self.finish_rebuild(ctx.system);
            return Outcome::Terminate;
        }
        let outcome = match self.phase {
            Phase::Preparation => {
                if self.prepare(ctx.system, ctx.foreground, ctx.c_spd) {
                    self.phase = Phase::Computation;
                    self.rebuild(ctx)
                } else {
                    Outcome::Continue
                }
            }
            Phase::Computation | Phase::Tail => self.rebuild(ctx),
            Phase::Suspension => self.suspend(ctx),
            Phase::Copy => {
                let end = (self.copied + ctx.c_spd).min(self.added.len());
                for &s in &self.added[self.copied..end] {
                    self.tally.ordered(1);
                    self.buffer.insert(s);
                    ctx.ledger.acquire(s);
                }
                self.copied = end;
                if self.copied == self.added.len() {
                    self.phase = Phase::Tail;
                }
                Outcome::Continue
            }
        };
        if outcome == Outcome::Continue && self.phase == Phase::Tail {
            self.mirror(ctx.ledger);
        }
        outcome
    }

    /// Keep `R_k` a faithful copy of `S*(B_k)` during the tail phase.
    fn mirror(&mut self, ledger: &mut OutputLedger) {
        for &s in &self.added[self.copied..] {
            self.tally.ordered(1);
            self.buffer.insert(s);
            ledger.acquire(s);
        }
        self.copied = self.added.len();
    }

    fn rebuild(&mut self, ctx: &mut StepContext<'_>) -> Outcome {
        let mut budget = ctx.c_spd;
        if self.phase == Phase::Tail && self.exposed <= ctx.c_spd {
            budget = usize::MAX;
        }
        loop {
            if !self.process_pending(ctx.system, &mut budget) {
                return Outcome::Continue;
            }
            // Checkpoint: no set is half-processed.
            match self.phase {
                Phase::Computation => {
                    if self.exposed <= ctx.c_spd && self.star_count <= ctx.c_spd {
                        // Shortcut: the remaining work fits in this step.
                        self.finish_rebuild(ctx.system);
                        return Outcome::Terminate;
                    }
                    if self.exposed <= self.star_count {
                        self.phase = Phase::Suspension;
                        self.tau_sus = self.star_count;
                        self.t_sus = ctx.time;
                        return Outcome::Continue;
                    }
                }
                _ => {
                    if self.exposed == 0 {
                        return Outcome::Terminate;
                    }
                }
            }
            if budget == 0 {
                return Outcome::Continue;
            }
            if self.extract().is_none() {
                return Outcome::Continue;
            }
        }
    }

    fn suspend(&mut self, ctx: &mut StepContext<'_>) -> Outcome {
        let wait = ctx.time - self.t_sus;
        if ctx.gate.admits(self.tau_sus) {
            ctx.gate.admit(self.tau_sus);
            if ctx.strict {
                ctx.incidents.evaluated(Check::SuspensionWait);
                if !scheduler::suspension_wait_ok(wait, self.tau_sus) {
                    ctx.incidents.record(
                        ctx.time,
                        self.level,
                        Check::SuspensionWait,
                        format!("waited {wait} steps with τ_sus = {}", self.tau_sus),
                    );
                }
            }
            self.phase = Phase::Copy;
            return Outcome::Continue;
        }
        if scheduler::suspension_expired(ctx.time, self.t_sus, self.tau_sus) {
            if ctx.strict {
                ctx.incidents.record(
                    ctx.time,
                    self.level,
                    Check::SuspensionWait,
                    format!("aborted after waiting {wait} steps with τ_sus = {}", self.tau_sus),
                );
            }
            return Outcome::Abort;
        }
        Outcome::Continue
    }

    // ── Audit helpers ──

    fn audit_into(&self, system: &SetSystem, foreground: &PrimalDualSolution, report: &mut AuditReport) {
        let k = self.level;
        let scale = &self.scale;
        let star_sets: BTreeSet<SetId> =
            (0..system.num_sets() as SetId).filter(|&s| self.star[s as usize] != ABSENT).collect();

        // Recount the thread's per-set quantities from its element states.
        let mut exposed_by_set = vec![0u32; system.num_sets()];
        let mut covered_dual = vec![0 as DualNum; system.num_sets()];
        let covered = self.background.elements();
        for &(e, c) in &covered {
            if self.state[e as usize] != c.level as u8 {
                report.fail(Check::DualDecomposition, format!("thread {k}: element {e} state disagrees with its level"));
            }
            for &s in system.incident(e) {
                covered_dual[s as usize] += c.dual;
            }
            if c.dual > scale.power(c.level) {
                report.fail(Check::DualLevel, format!("thread {k}: element {e} has w above its level"));
            }
            let highest = system
                .incident(e)
                .iter()
                .filter(|s| star_sets.contains(s))
                .map(|&s| self.star[s as usize] as Level)
                .max();
            if highest != Some(c.level) {
                report.fail(Check::HighestLevel, format!("thread {k}: element {e} at level {} vs highest set {highest:?}", c.level));
            }
        }
        let exposed: Vec<ElementId> = (0..system.universe_size() as ElementId)
            .filter(|&e| self.state[e as usize] == EXPOSED)
            .collect();
        for &e in &exposed {
            for &s in system.incident(e) {
                exposed_by_set[s as usize] += 1;
            }
        }
        let decomposition_ok = exposed.len() == self.exposed
            && exposed_by_set == self.exposed_by_set
            && covered_dual == self.covered_dual
            && self.outer.iter().enumerate().all(|(s, cached)| {
                cached.is_none_or(|w| w == foreground.dual_above(s as SetId, Some(k)))
            })
            && star_sets.len() == self.star_count
            && self.background.num_sets() == self.star_count;
        report.ensure(Check::DualDecomposition, decomposition_ok, || format!("thread {k}: incremental duals differ from a recount"));
        report.pass(Check::DualLevel);
        report.pass(Check::HighestLevel);

        // w_s(B_k) ≤ 1 for every set; S* sets tight.
        let one = scale.one();
        let exposed_value = scale.power(self.pointer);
        let total = |s: usize| {
            foreground.dual_above(s as SetId, Some(k)) + covered_dual[s] + exposed_by_set[s] as DualNum * exposed_value
        };
        match (0..system.num_sets()).find(|&s| total(s) > one) {
            Some(s) => report.fail(Check::DualFeasibility, format!("thread {k}: set {s} has w_s > 1")),
            None => report.pass(Check::DualFeasibility),
        }
        match star_sets.iter().find(|&&s| total(s as usize) < scale.tight()) {
            Some(s) => report.fail(Check::TightSet, format!("thread {k}: set {s} in S* is not tight")),
            None => report.pass(Check::TightSet),
        }

        // Queue keys equal the recomputed tight levels.
        let pending = self.pending.map(|p| p.set);
        let expected: Vec<(SetId, usize)> = (0..system.num_sets() as SetId)
            .filter(|&s| exposed_by_set[s as usize] > 0 && Some(s) != pending)
            .map(|s| (s, self.tight_level(s) + 1))
            .collect();
        report.ensure(Check::QueueKeys, expected == self.queue.entries(), || format!("thread {k}: queue keys differ from recount"));

        let pointer_ok = self.pointer <= k + 1
            && star_sets.iter().all(|&s| self.star[s as usize] as Level >= self.pointer);
        report.ensure(Check::PointerMonotone, pointer_ok, || format!("thread {k}: set below p_k = {}", self.pointer));

        let contents_ok = match self.phase {
            Phase::Copy => self.buffer.is_subset(&star_sets),
            Phase::Tail => self.buffer == star_sets,
            _ => self.buffer.is_empty(),
        };
        report.ensure(Check::BufferContents, contents_ok, || {
            format!("thread {k} in {} phase: buffer {} sets, S* {} sets", self.phase, self.buffer.len(), star_sets.len())
        });

        if self.phase.is_copying() {
            report.ensure(Check::BufferSize, self.star_count <= BUFFER_FACTOR * self.tau_sus, || {
                format!("thread {k}: |S*| = {} > 3 · τ_sus = {}", self.star_count, BUFFER_FACTOR * self.tau_sus)
            });
        }
    }
}

// ───────────────────────── Engine ─────────────────────────

/// The `O(f)`-approximate dynamic set cover engine.
#[derive(Debug)]
pub struct FEngine {
    system: SetSystem,
    top: Level,
    c_spd: usize,
    strict: bool,
    insertion_bound: usize,
    gc_rate: usize,
    foreground: PrimalDualSolution,
    threads: Vec<Option<PrimalDualThread>>,
    live: BTreeSet<ElementId>,
    ledger: OutputLedger,
    time: u64,
    tally: Rc<OpTally>,
    incidents: IncidentLog,
}

impl FEngine {
    /// Engine over `system` with `ℓ_max = ⌈log_1.5 n_cap⌉ + 1`. Fails if the
    /// dual denominator `3^{ℓ_max+1}` is not representable.
    pub fn new(system: &SetSystem, config: EngineConfig) -> Result<Self, EngineError> {
        let top = max_level(system.n_cap());
        let exponent = top + 1;
        let scale = u32::try_from(exponent)
            .ok()
            .and_then(DualScale::new)
            .ok_or_else(|| EngineError::Unsupported(format!("dual denominator 3^{exponent} is too large")))?;
        let c_spd = config.c_spd.unwrap_or(DEFAULT_C_SPD).max(1);
        let alpha = config.gc_alpha.unwrap_or(4.0 * system.f_max().max(1) as f64);
        let insertion_bound = 1 + (top + 1) * (2 * c_spd + 1);
        let gc_rate = deamortizer::gc_rate(insertion_bound, alpha);
        let tally = OpTally::shared();
        Ok(FEngine {
            system: system.clone(),
            top,
            c_spd,
            strict: c_spd >= DEFAULT_C_SPD,
            insertion_bound,
            gc_rate,
            // Threads place sets at level k + 1 ≤ ℓ_max + 1.
            foreground: PrimalDualSolution::new(Rc::new(scale), top + 1, Rc::clone(&tally)),
            threads: vec![None; top + 1],
            live: BTreeSet::new(),
            ledger: OutputLedger::new(gc_rate, config.deamortize),
            time: 0,
            tally,
            incidents: IncidentLog::default(),
        })
    }

    /// `ℓ_max`.
    pub fn max_level(&self) -> Level {
        self.top
    }

    /// The speed constant in use.
    pub fn c_spd(&self) -> usize {
        self.c_spd
    }

    /// The foreground solution `F`.
    pub fn foreground(&self) -> &PrimalDualSolution {
        &self.foreground
    }

    /// Phase of thread `k`, if it exists.
    pub fn thread_phase(&self, k: Level) -> Option<Phase> {
        self.threads.get(k)?.as_ref().map(|t| t.phase)
    }

    /// Whether no thread is copying and the garbage pool is empty.
    pub fn is_quiescent(&self) -> bool {
        self.ledger.garbage().is_empty()
            && self.threads.iter().flatten().all(|t| !t.phase.is_copying())
    }

    /// Bound violations recorded while stepping.
    pub fn incidents(&self) -> &[Incident] {
        self.incidents.entries()
    }

    /// Number of sets waiting in the garbage pool.
    pub fn garbage_len(&self) -> usize {
        self.ledger.garbage().len()
    }

    fn check_update(&self, update: Update) -> Result<(), EngineError> {
        let universe = self.system.universe_size();
        if update.element as usize >= universe {
            return Err(EngineError::UnknownElement { element: update.element, universe });
        }
        let live = self.live.contains(&update.element);
        let message = match update.op {
            Op::Insert if live => "insert of live element",
            Op::Delete if !live => "delete of dormant element",
            _ => return Ok(()),
        };
        Err(EngineError::IllegalUpdate { step: self.time + 1, message: message.into() })
    }

    /// Apply the update to `F`; returns `lev_F(e)` afterwards.
    fn foreground_update(&mut self, update: Update) -> Result<Level, EngineError> {
        let e = update.element;
        match update.op {
            Op::Delete => {
                self.live.remove(&e);
                let covered = self
                    .foreground
                    .locate(e)
                    .filter(|c| c.live)
                    .ok_or_else(|| EngineError::Internal(format!("live element {e} is not covered")))?;
                self.foreground.make_dormant_at(e, covered.level);
                Ok(covered.level)
            }
            Op::Insert => {
                self.live.insert(e);
                if let Some(covered) = self.foreground.locate(e) {
                    debug_assert!(!covered.live);
                    // Dormant but still covered: reactivate in place.
                    self.foreground.reactivate_at(e, covered.level);
                    return Ok(covered.level);
                }
                if let Some((_, level)) = self.foreground.highest_set_containing(&self.system, e) {
                    self.foreground.cover(&self.system, e, level, 0, true);
                    return Ok(level);
                }
                let mut best: Option<(DualNum, SetId)> = None;
                for &s in self.system.incident(e) {
                    let dual = self.foreground.set_dual(s);
                    if best.is_none_or(|(w, _)| dual > w) {
                        best = Some((dual, s));
                    }
                }
                let (dual, s) = best.ok_or_else(|| EngineError::Internal(format!("element {e} belongs to no set")))?;
                self.foreground.add_set(s, 0);
                self.ledger.acquire(s);
                let slack = self.foreground.scale.one() - dual;
                self.foreground.cover(&self.system, e, 0, slack, true);
                Ok(0)
            }
        }
    }

    fn switch(&mut self, thread: PrimalDualThread) -> Result<(), EngineError> {
        let k = thread.level;
        for &s in &thread.added {
            self.ledger.acquire(s);
        }
        for &s in &thread.buffer {
            self.ledger.release(s);
        }
        let evicted = self.foreground.splice_levels(thread.background, k)?;
        for s in evicted {
            self.ledger.release(s);
        }
        for lower in self.threads.iter_mut().take(k) {
            if let Some(aborted) = lower.take() {
                for &s in &aborted.buffer {
                    self.ledger.release(s);
                }
            }
        }
        Ok(())
    }
}

impl DynamicSetCover for FEngine {
    fn name(&self) -> &'static str {
        "f"
    }

    fn step(&mut self, update: Update) -> Result<StepReport, EngineError> {
        self.check_update(update)?;
        self.time += 1;
        self.tally.take();
        let element_level = self.foreground_update(update)?;

        let mut gate = CopyGate::from_snapshots(
            self.threads.iter().flatten().filter(|t| t.phase.is_copying()).map(|t| t.tau_sus),
        );
        for k in (0..=self.top).rev() {
            let mut thread = match self.threads[k].take() {
                None => {
                    let base = self.foreground.live_upto(k) <= self.c_spd;
                    PrimalDualThread::new(&self.system, k, self.time, base, &self.foreground)
                }
                Some(mut thread) => {
                    if element_level <= k {
                        thread.on_update(&self.system, &self.foreground, update);
                    }
                    thread
                }
            };
            if self.strict && !thread.base {
                let age = self.time - thread.created + 1;
                let live = self.foreground.live_upto(k);
                self.incidents.evaluated(Check::Lifetime);
                if !scheduler::lifetime_ok(age, live, LIFETIME.0, LIFETIME.1) {
                    self.incidents.record(self.time, k, Check::Lifetime, format!("age {age} > 0.1 · |L_k(F)| = 0.1 · {live}"));
                }
            }
            let mut ctx = StepContext {
                system: &self.system,
                foreground: &self.foreground,
                ledger: &mut self.ledger,
                gate: &mut gate,
                incidents: &mut self.incidents,
                time: self.time,
                c_spd: self.c_spd,
                strict: self.strict,
            };
            match thread.run(&mut ctx) {
                Outcome::Continue => self.threads[k] = Some(thread),
                Outcome::Abort => {
                    for &s in &thread.buffer {
                        self.ledger.release(s);
                    }
                }
                Outcome::Terminate => {
                    self.switch(thread)?;
                    break;
                }
            }
        }

        self.ledger.collect();
        let (insertion, deletion) = self.ledger.take_recourse();
        let mut report = StepReport::new(self.time, update);
        report.insertion_recourse = insertion;
        report.deletion_recourse = deletion;
        report.output_size = self.ledger.output_size();
        report.ds_ops = self.tally.take();
        Ok(report)
    }

    fn output_sets(&self) -> BTreeSet<SetId> {
        self.ledger.output()
    }

    fn live(&self) -> &BTreeSet<ElementId> {
        &self.live
    }

    fn audit(&self) -> AuditReport {
        let saved = self.tally.peek();
        let tidy = self.strict.then_some((FOREGROUND_TIDY, self.top, 0));
        let mut report = self.foreground.audit(&self.system, Some(&self.live), tidy);
        let output = self.ledger.output();
        match self.foreground.sets().into_iter().find(|(s, _)| !output.contains(s)) {
            Some((s, _)) => report.fail(Check::Feasibility, format!("foreground set {s} missing from the output")),
            None => report.pass(Check::Feasibility),
        }
        for thread in self.threads.iter().flatten() {
            thread.audit_into(&self.system, &self.foreground, &mut report);
            if self.strict && !thread.base {
                let age = self.time - thread.created + 1;
                let live = self.foreground.live_upto(thread.level);
                report.ensure(Check::Lifetime, scheduler::lifetime_ok(age, live, LIFETIME.0, LIFETIME.1), || {
                    format!("thread {}: age {age} > 0.1 · {live}", thread.level)
                });
            }
        }
        self.incidents.report_into(&mut report);
        self.tally.restore(saved);
        report
    }

    fn insertion_recourse_bound(&self) -> usize {
        self.insertion_bound
    }

    fn gc_rate(&self) -> usize {
        self.gc_rate
    }

    fn time(&self) -> u64 {
        self.time
    }
}

impl ExtensionSource for FEngine {
    fn extension_counts(&self, k: Level) -> Option<Vec<TidyCounts>> {
        let saved = self.tally.peek();
        let mut thread = self.threads.get(k)?.as_ref()?.clone();
        if thread.phase == Phase::Preparation {
            thread.prepare(&self.system, &self.foreground, usize::MAX);
        }
        thread.finish_rebuild(&self.system);
        let counts = (0..=k)
            .map(|j| {
                let c = thread.background.counts(j);
                TidyCounts { dirty: c.dormant + c.passive, clean: c.active + thread.exposed }
            })
            .collect();
        self.tally.restore(saved);
        Some(counts)
    }

    fn extension_threshold(&self) -> Threshold {
        EXTENSION_TIDY
    }
}
