//! The `O(log n)`-approximate engine: a foreground hierarchical solution
//! patched locally on every update, plus one catch-up greedy background thread
//! per level that rebuilds levels `≤ k` at `c_spd` elements per step, copies its
//! result into a buffer under the copy gate, and finally switches it into the
//! foreground.

use crate::audit::{AuditReport, Check};
use crate::bucket_queue::BucketQueue;
use crate::deamortizer::{self, OutputLedger};
use crate::hierarchy::{AuditParams, HierarchicalSolution, Threshold};
use crate::metrics::{OpTally, StepReport};
use crate::oracle::{ExtensionSource, TidyCounts};
use crate::scheduler::{self, CopyGate, EngineConfig, Incident, IncidentLog, Phase};
use crate::types::{floor_log_1_5, max_level, ElementId, Level, Op, SetId, Update};
use crate::{DynamicSetCover, EngineError, SetSystem};
use std::collections::{BTreeSet, HashMap, HashSet};
use std::rc::Rc;

/// Default speed constant.
pub const DEFAULT_C_SPD: usize = 400;

/// Tidy threshold proven for the foreground.
const FOREGROUND_TIDY: Threshold = Threshold::new(1, 2);

/// Tidy threshold proven for extended background solutions at levels `≤ k`.
const EXTENSION_TIDY: Threshold = Threshold::new(1, 5);

/// Lifetime bound `0.2·|L_k^F|` as a ratio.
const LIFETIME: (u64, u64) = (1, 5);

/// What a thread asks the engine to do after its work for the step.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Outcome {
    Continue,
    Terminate,
    Abort,
}

/// A set being added to the background solution whose coverage is processed
/// across steps. Its remaining coverage is exactly its uncovered members;
/// `cursor` indexes the next member (ascending) to examine.
#[derive(Debug, Clone)]
struct PendingSet {
    set: SetId,
    level: Level,
    cursor: usize,
}

/// Marker for "not in the uncovered sub-universe".
const ABSENT: u32 = u32::MAX;

/// Dense uncovered sub-universe: passive level per element.
#[derive(Debug, Clone)]
struct Uncovered {
    plev: Vec<u32>,
    len: usize,
}

impl Uncovered {
    fn new(system: &SetSystem) -> Self {
        Uncovered { plev: vec![ABSENT; system.universe_size()], len: 0 }
    }

    fn contains(&self, e: ElementId) -> bool {
        self.plev[e as usize] != ABSENT
    }

    fn len(&self) -> usize {
        self.len
    }

    fn is_empty(&self) -> bool {
        self.len == 0
    }

    fn iter(&self) -> impl Iterator<Item = (ElementId, Level)> + '_ {
        self.plev
            .iter()
            .enumerate()
            .filter(|(_, &p)| p != ABSENT)
            .map(|(e, &p)| (e as ElementId, p as Level))
    }
}

/// Per-step context handed to a thread.
struct StepContext<'a> {
    system: &'a SetSystem,
    foreground: &'a HierarchicalSolution,
    ledger: &'a mut OutputLedger,
    gate: &'a mut CopyGate,
    incidents: &'a mut IncidentLog,
    time: u64,
    c_spd: usize,
    strict: bool,
}

/// Background thread `T_k` running the catch-up greedy.
#[derive(Debug, Clone)]
struct GreedyThread {
    level: Level,
    phase: Phase,
    created: u64,
    base: bool,
    /// `B_k`.
    background: HierarchicalSolution,
    /// `R_k`.
    buffer: BTreeSet<SetId>,
    /// Sets of `B_k` in the order they were added (copy order).
    added: Vec<SetId>,
    copied: usize,
    /// Copy pointer `p_k`.
    pointer: Level,
    tau_sus: usize,
    t_sus: u64,
    /// Uncovered sub-universe with passive levels.
    uncovered: Uncovered,
    /// Max-priority over sets keyed by uncovered count (ties: smaller id).
    queue: BucketQueue,
    pending: Option<PendingSet>,
    /// Last element processed by the preparation scan.
    scan: Option<ElementId>,
    tally: Rc<OpTally>,
}

impl GreedyThread {
    fn new(system: &SetSystem, level: Level, created: u64, base: bool, top: Level, tally: Rc<OpTally>) -> Self {
        GreedyThread {
            level,
            phase: Phase::Preparation,
            created,
            base,
            background: HierarchicalSolution::with_tally(top, Rc::clone(&tally)),
            buffer: BTreeSet::new(),
            added: Vec::new(),
            copied: 0,
            pointer: level + 1,
            tau_sus: 0,
            t_sus: 0,
            uncovered: Uncovered::new(system),
            queue: BucketQueue::new(system.num_sets()),
            pending: None,
            scan: None,
            tally,
        }
    }

    // ── Uncovered sub-universe and queue maintenance ──

    /// Change the uncovered count of `s` by one.
    fn adjust(&mut self, s: SetId, insert: bool) {
        self.tally.priority(1);
        if insert {
            self.queue.increment(s);
        } else {
            self.queue.decrement(s);
        }
    }

    fn add_uncovered(&mut self, system: &SetSystem, e: ElementId, plev: Level) {
        self.tally.ordered(1);
        let slot = &mut self.uncovered.plev[e as usize];
        if *slot != ABSENT {
            return;
        }
        *slot = plev as u32;
        self.uncovered.len += 1;
        for &s in system.incident(e) {
            self.adjust(s, true);
        }
    }

    fn remove_uncovered(&mut self, system: &SetSystem, e: ElementId) -> Option<Level> {
        self.tally.ordered(1);
        let slot = &mut self.uncovered.plev[e as usize];
        if *slot == ABSENT {
            return None;
        }
        let plev = std::mem::replace(slot, ABSENT) as Level;
        self.uncovered.len -= 1;
        let skip = self.pending.as_ref().map(|p| p.set);
        for &s in system.incident(e) {
            if Some(s) != skip {
                self.adjust(s, false);
            }
        }
        Some(plev)
    }

    // ── Greedy ──

    /// Move `e` from the uncovered sub-universe into the coverage of the
    /// pending set.
    fn cover_pending_element(&mut self, system: &SetSystem, e: ElementId) {
        let (set, level) = {
            let pending = self.pending.as_ref().expect("pending set");
            (pending.set, pending.level)
        };
        let plev = self.remove_uncovered(system, e).expect("pending element is uncovered");
        self.background.assign_fresh(e, set, level, plev.max(level));
    }

    /// Process pending coverage within `budget`; returns whether the pending
    /// set (if any) is complete.
    fn process_pending(&mut self, system: &SetSystem, budget: &mut usize) -> bool {
        loop {
            let Some(pending) = self.pending.as_mut() else { return true };
            let members = system.set(pending.set);
            while pending.cursor < members.len() && !self.uncovered.contains(members[pending.cursor]) {
                pending.cursor += 1;
            }
            if pending.cursor == members.len() {
                self.pending = None;
                return true;
            }
            if *budget == 0 {
                return false;
            }
            let e = members[pending.cursor];
            pending.cursor += 1;
            self.tally.ordered(1);
            self.cover_pending_element(system, e);
            *budget -= 1;
        }
    }

    /// Extract the set covering the most uncovered elements and start adding
    /// it at level `min(⌊log_1.5 key⌋, p_k)`.
    fn select_next(&mut self) -> Option<SetId> {
        self.tally.priority(1);
        let (key, set) = self.queue.pop()?;
        let level = floor_log_1_5(key).min(self.pointer);
        self.pointer = self.pointer.min(level);
        self.background.add_set_fresh(set, level);
        self.added.push(set);
        self.pending = Some(PendingSet { set, level, cursor: 0 });
        Some(set)
    }

    /// Run the greedy to completion (no budget).
    fn finish_greedy(&mut self, system: &SetSystem) {
        let mut unlimited = usize::MAX;
        loop {
            self.process_pending(system, &mut unlimited);
            if self.uncovered.is_empty() || self.select_next().is_none() {
                break;
            }
        }
        debug_assert!(self.uncovered.is_empty());
    }

    // ── Phases ──

    /// Scan `L_k^F` in ascending id order; returns whether the scan finished.
    fn prepare(&mut self, system: &SetSystem, foreground: &HierarchicalSolution, budget: usize) -> bool {
        let k = self.level;
        let mut heads: Vec<Option<(ElementId, crate::hierarchy::ElementNode)>> =
            (0..=k).map(|j| foreground.live_successor(j, self.scan)).collect();
        let mut processed = 0;
        while processed < budget {
            let next = heads
                .iter()
                .enumerate()
                .filter_map(|(j, head)| head.map(|(e, node)| (e, j, node)))
                .min_by_key(|(e, _, _)| *e);
            let Some((e, j, node)) = next else { return true };
            self.add_uncovered(system, e, node.plev.max(k + 1));
            self.scan = Some(e);
            heads[j] = foreground.live_successor(j, Some(e));
            processed += 1;
        }
        heads.iter().all(Option::is_none)
    }

    fn run(&mut self, ctx: &mut StepContext<'_>) -> Outcome {
        if self.base {
            self.prepare(ctx.system, ctx.foreground, usize::MAX);
            self.finish_greedy(ctx.system);
            return Outcome::Terminate;
        }
        let budget = ctx.c_spd;
        match self.phase {
            Phase::Preparation => {
                if self.prepare(ctx.system, ctx.foreground, budget) {
                    self.phase = Phase::Computation;
                }
                Outcome::Continue
            }
            Phase::Computation => self.compute(ctx),
            Phase::Suspension => self.suspend(ctx),
            Phase::Copy => {
                let end = (self.copied + budget).min(self.added.len());
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
            Phase::Tail => self.tail(ctx),
        }
    }

    fn compute(&mut self, ctx: &mut StepContext<'_>) -> Outcome {
        let mut budget = ctx.c_spd;
        loop {
            if !self.process_pending(ctx.system, &mut budget) {
                return Outcome::Continue;
            }
            let size = self.background.num_sets();
            if self.uncovered.len() <= size {
                if size <= ctx.c_spd {
                    // Shortcut: the remaining work fits in this step.
                    self.finish_greedy(ctx.system);
                    return Outcome::Terminate;
                }
                self.phase = Phase::Suspension;
                self.tau_sus = size;
                self.t_sus = ctx.time + 1;
                return Outcome::Continue;
            }
            if budget == 0 {
                return Outcome::Continue;
            }
            self.select_next();
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

    fn tail(&mut self, ctx: &mut StepContext<'_>) -> Outcome {
        let mut budget = if self.uncovered.len() <= ctx.c_spd { usize::MAX } else { ctx.c_spd };
        loop {
            if !self.process_pending(ctx.system, &mut budget) {
                return Outcome::Continue;
            }
            if self.uncovered.is_empty() {
                return Outcome::Terminate;
            }
            if budget == 0 {
                return Outcome::Continue;
            }
            if let Some(s) = self.select_next() {
                self.tally.ordered(1);
                self.buffer.insert(s);
                ctx.ledger.acquire(s);
                self.copied = self.added.len();
            }
        }
    }

    // ── Sub-universe deltas ──

    fn on_delete(&mut self, system: &SetSystem, e: ElementId) {
        if self.phase == Phase::Preparation {
            self.remove_uncovered(system, e);
            return;
        }
        let in_pending = self.pending.as_ref().is_some_and(|p| system.set(p.set).binary_search(&e).is_ok())
            && self.uncovered.contains(e);
        if in_pending {
            // Finalize the element's assignment before the deletion.
            self.cover_pending_element(system, e);
        }
        match self.background.locate(e) {
            Some((node, true)) => {
                self.background.mark_dormant_at(e, node.lev);
            }
            Some((_, false)) => {}
            None => {
                self.remove_uncovered(system, e);
            }
        }
    }

    fn on_insert(&mut self, system: &SetSystem, e: ElementId) {
        if self.phase == Phase::Preparation {
            // Elements beyond the scan cursor are picked up by the scan.
            if self.scan.is_some_and(|cursor| e <= cursor) {
                self.add_uncovered(system, e, self.level + 1);
            }
            return;
        }
        if let Some((node, false)) = self.background.locate(e) {
            self.background.reactivate_at(e, node.lev);
        } else if let Some((s, level)) = self.background.highest_covering_set_with_level(system, e) {
            self.background.assign_fresh(e, s, level, level);
        } else {
            self.add_uncovered(system, e, self.pointer);
        }
    }

    // ── Audit helpers ──

    fn audit_into(&self, system: &SetSystem, report: &mut AuditReport) {
        let k = self.level;
        let sets = self.background.sets();
        let mut seen = HashSet::new();
        match sets.iter().find(|(s, _)| !seen.insert(*s)) {
            Some((s, _)) => report.fail(Check::NoDuplicateSet, format!("thread {k}: set {s} appears twice")),
            None => report.pass(Check::NoDuplicateSet),
        }

        let in_background: BTreeSet<SetId> = sets.iter().map(|(s, _)| *s).collect();
        let contents_ok = match self.phase {
            Phase::Copy => self.buffer.is_subset(&in_background),
            Phase::Tail => self.buffer == in_background,
            _ => self.buffer.is_empty(),
        };
        report.ensure(Check::BufferContents, contents_ok, || {
            format!("thread {k} in {} phase: buffer {} sets, background {} sets", self.phase, self.buffer.len(), in_background.len())
        });

        // Queue keys equal a recount from the uncovered sub-universe.
        let mut recount: HashMap<SetId, usize> = HashMap::new();
        let skip = self.pending.as_ref().map(|p| p.set);
        for (e, _) in self.uncovered.iter() {
            for &s in system.incident(e) {
                if Some(s) != skip {
                    *recount.entry(s).or_default() += 1;
                }
            }
        }
        let mut expected: Vec<(SetId, usize)> = recount.into_iter().collect();
        expected.sort_unstable();
        report.ensure(Check::QueueKeys, expected == self.queue.entries(), || format!("thread {k}: queue keys differ from recount"));

        let pointer_ok = self.pointer <= k + 1
            && self.uncovered.iter().all(|(_, plev)| plev >= self.pointer)
            && sets.iter().all(|&(_, level)| level >= self.pointer);
        report.ensure(Check::PointerMonotone, pointer_ok, || format!("thread {k}: element or set below p_k = {}", self.pointer));
    }
}

/// The `O(log n)`-approximate dynamic set cover engine.
#[derive(Debug)]
pub struct LogNEngine {
    system: SetSystem,
    top: Level,
    c_spd: usize,
    strict: bool,
    insertion_bound: usize,
    gc_rate: usize,
    foreground: HierarchicalSolution,
    threads: Vec<Option<GreedyThread>>,
    live: BTreeSet<ElementId>,
    ledger: OutputLedger,
    time: u64,
    tally: Rc<OpTally>,
    incidents: IncidentLog,
}

impl LogNEngine {
    /// Engine over `system` with `ℓ_max = ⌈log_1.5 n_cap⌉ + 1`.
    pub fn new(system: &SetSystem, config: EngineConfig) -> Self {
        let top = max_level(system.n_cap());
        let c_spd = config.c_spd.unwrap_or(DEFAULT_C_SPD).max(1);
        let alpha = config.gc_alpha.unwrap_or(4.0 * (system.n_cap().max(2) as f64).ln());
        let insertion_bound = 1 + (top + 1) * (2 * c_spd + 1);
        let gc_rate = deamortizer::gc_rate(insertion_bound, alpha);
        let tally = OpTally::shared();
        LogNEngine {
            system: system.clone(),
            top,
            c_spd,
            strict: c_spd >= DEFAULT_C_SPD,
            insertion_bound,
            gc_rate,
            // Threads place sets at level k + 1 ≤ ℓ_max + 1.
            foreground: HierarchicalSolution::with_tally(top + 1, Rc::clone(&tally)),
            threads: vec![None; top + 1],
            live: BTreeSet::new(),
            ledger: OutputLedger::new(gc_rate, config.deamortize),
            time: 0,
            tally,
            incidents: IncidentLog::default(),
        }
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
    pub fn foreground(&self) -> &HierarchicalSolution {
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

    /// Run a fresh `T_ℓmax` over the current foreground to completion with no
    /// interleaved updates; returns `(set, coverage, level)` in the order the
    /// sets were added.
    pub fn static_catch_up(&self) -> Vec<(SetId, Vec<ElementId>, Level)> {
        let saved = self.tally.peek();
        let mut thread = GreedyThread::new(&self.system, self.top, self.time, true, self.top + 1, Rc::clone(&self.tally));
        thread.prepare(&self.system, &self.foreground, usize::MAX);
        thread.finish_greedy(&self.system);
        let coverages = thread.background.coverages();
        let result = thread
            .added
            .iter()
            .map(|&s| {
                let level = thread.background.set_level(s).expect("added set present");
                (s, coverages.get(&s).cloned().unwrap_or_default(), level)
            })
            .collect();
        self.tally.restore(saved);
        result
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
                Ok(self.foreground.mark_dormant(e)?.lev)
            }
            Op::Insert => {
                self.live.insert(e);
                if let Some((node, live)) = self.foreground.locate(e) {
                    debug_assert!(!live);
                    // Dormant but still covered: reactivate in place.
                    return Ok(self.foreground.reactivate_at(e, node.lev).lev);
                }
                if let Some((s, level)) = self.foreground.highest_covering_set_with_level(&self.system, e) {
                    self.foreground.assign_fresh(e, s, level, level);
                    return Ok(level);
                }
                let s = *self
                    .system
                    .incident(e)
                    .first()
                    .ok_or_else(|| EngineError::Internal(format!("element {e} belongs to no set")))?;
                self.foreground.add_set_fresh(s, 0);
                self.ledger.acquire(s);
                self.foreground.assign_fresh(e, s, 0, 0);
                Ok(0)
            }
        }
    }

    fn switch(&mut self, thread: GreedyThread) -> Result<(), EngineError> {
        let k = thread.level;
        for (s, _) in thread.background.sets() {
            self.ledger.acquire(s);
        }
        for &s in &thread.buffer {
            self.ledger.release(s);
        }
        let evicted = self.foreground.splice_levels(thread.background, k)?;
        self.tally.ordered(1);
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

impl DynamicSetCover for LogNEngine {
    fn name(&self) -> &'static str {
        "logn"
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
                    GreedyThread::new(&self.system, k, self.time, base, self.top + 1, Rc::clone(&self.tally))
                }
                Some(mut thread) => {
                    if element_level <= k {
                        match update.op {
                            Op::Insert => thread.on_insert(&self.system, update.element),
                            Op::Delete => thread.on_delete(&self.system, update.element),
                        }
                    }
                    thread
                }
            };
            if self.strict && !thread.base {
                let age = self.time - thread.created + 1;
                let live = self.foreground.live_upto(k);
                self.incidents.evaluated(Check::Lifetime);
                if !scheduler::lifetime_ok(age, live, LIFETIME.0, LIFETIME.1) {
                    self.incidents.record(self.time, k, Check::Lifetime, format!("age {age} > 0.2 · |L_k^F| = 0.2 · {live}"));
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
        let params = AuditParams {
            live: Some(&self.live),
            tidy: self.strict.then_some(FOREGROUND_TIDY),
            tidy_upto: Some(self.top),
            stable: self.strict,
        };
        let mut report = self.foreground.audit(&self.system, params);
        let output = self.ledger.output();
        match self.foreground.sets().into_iter().find(|(s, _)| !output.contains(s)) {
            Some((s, _)) => report.fail(Check::Feasibility, format!("foreground set {s} missing from the output")),
            None => report.pass(Check::Feasibility),
        }
        for thread in self.threads.iter().flatten() {
            thread.audit_into(&self.system, &mut report);
            if self.strict && !thread.base {
                let age = self.time - thread.created + 1;
                let live = self.foreground.live_upto(thread.level);
                report.ensure(Check::Lifetime, scheduler::lifetime_ok(age, live, LIFETIME.0, LIFETIME.1), || {
                    format!("thread {}: age {age} > 0.2 · {live}", thread.level)
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

impl ExtensionSource for LogNEngine {
    fn extension_counts(&self, k: Level) -> Option<Vec<TidyCounts>> {
        let saved = self.tally.peek();
        let mut thread = self.threads.get(k)?.as_ref()?.clone();
        if thread.phase == Phase::Preparation {
            thread.prepare(&self.system, &self.foreground, usize::MAX);
        }
        thread.finish_greedy(&self.system);
        let stats = thread.background.stats();
        let counts = (0..=k)
            .map(|j| {
                let c = stats.at(j);
                TidyCounts { dirty: c.passive, clean: c.active }
            })
            .collect();
        self.tally.restore(saved);
        Some(counts)
    }

    fn extension_threshold(&self) -> Threshold {
        EXTENSION_TIDY
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle;

    fn e1() -> SetSystem {
        SetSystem::new(4, vec![vec![0, 1], vec![1, 2], vec![2, 3], vec![0, 3]], None).unwrap()
    }

    #[test]
    fn first_insert_adds_smallest_containing_set() {
        let sys = SetSystem::new(3, vec![vec![1], vec![0, 2], vec![0, 1]], None).unwrap();
        let mut engine = LogNEngine::new(&sys, EngineConfig::default());
        let report = engine.step(Update::insert(0)).unwrap();
        assert_eq!(report.insertion_recourse, 1);
        assert_eq!(engine.output_sets(), BTreeSet::from([1]));
        assert_eq!(engine.foreground().sets(), vec![(1, 0)]);
    }

    #[test]
    fn delete_keeps_sets_and_makes_element_dormant() {
        let sys = e1();
        let mut engine = LogNEngine::new(&sys, EngineConfig::default());
        engine.step(Update::insert(0)).unwrap();
        let before = engine.output_sets();
        let report = engine.step(Update::delete(0)).unwrap();
        assert_eq!(report.insertion_recourse, 0);
        // The base thread rebuilds an empty sub-universe and switches, evicting
        // the dormant-only set into garbage, which drains in the same step.
        assert!(engine.foreground().locate(0).is_none());
        assert!(engine.output_sets().is_subset(&before));
        assert!(engine.audit().passed(), "{}", engine.audit());
    }

    #[test]
    fn e1_quiescence_within_twice_opt() {
        let sys = e1();
        let mut engine = LogNEngine::new(&sys, EngineConfig::default());
        for e in 0..4 {
            engine.step(Update::insert(e)).unwrap();
        }
        let output = engine.output_sets();
        assert_eq!(oracle::first_uncovered(&sys, &output, engine.live()), None);
        let (opt, _) = oracle::exact_opt(&sys, engine.live(), 40).unwrap();
        assert_eq!(opt, 2);
        assert!(output.len() <= 2 * opt);
        assert!(engine.audit().passed(), "{}", engine.audit());
    }

    #[test]
    fn illegal_updates_are_rejected() {
        let sys = e1();
        let mut engine = LogNEngine::new(&sys, EngineConfig::default());
        engine.step(Update::insert(1)).unwrap();
        assert!(matches!(engine.step(Update::insert(1)), Err(EngineError::IllegalUpdate { step: 2, .. })));
        assert!(matches!(engine.step(Update::delete(2)), Err(EngineError::IllegalUpdate { .. })));
        assert!(matches!(engine.step(Update::insert(9)), Err(EngineError::UnknownElement { .. })));
    }

    #[test]
    fn fresh_engine_is_empty_and_audits_clean() {
        let engine = LogNEngine::new(&e1(), EngineConfig::default());
        assert!(engine.output_sets().is_empty());
        assert!(engine.audit().passed());
    }

    #[test]
    fn static_catch_up_matches_offline_greedy_on_e1() {
        let sys = e1();
        let mut engine = LogNEngine::new(&sys, EngineConfig::default());
        for e in 0..4 {
            engine.step(Update::insert(e)).unwrap();
        }
        let ours = engine.static_catch_up();
        let expected: Vec<_> = oracle::offline_greedy(&sys, engine.live(), engine.max_level() + 1)
            .into_iter()
            .map(|c| (c.set, c.coverage, c.level))
            .collect();
        assert_eq!(ours, expected);
    }
}
