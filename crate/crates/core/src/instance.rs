//! Immutable set systems, update streams, the `.dsc` text format, and seeded
//! workload generation.
//!
//! A `.dsc` file looks like this:
//!
//! ```text
//! dsc 1
//! universe 4
//! sets 4
//! set 0: 0 1
//! set 1: 1 2
//! set 2: 2 3
//! set 3: 0 3
//! stream
//! + 0
//! + 1
//! - 0
//! ```
//!
//! `#` starts a comment anywhere on a line. An optional `ncap <N>` line may
//! follow the `universe` line to bound the number of simultaneously live
//! elements; it defaults to the universe size.

use crate::types::{ElementId, Op, SetId, Update};
use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeSet, VecDeque};
use std::fmt::Write as _;
use std::str::FromStr;

/// Errors from parsing, validating or generating instances.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum InstanceError {
    /// A line does not follow the file format.
    #[error("line {line}: {message}")]
    Malformed {
        /// 1-based line number.
        line: usize,
        /// What was wrong.
        message: String,
    },
    /// An element id is not below the declared universe size.
    #[error("line {line}: element {element} is outside the universe of size {universe}")]
    ElementOutOfRange {
        /// 1-based line number (0 when not parsing text).
        line: usize,
        /// Offending id.
        element: u64,
        /// Declared universe size.
        universe: usize,
    },
    /// Replaying the stream breaks the live/dormant discipline.
    #[error("{message} at step {step}")]
    Discipline {
        /// 1-based time-step.
        step: usize,
        /// Which rule was broken.
        message: String,
    },
    /// Replaying the stream exceeds the live-element capacity.
    #[error("live-element capacity {n_cap} exceeded at step {step}")]
    CapacityExceeded {
        /// 1-based time-step.
        step: usize,
        /// Configured capacity.
        n_cap: usize,
    },
    /// Some element belongs to no set, so no cover can exist.
    #[error("element {element} belongs to no set")]
    Uncoverable {
        /// Offending element.
        element: ElementId,
    },
    /// Generator parameters that cannot produce a valid workload.
    #[error("infeasible parameters: {0}")]
    Infeasible(String),
}

/// Immutable set system: universe, sets, and the element → incident-sets index.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SetSystem {
    universe_size: usize,
    sets: Vec<Vec<ElementId>>,
    incident: Vec<Vec<SetId>>,
    f_max: usize,
    n_cap: usize,
}

impl SetSystem {
    /// Build a set system, deduplicating and sorting every set.
    ///
    /// `n_cap` bounds the number of simultaneously live elements; `None` means
    /// the universe size.
    pub fn new(
        universe_size: usize,
        sets: Vec<Vec<ElementId>>,
        n_cap: Option<usize>,
    ) -> Result<Self, InstanceError> {
        Self::build(universe_size, sets, n_cap).map(|(system, _)| system)
    }

    /// Like [`SetSystem::new`] but also reports how many duplicate entries were
    /// dropped from each set that had any.
    fn build(
        universe_size: usize,
        mut sets: Vec<Vec<ElementId>>,
        n_cap: Option<usize>,
    ) -> Result<(Self, Vec<(SetId, usize)>), InstanceError> {
        let mut duplicates = Vec::new();
        let mut incident: Vec<Vec<SetId>> = vec![Vec::new(); universe_size];
        for (id, members) in sets.iter_mut().enumerate() {
            let before = members.len();
            members.sort_unstable();
            members.dedup();
            if members.len() != before {
                duplicates.push((id as SetId, before - members.len()));
            }
            for &e in members.iter() {
                let slot = incident
                    .get_mut(e as usize)
                    .ok_or(InstanceError::ElementOutOfRange {
                        line: 0,
                        element: e as u64,
                        universe: universe_size,
                    })?;
                slot.push(id as SetId);
            }
        }
        if let Some(e) = incident.iter().position(Vec::is_empty) {
            return Err(InstanceError::Uncoverable { element: e as ElementId });
        }
        let f_max = incident.iter().map(Vec::len).max().unwrap_or(0);
        let system = SetSystem {
            universe_size,
            sets,
            incident,
            f_max,
            n_cap: n_cap.unwrap_or(universe_size).max(1),
        };
        Ok((system, duplicates))
    }

    /// Number of element ids `U`.
    pub fn universe_size(&self) -> usize {
        self.universe_size
    }

    /// Number of sets `m`.
    pub fn num_sets(&self) -> usize {
        self.sets.len()
    }

    /// Maximum element frequency `f`.
    pub fn f_max(&self) -> usize {
        self.f_max
    }

    /// Upper bound on simultaneously live elements.
    pub fn n_cap(&self) -> usize {
        self.n_cap
    }

    /// Sorted members of set `s`.
    pub fn set(&self, s: SetId) -> &[ElementId] {
        &self.sets[s as usize]
    }

    /// All sets, indexed by id.
    pub fn sets(&self) -> &[Vec<ElementId>] {
        &self.sets
    }

    /// Sorted ids of the sets containing `e`.
    pub fn incident(&self, e: ElementId) -> &[SetId] {
        &self.incident[e as usize]
    }

    /// Whether `e` is a valid element id.
    pub fn contains_element(&self, e: ElementId) -> bool {
        (e as usize) < self.universe_size
    }

    /// A copy with a different live-element capacity.
    pub fn with_n_cap(mut self, n_cap: usize) -> Self {
        self.n_cap = n_cap.max(1);
        self
    }
}

/// Ordered list of updates, one per time-step.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct UpdateStream {
    updates: Vec<Update>,
}

impl UpdateStream {
    /// Wrap a list of updates (not yet validated).
    pub fn new(updates: Vec<Update>) -> Self {
        UpdateStream { updates }
    }

    /// The updates in time order.
    pub fn updates(&self) -> &[Update] {
        &self.updates
    }

    /// Number of time-steps.
    pub fn len(&self) -> usize {
        self.updates.len()
    }

    /// Whether the stream has no updates.
    pub fn is_empty(&self) -> bool {
        self.updates.is_empty()
    }

    /// Replay from the empty live set, checking the live/dormant discipline,
    /// element range and capacity.
    pub fn validate(&self, system: &SetSystem) -> Result<(), InstanceError> {
        let mut live = vec![false; system.universe_size()];
        let mut live_count = 0usize;
        for (index, update) in self.updates.iter().enumerate() {
            let step = index + 1;
            let slot = live
                .get_mut(update.element as usize)
                .ok_or(InstanceError::ElementOutOfRange {
                    line: 0,
                    element: update.element as u64,
                    universe: system.universe_size(),
                })?;
            match update.op {
                Op::Insert => {
                    if *slot {
                        return Err(InstanceError::Discipline {
                            step,
                            message: "insert of live element".into(),
                        });
                    }
                    *slot = true;
                    live_count += 1;
                    if live_count > system.n_cap() {
                        return Err(InstanceError::CapacityExceeded {
                            step,
                            n_cap: system.n_cap(),
                        });
                    }
                }
                Op::Delete => {
                    if !*slot {
                        return Err(InstanceError::Discipline {
                            step,
                            message: "delete of dormant element".into(),
                        });
                    }
                    *slot = false;
                    live_count -= 1;
                }
            }
        }
        Ok(())
    }

    /// Live set after replaying the first `steps` updates.
    pub fn live_after(&self, steps: usize) -> BTreeSet<ElementId> {
        let mut live = BTreeSet::new();
        for update in self.updates.iter().take(steps) {
            match update.op {
                Op::Insert => live.insert(update.element),
                Op::Delete => live.remove(&update.element),
            };
        }
        live
    }
}

/// Result of parsing a `.dsc` file, with non-fatal warnings.
#[derive(Debug, Clone)]
pub struct ParsedInstance {
    /// The validated set system.
    pub system: SetSystem,
    /// The validated update stream.
    pub stream: UpdateStream,
    /// Normalization notes (e.g. duplicate members dropped).
    pub warnings: Vec<String>,
}

/// Parse a `.dsc` document and replay-validate its stream.
pub fn parse_instance(text: &str) -> Result<(SetSystem, UpdateStream), InstanceError> {
    parse_instance_with_warnings(text).map(|parsed| (parsed.system, parsed.stream))
}

fn malformed(line: usize, message: impl Into<String>) -> InstanceError {
    InstanceError::Malformed { line, message: message.into() }
}

fn parse_number<T: FromStr>(token: &str, line: usize, what: &str) -> Result<T, InstanceError> {
    token
        .parse::<T>()
        .map_err(|_| malformed(line, format!("expected {what}, found `{token}`")))
}

fn keyword_value(
    lines: &mut impl Iterator<Item = (usize, String)>,
    keyword: &str,
    last_line: usize,
) -> Result<(usize, usize), InstanceError> {
    let (line, content) = lines
        .next()
        .ok_or_else(|| malformed(last_line, format!("missing `{keyword}` line")))?;
    let mut tokens = content.split_whitespace();
    if tokens.next() != Some(keyword) {
        return Err(malformed(line, format!("expected `{keyword} <n>`")));
    }
    let value = tokens
        .next()
        .ok_or_else(|| malformed(line, format!("`{keyword}` needs a value")))?;
    if tokens.next().is_some() {
        return Err(malformed(line, "trailing tokens"));
    }
    Ok((line, parse_number(value, line, "a count")?))
}

/// Parse a `.dsc` document, returning warnings alongside the instance.
pub fn parse_instance_with_warnings(text: &str) -> Result<ParsedInstance, InstanceError> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, raw)| {
            let content = raw.split('#').next().unwrap_or("").trim().to_string();
            (i + 1, content)
        })
        .filter(|(_, content)| !content.is_empty())
        .peekable();

    let (line, header) = lines.next().ok_or_else(|| malformed(1, "empty document"))?;
    if header.split_whitespace().collect::<Vec<_>>() != ["dsc", "1"] {
        return Err(malformed(line, "expected header `dsc 1`"));
    }
    let (line, universe) = keyword_value(&mut lines, "universe", line)?;
    let mut n_cap = None;
    if lines.peek().is_some_and(|(_, c)| c.starts_with("ncap")) {
        let (_, cap) = keyword_value(&mut lines, "ncap", line)?;
        n_cap = Some(cap);
    }
    let (mut last_line, num_sets) = keyword_value(&mut lines, "sets", line)?;

    let mut sets: Vec<Option<Vec<ElementId>>> = vec![None; num_sets];
    for _ in 0..num_sets {
        let (line, content) = lines
            .next()
            .ok_or_else(|| malformed(last_line, format!("expected {num_sets} set lines")))?;
        last_line = line;
        let rest = content
            .strip_prefix("set")
            .ok_or_else(|| malformed(line, "expected `set <id>: <elements>`"))?;
        let (id_text, members_text) = rest
            .split_once(':')
            .ok_or_else(|| malformed(line, "missing `:` after set id"))?;
        let id: usize = parse_number(id_text.trim(), line, "a set id")?;
        let slot = sets
            .get_mut(id)
            .ok_or_else(|| malformed(line, format!("set id {id} not below {num_sets}")))?;
        if slot.is_some() {
            return Err(malformed(line, format!("set {id} defined twice")));
        }
        let mut members = Vec::new();
        for token in members_text.split_whitespace() {
            let e: u64 = parse_number(token, line, "an element id")?;
            if e as usize >= universe {
                return Err(InstanceError::ElementOutOfRange { line, element: e, universe });
            }
            members.push(e as ElementId);
        }
        *slot = Some(members);
    }

    let (line, marker) = lines
        .next()
        .ok_or_else(|| malformed(last_line, "missing `stream` line"))?;
    if marker != "stream" {
        return Err(malformed(line, "expected `stream`"));
    }

    let mut updates = Vec::new();
    for (line, content) in lines {
        let (op, rest) = if let Some(rest) = content.strip_prefix('+') {
            (Op::Insert, rest)
        } else if let Some(rest) = content.strip_prefix('-') {
            (Op::Delete, rest)
        } else {
            return Err(malformed(line, "expected `+ <e>` or `- <e>`"));
        };
        let mut tokens = rest.split_whitespace();
        let token = tokens
            .next()
            .ok_or_else(|| malformed(line, "missing element id"))?;
        if tokens.next().is_some() {
            return Err(malformed(line, "trailing tokens"));
        }
        let e: u64 = parse_number(token, line, "an element id")?;
        if e as usize >= universe {
            return Err(InstanceError::ElementOutOfRange { line, element: e, universe });
        }
        updates.push(Update { op, element: e as ElementId });
    }

    let sets: Vec<Vec<ElementId>> = sets.into_iter().map(Option::unwrap_or_default).collect();
    let (system, duplicates) = SetSystem::build(universe, sets, n_cap)?;
    let warnings = duplicates
        .into_iter()
        .map(|(s, n)| format!("set {s}: dropped {n} duplicate element(s)"))
        .collect();
    let stream = UpdateStream::new(updates);
    stream.validate(&system)?;
    Ok(ParsedInstance { system, stream, warnings })
}

/// Canonical `.dsc` serialization: single spaces, ascending set ids.
pub fn serialize_instance(system: &SetSystem, stream: &UpdateStream) -> String {
    let mut out = String::new();
    out.push_str("dsc 1\n");
    let _ = writeln!(out, "universe {}", system.universe_size());
    if system.n_cap() != system.universe_size() {
        let _ = writeln!(out, "ncap {}", system.n_cap());
    }
    let _ = writeln!(out, "sets {}", system.num_sets());
    for (id, members) in system.sets().iter().enumerate() {
        let _ = write!(out, "set {id}:");
        for e in members {
            let _ = write!(out, " {e}");
        }
        out.push('\n');
    }
    out.push_str("stream\n");
    for update in stream.updates() {
        let _ = writeln!(out, "{} {}", update.op.symbol(), update.element);
    }
    out
}

/// Update pattern of a generated workload.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Pattern {
    /// Distinct insertions only.
    InsertOnly,
    /// Fill a window, then alternate deleting the oldest and inserting a new element.
    SlidingWindow,
    /// Each step toggles a uniformly random element: a uniform dormant element
    /// is inserted or a uniform live element is deleted.
    RandomChurn,
}

impl FromStr for Pattern {
    type Err = String;

    fn from_str(text: &str) -> Result<Self, Self::Err> {
        match text {
            "insert-only" | "InsertOnly" => Ok(Pattern::InsertOnly),
            "sliding-window" | "SlidingWindow" => Ok(Pattern::SlidingWindow),
            "random-churn" | "RandomChurn" => Ok(Pattern::RandomChurn),
            other => Err(format!("unknown pattern `{other}`")),
        }
    }
}

/// Parameters of [`generate_workload`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WorkloadSpec {
    /// Universe size `U`.
    pub universe_size: usize,
    /// Number of sets `m`.
    pub num_sets: usize,
    /// Maximum number of sets per element.
    pub freq: usize,
    /// Number of time-steps.
    pub steps: usize,
    /// Update pattern.
    pub pattern: Pattern,
    /// RNG seed.
    pub seed: u64,
    /// Window size for [`Pattern::SlidingWindow`]; defaults to `max(1, U/2)`.
    pub window: Option<usize>,
}

impl WorkloadSpec {
    /// A spec with the default window.
    pub fn new(
        universe_size: usize,
        num_sets: usize,
        freq: usize,
        steps: usize,
        pattern: Pattern,
        seed: u64,
    ) -> Self {
        WorkloadSpec { universe_size, num_sets, freq, steps, pattern, seed, window: None }
    }

    /// Effective sliding-window size.
    pub fn window_size(&self) -> usize {
        self.window.unwrap_or((self.universe_size / 2).max(1))
    }
}

/// Pool of dormant elements supporting uniform sampling and O(1) removal.
struct DormantPool {
    items: Vec<ElementId>,
    position: Vec<usize>,
}

impl DormantPool {
    fn full(universe: usize) -> Self {
        DormantPool {
            items: (0..universe as ElementId).collect(),
            position: (0..universe).collect(),
        }
    }

    fn take_random(&mut self, rng: &mut ChaCha8Rng) -> ElementId {
        let index = rng.gen_range(0..self.items.len());
        self.take_at(index)
    }

    fn take_at(&mut self, index: usize) -> ElementId {
        let e = self.items.swap_remove(index);
        if let Some(&moved) = self.items.get(index) {
            self.position[moved as usize] = index;
        }
        e
    }

    fn put(&mut self, e: ElementId) {
        self.position[e as usize] = self.items.len();
        self.items.push(e);
    }

    fn contains(&self, e: ElementId) -> bool {
        let index = self.position[e as usize];
        self.items.get(index) == Some(&e)
    }

    fn remove(&mut self, e: ElementId) {
        let index = self.position[e as usize];
        self.take_at(index);
    }
}

/// Generate a seeded random instance and update stream.
///
/// Every element is placed in a uniform number `1..=freq` of distinct sets
/// chosen uniformly at random, so the universe is always coverable.
pub fn generate_workload(spec: &WorkloadSpec) -> Result<(SetSystem, UpdateStream), InstanceError> {
    let WorkloadSpec { universe_size, num_sets, freq, steps, pattern, seed, .. } = *spec;
    if freq == 0 {
        return Err(InstanceError::Infeasible("freq must be at least 1".into()));
    }
    if universe_size == 0 && steps > 0 {
        return Err(InstanceError::Infeasible("empty universe cannot host updates".into()));
    }
    if universe_size > 0 && num_sets == 0 {
        return Err(InstanceError::Infeasible("a nonempty universe needs at least one set".into()));
    }
    if freq > num_sets.max(1) {
        return Err(InstanceError::Infeasible(format!(
            "freq {freq} exceeds the number of sets {num_sets}"
        )));
    }
    if pattern == Pattern::InsertOnly && steps > universe_size {
        return Err(InstanceError::Infeasible(format!(
            "{steps} distinct insertions need a universe of at least {steps} elements"
        )));
    }
    let window = spec.window_size();
    if pattern == Pattern::SlidingWindow && window > universe_size {
        return Err(InstanceError::Infeasible(format!(
            "window {window} exceeds universe size {universe_size}"
        )));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut sets: Vec<Vec<ElementId>> = vec![Vec::new(); num_sets];
    for e in 0..universe_size as ElementId {
        let count = rng.gen_range(1..=freq);
        for s in sample(&mut rng, num_sets, count).into_iter() {
            sets[s].push(e);
        }
    }
    let system = SetSystem::new(universe_size, sets, None)?;

    let mut updates = Vec::with_capacity(steps);
    let mut dormant = DormantPool::full(universe_size);
    match pattern {
        Pattern::InsertOnly => {
            for _ in 0..steps {
                updates.push(Update::insert(dormant.take_random(&mut rng)));
            }
        }
        Pattern::SlidingWindow => {
            let mut order: VecDeque<ElementId> = VecDeque::new();
            let mut delete_next = false;
            for _ in 0..steps {
                if order.len() < window && !delete_next {
                    let e = dormant.take_random(&mut rng);
                    order.push_back(e);
                    updates.push(Update::insert(e));
                    delete_next = order.len() == window;
                } else {
                    let e = order.pop_front().expect("window is nonempty");
                    dormant.put(e);
                    updates.push(Update::delete(e));
                    delete_next = false;
                }
            }
        }
        Pattern::RandomChurn => {
            let mut live: Vec<ElementId> = Vec::new();
            let mut live_position = vec![usize::MAX; universe_size];
            for _ in 0..steps {
                let e = rng.gen_range(0..universe_size) as ElementId;
                if dormant.contains(e) {
                    dormant.remove(e);
                    live_position[e as usize] = live.len();
                    live.push(e);
                    updates.push(Update::insert(e));
                } else {
                    let index = live_position[e as usize];
                    live.swap_remove(index);
                    if let Some(&moved) = live.get(index) {
                        live_position[moved as usize] = index;
                    }
                    dormant.put(e);
                    updates.push(Update::delete(e));
                }
            }
        }
    }
    let stream = UpdateStream::new(updates);
    stream.validate(&system)?;
    Ok((system, stream))
}

#[cfg(test)]
mod tests {
    use super::*;

    const E1: &str = "dsc 1\nuniverse 4\nsets 4\nset 0: 0 1\nset 1: 1 2\nset 2: 2 3\nset 3: 0 3\nstream\n+0\n+1\n+2\n+3\n";

    #[test]
    fn parses_smallest_instance() {
        let (system, stream) = parse_instance(E1).unwrap();
        assert_eq!(system.universe_size(), 4);
        assert_eq!(system.num_sets(), 4);
        assert_eq!(system.f_max(), 2);
        assert_eq!(stream.len(), 4);
        assert!(stream.updates().iter().all(|u| u.op == Op::Insert));
        assert_eq!(system.incident(1), &[0, 1]);
    }

    #[test]
    fn double_insert_is_a_discipline_error() {
        let text = "dsc 1\nuniverse 2\nsets 1\nset 0: 0 1\nstream\n+0\n+0\n";
        let err = parse_instance(text).unwrap_err();
        assert_eq!(err.to_string(), "insert of live element at step 2");
    }

    #[test]
    fn empty_stream_section() {
        let text = "dsc 1\nuniverse 2\nsets 1\nset 0: 0 1\nstream\n";
        let (_, stream) = parse_instance(text).unwrap();
        assert!(stream.is_empty());
    }

    #[test]
    fn comments_and_spacing_are_ignored() {
        let text = "# header\ndsc 1\nuniverse 2 # two\nsets 1\nset 0: 1 0 1\n\nstream\n+ 1 # go\n- 1\n";
        let parsed = parse_instance_with_warnings(text).unwrap();
        assert_eq!(parsed.system.set(0), &[0, 1]);
        assert_eq!(parsed.warnings.len(), 1);
        assert_eq!(parsed.stream.len(), 2);
    }

    #[test]
    fn malformed_lines_report_line_numbers() {
        let text = "dsc 1\nuniverse 2\nsets 1\nset zero: 0 1\nstream\n";
        match parse_instance(text).unwrap_err() {
            InstanceError::Malformed { line, .. } => assert_eq!(line, 4),
            other => panic!("unexpected {other:?}"),
        }
        let text = "dsc 1\nuniverse 2\nsets 1\nset 0: 0 5\nstream\n";
        assert!(matches!(
            parse_instance(text).unwrap_err(),
            InstanceError::ElementOutOfRange { line: 4, element: 5, .. }
        ));
    }

    #[test]
    fn capacity_is_enforced() {
        let text = "dsc 1\nuniverse 3\nncap 1\nsets 1\nset 0: 0 1 2\nstream\n+0\n+1\n";
        assert_eq!(
            parse_instance(text).unwrap_err(),
            InstanceError::CapacityExceeded { step: 2, n_cap: 1 }
        );
    }

    #[test]
    fn uncoverable_element_is_rejected() {
        let text = "dsc 1\nuniverse 3\nsets 1\nset 0: 0 1\nstream\n";
        assert_eq!(parse_instance(text).unwrap_err(), InstanceError::Uncoverable { element: 2 });
    }

    #[test]
    fn generator_is_deterministic() {
        let spec = WorkloadSpec::new(100, 30, 3, 100, Pattern::InsertOnly, 7);
        let (a_sys, a_stream) = generate_workload(&spec).unwrap();
        let (b_sys, b_stream) = generate_workload(&spec).unwrap();
        assert_eq!(serialize_instance(&a_sys, &a_stream), serialize_instance(&b_sys, &b_stream));
    }

    #[test]
    fn sliding_window_respects_window() {
        let spec = WorkloadSpec::new(10, 4, 2, 20, Pattern::SlidingWindow, 1);
        let (system, stream) = generate_workload(&spec).unwrap();
        let window = spec.window_size();
        let mut live = 0usize;
        for update in stream.updates() {
            match update.op {
                Op::Insert => live += 1,
                Op::Delete => live -= 1,
            }
            assert!(live <= window);
        }
        stream.validate(&system).unwrap();
    }

    #[test]
    fn churn_round_trips_through_text() {
        let spec = WorkloadSpec::new(50, 20, 4, 500, Pattern::RandomChurn, 3);
        let (system, stream) = generate_workload(&spec).unwrap();
        let text = serialize_instance(&system, &stream);
        let (parsed_sys, parsed_stream) = parse_instance(&text).unwrap();
        assert_eq!(parsed_sys, system);
        assert_eq!(parsed_stream, stream);
    }

    #[test]
    fn infeasible_parameters_are_rejected() {
        let bad = [
            WorkloadSpec::new(10, 4, 0, 5, Pattern::RandomChurn, 0),
            WorkloadSpec::new(10, 2, 3, 5, Pattern::RandomChurn, 0),
            WorkloadSpec::new(10, 4, 2, 11, Pattern::InsertOnly, 0),
            WorkloadSpec::new(10, 0, 1, 5, Pattern::RandomChurn, 0),
        ];
        for spec in bad {
            assert!(matches!(generate_workload(&spec), Err(InstanceError::Infeasible(_))));
        }
    }
}
