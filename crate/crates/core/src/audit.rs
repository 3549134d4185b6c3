//! Report-valued invariant audits.
//!
//! Every auditor returns an [`AuditReport`] holding one verdict per [`Check`]:
//! either a pass or the first witness of a violation. Audits never panic, so a
//! failing run can still be summarized.

use serde::Serialize;
use std::collections::BTreeMap;
use std::fmt;

/// The individual invariants that auditors verify.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Check {
    /// Output (or foreground) covers every live element.
    Feasibility,
    /// Each covered element has exactly one owner.
    DisjointCoverage,
    /// Every set in a solution owns at least one element.
    NonemptyCoverage,
    /// `lev(s) ≤ log_1.5 |cov(s)|`.
    LevelInvariant,
    /// `lev(e) ≤ plev(e)`, and dormant elements have `plev = lev`.
    PassiveLevelInvariant,
    /// An element's level equals its owner's level.
    OwnerLevel,
    /// A set appears at most once in a solution.
    NoDuplicateSet,
    /// Incremental level statistics equal a from-scratch recount.
    LevelStats,
    /// Passive (and dormant) elements are a bounded fraction of active ones.
    Tidy,
    /// No set intersects the active coverage at level ≤ k in ≥ 1.5^{k+1} elements.
    Stable,
    /// Every running background thread is younger than its lifetime bound.
    Lifetime,
    /// Every suspension ended (in the copy phase) before its deadline.
    SuspensionWait,
    /// `w_s ≤ 1` for every set.
    DualFeasibility,
    /// `w_s ≥ 2/3` for every set in the primal solution.
    TightSet,
    /// `w_e ≤ (2/3)^{lev(e)}` for every covered element.
    DualLevel,
    /// `lev(e)` equals the highest level of a primal set containing `e`.
    HighestLevel,
    /// The incrementally maintained set duals equal a from-scratch sum.
    DualDecomposition,
    /// `|S*(B_k)| ≤ 3 τ_sus` while copying or finishing the tail.
    BufferSize,
    /// Buffer contents match the background solution as the phase requires.
    BufferContents,
    /// Priority-queue keys equal a recount from the uncovered sub-universe.
    QueueKeys,
    /// The copy pointer never increases.
    PointerMonotone,
    /// Output size stays within the configured approximation envelope.
    ApproximationEnvelope,
}

impl Check {
    /// Stable snake-case name used in reports.
    pub fn name(self) -> &'static str {
        match self {
            Check::Feasibility => "feasibility",
            Check::DisjointCoverage => "disjoint_coverage",
            Check::NonemptyCoverage => "nonempty_coverage",
            Check::LevelInvariant => "level_invariant",
            Check::PassiveLevelInvariant => "passive_level_invariant",
            Check::OwnerLevel => "owner_level",
            Check::NoDuplicateSet => "no_duplicate_set",
            Check::LevelStats => "level_stats",
            Check::Tidy => "tidy",
            Check::Stable => "stable",
            Check::Lifetime => "lifetime",
            Check::SuspensionWait => "suspension_wait",
            Check::DualFeasibility => "dual_feasibility",
            Check::TightSet => "tight_set",
            Check::DualLevel => "dual_level",
            Check::HighestLevel => "highest_level",
            Check::DualDecomposition => "dual_decomposition",
            Check::BufferSize => "buffer_size",
            Check::BufferContents => "buffer_contents",
            Check::QueueKeys => "queue_keys",
            Check::PointerMonotone => "pointer_monotone",
            Check::ApproximationEnvelope => "approximation_envelope",
        }
    }
}

impl fmt::Display for Check {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Verdicts for a set of checks: `None` means pass, `Some(witness)` the first
/// violation found.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct AuditReport {
    verdicts: BTreeMap<Check, Option<String>>,
}

impl AuditReport {
    /// An empty report (vacuously passing).
    pub fn new() -> Self {
        Self::default()
    }

    /// Record that `check` was evaluated and passed, unless it already failed.
    pub fn pass(&mut self, check: Check) {
        self.verdicts.entry(check).or_insert(None);
    }

    /// Record a violation of `check`; only the first witness is kept.
    pub fn fail(&mut self, check: Check, witness: impl Into<String>) {
        let slot = self.verdicts.entry(check).or_insert(None);
        if slot.is_none() {
            *slot = Some(witness.into());
        }
    }

    /// Record a verdict from a result.
    pub fn record(&mut self, check: Check, outcome: Result<(), String>) {
        match outcome {
            Ok(()) => self.pass(check),
            Err(witness) => self.fail(check, witness),
        }
    }

    /// Record a pass if `ok`, otherwise a failure with a lazily built witness.
    pub fn ensure(&mut self, check: Check, ok: bool, witness: impl FnOnce() -> String) {
        if ok {
            self.pass(check);
        } else {
            self.fail(check, witness());
        }
    }

    /// Fold another report into this one, prefixing its witnesses.
    pub fn merge(&mut self, other: AuditReport, context: &str) {
        for (check, verdict) in other.verdicts {
            match verdict {
                None => self.pass(check),
                Some(witness) if context.is_empty() => self.fail(check, witness),
                Some(witness) => self.fail(check, format!("{context}: {witness}")),
            }
        }
    }

    /// Whether every evaluated check passed.
    pub fn passed(&self) -> bool {
        self.verdicts.values().all(Option::is_none)
    }

    /// Verdict for one check, if evaluated.
    pub fn verdict(&self, check: Check) -> Option<&Option<String>> {
        self.verdicts.get(&check)
    }

    /// Whether `check` was evaluated and passed.
    pub fn check_passed(&self, check: Check) -> bool {
        matches!(self.verdicts.get(&check), Some(None))
    }

    /// The failed checks with their witnesses.
    pub fn failures(&self) -> impl Iterator<Item = (Check, &str)> {
        self.verdicts
            .iter()
            .filter_map(|(check, verdict)| verdict.as_deref().map(|w| (*check, w)))
    }

    /// All evaluated checks.
    pub fn checks(&self) -> impl Iterator<Item = Check> + '_ {
        self.verdicts.keys().copied()
    }
}

impl fmt::Display for AuditReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (check, verdict) in &self.verdicts {
            match verdict {
                None => writeln!(f, "{check}: pass")?,
                Some(witness) => writeln!(f, "{check}: FAIL ({witness})")?,
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_report_passes() {
        assert!(AuditReport::new().passed());
    }

    #[test]
    fn first_witness_is_kept() {
        let mut report = AuditReport::new();
        report.pass(Check::Tidy);
        report.fail(Check::Tidy, "level 2");
        report.fail(Check::Tidy, "level 3");
        report.pass(Check::Tidy);
        assert!(!report.passed());
        assert_eq!(report.failures().collect::<Vec<_>>(), vec![(Check::Tidy, "level 2")]);
    }

    #[test]
    fn merge_prefixes_context() {
        let mut inner = AuditReport::new();
        inner.fail(Check::Stable, "set 4");
        let mut outer = AuditReport::new();
        outer.pass(Check::Feasibility);
        outer.merge(inner, "thread 3");
        assert_eq!(outer.verdict(Check::Stable), Some(&Some("thread 3: set 4".to_string())));
        assert!(outer.check_passed(Check::Feasibility));
    }
}
