//! Pieces of the background-thread skeleton shared by both engines: phases,
//! the suspension-to-copy gate, the suspension deadline, lifetime bounds, and
//! the incident log that records bound violations as they happen.

use crate::audit::{AuditReport, Check};
use crate::types::Level;
use serde::Serialize;
use std::fmt;

/// Configuration shared by both engines.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EngineConfig {
    /// Speed constant `c_spd` (elements processed / sets copied per step);
    /// `None` selects the engine's default.
    pub c_spd: Option<usize>,
    /// Approximation constant `α` of the garbage-collection rate; `None`
    /// selects the engine's default.
    pub gc_alpha: Option<f64>,
    /// Route removed sets through the garbage pool instead of deleting them
    /// immediately.
    pub deamortize: bool,
}

impl Default for EngineConfig {
    fn default() -> Self {
        EngineConfig { c_spd: None, gc_alpha: None, deamortize: true }
    }
}

impl EngineConfig {
    /// Default configuration with an explicit speed constant.
    pub fn with_c_spd(c_spd: usize) -> Self {
        EngineConfig { c_spd: Some(c_spd), ..EngineConfig::default() }
    }
}

/// Phase of a background thread.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    /// Scanning the sub-universe into the thread's structures.
    Preparation,
    /// Running the rebuild (greedy or primal-dual).
    Computation,
    /// Rebuild paused; waiting for the copy gate.
    Suspension,
    /// Copying the background solution into the buffer.
    Copy,
    /// Finishing the residual rebuild while mirroring into the buffer.
    Tail,
}

impl fmt::Display for Phase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            Phase::Preparation => "preparation",
            Phase::Computation => "computation",
            Phase::Suspension => "suspension",
            Phase::Copy => "copy",
            Phase::Tail => "tail",
        };
        f.write_str(name)
    }
}

impl Phase {
    /// Whether the thread's buffer is being filled (copy or tail).
    pub fn is_copying(self) -> bool {
        matches!(self, Phase::Copy | Phase::Tail)
    }
}

/// The per-step copy gate: a suspended thread may start copying only if its
/// snapshot size is at most half of every snapshot among threads already in
/// copy or tail phase (including those admitted earlier in the same step).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct CopyGate {
    smallest: Option<usize>,
}

impl CopyGate {
    /// Gate initialized from the snapshot sizes of copying threads.
    pub fn from_snapshots(snapshots: impl IntoIterator<Item = usize>) -> Self {
        CopyGate { smallest: snapshots.into_iter().min() }
    }

    /// Whether a thread with snapshot `tau_sus` may enter copy phase.
    pub fn admits(&self, tau_sus: usize) -> bool {
        self.smallest.is_none_or(|smallest| 2 * tau_sus <= smallest)
    }

    /// Record that a thread with snapshot `tau_sus` entered copy phase.
    pub fn admit(&mut self, tau_sus: usize) {
        self.smallest = Some(self.smallest.map_or(tau_sus, |s| s.min(tau_sus)));
    }
}

/// Whether a thread suspended since `t_sus` has reached its deadline
/// `t_sus + 0.1·τ_sus` at step `t`.
pub fn suspension_expired(t: u64, t_sus: u64, tau_sus: usize) -> bool {
    10 * t.saturating_sub(t_sus) >= tau_sus as u64
}

/// Whether a suspension wait of `wait` steps is strictly below `0.1·τ_sus`.
pub fn suspension_wait_ok(wait: u64, tau_sus: usize) -> bool {
    10 * wait < tau_sus as u64
}

/// Whether `age ≤ (num/den) · live`.
pub fn lifetime_ok(age: u64, live: usize, num: u64, den: u64) -> bool {
    age * den <= live as u64 * num
}

/// One recorded bound violation.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Incident {
    /// Time-step of the violation.
    pub t: u64,
    /// Thread level.
    pub level: Level,
    /// Violated check.
    pub check: Check,
    /// Human-readable witness.
    pub message: String,
}

/// Append-only log of bound violations observed while stepping.
#[derive(Debug, Clone, Default)]
pub struct IncidentLog {
    entries: Vec<Incident>,
    /// Checks ever evaluated (so audits can report passes).
    evaluated: Vec<Check>,
}

impl IncidentLog {
    /// Note that `check` was evaluated at least once.
    pub fn evaluated(&mut self, check: Check) {
        if !self.evaluated.contains(&check) {
            self.evaluated.push(check);
        }
    }

    /// Record a violation.
    pub fn record(&mut self, t: u64, level: Level, check: Check, message: String) {
        self.evaluated(check);
        self.entries.push(Incident { t, level, check, message });
    }

    /// All violations so far.
    pub fn entries(&self) -> &[Incident] {
        &self.entries
    }

    /// Fold the log into a report (first witness per check).
    pub fn report_into(&self, report: &mut AuditReport) {
        for check in &self.evaluated {
            report.pass(*check);
        }
        for incident in &self.entries {
            report.fail(
                incident.check,
                format!("step {}, thread {}: {}", incident.t, incident.level, incident.message),
            );
        }
    }
}
