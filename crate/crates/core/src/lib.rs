//! Fully dynamic set cover with worst-case recourse guarantees.
//!
//! The crate maintains an approximately minimum set cover of a changing set of
//! *live* elements, where each time-step inserts or deletes exactly one element.
//! Two engines are provided:
//!
//! - [`engine_logn::LogNEngine`]: hierarchical greedy with per-level background
//!   rebuild threads, `O(log n)`-approximate.
//! - [`engine_f::FEngine`]: primal-dual with exact dual values and lazily raised
//!   exposed elements, `O(f)`-approximate (`f` = maximum element frequency).
//!
//! Both engines share the same skeleton: a foreground solution patched locally on
//! every update, `ℓ_max + 1` cooperative background threads that rebuild the
//! bottom levels at a fixed speed, buffer solutions that pre-copy a rebuild into
//! the output so the final switch costs no insertion recourse, and a
//! [`deamortizer`] that drains removed sets at a bounded rate.
//!
//! Supporting modules:
//!
//! - [`instance`]: set systems, update streams, the `.dsc` text format and the
//!   seeded workload generator.
//! - [`hierarchy`]: the hierarchical-solution container with level / passive-level
//!   bookkeeping, the splice used by switches, and structural auditors.
//! - [`oracle`]: exact branch-and-bound OPT, offline greedy, and brute-force
//!   checkers used as ground truth.
//! - [`metrics`]: per-step reports, data-structure operation counting, CSV/JSON
//!   emission, and the stream runner.

pub mod audit;
pub mod bucket_queue;
pub mod deamortizer;
pub mod dual;
pub mod engine_f;
pub mod engine_logn;
pub mod hierarchy;
pub mod instance;
pub mod metrics;
pub mod oracle;
pub mod scheduler;
pub mod types;

pub use audit::{AuditReport, Check};
pub use instance::{InstanceError, SetSystem, UpdateStream};
pub use metrics::{StepReport, Summary};
pub use types::{ElementId, Level, Op, SetId, Update};

use std::collections::BTreeSet;

/// Common interface of the two dynamic engines, used by the stream runner and
/// the command-line driver.
pub trait DynamicSetCover {
    /// Short algorithm name (`"logn"` or `"f"`).
    fn name(&self) -> &'static str;

    /// Apply one update (one time-step) and return its report.
    fn step(&mut self, update: Update) -> Result<StepReport, EngineError>;

    /// The current output solution: foreground, buffers and garbage.
    fn output_sets(&self) -> BTreeSet<SetId>;

    /// The currently live elements.
    fn live(&self) -> &BTreeSet<ElementId>;

    /// Full end-of-step audit with the proven constants.
    fn audit(&self) -> AuditReport;

    /// Worst-case per-step insertion recourse bound `1 + (ℓ_max+1)(2·c_spd+1)`.
    fn insertion_recourse_bound(&self) -> usize;

    /// Per-step garbage-collection rate of the de-amortizer.
    fn gc_rate(&self) -> usize;

    /// Number of time-steps processed so far.
    fn time(&self) -> u64;
}

/// Errors raised by engine steps.
#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum EngineError {
    /// Insert of an already-live element or delete of a dormant one.
    #[error("illegal update at step {step}: {message}")]
    IllegalUpdate {
        /// Time-step at which the update was attempted.
        step: u64,
        /// Human-readable reason.
        message: String,
    },
    /// Element id outside the universe.
    #[error("element {element} is outside the universe of size {universe}")]
    UnknownElement {
        /// Offending element.
        element: ElementId,
        /// Universe size.
        universe: usize,
    },
    /// A structural invariant was violated while mutating engine state.
    #[error("internal invariant violated: {0}")]
    Internal(String),
    /// The configured capacity cannot be represented (e.g. dual overflow).
    #[error("unsupported configuration: {0}")]
    Unsupported(String),
}

impl From<hierarchy::HierarchyError> for EngineError {
    fn from(err: hierarchy::HierarchyError) -> Self {
        EngineError::Internal(err.to_string())
    }
}
