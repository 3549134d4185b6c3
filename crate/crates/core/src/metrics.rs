//! Per-step measurement: recourse, output size, logical data-structure
//! operation counts, audit verdicts and (optionally) the exact optimum.
//!
//! Operation counts are the deterministic update-time proxy: each insert,
//! delete, search, successor, split or merge on an ordered structure counts
//! one, as does each push/pop/re-key on a priority structure and each exact
//! dual-value arithmetic operation. Moving or merging a whole structure counts
//! one operation regardless of its size.

use crate::audit::AuditReport;
use crate::oracle;
use crate::types::{ElementId, Op, SetId, Update};
use crate::{DynamicSetCover, EngineError, SetSystem, UpdateStream};
use serde::Serialize;
use std::cell::Cell;
use std::collections::BTreeSet;
use std::io::Write;
use std::rc::Rc;

/// Logical operation counts for one time-step.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct DsOps {
    /// Operations on ordered sets/maps.
    pub ordered: u64,
    /// Operations on priority structures.
    pub priority: u64,
    /// Exact dual-value arithmetic operations.
    pub dual: u64,
}

impl DsOps {
    /// Sum of all categories.
    pub fn total(&self) -> u64 {
        self.ordered + self.priority + self.dual
    }
}

/// Shared, interior-mutable operation counter.
///
/// Engines hand one `Rc<OpTally>` to every structure they own, and drain it
/// once per time-step.
#[derive(Debug, Default)]
pub struct OpTally {
    ordered: Cell<u64>,
    priority: Cell<u64>,
    dual: Cell<u64>,
}

impl OpTally {
    /// A fresh shared counter.
    pub fn shared() -> Rc<OpTally> {
        Rc::new(OpTally::default())
    }

    /// Count `n` ordered-structure operations.
    #[inline]
    pub fn ordered(&self, n: u64) {
        self.ordered.set(self.ordered.get() + n);
    }

    /// Count `n` priority-structure operations.
    #[inline]
    pub fn priority(&self, n: u64) {
        self.priority.set(self.priority.get() + n);
    }

    /// Count `n` dual-arithmetic operations.
    #[inline]
    pub fn dual(&self, n: u64) {
        self.dual.set(self.dual.get() + n);
    }

    /// Current counts without resetting.
    pub fn peek(&self) -> DsOps {
        DsOps {
            ordered: self.ordered.get(),
            priority: self.priority.get(),
            dual: self.dual.get(),
        }
    }

    /// Return the counts and reset them to zero.
    pub fn take(&self) -> DsOps {
        let ops = self.peek();
        self.restore(DsOps::default());
        ops
    }

    /// Overwrite the counts (used to exclude audit work from measurements).
    pub fn restore(&self, ops: DsOps) {
        self.ordered.set(ops.ordered);
        self.priority.set(ops.priority);
        self.dual.set(ops.dual);
    }
}

/// Exact ratio `output_size / opt`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Ratio {
    /// Numerator (output size).
    pub numerator: usize,
    /// Denominator (optimum), at least 1.
    pub denominator: usize,
}

impl Ratio {
    /// Floating-point value, for display and summaries.
    pub fn value(&self) -> f64 {
        self.numerator as f64 / self.denominator as f64
    }
}

/// Everything measured about one time-step.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StepReport {
    /// Time-step, starting at 1.
    pub t: u64,
    /// Update kind.
    pub op: Op,
    /// Updated element.
    pub element: ElementId,
    /// Sets that entered the output this step.
    pub insertion_recourse: usize,
    /// Sets that left the output this step.
    pub deletion_recourse: usize,
    /// Output size at the end of the step.
    pub output_size: usize,
    /// Logical operation counts of the step.
    pub ds_ops: DsOps,
    /// Optimum cover size of the live set, when the oracle ran.
    pub opt: Option<usize>,
    /// `output_size / opt`, when the oracle ran and `opt > 0`.
    pub ratio: Option<Ratio>,
    /// Audit verdicts, when the step was audited.
    pub audit: Option<AuditReport>,
}

impl StepReport {
    /// A report with no oracle or audit data.
    pub fn new(t: u64, update: Update) -> Self {
        StepReport {
            t,
            op: update.op,
            element: update.element,
            insertion_recourse: 0,
            deletion_recourse: 0,
            output_size: 0,
            ds_ops: DsOps::default(),
            opt: None,
            ratio: None,
            audit: None,
        }
    }

    /// Total recourse of the step.
    pub fn total_recourse(&self) -> usize {
        self.insertion_recourse + self.deletion_recourse
    }

    /// Attach the optimum and derive the ratio.
    pub fn set_opt(&mut self, opt: usize) {
        self.opt = Some(opt);
        self.ratio = (opt > 0).then_some(Ratio { numerator: self.output_size, denominator: opt });
    }
}

/// Recourse between two consecutive output snapshots.
pub fn snapshot_recourse(before: &BTreeSet<SetId>, after: &BTreeSet<SetId>) -> (usize, usize) {
    let inserted = after.difference(before).count();
    let deleted = before.difference(after).count();
    (inserted, deleted)
}

/// Aggregates over a run.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct Summary {
    /// Number of steps.
    pub steps: usize,
    /// Largest per-step insertion recourse.
    pub max_insertion_recourse: usize,
    /// Largest per-step deletion recourse.
    pub max_deletion_recourse: usize,
    /// Largest per-step total recourse.
    pub max_total_recourse: usize,
    /// Mean per-step total recourse.
    pub mean_total_recourse: f64,
    /// Largest per-step operation count.
    pub max_ds_ops: u64,
    /// Mean per-step operation count.
    pub mean_ds_ops: f64,
    /// Largest output size.
    pub max_output_size: usize,
    /// Largest approximation ratio among oracle-checked steps.
    pub max_ratio: Option<f64>,
    /// Number of steps with an oracle value.
    pub oracle_steps: usize,
    /// Number of audited steps.
    pub audited_steps: usize,
    /// Descriptions of every audit violation (`t=<step> <check>: <witness>`).
    pub violations: Vec<String>,
}

/// Aggregate a time-ordered list of reports.
pub fn summarize(reports: &[StepReport]) -> Summary {
    let mut summary = Summary { steps: reports.len(), ..Summary::default() };
    let mut total_recourse = 0usize;
    let mut total_ops = 0u64;
    for report in reports {
        summary.max_insertion_recourse = summary.max_insertion_recourse.max(report.insertion_recourse);
        summary.max_deletion_recourse = summary.max_deletion_recourse.max(report.deletion_recourse);
        summary.max_total_recourse = summary.max_total_recourse.max(report.total_recourse());
        summary.max_output_size = summary.max_output_size.max(report.output_size);
        summary.max_ds_ops = summary.max_ds_ops.max(report.ds_ops.total());
        total_recourse += report.total_recourse();
        total_ops += report.ds_ops.total();
        if report.opt.is_some() {
            summary.oracle_steps += 1;
        }
        if let Some(ratio) = report.ratio {
            let value = ratio.value();
            summary.max_ratio = Some(summary.max_ratio.map_or(value, |m: f64| m.max(value)));
        }
        if let Some(audit) = &report.audit {
            summary.audited_steps += 1;
            for (check, witness) in audit.failures() {
                summary.violations.push(format!("t={} {check}: {witness}", report.t));
            }
        }
    }
    if !reports.is_empty() {
        summary.mean_total_recourse = total_recourse as f64 / reports.len() as f64;
        summary.mean_ds_ops = total_ops as f64 / reports.len() as f64;
    }
    summary
}

/// CSV header of the per-step metrics file.
pub const CSV_HEADER: [&str; 9] =
    ["t", "op", "e", "ins_rec", "del_rec", "out_size", "ds_ops_total", "opt", "ratio"];

/// Write reports as CSV with the fixed header. Ratios use six decimals; missing
/// oracle values are empty fields.
pub fn write_csv<W: Write>(writer: W, reports: &[StepReport]) -> Result<(), csv::Error> {
    let mut csv = csv::Writer::from_writer(writer);
    csv.write_record(CSV_HEADER)?;
    for report in reports {
        csv.write_record([
            report.t.to_string(),
            report.op.symbol().to_string(),
            report.element.to_string(),
            report.insertion_recourse.to_string(),
            report.deletion_recourse.to_string(),
            report.output_size.to_string(),
            report.ds_ops.total().to_string(),
            report.opt.map(|o| o.to_string()).unwrap_or_default(),
            report.ratio.map(|r| format!("{:.6}", r.value())).unwrap_or_default(),
        ])?;
    }
    csv.flush()?;
    Ok(())
}

/// JSON summary document.
pub fn summary_json(algorithm: &str, summary: &Summary, insertion_bound: usize, gc_rate: usize) -> String {
    #[derive(Serialize)]
    struct Document<'a> {
        algorithm: &'a str,
        insertion_recourse_bound: usize,
        gc_rate: usize,
        summary: &'a Summary,
    }
    serde_json::to_string_pretty(&Document {
        algorithm,
        insertion_recourse_bound: insertion_bound,
        gc_rate,
        summary,
    })
    .expect("summary serializes")
}

/// Options of [`run_stream`]; the default disables audits, the oracle and
/// recourse verification.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct RunOptions {
    /// Audit every `n`-th step (0 = never).
    pub audit_every: usize,
    /// Run the exact oracle on steps whose live set has at most this many
    /// elements (`None` = oracle off).
    pub oracle_cap: Option<usize>,
    /// Compute recourse from output snapshots and compare with the counters.
    pub verify_recourse: bool,
}

/// Errors of [`run_stream`].
#[derive(Debug, thiserror::Error)]
pub enum RunError {
    /// The engine rejected an update.
    #[error(transparent)]
    Engine(#[from] EngineError),
    /// Trusted counters disagree with snapshot differences.
    #[error("step {step}: counted recourse ({counted:?}) differs from snapshot recourse ({observed:?})")]
    RecourseMismatch {
        /// Time-step.
        step: u64,
        /// (insertion, deletion) from the counters.
        counted: (usize, usize),
        /// (insertion, deletion) from snapshot differences.
        observed: (usize, usize),
    },
}

/// Replay a stream through an engine, auditing and consulting the oracle as
/// configured.
pub fn run_stream(
    engine: &mut dyn DynamicSetCover,
    system: &SetSystem,
    stream: &UpdateStream,
    options: RunOptions,
) -> Result<Vec<StepReport>, RunError> {
    let mut reports = Vec::with_capacity(stream.len());
    let mut previous = options.verify_recourse.then(|| engine.output_sets());
    for update in stream.updates() {
        let mut report = engine.step(*update)?;
        if let Some(before) = previous.as_mut() {
            let after = engine.output_sets();
            let observed = snapshot_recourse(before, &after);
            let counted = (report.insertion_recourse, report.deletion_recourse);
            if observed != counted {
                return Err(RunError::RecourseMismatch { step: report.t, counted, observed });
            }
            *before = after;
        }
        if options.audit_every > 0 && report.t % options.audit_every as u64 == 0 {
            report.audit = Some(engine.audit());
        }
        if let Some(cap) = options.oracle_cap {
            let live = engine.live();
            if live.len() <= cap {
                if let Ok((opt, _)) = oracle::exact_opt(system, live, cap) {
                    report.set_opt(opt);
                }
            }
        }
        reports.push(report);
    }
    Ok(reports)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn snapshot_recourse_counts_differences() {
        let a: BTreeSet<SetId> = [1, 2].into();
        assert_eq!(snapshot_recourse(&a, &a), (0, 0));
        let b: BTreeSet<SetId> = [2, 3].into();
        assert_eq!(snapshot_recourse(&a, &b), (1, 1));
    }

    #[test]
    fn tally_take_resets() {
        let tally = OpTally::shared();
        tally.ordered(3);
        tally.priority(2);
        tally.dual(1);
        assert_eq!(tally.take().total(), 6);
        assert_eq!(tally.peek().total(), 0);
    }

    #[test]
    fn summary_aggregates_maxima() {
        let mut first = StepReport::new(1, Update::insert(0));
        first.insertion_recourse = 2;
        first.output_size = 2;
        first.set_opt(1);
        let mut second = StepReport::new(2, Update::delete(0));
        second.deletion_recourse = 3;
        second.ds_ops.ordered = 10;
        let summary = summarize(&[first, second]);
        assert_eq!(summary.max_insertion_recourse, 2);
        assert_eq!(summary.max_total_recourse, 3);
        assert_eq!(summary.max_ds_ops, 10);
        assert_eq!(summary.max_ratio, Some(2.0));
        assert!((summary.mean_total_recourse - 2.5).abs() < 1e-12);
    }

    #[test]
    fn csv_has_fixed_header_and_blank_oracle_fields() {
        let mut report = StepReport::new(1, Update::insert(4));
        report.insertion_recourse = 1;
        report.output_size = 1;
        let mut buffer = Vec::new();
        write_csv(&mut buffer, &[report]).unwrap();
        let text = String::from_utf8(buffer).unwrap();
        assert_eq!(text, "t,op,e,ins_rec,del_rec,out_size,ds_ops_total,opt,ratio\n1,+,4,1,0,1,0,,\n");
    }
}
