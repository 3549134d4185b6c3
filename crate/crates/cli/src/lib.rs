//! Command-line driver: generate workloads, replay a stream through either
//! engine with optional per-step audits and the exact oracle, and emit metrics.
//!
//! Exit codes: `0` on success, `1` when an audit (or the engine itself) reports
//! a violation, `2` on invalid arguments or input.

use clap::{Args, Parser, Subcommand, ValueEnum};
use setcover_core::engine_f::FEngine;
use setcover_core::engine_logn::LogNEngine;
use setcover_core::instance::{self, InstanceError, Pattern, WorkloadSpec};
use setcover_core::metrics::{self, RunError, RunOptions, StepReport};
use setcover_core::oracle::{self, DEFAULT_EXACT_CAP};
use setcover_core::scheduler::EngineConfig;
use setcover_core::{DynamicSetCover, EngineError, Op, SetSystem, UpdateStream};
use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

/// Exit code on success.
pub const EXIT_OK: i32 = 0;
/// Exit code when an audit fails.
pub const EXIT_AUDIT: i32 = 1;
/// Exit code on invalid arguments or input.
pub const EXIT_INPUT: i32 = 2;

/// Largest instance audited at every step by default.
const DENSE_AUDIT_LIMIT: usize = 500;
/// Default audit period above [`DENSE_AUDIT_LIMIT`].
const SPARSE_AUDIT_EVERY: usize = 16;

/// Dynamic set cover driver.
#[derive(Debug, Parser)]
#[command(name = "setcover", version, about)]
pub struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a seeded workload in `.dsc` format.
    Gen(GenArgs),
    /// Replay a stream through an engine and write per-step metrics.
    Run(RunArgs),
    /// Parse and replay-validate an instance without running an engine.
    Check(CheckArgs),
}

#[derive(Debug, Args)]
struct GenArgs {
    /// Universe size.
    #[arg(long)]
    universe: usize,
    /// Number of sets.
    #[arg(long)]
    sets: usize,
    /// Maximum number of sets per element.
    #[arg(long, default_value_t = 3)]
    freq: usize,
    /// Number of time-steps.
    #[arg(long)]
    steps: usize,
    /// Update pattern: insert-only, sliding-window or random-churn.
    #[arg(long, default_value = "random-churn")]
    pattern: Pattern,
    /// RNG seed.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Window size of the sliding-window pattern.
    #[arg(long)]
    window: Option<usize>,
    /// Output file (standard output if omitted).
    #[arg(long)]
    output: Option<PathBuf>,
}

/// Engine selector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Algo {
    /// Hierarchical greedy, `O(log n)`-approximate.
    Logn,
    /// Primal-dual, `O(f)`-approximate.
    F,
}

/// Oracle selector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum OracleMode {
    /// Exact branch-and-bound optimum on small live sets.
    Exact,
    /// No oracle.
    None,
}

#[derive(Debug, Args)]
struct RunArgs {
    /// Engine to run.
    #[arg(long, value_enum)]
    algo: Algo,
    /// Instance file in `.dsc` format.
    #[arg(long)]
    input: PathBuf,
    /// Per-step metrics CSV to write.
    #[arg(long)]
    metrics: PathBuf,
    /// Audit every N-th step (0 disables audits); defaults to 1 for n ≤ 500
    /// and 16 otherwise.
    #[arg(long)]
    audit_every: Option<usize>,
    /// Oracle used to compute OPT.
    #[arg(long, value_enum, default_value = "none")]
    oracle: OracleMode,
    /// Largest live set handed to the exact oracle.
    #[arg(long, default_value_t = DEFAULT_EXACT_CAP)]
    oracle_cap: usize,
    /// Speed constant of the background threads.
    #[arg(long)]
    c_spd: Option<usize>,
    /// Approximation constant of the garbage-collection rate.
    #[arg(long)]
    gc_alpha: Option<f64>,
    /// Cross-check recourse counters against output snapshots.
    #[arg(long)]
    verify_recourse: bool,
    /// Optional JSON summary file (the summary is always printed).
    #[arg(long)]
    summary: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct CheckArgs {
    /// Instance file in `.dsc` format.
    #[arg(long)]
    input: PathBuf,
}

/// Errors surfaced by the driver, each mapped to an exit code.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    /// A file could not be read or written.
    #[error("{path}: {source}")]
    Io {
        /// Offending path.
        path: PathBuf,
        /// Underlying error.
        source: std::io::Error,
    },
    /// The instance file is invalid.
    #[error("{path}: {source}")]
    Instance {
        /// Offending path.
        path: PathBuf,
        /// Underlying error.
        source: InstanceError,
    },
    /// Generator parameters are invalid.
    #[error("invalid workload: {0}")]
    Workload(InstanceError),
    /// The engine cannot be configured for this instance.
    #[error(transparent)]
    Config(EngineError),
    /// The run failed while stepping.
    #[error(transparent)]
    Run(#[from] RunError),
    /// Metrics could not be written.
    #[error("{path}: {message}")]
    Metrics {
        /// Offending path.
        path: PathBuf,
        /// What went wrong.
        message: String,
    },
}

impl CliError {
    /// Exit code of the error.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Run(_) => EXIT_AUDIT,
            _ => EXIT_INPUT,
        }
    }
}

/// Parse `args` (including the program name) and execute; writes normal output
/// to `out` and diagnostics to `err`. Returns the process exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(error) => {
            let code = if error.use_stderr() { EXIT_INPUT } else { EXIT_OK };
            let rendered = error.render();
            let _ = if code == EXIT_OK { write!(out, "{rendered}") } else { write!(err, "{rendered}") };
            return code;
        }
    };
    let result = match cli.command {
        Command::Gen(args) => generate(&args, out),
        Command::Run(args) => replay(&args, out, err),
        Command::Check(args) => check(&args, out),
    };
    match result {
        Ok(code) => code,
        Err(error) => {
            let _ = writeln!(err, "error: {error}");
            error.exit_code()
        }
    }
}

fn read_instance(path: &Path) -> Result<(SetSystem, UpdateStream), CliError> {
    let text = std::fs::read_to_string(path).map_err(|source| CliError::Io { path: path.into(), source })?;
    instance::parse_instance(&text).map_err(|source| CliError::Instance { path: path.into(), source })
}

fn write_file(path: &Path, contents: &[u8]) -> Result<(), CliError> {
    std::fs::write(path, contents).map_err(|source| CliError::Io { path: path.into(), source })
}

fn generate(args: &GenArgs, out: &mut dyn Write) -> Result<i32, CliError> {
    let spec = WorkloadSpec {
        window: args.window,
        ..WorkloadSpec::new(args.universe, args.sets, args.freq, args.steps, args.pattern, args.seed)
    };
    let (system, stream) = instance::generate_workload(&spec).map_err(CliError::Workload)?;
    let text = instance::serialize_instance(&system, &stream);
    match &args.output {
        Some(path) => write_file(path, text.as_bytes())?,
        None => {
            let _ = out.write_all(text.as_bytes());
        }
    }
    Ok(EXIT_OK)
}

fn check(args: &CheckArgs, out: &mut dyn Write) -> Result<i32, CliError> {
    let (system, stream) = read_instance(&args.input)?;
    let _ = writeln!(
        out,
        "ok: universe {}, {} sets, f = {}, n_cap = {}, {} updates",
        system.universe_size(),
        system.num_sets(),
        system.f_max(),
        system.n_cap(),
        stream.len()
    );
    Ok(EXIT_OK)
}

/// Largest `output / OPT` ratio above the engine's envelope, as
/// `(step, ratio, envelope)`.
fn envelope_excess(algo: Algo, system: &SetSystem, reports: &[StepReport]) -> Option<(u64, f64, f64)> {
    let mut live = 0usize;
    let mut worst: Option<(u64, f64, f64)> = None;
    for report in reports {
        match report.op {
            Op::Insert => live += 1,
            Op::Delete => live -= 1,
        }
        let Some(ratio) = report.ratio else { continue };
        let envelope = match algo {
            Algo::Logn => oracle::logn_envelope(live),
            Algo::F => oracle::f_envelope(system.f_max()),
        };
        let value = ratio.value();
        if value > envelope && worst.is_none_or(|(_, r, e)| value / envelope > r / e) {
            worst = Some((report.t, value, envelope));
        }
    }
    worst
}

fn replay(args: &RunArgs, out: &mut dyn Write, err: &mut dyn Write) -> Result<i32, CliError> {
    let (system, stream) = read_instance(&args.input)?;
    let config = EngineConfig { c_spd: args.c_spd, gc_alpha: args.gc_alpha, deamortize: true };
    let mut engine: Box<dyn DynamicSetCover> = match args.algo {
        Algo::Logn => Box::new(LogNEngine::new(&system, config)),
        Algo::F => Box::new(FEngine::new(&system, config).map_err(CliError::Config)?),
    };
    let audit_every = args.audit_every.unwrap_or(if system.n_cap() <= DENSE_AUDIT_LIMIT {
        1
    } else {
        SPARSE_AUDIT_EVERY
    });
    let options = RunOptions {
        audit_every,
        oracle_cap: (args.oracle == OracleMode::Exact).then_some(args.oracle_cap),
        verify_recourse: args.verify_recourse,
    };
    let reports = metrics::run_stream(engine.as_mut(), &system, &stream, options)?;

    let mut csv = Vec::new();
    metrics::write_csv(&mut csv, &reports)
        .map_err(|e| CliError::Metrics { path: args.metrics.clone(), message: e.to_string() })?;
    write_file(&args.metrics, &csv)?;

    let summary = metrics::summarize(&reports);
    let json = metrics::summary_json(engine.name(), &summary, engine.insertion_recourse_bound(), engine.gc_rate());
    if let Some(path) = &args.summary {
        write_file(path, json.as_bytes())?;
    }
    let _ = writeln!(out, "{json}");

    let mut code = EXIT_OK;
    for violation in &summary.violations {
        let _ = writeln!(err, "audit violation: {violation}");
        code = EXIT_AUDIT;
    }
    if let Some((t, ratio, envelope)) = envelope_excess(args.algo, &system, &reports) {
        let _ = writeln!(err, "approximation envelope exceeded at t={t}: ratio {ratio:.6} > {envelope:.6}");
        code = EXIT_AUDIT;
    }
    Ok(code)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run_capture(args: &[&str]) -> (i32, String, String) {
        let (mut out, mut err) = (Vec::new(), Vec::new());
        let code = run(std::iter::once("setcover").chain(args.iter().copied()), &mut out, &mut err);
        (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
    }

    #[test]
    fn gen_to_stdout_is_a_valid_instance() {
        let (code, out, _) = run_capture(&["gen", "--universe", "10", "--sets", "4", "--steps", "20", "--seed", "3"]);
        assert_eq!(code, EXIT_OK);
        let (system, stream) = instance::parse_instance(&out).unwrap();
        assert_eq!(system.universe_size(), 10);
        assert_eq!(stream.len(), 20);
    }

    #[test]
    fn unknown_flag_is_an_input_error() {
        let (code, _, err) = run_capture(&["run", "--bogus"]);
        assert_eq!(code, EXIT_INPUT);
        assert!(!err.is_empty());
    }

    #[test]
    fn help_exits_cleanly() {
        let (code, out, _) = run_capture(&["--help"]);
        assert_eq!(code, EXIT_OK);
        assert!(out.contains("gen") && out.contains("run") && out.contains("check"));
    }

    #[test]
    fn missing_input_file_is_an_input_error() {
        let (code, _, err) = run_capture(&["check", "--input", "/nonexistent/instance.dsc"]);
        assert_eq!(code, EXIT_INPUT);
        assert!(err.contains("nonexistent"));
    }
}
