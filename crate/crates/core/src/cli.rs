//! Command-line driver. Exit codes: 0 success, 1 usage or configuration
//! error, 2 iteration cap reached, 3 verification failure.

use std::ffi::OsString;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::PathBuf;

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::bounds::{BoundReport, DEFAULT_DELTA};
use crate::engine::{Backend, Umda};
use crate::error::{Result, UmdaError};
use crate::fitness::FitnessKind;
use crate::harness::config::{ExperimentConfig, VerifyConfig};
use crate::harness::replicate::{
    run_sweep, with_workers, write_summary_csv, write_sweep_outputs, PointResult,
};
use crate::harness::verify::{run_suite, Suite};
use crate::instrumentation::{FrequencyDumpWriter, IterationObserver, TraceCsvWriter};
use crate::model::UmdaParams;

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_CAP: i32 = 2;
pub const EXIT_VERIFY_FAILED: i32 = 3;

pub const ENV_WORKERS: &str = "UMDA_WORKERS";
pub const ENV_OUT_DIR: &str = "UMDA_OUT_DIR";

#[derive(Debug, Parser)]
#[command(
    name = "umda",
    version,
    about = "UMDA on LeadingOnes: runs, bounds, sweeps and verification suites"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Execute one run and print its outcome as JSON.
    Run(RunArgs),
    /// Evaluate the runtime bounds for one parameter set.
    Bounds(BoundsArgs),
    /// Run a parameter sweep and write per-grid-point CSV and JSON files.
    Sweep(SweepArgs),
    /// Run verification suites and print JSON verdicts.
    Verify(VerifyArgs),
}

#[derive(Debug, Args)]
pub struct RunArgs {
    #[arg(long)]
    pub n: usize,
    #[arg(long)]
    pub mu: usize,
    #[arg(long)]
    pub lambda: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// leading_ones, one_max or neutral_suffix:K
    #[arg(long, default_value = "leading_ones")]
    pub fitness: FitnessKind,
    /// Defaults to 10n.
    #[arg(long = "max-iters")]
    pub max_iters: Option<u64>,
    #[arg(long, default_value = "auto")]
    pub backend: Backend,
    #[arg(long = "run-index", default_value_t = 0)]
    pub run_index: u64,
    /// Per-iteration trace CSV.
    #[arg(long)]
    pub trace: Option<PathBuf>,
    /// Frequency vector after every iteration, one CSV row each.
    #[arg(long = "dump-frequencies")]
    pub dump_frequencies: Option<PathBuf>,
    #[arg(long)]
    pub workers: Option<usize>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
    Table,
}

#[derive(Debug, Args)]
pub struct BoundsArgs {
    #[arg(long)]
    pub n: usize,
    #[arg(long)]
    pub mu: usize,
    #[arg(long)]
    pub lambda: usize,
    #[arg(long, default_value_t = DEFAULT_DELTA)]
    pub delta: f64,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    pub format: Format,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    /// TOML experiment config; the default scaling sweep if omitted.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub workers: Option<usize>,
    /// Output directory, else $UMDA_OUT_DIR, else the current directory.
    #[arg(long = "out-dir")]
    pub out_dir: Option<PathBuf>,
    /// Format of the summary printed to standard output.
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    /// floor, progress, band, drift, chernoff, scaling or all
    pub suite: String,
    /// TOML verification config; defaults for omitted sections.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub workers: Option<usize>,
}

fn workers(flag: Option<usize>) -> Result<usize> {
    if let Some(w) = flag {
        return Ok(w.max(1));
    }
    match std::env::var(ENV_WORKERS) {
        Ok(v) => v.trim().parse::<usize>().map(|w| w.max(1)).map_err(|_| {
            UmdaError::Config(format!(
                "{ENV_WORKERS} must be a positive integer, got {v:?}"
            ))
        }),
        Err(_) => Ok(std::thread::available_parallelism().map_or(1, |n| n.get())),
    }
}

fn cmd_run(args: RunArgs, out: &mut dyn Write) -> Result<i32> {
    let mut params = UmdaParams::new(args.n, args.mu, args.lambda)?.with_seed(args.seed);
    if let Some(cap) = args.max_iters {
        params = params.with_max_iterations(cap);
    }
    let n = params.n;
    let umda = Umda::new(params, args.fitness)?
        .backend(args.backend)
        .run_index(args.run_index);

    let mut trace = args
        .trace
        .as_ref()
        .map(|p| TraceCsvWriter::new(BufWriter::new(File::create(p)?), args.run_index))
        .transpose()?;
    let mut dump = args
        .dump_frequencies
        .as_ref()
        .map(|p| FrequencyDumpWriter::new(BufWriter::new(File::create(p)?), n))
        .transpose()?;
    let outcome = with_workers(workers(args.workers)?, || {
        let mut observers: Vec<&mut dyn IterationObserver> = Vec::new();
        if let Some(t) = trace.as_mut() {
            observers.push(t);
        }
        if let Some(d) = dump.as_mut() {
            observers.push(d);
        }
        umda.run_observed(&mut observers)
    })??;
    if let Some(t) = trace {
        t.finish()?.flush()?;
    }
    if let Some(d) = dump {
        d.finish()?.flush()?;
    }
    serde_json::to_writer_pretty(&mut *out, &outcome)?;
    writeln!(out)?;
    Ok(if outcome.found_optimum {
        EXIT_OK
    } else {
        EXIT_CAP
    })
}

fn cmd_bounds(args: BoundsArgs, out: &mut dyn Write) -> Result<i32> {
    let report = BoundReport::evaluate(args.n, args.mu, args.lambda, args.delta)?;
    match args.format {
        Format::Json => {
            serde_json::to_writer_pretty(&mut *out, &report)?;
            writeln!(out)?;
        }
        Format::Table => write!(out, "{}", report.to_table())?,
        Format::Csv => {
            let mut w = csv::Writer::from_writer(&mut *out);
            w.serialize(BoundsRow::from(&report))?;
            w.flush()?;
        }
    }
    Ok(EXIT_OK)
}

#[derive(serde::Serialize)]
struct BoundsRow {
    n: usize,
    mu: usize,
    lambda: usize,
    delta: f64,
    d_upper: i64,
    d_lower: i64,
    xi: u64,
    upper_bound_iterations: u64,
    upper_bound_evaluations: u64,
    lower_bound_iterations: u64,
    lower_bound_evaluations: u64,
    lower_bound_trivial: bool,
}

impl From<&BoundReport> for BoundsRow {
    fn from(r: &BoundReport) -> Self {
        Self {
            n: r.n,
            mu: r.mu,
            lambda: r.lambda,
            delta: r.delta,
            d_upper: r.d_upper,
            d_lower: r.d_lower,
            xi: r.xi,
            upper_bound_iterations: r.upper_bound_iterations,
            upper_bound_evaluations: r.upper_bound_evaluations,
            lower_bound_iterations: r.lower_bound_iterations,
            lower_bound_evaluations: r.lower_bound_evaluations,
            lower_bound_trivial: r.lower_bound_trivial,
        }
    }
}

fn summary_table(results: &[PointResult]) -> String {
    let mut s = format!(
        "{:>4} {:>6} {:>8} {:>10} {:>3} {:>9} {:>10} {:>14}\n",
        "grid", "n", "mu", "lambda", "d", "success", "median_I", "median_T"
    );
    for r in results {
        let a = &r.aggregate;
        let med = |q: &Option<crate::harness::Quantiles>| {
            q.as_ref()
                .map_or("-".to_string(), |q| format!("{}", q.median))
        };
        s.push_str(&format!(
            "{:>4} {:>6} {:>8} {:>10} {:>3} {:>9} {:>10} {:>14}\n",
            a.grid_index,
            a.n,
            a.mu,
            a.lambda,
            a.d_upper,
            format!("{}/{}", a.success_count, a.replications),
            med(&a.iterations),
            med(&a.evaluations),
        ));
    }
    s
}

fn cmd_sweep(args: SweepArgs, out: &mut dyn Write) -> Result<i32> {
    let config = match &args.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::default(),
    };
    config.validate()?;
    let dir = args
        .out_dir
        .or_else(|| std::env::var_os(ENV_OUT_DIR).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("."));
    let results = with_workers(workers(args.workers)?, || run_sweep(&config))??;
    write_sweep_outputs(&dir, config.master_seed, &results)?;
    match args.format {
        Format::Csv => write_summary_csv(&mut *out, &results)?,
        Format::Json => {
            let aggregates: Vec<_> = results.iter().map(|r| &r.aggregate).collect();
            serde_json::to_writer_pretty(&mut *out, &aggregates)?;
            writeln!(out)?;
        }
        Format::Table => write!(out, "{}", summary_table(&results))?,
    }
    Ok(EXIT_OK)
}

fn cmd_verify(args: VerifyArgs, out: &mut dyn Write) -> Result<i32> {
    let suite: Suite = args.suite.parse()?;
    let config = match &args.config {
        Some(path) => VerifyConfig::load(path)?,
        None => VerifyConfig::default(),
    };
    let verdicts = with_workers(workers(args.workers)?, || run_suite(suite, &config))??;
    serde_json::to_writer_pretty(&mut *out, &verdicts)?;
    writeln!(out)?;
    Ok(if verdicts.iter().all(|v| v.passed) {
        EXIT_OK
    } else {
        EXIT_VERIFY_FAILED
    })
}

/// Parses `args` (including the program name), executes the command and
/// returns the process exit code.
pub fn run_cli<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => EXIT_OK,
                _ => EXIT_USAGE,
            };
            let text = e.render().to_string();
            let _ = if code == EXIT_OK {
                write!(out, "{text}")
            } else {
                write!(err, "{text}")
            };
            return code;
        }
    };
    let result = match cli.command {
        Command::Run(a) => cmd_run(a, out),
        Command::Bounds(a) => cmd_bounds(a, out),
        Command::Sweep(a) => cmd_sweep(a, out),
        Command::Verify(a) => cmd_verify(a, out),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            EXIT_USAGE
        }
    }
}
