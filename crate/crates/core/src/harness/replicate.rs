//! Seeded replications, per-grid-point aggregation and sweep output files.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::statistics::{Data, Distribution, OrderStatistics};

use crate::bounds;
use crate::engine::{Backend, RunOutcome, Umda};
use crate::error::Result;
use crate::fitness::FitnessKind;
use crate::harness::config::{ExperimentConfig, GridPoint};
use crate::harness::suites;
use crate::model::UmdaParams;

/// Per-run row of the sweep CSV.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub run_index: u64,
    pub found_optimum: bool,
    pub iterations: u64,
    pub evaluations: Option<u64>,
    pub min_frequency: f64,
    pub mean_progress: f64,
    pub floor_violated: bool,
    pub progress_qualifying: usize,
    pub progress_successes: usize,
    pub band_qualifying: usize,
    pub band_violations: usize,
    pub upper_border_monotone: bool,
}

impl RunSummary {
    pub fn from_outcome(
        run_index: u64,
        outcome: &RunOutcome,
        n: usize,
        d_upper: usize,
        d_lower: usize,
    ) -> Self {
        let trace = &outcome.trace;
        let min_frequency = trace
            .records
            .iter()
            .map(|r| r.min_frequency)
            .fold(f64::INFINITY, f64::min);
        let steps: Vec<f64> = trace
            .records
            .windows(2)
            .map(|w| w[1].count_at_upper_border as f64 - w[0].count_at_upper_border as f64)
            .collect();
        let mean_progress = if steps.is_empty() {
            0.0
        } else {
            steps.iter().sum::<f64>() / steps.len() as f64
        };
        let (progress_qualifying, progress_successes) = suites::progress_counts(trace, n, d_upper);
        let (band_qualifying, band_violations) = suites::band_counts(trace, n, d_lower);
        Self {
            run_index,
            found_optimum: outcome.found_optimum,
            iterations: outcome.iterations_completed,
            evaluations: outcome
                .first_optimum_eval_index
                .filter(|_| outcome.found_optimum),
            min_frequency,
            mean_progress,
            floor_violated: suites::floor_violated(trace, n),
            progress_qualifying,
            progress_successes,
            band_qualifying,
            band_violations,
            upper_border_monotone: suites::upper_border_monotone(trace),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Quantiles {
    pub mean: f64,
    pub median: f64,
    pub q10: f64,
    pub q90: f64,
}

impl Quantiles {
    pub fn of(values: &[f64]) -> Option<Self> {
        if values.is_empty() {
            return None;
        }
        let mut data = Data::new(values.to_vec());
        Some(Self {
            mean: data.mean().expect("non-empty"),
            median: data.median(),
            q10: data.quantile(0.1),
            q90: data.quantile(0.9),
        })
    }
}

/// Summary statistics for one grid point. Iteration and evaluation
/// statistics cover successful runs only.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AggregateResult {
    pub grid_index: usize,
    pub n: usize,
    pub mu: usize,
    pub lambda: usize,
    pub delta: f64,
    pub d_upper: i64,
    pub d_lower: i64,
    pub replications: usize,
    pub success_count: usize,
    pub iterations: Option<Quantiles>,
    pub evaluations: Option<Quantiles>,
    pub mean_progress_per_iteration: f64,
    pub min_frequency: f64,
    pub floor_violating_runs: usize,
    pub progress_qualifying: usize,
    pub progress_successes: usize,
    pub band_qualifying: usize,
    pub band_violations: usize,
    pub upper_border_monotone_runs: usize,
    pub upper_bound_evaluations: u64,
    pub lower_bound_evaluations: u64,
    pub lower_bound_trivial: bool,
}

impl AggregateResult {
    /// Pure function of the run summaries; their order does not matter.
    pub fn from_summaries(
        grid_index: usize,
        params: &UmdaParams,
        delta: f64,
        summaries: &[RunSummary],
    ) -> Result<Self> {
        let mut runs = summaries.to_vec();
        runs.sort_by_key(|s| s.run_index);
        let report = bounds::BoundReport::evaluate(params.n, params.mu, params.lambda, delta)?;
        let succeeded: Vec<&RunSummary> = runs.iter().filter(|s| s.found_optimum).collect();
        let iters: Vec<f64> = succeeded.iter().map(|s| s.iterations as f64).collect();
        let evals: Vec<f64> = succeeded
            .iter()
            .filter_map(|s| s.evaluations.map(|e| e as f64))
            .collect();
        let progress: f64 =
            runs.iter().map(|s| s.mean_progress).sum::<f64>() / runs.len().max(1) as f64;
        Ok(Self {
            grid_index,
            n: params.n,
            mu: params.mu,
            lambda: params.lambda,
            delta,
            d_upper: report.d_upper,
            d_lower: report.d_lower,
            replications: runs.len(),
            success_count: succeeded.len(),
            iterations: Quantiles::of(&iters),
            evaluations: Quantiles::of(&evals),
            mean_progress_per_iteration: progress,
            min_frequency: runs
                .iter()
                .map(|s| s.min_frequency)
                .fold(f64::INFINITY, f64::min),
            floor_violating_runs: runs.iter().filter(|s| s.floor_violated).count(),
            progress_qualifying: runs.iter().map(|s| s.progress_qualifying).sum(),
            progress_successes: runs.iter().map(|s| s.progress_successes).sum(),
            band_qualifying: runs.iter().map(|s| s.band_qualifying).sum(),
            band_violations: runs.iter().map(|s| s.band_violations).sum(),
            upper_border_monotone_runs: runs
                .iter()
                .filter(|s| s.found_optimum && s.upper_border_monotone)
                .count(),
            upper_bound_evaluations: report.upper_bound_evaluations,
            lower_bound_evaluations: report.lower_bound_evaluations,
            lower_bound_trivial: report.lower_bound_trivial,
        })
    }
}

/// Outcomes and aggregate of one grid point.
#[derive(Clone, Debug)]
pub struct PointResult {
    pub params: UmdaParams,
    pub point: GridPoint,
    pub outcomes: Vec<RunOutcome>,
    pub summaries: Vec<RunSummary>,
    pub aggregate: AggregateResult,
}

/// Runs `replications` independent runs with run indices
/// `first_run_index .. first_run_index + replications`. Runs execute on the
/// current rayon pool; the result does not depend on its size.
pub fn run_replications(
    point: &GridPoint,
    grid_index: usize,
    master_seed: u64,
    replications: usize,
    first_run_index: u64,
    fitness: FitnessKind,
    backend: Backend,
) -> Result<PointResult> {
    let params = point.params(master_seed)?;
    let base = Umda::new(params.clone(), fitness)?.backend(backend);
    let outcomes = (0..replications as u64)
        .into_par_iter()
        .map(|r| base.clone().run_index(first_run_index + r).run())
        .collect::<Result<Vec<_>>>()?;
    let d_up = bounds::d_upper(point.delta, params.lambda, params.mu)?.max(0) as usize;
    let d_low = bounds::d_lower(point.delta, params.lambda, params.mu)?.max(0) as usize;
    let summaries: Vec<RunSummary> = outcomes
        .iter()
        .enumerate()
        .map(|(r, o)| {
            RunSummary::from_outcome(first_run_index + r as u64, o, params.n, d_up, d_low)
        })
        .collect();
    let aggregate = AggregateResult::from_summaries(grid_index, &params, point.delta, &summaries)?;
    Ok(PointResult {
        params,
        point: point.clone(),
        outcomes,
        summaries,
        aggregate,
    })
}

/// Runs every grid point; grid point `g` uses run indices starting at `g·R`.
pub fn run_sweep(config: &ExperimentConfig) -> Result<Vec<PointResult>> {
    config.validate()?;
    config
        .grid
        .iter()
        .enumerate()
        .map(|(g, point)| {
            run_replications(
                point,
                g,
                config.master_seed,
                config.replications,
                (g * config.replications) as u64,
                config.fitness,
                config.backend,
            )
        })
        .collect()
}

/// Runs `f` on a dedicated rayon pool with `workers` threads.
pub fn with_workers<T: Send>(workers: usize, f: impl FnOnce() -> T + Send) -> Result<T> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| crate::error::UmdaError::Config(e.to_string()))?;
    Ok(pool.install(f))
}

pub const SWEEP_CSV_HEADER: [&str; 18] = [
    "grid_index",
    "n",
    "mu",
    "lambda",
    "delta",
    "run_index",
    "found_optimum",
    "iterations",
    "evaluations",
    "min_frequency",
    "mean_progress",
    "floor_violated",
    "progress_qualifying",
    "progress_successes",
    "band_qualifying",
    "band_violations",
    "upper_border_monotone",
    "max_iterations",
];

fn sweep_row(point: &PointResult, s: &RunSummary) -> Vec<String> {
    let p = &point.params;
    vec![
        point.aggregate.grid_index.to_string(),
        p.n.to_string(),
        p.mu.to_string(),
        p.lambda.to_string(),
        point.point.delta.to_string(),
        s.run_index.to_string(),
        s.found_optimum.to_string(),
        s.iterations.to_string(),
        s.evaluations.map(|e| e.to_string()).unwrap_or_default(),
        s.min_frequency.to_string(),
        s.mean_progress.to_string(),
        s.floor_violated.to_string(),
        s.progress_qualifying.to_string(),
        s.progress_successes.to_string(),
        s.band_qualifying.to_string(),
        s.band_violations.to_string(),
        s.upper_border_monotone.to_string(),
        p.max_iterations.to_string(),
    ]
}

/// Writes the per-replication CSV of one grid point.
pub fn write_point_csv<W: Write>(out: W, point: &PointResult) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(SWEEP_CSV_HEADER)?;
    for s in &point.summaries {
        w.write_record(sweep_row(point, s))?;
    }
    w.flush()?;
    Ok(())
}

/// File name `<subcommand>-<master_seed>-<grid_index>.<ext>`.
pub fn output_name(subcommand: &str, master_seed: u64, grid: &str, ext: &str) -> String {
    format!("{subcommand}-{master_seed}-{grid}.{ext}")
}

/// Writes `sweep-<seed>-<g>.csv` and `sweep-<seed>-<g>.json` per grid point
/// plus `sweep-<seed>-summary.csv`. Returns the written paths.
pub fn write_sweep_outputs(
    dir: &Path,
    master_seed: u64,
    results: &[PointResult],
) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir)?;
    let mut written = Vec::new();
    for point in results {
        let g = point.aggregate.grid_index.to_string();
        let csv_path = dir.join(output_name("sweep", master_seed, &g, "csv"));
        write_point_csv(BufWriter::new(File::create(&csv_path)?), point)?;
        written.push(csv_path);
        let json_path = dir.join(output_name("sweep", master_seed, &g, "json"));
        let mut f = BufWriter::new(File::create(&json_path)?);
        serde_json::to_writer_pretty(&mut f, &point.aggregate)?;
        f.write_all(b"\n")?;
        f.flush()?;
        written.push(json_path);
    }
    let summary_path = dir.join(output_name("sweep", master_seed, "summary", "csv"));
    write_summary_csv(BufWriter::new(File::create(&summary_path)?), results)?;
    written.push(summary_path);
    Ok(written)
}

pub fn write_summary_csv<W: Write>(out: W, results: &[PointResult]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "grid_index",
        "n",
        "mu",
        "lambda",
        "d_upper",
        "d_lower",
        "replications",
        "success_count",
        "median_iterations",
        "q10_iterations",
        "q90_iterations",
        "median_evaluations",
        "lower_bound_evaluations",
        "upper_bound_evaluations",
        "mean_progress_per_iteration",
        "min_frequency",
    ])?;
    let q = |x: &Option<Quantiles>, f: fn(&Quantiles) -> f64| {
        x.as_ref().map(|q| f(q).to_string()).unwrap_or_default()
    };
    for r in results {
        let a = &r.aggregate;
        w.write_record([
            a.grid_index.to_string(),
            a.n.to_string(),
            a.mu.to_string(),
            a.lambda.to_string(),
            a.d_upper.to_string(),
            a.d_lower.to_string(),
            a.replications.to_string(),
            a.success_count.to_string(),
            q(&a.iterations, |q| q.median),
            q(&a.iterations, |q| q.q10),
            q(&a.iterations, |q| q.q90),
            q(&a.evaluations, |q| q.median),
            a.lower_bound_evaluations.to_string(),
            a.upper_bound_evaluations.to_string(),
            a.mean_progress_per_iteration.to_string(),
            a.min_frequency.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}
