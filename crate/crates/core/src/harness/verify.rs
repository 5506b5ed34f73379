//! Named verification suites with pass/fail verdicts.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::bounds;
use crate::error::{Result, UmdaError};
use crate::fitness::FitnessKind;
use crate::harness::config::{GridPoint, VerifyConfig};
use crate::harness::replicate::{run_replications, run_sweep, PointResult};
use crate::harness::scaling::{scaling_fit, ScalingPoint};
use crate::harness::suites;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Suite {
    Floor,
    Progress,
    Band,
    Drift,
    Chernoff,
    Scaling,
    All,
}

impl Suite {
    pub const EACH: [Suite; 6] = [
        Suite::Floor,
        Suite::Progress,
        Suite::Band,
        Suite::Drift,
        Suite::Chernoff,
        Suite::Scaling,
    ];
}

impl fmt::Display for Suite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Suite::Floor => "floor",
            Suite::Progress => "progress",
            Suite::Band => "band",
            Suite::Drift => "drift",
            Suite::Chernoff => "chernoff",
            Suite::Scaling => "scaling",
            Suite::All => "all",
        })
    }
}

impl FromStr for Suite {
    type Err = UmdaError;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "floor" => Suite::Floor,
            "progress" => Suite::Progress,
            "band" => Suite::Band,
            "drift" => Suite::Drift,
            "chernoff" => Suite::Chernoff,
            "scaling" => Suite::Scaling,
            "all" => Suite::All,
            other => return Err(UmdaError::Config(format!("unknown suite `{other}`"))),
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SuiteVerdict {
    pub suite: String,
    pub passed: bool,
    pub details: serde_json::Value,
}

fn lo_point(cfg: &VerifyConfig, point: &GridPoint, replications: usize) -> Result<PointResult> {
    run_replications(
        point,
        0,
        cfg.master_seed,
        replications,
        0,
        FitnessKind::LeadingOnes,
        cfg.backend,
    )
}

fn floor(cfg: &VerifyConfig) -> Result<SuiteVerdict> {
    let s = &cfg.floor;
    let res = lo_point(cfg, &s.point, s.replications)?;
    let report =
        suites::verify_frequency_floor(res.outcomes.iter().map(|o| &o.trace), res.params.n);
    Ok(SuiteVerdict {
        suite: "floor".into(),
        passed: report.violating_runs <= s.max_violating_runs,
        details: json!({
            "params": res.params,
            "report": report,
            "max_violating_runs": s.max_violating_runs,
            "success_count": res.aggregate.success_count,
        }),
    })
}

fn progress(cfg: &VerifyConfig) -> Result<SuiteVerdict> {
    let s = &cfg.progress;
    let res = lo_point(cfg, &s.point, s.replications)?;
    let d = bounds::d_upper(s.point.delta, res.params.lambda, res.params.mu)?.max(0) as usize;
    let report = suites::verify_progress_per_iteration(
        res.outcomes.iter().map(|o| &o.trace),
        res.params.n,
        d,
    );
    Ok(SuiteVerdict {
        suite: "progress".into(),
        passed: report.qualifying_iterations > 0 && report.success_rate >= s.min_success_rate,
        details: json!({
            "params": res.params,
            "report": report,
            "min_success_rate": s.min_success_rate,
        }),
    })
}

fn band(cfg: &VerifyConfig) -> Result<SuiteVerdict> {
    let s = &cfg.band;
    let res = lo_point(cfg, &s.point, s.replications)?;
    let d = bounds::d_lower(s.point.delta, res.params.lambda, res.params.mu)?.max(0) as usize;
    let report =
        suites::verify_selection_band(res.outcomes.iter().map(|o| &o.trace), res.params.n, d);
    Ok(SuiteVerdict {
        suite: "band".into(),
        passed: report.violation_rate <= s.max_violation_rate,
        details: json!({
            "params": res.params,
            "report": report,
            "max_violation_rate": s.max_violation_rate,
        }),
    })
}

fn drift(cfg: &VerifyConfig) -> Result<SuiteVerdict> {
    let s = &cfg.drift;
    let report = suites::verify_neutral_drift(
        s.n,
        s.mu,
        s.lambda,
        s.t_max,
        s.replications,
        cfg.master_seed,
        cfg.backend,
    )?;
    let ceiling_ok = s.max_exit_rate.is_none_or(|m| report.exit_rate <= m);
    Ok(SuiteVerdict {
        suite: "drift".into(),
        passed: report.within_threshold && ceiling_ok,
        details: json!({
            "report": report,
            "max_exit_rate": s.max_exit_rate,
            "note": if report.informative { "" } else { "uninformative regime: bound is 1" },
        }),
    })
}

fn chernoff(cfg: &VerifyConfig) -> Result<SuiteVerdict> {
    let s = &cfg.chernoff;
    let mut reports = Vec::new();
    for &k in &s.ks {
        for &p in &s.ps {
            for &delta in &s.deltas {
                reports.push(suites::verify_chernoff_mc(
                    k,
                    p,
                    delta,
                    s.samples,
                    cfg.master_seed,
                ));
            }
        }
    }
    Ok(SuiteVerdict {
        suite: "chernoff".into(),
        passed: reports.iter().all(|r| r.passed),
        details: json!({ "cells": reports }),
    })
}

/// One grid point of the bracketing check: median `T` against the
/// non-trivial lower bound, allowing one iteration (`λ`) of slack.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BracketRow {
    pub n: usize,
    pub mu: usize,
    pub lambda: usize,
    pub median_evaluations: Option<f64>,
    pub lower_bound_evaluations: u64,
    pub lower_bound_trivial: bool,
    pub upper_bound_evaluations: u64,
    pub ok: bool,
}

pub fn bracket(results: &[PointResult]) -> Vec<BracketRow> {
    results
        .iter()
        .map(|r| {
            let a = &r.aggregate;
            let median = a.evaluations.as_ref().map(|q| q.median);
            let floor = a.lower_bound_evaluations as f64 - a.lambda as f64;
            let ok = a.lower_bound_trivial || median.is_some_and(|t| t >= floor);
            BracketRow {
                n: a.n,
                mu: a.mu,
                lambda: a.lambda,
                median_evaluations: median,
                lower_bound_evaluations: a.lower_bound_evaluations,
                lower_bound_trivial: a.lower_bound_trivial,
                upper_bound_evaluations: a.upper_bound_evaluations,
                ok,
            }
        })
        .collect()
}

fn scaling(cfg: &VerifyConfig) -> Result<SuiteVerdict> {
    let s = &cfg.scaling;
    let experiment = s.experiment(cfg.master_seed, cfg.backend);
    let results = run_sweep(&experiment)?;
    let ratios = s.ns.iter().flat_map(|_| s.ratios.iter().copied());
    let points: Vec<ScalingPoint> = ratios
        .zip(&results)
        .filter_map(|(ratio, r)| ScalingPoint::from_result(ratio, r))
        .collect();
    let all_succeeded = points.len() == results.len();
    let report = scaling_fit(&points)?;
    let brackets = bracket(&results);
    let passed = all_succeeded
        && report.normalized_spread <= s.max_normalized_spread
        && report.monotone_in_ratio
        && report.linear_spread <= s.max_linear_spread
        && brackets.iter().all(|b| b.ok);
    let success: Vec<usize> = results.iter().map(|r| r.aggregate.success_count).collect();
    Ok(SuiteVerdict {
        suite: "scaling".into(),
        passed,
        details: json!({
            "report": report,
            "bracketing": brackets,
            "success_counts": success,
            "max_normalized_spread": s.max_normalized_spread,
            "max_linear_spread": s.max_linear_spread,
        }),
    })
}

/// Runs one suite, or every suite for [`Suite::All`].
pub fn run_suite(suite: Suite, cfg: &VerifyConfig) -> Result<Vec<SuiteVerdict>> {
    let one = |s: Suite| match s {
        Suite::Floor => floor(cfg),
        Suite::Progress => progress(cfg),
        Suite::Band => band(cfg),
        Suite::Drift => drift(cfg),
        Suite::Chernoff => chernoff(cfg),
        Suite::Scaling => scaling(cfg),
        Suite::All => unreachable!(),
    };
    match suite {
        Suite::All => Suite::EACH.iter().map(|&s| one(s)).collect(),
        s => Ok(vec![one(s)?]),
    }
}
