//! Trace detectors and Monte-Carlo checks for the structural predictions of
//! the runtime analysis: the 1/4 frequency floor, per-iteration progress,
//! the selection band above the critical position, neutral drift, and the
//! Chernoff tails.
//!
//! Detectors only read [`RunTrace`]s, so they can be exercised on synthetic
//! traces with planted violations.

use rand::RngCore;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bounds::{chernoff_lower_tail, chernoff_upper_tail, drift_band_exit_bound};
use crate::engine::{Backend, Umda};
use crate::error::Result;
use crate::fitness::FitnessKind;
use crate::instrumentation::{IterationRecord, RunTrace};
use crate::model::{keyed_rng, FrequencyVector, StreamDomain, UmdaParams};

/// Monte-Carlo slack `3σ + 5/R` around a probability `bound` estimated from
/// `samples` trials.
pub fn mc_slack(bound: f64, samples: u64) -> f64 {
    let r = samples as f64;
    3.0 * (bound * (1.0 - bound) / r).sqrt() + 5.0 / r
}

/// Whether any frequency fell below 1/4 within the first `2n` iterations.
pub fn floor_violated(trace: &RunTrace, n: usize) -> bool {
    let window = 2 * n as u64;
    trace
        .records
        .iter()
        .take_while(|r| r.iteration < window)
        .any(|r| r.min_frequency < 0.25)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FloorReport {
    pub runs: usize,
    pub violating_runs: usize,
    pub rate: f64,
    /// Failure budget `2/n` of the no-drop guarantee.
    pub theory_budget: f64,
}

pub fn verify_frequency_floor<'a>(
    traces: impl IntoIterator<Item = &'a RunTrace>,
    n: usize,
) -> FloorReport {
    let (runs, violating_runs) = traces.into_iter().fold((0, 0), |(runs, bad), t| {
        (runs + 1, bad + floor_violated(t, n) as usize)
    });
    FloorReport {
        runs,
        violating_runs,
        rate: ratio(violating_runs, runs),
        theory_budget: 2.0 / n as f64,
    }
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// `(qualifying, successes)` over consecutive record pairs. An iteration
/// qualifies when it has a critical position `i` and no frequency below 1/4;
/// it succeeds when the next model has every position up to `min(n, i + d)`
/// at the upper border.
pub fn progress_counts(trace: &RunTrace, n: usize, d: usize) -> (usize, usize) {
    let mut qualifying = 0;
    let mut successes = 0;
    for pair in trace.records.windows(2) {
        let (now, next) = (&pair[0], &pair[1]);
        let Some(i) = now.critical_position else {
            continue;
        };
        if now.min_frequency < 0.25 {
            continue;
        }
        qualifying += 1;
        let target = n.min(i + d);
        if next.critical_position.is_none_or(|c| c > target) {
            successes += 1;
        }
    }
    (qualifying, successes)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProgressReport {
    pub d: usize,
    pub qualifying_iterations: usize,
    pub successes: usize,
    pub success_rate: f64,
    /// Per-iteration success probability `1 − n⁻²` claimed under the
    /// the constants of the analysis.
    pub theory_claim: f64,
}

pub fn verify_progress_per_iteration<'a>(
    traces: impl IntoIterator<Item = &'a RunTrace>,
    n: usize,
    d: usize,
) -> ProgressReport {
    let (q, s) = traces
        .into_iter()
        .map(|t| progress_counts(t, n, d))
        .fold((0, 0), |(a, b), (q, s)| (a + q, b + s));
    ProgressReport {
        d,
        qualifying_iterations: q,
        successes: s,
        success_rate: ratio(s, q),
        theory_claim: 1.0 - (n as f64).powi(-2),
    }
}

fn band_qualifies(r: &IterationRecord) -> Option<(usize, usize)> {
    let i = r.critical_position?;
    let m = r.max_selection_relevant?;
    r.max_frequency_beyond_critical
        .is_none_or(|v| v <= 0.75)
        .then_some((i, m))
}

/// `(qualifying, violations)`: iterations with a critical position `i` and
/// every later frequency at most 3/4, and among them those whose maximum
/// selection-relevant position exceeds `min(n, i + d + 1)`.
pub fn band_counts(trace: &RunTrace, n: usize, d: usize) -> (usize, usize) {
    trace
        .records
        .iter()
        .filter_map(band_qualifies)
        .fold((0, 0), |(q, v), (i, m)| {
            (q + 1, v + (m > n.min(i + d + 1)) as usize)
        })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BandReport {
    pub d: usize,
    pub qualifying_iterations: usize,
    pub violations: usize,
    pub violation_rate: f64,
    /// Per-iteration overshoot probability `n⁻²` under the constants of the analysis.
    pub theory_budget: f64,
}

pub fn verify_selection_band<'a>(
    traces: impl IntoIterator<Item = &'a RunTrace>,
    n: usize,
    d: usize,
) -> BandReport {
    let (q, v) = traces
        .into_iter()
        .map(|t| band_counts(t, n, d))
        .fold((0, 0), |(a, b), (q, v)| (a + q, b + v));
    BandReport {
        d,
        qualifying_iterations: q,
        violations: v,
        violation_rate: ratio(v, q),
        theory_budget: (n as f64).powi(-2),
    }
}

/// Whether the count of upper-border frequencies never decreases from its
/// first positive value to the end of the trace.
pub fn upper_border_monotone(trace: &RunTrace) -> bool {
    trace
        .records
        .iter()
        .map(|r| r.count_at_upper_border)
        .skip_while(|&c| c == 0)
        .collect::<Vec<_>>()
        .windows(2)
        .all(|w| w[1] >= w[0])
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DriftReport {
    pub n: usize,
    pub mu: usize,
    pub lambda: usize,
    pub t_max: u64,
    pub runs: usize,
    pub exits: usize,
    pub exit_rate: f64,
    pub bound: f64,
    pub threshold: f64,
    /// False when the bound is capped at 1 and the check says nothing.
    pub informative: bool,
    pub within_threshold: bool,
}

/// Runs `replications` UMDA runs on LeadingOnes with a neutral last bit for
/// exactly `t_max` iterations and counts runs in which that bit's frequency
/// leaves `(1/4, 3/4)` at any of `p^(0), …, p^(t_max)`.
pub fn verify_neutral_drift(
    n: usize,
    mu: usize,
    lambda: usize,
    t_max: u64,
    replications: usize,
    master_seed: u64,
    backend: Backend,
) -> Result<DriftReport> {
    let params = UmdaParams {
        n,
        mu,
        lambda,
        max_iterations: t_max,
        master_seed,
    };
    let fitness = FitnessKind::NeutralSuffixLeadingOnes { k: 1 };
    let base = Umda::new(params, fitness)?
        .backend(backend)
        .stop_at_optimum(false);
    let outside = |v: f64| v <= 0.25 || v >= 0.75;
    let exits = (0..replications as u64)
        .into_par_iter()
        .map(|r| {
            let mut left = false;
            let mut watch = |_: &IterationRecord, p: &FrequencyVector| {
                left |= outside(p.get(n - 1));
            };
            let outcome = base.clone().run_index(r).run_observed(&mut [&mut watch])?;
            Ok(left || outside(outcome.final_frequencies.get(n - 1)))
        })
        .collect::<Result<Vec<bool>>>()?
        .into_iter()
        .filter(|&e| e)
        .count();
    let bound = drift_band_exit_bound(0.25, mu, t_max);
    let threshold = bound + mc_slack(bound, replications as u64);
    let exit_rate = ratio(exits, replications);
    Ok(DriftReport {
        n,
        mu,
        lambda,
        t_max,
        runs: replications,
        exits,
        exit_rate,
        bound,
        threshold,
        informative: bound < 1.0,
        within_threshold: exit_rate <= threshold,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChernoffReport {
    pub k: u64,
    pub p: f64,
    pub delta: f64,
    pub samples: u64,
    pub expectation: f64,
    pub lower_empirical: f64,
    pub lower_bound: f64,
    pub lower_limit: f64,
    pub upper_empirical: f64,
    pub upper_bound: f64,
    pub upper_limit: f64,
    pub passed: bool,
}

const MC_CHUNK: u64 = 4096;

/// Draws `samples` sums of `k` Bernoulli(`p`) variables and compares both
/// empirical tails with the Chernoff bounds plus [`mc_slack`]. Boundary
/// comparisons include a 1e-9 tolerance so `X = (1 ± δ)kp` counts as a tail
/// event.
pub fn verify_chernoff_mc(
    k: u64,
    p: f64,
    delta: f64,
    samples: u64,
    master_seed: u64,
) -> ChernoffReport {
    let expectation = k as f64 * p;
    let lower_cut = (1.0 - delta) * expectation + 1e-9;
    let upper_cut = (1.0 + delta) * expectation - 1e-9;
    // each u64 draw feeds two Bernoulli trials through its 32-bit halves
    let threshold = (p * 4_294_967_296.0) as u64;
    let key = [master_seed, k, p.to_bits(), delta.to_bits()];
    let chunks = samples.div_ceil(MC_CHUNK);
    let (low, high) = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = keyed_rng(StreamDomain::MonteCarlo, &key, c);
            let count = MC_CHUNK.min(samples - c * MC_CHUNK);
            let (mut low, mut high) = (0u64, 0u64);
            for _ in 0..count {
                let mut x = 0u64;
                let mut left = k;
                while left >= 2 {
                    let w = rng.next_u64();
                    x += ((w >> 32) < threshold) as u64 + ((w & 0xFFFF_FFFF) < threshold) as u64;
                    left -= 2;
                }
                if left == 1 {
                    x += ((rng.next_u64() >> 32) < threshold) as u64;
                }
                let xf = x as f64;
                low += (xf <= lower_cut) as u64;
                high += (xf >= upper_cut) as u64;
            }
            (low, high)
        })
        .reduce(|| (0, 0), |a, b| (a.0 + b.0, a.1 + b.1));
    let lower_bound = chernoff_lower_tail(expectation, delta);
    let upper_bound = chernoff_upper_tail(expectation, delta);
    let lower_limit = lower_bound + mc_slack(lower_bound, samples);
    let upper_limit = upper_bound + mc_slack(upper_bound, samples);
    let lower_empirical = low as f64 / samples as f64;
    let upper_empirical = high as f64 / samples as f64;
    ChernoffReport {
        k,
        p,
        delta,
        samples,
        expectation,
        lower_empirical,
        lower_bound,
        lower_limit,
        upper_empirical,
        upper_bound,
        upper_limit,
        passed: lower_empirical <= lower_limit && upper_empirical <= upper_limit,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn record(
        t: u64,
        critical: Option<usize>,
        max_sel: Option<usize>,
        min_freq: f64,
    ) -> IterationRecord {
        IterationRecord {
            iteration: t,
            critical_position: critical,
            max_selection_relevant: max_sel,
            min_frequency: min_freq,
            max_frequency_beyond_critical: Some(0.5),
            count_at_upper_border: critical.map_or(0, |c| c - 1),
            count_below_quarter: 0,
            count_in_middle_band: 0,
            best_fitness: 0,
            optimum_sampled: false,
        }
    }

    fn trace(records: Vec<IterationRecord>) -> RunTrace {
        RunTrace { records }
    }

    #[test]
    fn floor_detector() {
        let clean = trace((0..10).map(|t| record(t, Some(1), Some(1), 0.5)).collect());
        assert!(!floor_violated(&clean, 10));
        let mut planted = clean.clone();
        planted.records[4].min_frequency = 0.2;
        assert!(floor_violated(&planted, 10));
        // outside the 2n window
        let mut late = trace((0..30).map(|t| record(t, Some(1), Some(1), 0.5)).collect());
        late.records[25].min_frequency = 0.2;
        assert!(!floor_violated(&late, 10));
        let report = verify_frequency_floor([&clean, &planted], 10);
        assert_eq!((report.runs, report.violating_runs), (2, 1));
        assert!((report.theory_budget - 0.2).abs() < 1e-12);
    }

    #[test]
    fn progress_detector() {
        // d = 2: critical 1 -> 4 succeeds, 4 -> 6 fails, 6 -> none succeeds
        let t = trace(vec![
            record(0, Some(1), Some(4), 0.5),
            record(1, Some(4), Some(6), 0.5),
            record(2, Some(6), Some(10), 0.5),
            record(3, None, Some(10), 0.5),
        ]);
        assert_eq!(progress_counts(&t, 10, 2), (3, 2));
        // a low frequency disqualifies the iteration
        let mut low = t.clone();
        low.records[1].min_frequency = 0.1;
        assert_eq!(progress_counts(&low, 10, 2), (2, 2));
        let report = verify_progress_per_iteration([&t], 10, 2);
        assert!((report.success_rate - 2.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn band_detector() {
        let t = trace(vec![
            record(0, Some(3), Some(3), 0.5),
            record(1, Some(3), Some(5), 0.5),
            record(2, Some(3), Some(6), 0.5),
        ]);
        assert_eq!(band_counts(&t, 10, 1), (3, 1));
        let mut high = t.clone();
        high.records[2].max_frequency_beyond_critical = Some(0.8);
        assert_eq!(band_counts(&high, 10, 1), (2, 0));
        // cap at n
        let capped = trace(vec![record(0, Some(9), Some(10), 0.5)]);
        assert_eq!(band_counts(&capped, 10, 1), (1, 0));
    }

    #[test]
    fn monotone_upper_border() {
        let mut t = trace((0..5).map(|i| record(i, Some(1), Some(1), 0.5)).collect());
        for (i, c) in [0, 0, 2, 3, 3].into_iter().enumerate() {
            t.records[i].count_at_upper_border = c;
        }
        assert!(upper_border_monotone(&t));
        t.records[4].count_at_upper_border = 1;
        assert!(!upper_border_monotone(&t));
    }

    #[test]
    fn chernoff_degenerate_cases() {
        let r = verify_chernoff_mc(20, 0.5, 0.0, 10_000, 1);
        assert_eq!(r.lower_bound, 1.0);
        assert!(r.passed);
        // δ = 1: lower tail is Pr[X = 0] = (1 - p)^k
        let r = verify_chernoff_mc(10, 0.1, 1.0, 200_000, 2);
        let exact = 0.9f64.powi(10);
        assert!(exact <= (-0.5f64).exp());
        assert!((r.lower_empirical - exact).abs() < 5.0 * (exact * (1.0 - exact) / 2e5).sqrt());
        assert!(r.passed);
    }
}
