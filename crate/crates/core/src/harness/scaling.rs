//! Scaling diagnostics: normalized iteration counts `I·(d+1)/n` across a
//! sweep over `n` and `λ/μ`.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Result, UmdaError};
use crate::harness::replicate::PointResult;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScalingPoint {
    pub n: usize,
    pub mu: usize,
    pub lambda: usize,
    /// Requested `λ/μ`, used to group points across `n`.
    pub ratio: f64,
    pub d_upper: i64,
    pub median_iterations: f64,
    pub median_evaluations: Option<f64>,
}

impl ScalingPoint {
    /// `None` if no run of the grid point found the optimum.
    pub fn from_result(ratio: f64, r: &PointResult) -> Option<Self> {
        let a = &r.aggregate;
        Some(Self {
            n: a.n,
            mu: a.mu,
            lambda: a.lambda,
            ratio,
            d_upper: a.d_upper,
            median_iterations: a.iterations.as_ref()?.median,
            median_evaluations: a.evaluations.as_ref().map(|q| q.median),
        })
    }

    pub fn normalized(&self) -> f64 {
        self.median_iterations * (self.d_upper.max(0) + 1) as f64 / self.n as f64
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScalingReport {
    pub points: Vec<ScalingPoint>,
    pub normalized: Vec<f64>,
    /// max/min of the normalized values.
    pub normalized_spread: f64,
    /// Whether median `I` is non-increasing in `λ/μ` for every `n`.
    pub monotone_in_ratio: bool,
    /// Per `n`, the `λ/μ` values at which median `I` increased.
    pub monotonicity_breaks: Vec<(usize, f64)>,
    /// Largest max/min of `I/n` over the `n` axis at a fixed `λ/μ`.
    pub linear_spread: f64,
}

fn distinct<T: PartialOrd + Copy>(values: impl Iterator<Item = T>) -> usize {
    let mut v: Vec<T> = values.collect();
    v.sort_by(|a, b| a.partial_cmp(b).expect("finite"));
    v.dedup_by(|a, b| a == b);
    v.len()
}

fn spread(values: impl Iterator<Item = f64>) -> f64 {
    let (lo, hi) = values.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| {
        (lo.min(v), hi.max(v))
    });
    if lo > 0.0 {
        hi / lo
    } else {
        f64::INFINITY
    }
}

/// Fits the sweep. Requires at least 3 distinct `n` and 3 distinct ratios.
pub fn scaling_fit(points: &[ScalingPoint]) -> Result<ScalingReport> {
    let ns = distinct(points.iter().map(|p| p.n));
    let ratios = distinct(points.iter().map(|p| p.ratio));
    if ns < 3 || ratios < 3 {
        return Err(UmdaError::Config(format!(
            "scaling fit needs at least 3 values of n and of lambda/mu, got {ns} and {ratios}"
        )));
    }
    let normalized: Vec<f64> = points.iter().map(ScalingPoint::normalized).collect();

    let mut by_n: BTreeMap<usize, Vec<&ScalingPoint>> = BTreeMap::new();
    for p in points {
        by_n.entry(p.n).or_default().push(p);
    }
    let mut breaks = Vec::new();
    for (n, mut row) in by_n {
        row.sort_by(|a, b| a.ratio.total_cmp(&b.ratio));
        for w in row.windows(2) {
            if w[1].median_iterations > w[0].median_iterations {
                breaks.push((n, w[1].ratio));
            }
        }
    }

    let mut by_ratio: BTreeMap<u64, Vec<f64>> = BTreeMap::new();
    for p in points {
        by_ratio
            .entry(p.ratio.to_bits())
            .or_default()
            .push(p.median_iterations / p.n as f64);
    }
    let linear_spread = by_ratio
        .values()
        .map(|v| spread(v.iter().copied()))
        .fold(1.0, f64::max);

    Ok(ScalingReport {
        points: points.to_vec(),
        normalized_spread: spread(normalized.iter().copied()),
        normalized,
        monotone_in_ratio: breaks.is_empty(),
        monotonicity_breaks: breaks,
        linear_spread,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn point(n: usize, ratio: f64, d: i64, iters: f64) -> ScalingPoint {
        ScalingPoint {
            n,
            mu: 1,
            lambda: 1,
            ratio,
            d_upper: d,
            median_iterations: iters,
            median_evaluations: None,
        }
    }

    fn synthetic(c: f64) -> Vec<ScalingPoint> {
        let mut v = Vec::new();
        for n in [64, 128, 256] {
            for (ratio, d) in [(22.0, 0), (348.0, 2), (5568.0, 4)] {
                v.push(point(n, ratio, d, c * n as f64 / (d + 1) as f64));
            }
        }
        v
    }

    #[test]
    fn exact_scaling_has_unit_spread() {
        let r = scaling_fit(&synthetic(0.4)).unwrap();
        assert!((r.normalized_spread - 1.0).abs() < 1e-12);
        assert!(r.monotone_in_ratio);
        assert!((r.linear_spread - 1.0).abs() < 1e-12);
    }

    #[test]
    fn too_few_points_refused() {
        let mut pts = synthetic(1.0);
        pts.retain(|p| p.n != 256);
        assert!(scaling_fit(&pts).is_err());
        let mut pts = synthetic(1.0);
        pts.retain(|p| p.ratio != 22.0);
        assert!(scaling_fit(&pts).is_err());
    }

    #[test]
    fn increase_in_ratio_flagged() {
        let mut pts = synthetic(1.0);
        pts[2].median_iterations = 1000.0;
        let r = scaling_fit(&pts).unwrap();
        assert!(!r.monotone_in_ratio);
        assert_eq!(r.monotonicity_breaks, vec![(64, 5568.0)]);
    }
}
