//! Closed-form runtime bounds for the UMDA on LeadingOnes, the Chernoff and
//! genetic-drift tail bounds they rest on, and regime-validity flags.
//!
//! Regime checks never fail an evaluation: every formula is evaluated for any
//! input and the flags report whether the parameter regime of each bound holds.

use std::f64::consts::E;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Result, UmdaError};

pub const DEFAULT_DELTA: f64 = 0.5;

/// Relative nudge applied before floor/ceil so exact powers are not
/// misrounded by binary64 logarithms.
const ROUNDING_NUDGE: f64 = 1e-9;

fn nudge(x: f64) -> f64 {
    ROUNDING_NUDGE * x.abs().max(1.0)
}

pub(crate) fn floor_nudged(x: f64) -> i64 {
    (x + nudge(x)).floor() as i64
}

pub(crate) fn ceil_nudged(x: f64) -> i64 {
    (x - nudge(x)).ceil() as i64
}

fn check_delta(delta: f64) -> Result<()> {
    if delta > 0.0 && delta < 1.0 {
        Ok(())
    } else {
        Err(UmdaError::InvalidDelta(delta))
    }
}

fn ln_n(n: usize) -> f64 {
    (n as f64).ln()
}

/// `(1 - δ) / (4e)`.
pub fn zeta_upper(delta: f64) -> f64 {
    (1.0 - delta) / (4.0 * E)
}

/// `(3/4)(1 + δ)`.
pub fn zeta_lower(delta: f64) -> f64 {
    0.75 * (1.0 + delta)
}

/// `⌊log₄(ζ·ratio)⌋` with ζ the upper-bound constant and `ratio = λ/μ`.
/// Negative when `ratio < 1/ζ`.
pub fn d_upper_for_ratio(delta: f64, ratio: f64) -> Result<i64> {
    check_delta(delta)?;
    Ok(floor_nudged((zeta_upper(delta) * ratio).ln() / 4f64.ln()))
}

pub fn d_upper(delta: f64, lambda: usize, mu: usize) -> Result<i64> {
    d_upper_for_ratio(delta, lambda as f64 / mu as f64)
}

/// `⌈log_{4/3}(ζ·ratio)⌉` with ζ the lower-bound constant.
pub fn d_lower_for_ratio(delta: f64, ratio: f64) -> Result<i64> {
    check_delta(delta)?;
    Ok(ceil_nudged(
        (zeta_lower(delta) * ratio).ln() / (4f64 / 3.0).ln(),
    ))
}

pub fn d_lower(delta: f64, lambda: usize, mu: usize) -> Result<i64> {
    d_lower_for_ratio(delta, lambda as f64 / mu as f64)
}

/// `⌈log_{4/3}(n²λ)⌉ + 1`.
pub fn xi(n: usize, lambda: usize) -> u64 {
    let arg = (n as f64).powi(2) * lambda as f64;
    (ceil_nudged(arg.ln() / (4f64 / 3.0).ln()) + 1) as u64
}

/// `⌈n/(n−1) · e · ln n⌉`: iterations to sample the optimum once every
/// frequency is at the upper border.
pub fn final_phase_iterations(n: usize) -> u64 {
    let nf = n as f64;
    ceil_nudged(nf / (nf - 1.0) * E * nf.ln()) as u64
}

/// `⌈n/(d+1)⌉ + ⌈n/(n−1) · e · ln n⌉`. A negative `d` (regime violated) is
/// evaluated as 0.
pub fn upper_bound_iterations(n: usize, d: i64) -> u64 {
    let step = d.max(0) as u64 + 1;
    (n as u64).div_ceil(step) + final_phase_iterations(n)
}

pub fn upper_bound_evaluations(n: usize, lambda: usize, mu: usize, delta: f64) -> Result<u64> {
    let d = d_upper(delta, lambda, mu)?;
    Ok(lambda as u64 * upper_bound_iterations(n, d))
}

/// `⌊(n − ξ)/(d+1)⌋`, or `None` when `n − ξ < 1` and the bound is trivial.
pub fn lower_bound_iterations(n: usize, d: i64, xi: u64) -> Option<u64> {
    let slack = n as i64 - xi as i64;
    if slack < 1 {
        return None;
    }
    Some(slack as u64 / (d.max(0) as u64 + 1))
}

/// `λ·⌊(n − ξ)/(d+1)⌋`; 0 when the bound is trivial.
pub fn lower_bound_evaluations(n: usize, lambda: usize, mu: usize, delta: f64) -> Result<u64> {
    let d = d_lower(delta, lambda, mu)?;
    Ok(lower_bound_iterations(n, d, xi(n, lambda)).map_or(0, |it| it * lambda as u64))
}

/// `Pr[X ≤ (1−δ)E[X]] ≤ e^{−δ²E[X]/2}`.
pub fn chernoff_lower_tail(expectation: f64, delta: f64) -> f64 {
    (-delta * delta * expectation / 2.0).exp().min(1.0)
}

/// `Pr[X ≥ (1+δ)E[X]] ≤ e^{−δ²E[X]/3}`.
pub fn chernoff_upper_tail(expectation: f64, delta: f64) -> f64 {
    (-delta * delta * expectation / 3.0).exp().min(1.0)
}

/// Bound on the probability that a neutral (or 1-preferring) frequency
/// leaves `(1/2 − d, 1/2 + d)` within `t` iterations: `min(1, 2e^{−d²μ/(2t)})`.
pub fn drift_band_exit_bound(d: f64, mu: usize, t: u64) -> f64 {
    (2.0 * (-d * d * mu as f64 / (2.0 * t as f64)).exp()).min(1.0)
}

/// `λ(n + n/e^{μ/n} · (n/λ + ln min{μ, n}))`. Only the order of magnitude is
/// meaningful: the hidden constants are unknown.
pub fn conjectured_bound(n: usize, mu: usize, lambda: usize) -> f64 {
    let (nf, muf, lf) = (n as f64, mu as f64, lambda as f64);
    lf * (nf + nf / (muf / nf).exp() * (nf / lf + (mu.min(n) as f64).ln()))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConjecturedBound {
    pub value: f64,
    pub note: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub n: usize,
    pub mu: usize,
    pub lambda: usize,
    pub delta: f64,
    pub zeta_upper: f64,
    pub zeta_lower: f64,
    pub d_upper: i64,
    pub d_lower: i64,
    pub xi: u64,
    pub upper_bound_iterations: u64,
    pub upper_bound_evaluations: u64,
    pub lower_bound_iterations: u64,
    pub lower_bound_evaluations: u64,
    pub lower_bound_trivial: bool,
    pub regime_upper_ok: bool,
    pub regime_lower_ok: bool,
    pub failure_prob_upper: f64,
    pub failure_prob_lower: f64,
    /// `128 n ln n`.
    pub mu_threshold_upper: f64,
    /// `128 n ⌈ln n⌉`, the variant with a rounded-up logarithm.
    pub mu_threshold_upper_ceil: f64,
    /// `64 n ln n`.
    pub mu_threshold_lower: f64,
    /// `4 (1−δ)/δ² ln n`, the per-iteration progress threshold.
    pub step_mu_threshold_upper: f64,
    /// `6 (1+δ)/δ² ln n`, the per-iteration overshoot threshold.
    pub step_mu_threshold_lower: f64,
    pub conjectured: ConjecturedBound,
}

impl BoundReport {
    pub fn evaluate(n: usize, mu: usize, lambda: usize, delta: f64) -> Result<Self> {
        if n < 2 {
            return Err(UmdaError::InvalidDimension(n));
        }
        if mu < 1 || lambda < 1 {
            return Err(UmdaError::InvalidParams(
                "mu and lambda must be at least 1".into(),
            ));
        }
        check_delta(delta)?;
        let d_up = d_upper(delta, lambda, mu)?;
        let d_low = d_lower(delta, lambda, mu)?;
        let xi = xi(n, lambda);
        let upper_iters = upper_bound_iterations(n, d_up);
        let lower_iters = lower_bound_iterations(n, d_low, xi);
        let (nf, muf, lf) = (n as f64, mu as f64, lambda as f64);
        let mu_threshold_upper = 128.0 * nf * ln_n(n);
        let mu_threshold_lower = 64.0 * nf * ln_n(n);
        let (zu, zl) = (zeta_upper(delta), zeta_lower(delta));
        Ok(Self {
            n,
            mu,
            lambda,
            delta,
            zeta_upper: zu,
            zeta_lower: zl,
            d_upper: d_up,
            d_lower: d_low,
            xi,
            upper_bound_iterations: upper_iters,
            upper_bound_evaluations: upper_iters * lambda as u64,
            lower_bound_iterations: lower_iters.unwrap_or(0),
            lower_bound_evaluations: lower_iters.unwrap_or(0) * lambda as u64,
            lower_bound_trivial: lower_iters.is_none(),
            regime_upper_ok: muf >= mu_threshold_upper && lf * zu >= muf,
            regime_lower_ok: muf >= mu_threshold_lower && lambda >= mu && lf * zl >= muf,
            failure_prob_upper: (5.0 / nf).min(1.0),
            failure_prob_lower: (4.0 / nf).min(1.0),
            mu_threshold_upper,
            mu_threshold_upper_ceil: 128.0 * nf * ln_n(n).ceil(),
            mu_threshold_lower,
            step_mu_threshold_upper: 4.0 * (1.0 - delta) / (delta * delta) * ln_n(n),
            step_mu_threshold_lower: 6.0 * (1.0 + delta) / (delta * delta) * ln_n(n),
            conjectured: ConjecturedBound {
                value: conjectured_bound(n, mu, lambda),
                note: "order of magnitude only; hidden constants unknown".into(),
            },
        })
    }

    /// Aligned two-column text rendering.
    pub fn to_table(&self) -> String {
        let rows: Vec<(&str, String)> = vec![
            ("n", self.n.to_string()),
            ("mu", self.mu.to_string()),
            ("lambda", self.lambda.to_string()),
            ("delta", self.delta.to_string()),
            ("zeta_upper", format!("{:.6}", self.zeta_upper)),
            ("zeta_lower", format!("{:.6}", self.zeta_lower)),
            ("d_upper", self.d_upper.to_string()),
            ("d_lower", self.d_lower.to_string()),
            ("xi", self.xi.to_string()),
            (
                "upper_bound_iterations",
                self.upper_bound_iterations.to_string(),
            ),
            (
                "upper_bound_evaluations",
                self.upper_bound_evaluations.to_string(),
            ),
            (
                "lower_bound_iterations",
                self.lower_bound_iterations.to_string(),
            ),
            (
                "lower_bound_evaluations",
                self.lower_bound_evaluations.to_string(),
            ),
            ("lower_bound_trivial", self.lower_bound_trivial.to_string()),
            ("regime_upper_ok", self.regime_upper_ok.to_string()),
            ("regime_lower_ok", self.regime_lower_ok.to_string()),
            (
                "failure_prob_upper",
                format!("{:.6}", self.failure_prob_upper),
            ),
            (
                "failure_prob_lower",
                format!("{:.6}", self.failure_prob_lower),
            ),
            (
                "mu_threshold_upper",
                format!("{:.1}", self.mu_threshold_upper),
            ),
            (
                "mu_threshold_upper_ceil",
                format!("{:.1}", self.mu_threshold_upper_ceil),
            ),
            (
                "mu_threshold_lower",
                format!("{:.1}", self.mu_threshold_lower),
            ),
            (
                "step_mu_threshold_upper",
                format!("{:.1}", self.step_mu_threshold_upper),
            ),
            (
                "step_mu_threshold_lower",
                format!("{:.1}", self.step_mu_threshold_lower),
            ),
            (
                "conjectured_bound",
                format!("{:.4e} ({})", self.conjectured.value, self.conjectured.note),
            ),
        ];
        let width = rows.iter().map(|(k, _)| k.len()).max().unwrap_or(0);
        let mut out = String::new();
        for (k, v) in rows {
            let _ = writeln!(out, "{k:<width$}  {v}");
        }
        out
    }
}
