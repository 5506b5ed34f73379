//! Declarative TOML configuration for sweeps and verification suites.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::bounds::DEFAULT_DELTA;
use crate::engine::Backend;
use crate::error::{Result, UmdaError};
use crate::fitness::FitnessKind;
use crate::model::UmdaParams;

/// Parent population size as a function of `n`.
///
/// In TOML: `mu = { n_ln_n = 8.0 }` for `⌈c·n·ln n⌉`, or `mu = { fixed = 6400 }`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MuRule {
    NLnN(f64),
    Fixed(usize),
}

impl MuRule {
    pub fn resolve(&self, n: usize) -> usize {
        match *self {
            MuRule::NLnN(c) => (c * n as f64 * (n as f64).ln()).ceil().max(1.0) as usize,
            MuRule::Fixed(mu) => mu,
        }
    }
}

/// Offspring population size: `lambda = { ratio = 348.0 }` for `⌈c·μ⌉`, or
/// `lambda = { fixed = 12800 }`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LambdaRule {
    Ratio(f64),
    Fixed(usize),
}

impl LambdaRule {
    pub fn resolve(&self, mu: usize) -> usize {
        match *self {
            LambdaRule::Ratio(c) => {
                let x = c * mu as f64;
                (x - 1e-9 * x.abs().max(1.0)).ceil() as usize
            }
            LambdaRule::Fixed(lambda) => lambda,
        }
    }
}

/// Iteration cap: `{ per_n = 10 }` for `c·n`, or `{ fixed = 100 }`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IterationRule {
    PerN(u64),
    Fixed(u64),
}

impl Default for IterationRule {
    fn default() -> Self {
        IterationRule::PerN(10)
    }
}

impl IterationRule {
    pub fn resolve(&self, n: usize) -> u64 {
        match *self {
            IterationRule::PerN(c) => c * n as u64,
            IterationRule::Fixed(t) => t,
        }
    }
}

fn default_delta() -> f64 {
    DEFAULT_DELTA
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridPoint {
    pub n: usize,
    pub mu: MuRule,
    pub lambda: LambdaRule,
    #[serde(default = "default_delta")]
    pub delta: f64,
    #[serde(default)]
    pub max_iterations: IterationRule,
}

impl GridPoint {
    pub fn new(n: usize, mu: MuRule, lambda: LambdaRule) -> Self {
        Self {
            n,
            mu,
            lambda,
            delta: DEFAULT_DELTA,
            max_iterations: IterationRule::default(),
        }
    }

    pub fn params(&self, master_seed: u64) -> Result<UmdaParams> {
        let mu = self.mu.resolve(self.n);
        let lambda = self.lambda.resolve(mu);
        let params = UmdaParams {
            n: self.n,
            mu,
            lambda,
            max_iterations: self.max_iterations.resolve(self.n),
            master_seed,
        };
        params.validate()?;
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(UmdaError::InvalidDelta(self.delta));
        }
        Ok(params)
    }
}

fn default_fitness() -> FitnessKind {
    FitnessKind::LeadingOnes
}

/// A sweep: every grid point is replicated `replications` times.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub master_seed: u64,
    pub replications: usize,
    #[serde(default)]
    pub backend: Backend,
    #[serde(default = "default_fitness")]
    pub fitness: FitnessKind,
    pub grid: Vec<GridPoint>,
}

/// Selection ratios λ/μ realizing `d_upper` = 0, 2, 4 at δ = 1/2.
pub const DEFAULT_SCALING_RATIOS: [f64; 3] = [22.0, 348.0, 5568.0];
pub const DEFAULT_SCALING_NS: [usize; 3] = [64, 128, 256];
pub const DEFAULT_MU_CONSTANT: f64 = 8.0;
pub const DEFAULT_MASTER_SEED: u64 = 20_201;

impl Default for ExperimentConfig {
    /// The scaling sweep: `n ∈ {64, 128, 256}` × `λ/μ ∈ {22, 348, 5568}` at
    /// `μ = ⌈8 n ln n⌉`, 20 replications.
    fn default() -> Self {
        let grid = DEFAULT_SCALING_NS
            .iter()
            .flat_map(|&n| {
                DEFAULT_SCALING_RATIOS.iter().map(move |&r| {
                    GridPoint::new(n, MuRule::NLnN(DEFAULT_MU_CONSTANT), LambdaRule::Ratio(r))
                })
            })
            .collect();
        Self {
            master_seed: DEFAULT_MASTER_SEED,
            replications: 20,
            backend: Backend::Auto,
            fitness: FitnessKind::LeadingOnes,
            grid,
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let config: Self = toml::from_str(text).map_err(|e| UmdaError::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml_str(&std::fs::read_to_string(path)?)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| UmdaError::Config(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        if self.replications < 1 {
            return Err(UmdaError::Config("replications must be at least 1".into()));
        }
        if self.grid.is_empty() {
            return Err(UmdaError::Config("grid is empty".into()));
        }
        for point in &self.grid {
            point.params(self.master_seed)?;
            self.fitness.validate(point.n)?;
        }
        self.backend.resolve(self.fitness, self.grid[0].n)?;
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FloorSuiteConfig {
    pub point: GridPoint,
    pub replications: usize,
    pub max_violating_runs: usize,
}

impl Default for FloorSuiteConfig {
    fn default() -> Self {
        Self {
            point: GridPoint::new(100, MuRule::NLnN(8.0), LambdaRule::Ratio(8.0)),
            replications: 20,
            max_violating_runs: 1,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProgressSuiteConfig {
    pub point: GridPoint,
    pub replications: usize,
    pub min_success_rate: f64,
}

impl Default for ProgressSuiteConfig {
    fn default() -> Self {
        Self {
            point: GridPoint::new(64, MuRule::NLnN(8.0), LambdaRule::Ratio(348.0)),
            replications: 20,
            min_success_rate: 0.9,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BandSuiteConfig {
    pub point: GridPoint,
    pub replications: usize,
    pub max_violation_rate: f64,
}

impl Default for BandSuiteConfig {
    fn default() -> Self {
        Self {
            point: GridPoint::new(64, MuRule::NLnN(8.0), LambdaRule::Ratio(1.0)),
            replications: 20,
            max_violation_rate: 0.05,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DriftSuiteConfig {
    pub n: usize,
    pub mu: usize,
    pub lambda: usize,
    pub t_max: u64,
    pub replications: usize,
    /// Optional fixed ceiling on the exit rate, checked on top of the
    /// bound-plus-slack threshold.
    #[serde(default)]
    pub max_exit_rate: Option<f64>,
}

impl Default for DriftSuiteConfig {
    fn default() -> Self {
        Self {
            n: 32,
            mu: 6400,
            lambda: 12_800,
            t_max: 100,
            replications: 400,
            max_exit_rate: Some(0.35),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChernoffSuiteConfig {
    pub ks: Vec<u64>,
    pub ps: Vec<f64>,
    pub deltas: Vec<f64>,
    pub samples: u64,
}

impl Default for ChernoffSuiteConfig {
    fn default() -> Self {
        Self {
            ks: vec![50, 200, 1000],
            ps: vec![0.1, 0.5, 0.9],
            deltas: vec![0.2, 0.5, 0.9],
            samples: 100_000,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScalingSuiteConfig {
    pub ns: Vec<usize>,
    pub ratios: Vec<f64>,
    pub mu_constant: f64,
    pub replications: usize,
    #[serde(default = "default_delta")]
    pub delta: f64,
    pub max_normalized_spread: f64,
    pub max_linear_spread: f64,
}

impl Default for ScalingSuiteConfig {
    fn default() -> Self {
        Self {
            ns: DEFAULT_SCALING_NS.to_vec(),
            ratios: DEFAULT_SCALING_RATIOS.to_vec(),
            mu_constant: DEFAULT_MU_CONSTANT,
            replications: 20,
            delta: DEFAULT_DELTA,
            max_normalized_spread: 3.0,
            max_linear_spread: 2.5,
        }
    }
}

impl ScalingSuiteConfig {
    pub fn experiment(&self, master_seed: u64, backend: Backend) -> ExperimentConfig {
        let grid = self
            .ns
            .iter()
            .flat_map(|&n| {
                self.ratios.iter().map(move |&r| GridPoint {
                    delta: self.delta,
                    ..GridPoint::new(n, MuRule::NLnN(self.mu_constant), LambdaRule::Ratio(r))
                })
            })
            .collect();
        ExperimentConfig {
            master_seed,
            replications: self.replications,
            backend,
            fitness: FitnessKind::LeadingOnes,
            grid,
        }
    }
}

/// Parameters and thresholds for every verification suite. Omitted sections
/// take their defaults.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct VerifyConfig {
    pub master_seed: u64,
    pub backend: Backend,
    pub floor: FloorSuiteConfig,
    pub progress: ProgressSuiteConfig,
    pub band: BandSuiteConfig,
    pub drift: DriftSuiteConfig,
    pub chernoff: ChernoffSuiteConfig,
    pub scaling: ScalingSuiteConfig,
}

impl VerifyConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| UmdaError::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml_str(&std::fs::read_to_string(path)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rules_resolve() {
        assert_eq!(MuRule::NLnN(8.0).resolve(64), 2130);
        assert_eq!(MuRule::NLnN(8.0).resolve(100), 3685);
        assert_eq!(MuRule::NLnN(8.0).resolve(256), 11357);
        assert_eq!(LambdaRule::Ratio(348.0).resolve(2130), 348 * 2130);
        assert_eq!(LambdaRule::Ratio(1.0).resolve(2130), 2130);
        assert_eq!(IterationRule::default().resolve(64), 640);
    }

    #[test]
    fn experiment_config_parses() {
        let text = r#"
master_seed = 7
replications = 3

[[grid]]
n = 16
mu = { fixed = 4 }
lambda = { ratio = 4.0 }

[[grid]]
n = 20
mu = { n_ln_n = 1.0 }
lambda = { fixed = 200 }
delta = 0.25
max_iterations = { fixed = 50 }
"#;
        let cfg = ExperimentConfig::from_toml_str(text).unwrap();
        assert_eq!(cfg.grid.len(), 2);
        assert_eq!(cfg.grid[0].params(7).unwrap().lambda, 16);
        assert_eq!(cfg.grid[1].params(7).unwrap().max_iterations, 50);
        let back = ExperimentConfig::from_toml_str(&cfg.to_toml_string().unwrap()).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn experiment_config_rejects_bad_input() {
        assert!(
            ExperimentConfig::from_toml_str("master_seed = 1\nreplications = 0\ngrid = []")
                .is_err()
        );
        let bad_mu = "master_seed = 1\nreplications = 1\n[[grid]]\nn = 8\nmu = { fixed = 9 }\nlambda = { fixed = 4 }\n";
        assert!(ExperimentConfig::from_toml_str(bad_mu).is_err());
        let unknown = "master_seed = 1\nreplications = 1\nbogus = 2\n[[grid]]\nn = 8\nmu = { fixed = 1 }\nlambda = { fixed = 4 }\n";
        assert!(ExperimentConfig::from_toml_str(unknown).is_err());
    }

    #[test]
    fn default_sweep_is_valid() {
        let cfg = ExperimentConfig::default();
        cfg.validate().unwrap();
        assert_eq!(cfg.grid.len(), 9);
    }

    #[test]
    fn verify_config_partial_sections() {
        let cfg = VerifyConfig::from_toml_str(
            "master_seed = 3\n[drift]\nn = 8\nmu = 10\nlambda = 20\nt_max = 5\nreplications = 4\n",
        )
        .unwrap();
        assert_eq!(cfg.drift.mu, 10);
        assert_eq!(cfg.drift.max_exit_rate, None);
        assert_eq!(cfg.chernoff, ChernoffSuiteConfig::default());
        assert!(VerifyConfig::from_toml_str("[nope]\n").is_err());
    }
}
