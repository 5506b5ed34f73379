//! Sweeps, seeded replications, aggregation and the verification suites.

pub mod config;
pub mod replicate;
pub mod scaling;
pub mod suites;
pub mod verify;

pub use config::{ExperimentConfig, GridPoint, LambdaRule, MuRule, VerifyConfig};
pub use replicate::{
    run_replications, run_sweep, with_workers, AggregateResult, PointResult, Quantiles,
};
pub use scaling::{scaling_fit, ScalingPoint, ScalingReport};
pub use verify::{run_suite, Suite, SuiteVerdict};
