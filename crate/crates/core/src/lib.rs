//! Simulator for the univariate marginal distribution algorithm (UMDA) on
//! LeadingOnes, with runtime bound calculators and an experiment harness.

pub mod aggregated;
pub mod bounds;
pub mod cli;
pub mod engine;
pub mod error;
pub mod fitness;
pub mod harness;
pub mod instrumentation;
pub mod model;

pub use bounds::BoundReport;
pub use engine::{Backend, RunOutcome, Termination, Umda};
pub use error::{Result, UmdaError};
pub use fitness::FitnessKind;
pub use instrumentation::{IterationObserver, IterationRecord, RunTrace};
pub use model::{BitString, FrequencyVector, UmdaParams};
