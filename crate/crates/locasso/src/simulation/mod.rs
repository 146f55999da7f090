//! Synthetic data and Monte Carlo experiments.

mod compliance;
mod experiment;
mod generator;

pub use compliance::{compliance_report, dimension_regime, rate_regime, Check, ComplianceReport};
pub use experiment::{
    child_seed, fit_rate, run_rate_experiment, run_selection_experiment, CoordinateErrors,
    Experiment, ExperimentSummary, GridSummary, RateFit, ReplicateRecord,
};
pub use generator::{generate, Design, DesignConstants, FunctionFamily, GeneratorSpec, PolyTerm};
