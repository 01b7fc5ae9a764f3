//! Failure-probability certification for modular systems.
//!
//! A system is decomposed into sub-modules whose failure events are
//! conjunctions of binary indicators. Each indicator's failure probability is
//! bounded from observed counts with an empirical Bernstein bound, the bounds
//! of approximately independent indicators are multiplied, and sub-module
//! bounds are combined into a system bound. Alongside the bounds the crate
//! plans sample sizes for end-to-end versus modular validation and checks
//! every bound against an exact simulation oracle.

pub mod bounds;
pub mod cli;
pub mod error;
pub mod log;
pub mod prob;
pub mod report;
pub mod sample_complexity;
pub mod scenario;
pub mod simulation;

pub use bounds::{
    bernstein_upper_bound, composition_bound, conjunction_bound_analytic, system_bound,
    ConfidenceLevel, IndependenceFactors, ModuleBoundSet, TrialSummary,
};
pub use error::{CertError, Result};
pub use log::{ingest_log, IndicatorLog, LogFormat};
pub use prob::ProbBound;
pub use report::{emit_report, CertificationReport, OutputFormat, ReportStatus};
pub use sample_complexity::{
    e2e_validation_lower_bound, gap_report, modular_certification_plan, validation_sample_size,
    vc_training_bound, GapReport, GapScenario, PlanResult, ValidationTask,
};
pub use scenario::{run_scenario, run_scenario_file, ScenarioConfig};
pub use simulation::{
    coverage_experiment, sample, CoverageConfig, CoverageResult, ExactStatistics,
    JointIndicatorModel, ModelSpec,
};
