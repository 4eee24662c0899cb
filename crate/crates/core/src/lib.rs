//! Quality-diversity optimization for uncertain domains.
//!
//! The crate provides MAP-Elites style archives whose addition rules trade
//! expected performance against reproducibility (the inverse dispersion of a
//! solution's feature distribution under repeated evaluation), the
//! generation loops for fixed-sampling, archive-sampling and multi-objective
//! variants, the Direct Mapping benchmark tasks, and the post-hoc metrics
//! used to compare runs.
//!
//! Evaluation work inside a generation runs on rayon when the `parallel`
//! feature is enabled (the default). Every random draw is keyed by
//! `(seed, role, generation, index)`, so archives do not depend on how the
//! work was scheduled.

pub mod algorithms;
pub mod archive;
pub mod archive_io;
pub mod error;
pub mod estimators;
pub mod exec;
pub mod metrics;
pub mod rng;
pub mod stats;
pub mod tasks;
pub mod types;

pub use algorithms::{
    run_experiment, AlgorithmConfig, AlgorithmKind, BudgetLedger, ExperimentResult,
    MutationConfig, MutationOperator, TraceRow,
};
pub use archive::{
    delta_compare, weighted_fitness, AdditionRule, Archive, DeltaDecision, EliteArchive,
    GridSpec, Outcome, ParetoArchive, ParetoCell,
};
pub use error::{Result, UqdError};
pub use estimators::{
    EstimatorConfig, FeatureEstimator, PerformanceEstimator, ReproducibilityEstimator,
};
pub use exec::Execution;
pub use rng::{RngStream, StreamRole};
pub use tasks::{ProfileSpec, TaskSpec};
pub use types::{DeltaPreference, EvaluationSample, Genotype, SolutionRecord};
