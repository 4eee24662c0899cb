//! Experiment harness for `uqd-core`: campaign configuration, run
//! persistence with manifests, post-hoc evaluation, MOME-X projection and
//! report tables. The `uqd` binary is a thin CLI over these modules.

pub mod config;
pub mod error;
pub mod evaluate;
pub mod manifest;
pub mod project;
pub mod report;
pub mod runner;

pub use config::{AlgorithmEntry, CampaignConfig, RunConfig};
pub use error::{CliError, CliResult};
