//! Campaign files and the resolved per-run configuration.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use uqd_core::{
    AlgorithmConfig, AlgorithmKind, DeltaPreference, EstimatorConfig, Execution, MutationConfig, TaskSpec,
};

use crate::error::{CliError, CliResult};

pub const SCHEMA_VERSION: u32 = 1;
pub const DEFAULT_GENERATIONS: usize = 250;
pub const DEFAULT_SAMPLING_SIZE: usize = 4096;
pub const DEFAULT_REEVALUATIONS: usize = 512;
pub const DEFAULT_OUT: &str = "runs";
/// Environment variable naming the default output root.
pub const OUT_ENV: &str = "UQD_OUT";

fn default_seeds() -> Vec<u64> {
    (1..=10).collect()
}

fn default_generations() -> usize {
    DEFAULT_GENERATIONS
}

fn default_sampling_size() -> usize {
    DEFAULT_SAMPLING_SIZE
}

fn default_reevaluations() -> usize {
    DEFAULT_REEVALUATIONS
}

/// One algorithm entry of a campaign. Unset fields take the library
/// defaults; the preference falls back to the task's default.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AlgorithmEntry {
    pub algorithm: AlgorithmKind,
    /// Name used for run directories and report rows.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta_f: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta_r: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rho: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fixed_samples: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub as_initial_samples: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub depth: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_front_size: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mutation: Option<MutationConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub estimators: Option<EstimatorConfig>,
}

impl AlgorithmEntry {
    pub fn new(algorithm: AlgorithmKind) -> Self {
        Self {
            algorithm,
            label: None,
            delta_f: None,
            delta_r: None,
            rho: None,
            fixed_samples: None,
            as_initial_samples: None,
            depth: None,
            max_front_size: None,
            mutation: None,
            estimators: None,
        }
    }

    pub fn label(&self) -> String {
        self.label.clone().unwrap_or_else(|| self.algorithm.name().to_string())
    }

    /// Explicit preference if given, else the task default. Giving only
    /// one of the two deltas is an error.
    pub fn preference(&self, task: &TaskSpec) -> CliResult<DeltaPreference> {
        let rho = self.rho.unwrap_or(task.default_preference.rho);
        let pref = match (self.delta_f, self.delta_r) {
            (Some(f), Some(r)) => DeltaPreference::new(f, r, rho)?,
            (None, None) => DeltaPreference { rho, ..task.default_preference },
            _ => {
                return Err(CliError::Usage(format!(
                    "{}: delta_f and delta_r must be given together",
                    self.label()
                )))
            }
        };
        pref.validate()?;
        Ok(pref)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CampaignConfig {
    pub schema_version: u32,
    /// Built-in task names or paths to task files.
    pub tasks: Vec<String>,
    pub algorithms: Vec<AlgorithmEntry>,
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    #[serde(default = "default_generations")]
    pub generations: usize,
    #[serde(default = "default_sampling_size")]
    pub sampling_size: usize,
    #[serde(default = "default_reevaluations")]
    pub reevaluations: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
    #[serde(default)]
    pub execution: Execution,
    /// Worker threads for evaluation; `None` lets rayon decide.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub threads: Option<usize>,
    /// Also write every occupant's evaluation history.
    #[serde(default)]
    pub with_samples: bool,
}

impl CampaignConfig {
    pub fn new(tasks: Vec<String>, algorithms: Vec<AlgorithmEntry>, seeds: Vec<u64>) -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            tasks,
            algorithms,
            seeds,
            generations: DEFAULT_GENERATIONS,
            sampling_size: DEFAULT_SAMPLING_SIZE,
            reevaluations: DEFAULT_REEVALUATIONS,
            out: None,
            execution: Execution::default(),
            threads: None,
            with_samples: false,
        }
    }

    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        Self::from_toml(&text).map_err(|e| e.context(path.display()))
    }

    pub fn from_toml(text: &str) -> CliResult<Self> {
        toml::from_str(text).map_err(|e| CliError::Usage(format!("invalid campaign config: {e}")))
    }

    /// Output root: the configured directory, else `$UQD_OUT`, else `runs`.
    pub fn out_root(&self) -> PathBuf {
        self.out
            .clone()
            .or_else(|| std::env::var_os(OUT_ENV).map(PathBuf::from))
            .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT))
    }

    /// Checks the invariants and expands the campaign into one resolved
    /// configuration per (task, algorithm, seed), in that nesting order.
    pub fn resolve(&self) -> CliResult<Vec<RunConfig>> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(CliError::Usage(format!(
                "unsupported schema_version {} (expected {SCHEMA_VERSION})",
                self.schema_version
            )));
        }
        if self.tasks.is_empty() || self.algorithms.is_empty() || self.seeds.is_empty() {
            return Err(CliError::Usage("tasks, algorithms and seeds must all be non-empty".into()));
        }
        if self.reevaluations < 2 {
            return Err(CliError::Usage("reevaluations must be at least 2".into()));
        }
        if self.threads == Some(0) {
            return Err(CliError::Usage("threads must be positive".into()));
        }
        let mut labels: Vec<String> = self.algorithms.iter().map(AlgorithmEntry::label).collect();
        labels.sort();
        if let Some(w) = labels.windows(2).find(|w| w[0] == w[1]) {
            return Err(CliError::Usage(format!("algorithm label `{}` used twice; set distinct labels", w[0])));
        }
        let mut runs = Vec::new();
        for name in &self.tasks {
            let task = TaskSpec::resolve(name).map_err(|e| CliError::from(e).context(format!("task `{name}`")))?;
            for entry in &self.algorithms {
                let algorithm = self.algorithm_config(entry, &task)?;
                for &seed in &self.seeds {
                    runs.push(RunConfig {
                        schema_version: SCHEMA_VERSION,
                        label: entry.label(),
                        seed,
                        reevaluations: self.reevaluations,
                        with_samples: self.with_samples,
                        algorithm: algorithm.clone(),
                        task: task.clone(),
                        projected_from: None,
                    });
                }
            }
        }
        Ok(runs)
    }

    fn algorithm_config(&self, entry: &AlgorithmEntry, task: &TaskSpec) -> CliResult<AlgorithmConfig> {
        let mut c = AlgorithmConfig::new(entry.algorithm)
            .with_generations(self.generations)
            .with_sampling_size(self.sampling_size)
            .with_execution(self.execution)
            .with_preference(entry.preference(task)?);
        if let Some(v) = entry.fixed_samples {
            c.fixed_samples = v;
        }
        if let Some(v) = entry.as_initial_samples {
            c.as_initial_samples = v;
        }
        if let Some(v) = entry.depth {
            c.depth = v;
        }
        if let Some(v) = entry.max_front_size {
            c.max_front_size = v;
        }
        if let Some(v) = entry.mutation {
            c.mutation = v;
        }
        if let Some(v) = entry.estimators {
            c.estimators = v;
        }
        c.validate(task).map_err(|e| CliError::from(e).context(format!("{} on {}", entry.label(), task.name)))?;
        Ok(c)
    }
}

/// Everything needed to reproduce one run; stored as `run.toml`.
///
/// The preference is always resolved. Algorithms whose rule ignores it
/// still carry it, because post-hoc regret and Pareto projection need one.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub schema_version: u32,
    pub label: String,
    pub seed: u64,
    pub reevaluations: usize,
    pub with_samples: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub projected_from: Option<String>,
    pub algorithm: AlgorithmConfig,
    pub task: TaskSpec,
}

impl RunConfig {
    pub fn preference(&self) -> DeltaPreference {
        self.algorithm.preference.unwrap_or(self.task.default_preference)
    }

    /// Directory name inside the output root.
    pub fn dir_name(&self) -> String {
        format!("{}__{}__seed{}", self.task.name, self.label, self.seed)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("run configs always serialize")
    }

    pub fn from_toml(text: &str) -> CliResult<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| CliError::Usage(format!("invalid run.toml: {e}")))?;
        if cfg.schema_version != SCHEMA_VERSION {
            return Err(CliError::Usage(format!("unsupported run.toml schema_version {}", cfg.schema_version)));
        }
        cfg.task.validate()?;
        Ok(cfg)
    }

    /// SHA-256 of the canonical JSON form (object keys sorted), with the
    /// execution mode left out since it cannot change results.
    pub fn config_hash(&self) -> String {
        let mut normalized = self.clone();
        normalized.algorithm.execution = Execution::default();
        let value = serde_json::to_value(&normalized).expect("run configs always serialize");
        canonical_hash(&value)
    }
}

/// SHA-256 hex digest of a JSON value with keys in sorted order.
pub fn canonical_hash(value: &serde_json::Value) -> String {
    // serde_json's default map is ordered by key, so re-serializing a Value
    // yields the canonical form regardless of the original field order.
    let text = serde_json::to_string(value).expect("json values always serialize");
    hex::encode(Sha256::digest(text.as_bytes()))
}
