//! Direct Mapping benchmark tasks.
//!
//! The genotype `(g_f, g_d1, g_d2)` in `[0, 1]^3` encodes the fitness and
//! the two features directly. Features receive isotropic Gaussian noise
//! whose standard deviation depends on `g_f` through the task's
//! performance-reproducibility profile. Trade-off tasks return `g_f` as the
//! fitness; reproducibility-maximisation tasks always return 0.

use std::f64::consts::PI;
use std::path::Path;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::archive::{weighted_fitness, GridSpec};
use crate::error::{Result, UqdError};
use crate::estimators::ReproducibilityEstimator;
use crate::types::{DeltaPreference, EvaluationSample, Genotype};

/// Points used by the dense scans over the fitness gene.
pub const SCAN_POINTS: usize = 10_000;
/// Tolerance on the weighted fitness that defines the optimum band.
pub const BAND_TOLERANCE: f64 = 0.02;
const SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PeakParams {
    /// Noise level up to and including the step.
    pub base_sigma: f64,
    /// Fitness at which the noise steps up.
    pub step_at: f64,
    /// Reproducibility lost across the step (added noise, feature units).
    pub r_drop: f64,
    /// Fitness gained past the step; must equal `1 - step_at`.
    pub f_gain: f64,
}

/// Performance-reproducibility profile: feature noise level as a function
/// of the fitness gene.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ProfileSpec {
    /// `sigma_max * f`.
    Linear { sigma_max: f64 },
    /// Rises to `sigma_max` at `valley_at`, back to 0 at `f = 1`.
    Deceptive { sigma_max: f64, valley_at: f64 },
    AvoidablePeak(PeakParams),
    UnavoidablePeak(PeakParams),
    /// `sigma_max * (1 - f)`.
    ReprodGradient { sigma_max: f64 },
    /// `sigma_max * (1 + sin(2 pi cycles f)) / 2`.
    ReprodRugged { sigma_max: f64, cycles: f64 },
}

impl ProfileSpec {
    /// Noise standard deviation at fitness gene `f`.
    pub fn sigma(&self, f: f64) -> Result<f64> {
        if !(0.0..=1.0).contains(&f) {
            return Err(UqdError::OutOfDomain { value: f, low: 0.0, high: 1.0 });
        }
        Ok(self.sigma_unchecked(f))
    }

    fn sigma_unchecked(&self, f: f64) -> f64 {
        match *self {
            ProfileSpec::Linear { sigma_max } => sigma_max * f,
            ProfileSpec::Deceptive { sigma_max, valley_at } => {
                if f <= valley_at {
                    sigma_max * f / valley_at
                } else {
                    sigma_max * (1.0 - f) / (1.0 - valley_at)
                }
            }
            ProfileSpec::AvoidablePeak(p) | ProfileSpec::UnavoidablePeak(p) => {
                if f <= p.step_at {
                    p.base_sigma
                } else {
                    p.base_sigma + p.r_drop
                }
            }
            ProfileSpec::ReprodGradient { sigma_max } => sigma_max * (1.0 - f),
            ProfileSpec::ReprodRugged { sigma_max, cycles } => {
                sigma_max * 0.5 * (1.0 + (2.0 * PI * cycles * f).sin())
            }
        }
    }

    pub fn is_reproducibility_task(&self) -> bool {
        matches!(self, ProfileSpec::ReprodGradient { .. } | ProfileSpec::ReprodRugged { .. })
    }

    /// Location of a deliberate discontinuity, if any.
    pub fn step(&self) -> Option<f64> {
        match self {
            ProfileSpec::AvoidablePeak(p) | ProfileSpec::UnavoidablePeak(p) => Some(p.step_at),
            _ => None,
        }
    }

    pub fn kind_name(&self) -> &'static str {
        match self {
            ProfileSpec::Linear { .. } => "linear",
            ProfileSpec::Deceptive { .. } => "deceptive",
            ProfileSpec::AvoidablePeak(_) => "avoidable_peak",
            ProfileSpec::UnavoidablePeak(_) => "unavoidable_peak",
            ProfileSpec::ReprodGradient { .. } => "reprod_gradient",
            ProfileSpec::ReprodRugged { .. } => "reprod_rugged",
        }
    }

    fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(UqdError::InvalidTask(m));
        match *self {
            ProfileSpec::Deceptive { valley_at, .. } if !(valley_at > 0.0 && valley_at < 1.0) => {
                return bad(format!("valley_at must lie in (0, 1), got {valley_at}"));
            }
            ProfileSpec::AvoidablePeak(p) | ProfileSpec::UnavoidablePeak(p) => {
                if !(p.step_at > 0.0 && p.step_at < 1.0) {
                    return bad(format!("step_at must lie in (0, 1), got {}", p.step_at));
                }
                if (p.f_gain - (1.0 - p.step_at)).abs() > 1e-9 {
                    return bad(format!(
                        "f_gain {} inconsistent with step_at {} (expected {})",
                        p.f_gain,
                        p.step_at,
                        1.0 - p.step_at
                    ));
                }
            }
            ProfileSpec::ReprodRugged { cycles, .. } if !(cycles > 0.0) => {
                return bad(format!("cycles must be positive, got {cycles}"));
            }
            _ => {}
        }
        for i in 0..=SCAN_POINTS {
            let f = i as f64 / SCAN_POINTS as f64;
            let s = self.sigma_unchecked(f);
            if !(s >= 0.0 && s.is_finite()) {
                return bad(format!("profile gives sigma {s} at f = {f}"));
            }
        }
        Ok(())
    }
}

/// Documentation-only constants for robotic tasks that need a physics
/// simulator and cannot be run here.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RoboticTaskInfo {
    pub name: &'static str,
    pub delta_f: f64,
    pub delta_r: f64,
    pub runnable: bool,
}

pub const ROBOTIC_TASKS: [RoboticTaskInfo; 3] = [
    RoboticTaskInfo { name: "hexapod", delta_f: 140.0, delta_r: 0.14, runnable: false },
    RoboticTaskInfo { name: "walker", delta_f: 260.0, delta_r: 0.04, runnable: false },
    RoboticTaskInfo { name: "ant", delta_f: 220.0, delta_r: 6.0, runnable: false },
];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TaskSpec {
    pub schema_version: u32,
    pub name: String,
    pub genotype_dim: usize,
    pub feature_dim: usize,
    pub fitness_range: (f64, f64),
    pub grid: GridSpec,
    pub default_preference: DeltaPreference,
    pub profile: ProfileSpec,
    /// Range of the fitness gene for genotypes drawn before the archive
    /// has any occupant. Feature genes always start uniform in the box.
    #[serde(default = "unit_range")]
    pub initial_fitness_gene: (f64, f64),
}

fn unit_range() -> (f64, f64) {
    (0.0, 1.0)
}

/// A contiguous range of fitness-gene values.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Interval {
    pub low: f64,
    pub high: f64,
}

impl Interval {
    pub fn contains(&self, x: f64) -> bool {
        (self.low..=self.high).contains(&x)
    }
}

/// Fitness-gene values whose weighted fitness lies within the tolerance of
/// the best attainable one.
#[derive(Clone, Debug, PartialEq)]
pub struct OptimumBand {
    pub best_value: f64,
    pub tolerance: f64,
    pub intervals: Vec<Interval>,
}

impl OptimumBand {
    /// Smallest interval covering the whole band.
    pub fn hull(&self) -> Interval {
        Interval {
            low: self.intervals.first().map_or(f64::NAN, |i| i.low),
            high: self.intervals.last().map_or(f64::NAN, |i| i.high),
        }
    }

    pub fn contains(&self, x: f64) -> bool {
        self.intervals.iter().any(|i| i.contains(x))
    }
}

const BUILTIN: [(&str, &str); 6] = [
    ("linear", include_str!("../../../tasks/linear.toml")),
    ("deceptive", include_str!("../../../tasks/deceptive.toml")),
    ("avoidable_peak", include_str!("../../../tasks/avoidable_peak.toml")),
    ("unavoidable_peak", include_str!("../../../tasks/unavoidable_peak.toml")),
    ("reprod_gradient", include_str!("../../../tasks/reprod_gradient.toml")),
    ("reprod_rugged", include_str!("../../../tasks/reprod_rugged.toml")),
];

pub const TRADE_OFF_TASKS: [&str; 4] = ["linear", "deceptive", "avoidable_peak", "unavoidable_peak"];
pub const REPRODUCIBILITY_TASKS: [&str; 2] = ["reprod_gradient", "reprod_rugged"];

impl TaskSpec {
    /// One of the six shipped task definitions.
    pub fn builtin(name: &str) -> Result<Self> {
        let (_, text) = BUILTIN
            .iter()
            .find(|(n, _)| *n == name)
            .ok_or_else(|| UqdError::UnknownTask(name.to_string()))?;
        Self::from_toml(text)
    }

    pub fn builtin_names() -> impl Iterator<Item = &'static str> {
        BUILTIN.iter().map(|(n, _)| *n)
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let task: TaskSpec = toml::from_str(text).map_err(|e| UqdError::InvalidTask(e.to_string()))?;
        task.validate()?;
        Ok(task)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }

    /// A built-in name, or a path to a task definition file.
    pub fn resolve(name_or_path: &str) -> Result<Self> {
        match Self::builtin(name_or_path) {
            Ok(t) => Ok(t),
            Err(UqdError::UnknownTask(_)) if Path::new(name_or_path).is_file() => Self::load(Path::new(name_or_path)),
            Err(e) => Err(e),
        }
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("task specs always serialize")
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(UqdError::InvalidTask(m));
        if self.schema_version != SCHEMA_VERSION {
            return bad(format!("unsupported schema_version {}", self.schema_version));
        }
        if self.genotype_dim != self.feature_dim + 1 {
            return bad(format!(
                "direct mapping needs genotype_dim = feature_dim + 1, got {} and {}",
                self.genotype_dim, self.feature_dim
            ));
        }
        self.grid.validate().map_err(|e| UqdError::InvalidTask(e.to_string()))?;
        if self.grid.dims() != self.feature_dim {
            return bad(format!("grid has {} dimensions, task declares {}", self.grid.dims(), self.feature_dim));
        }
        if !(self.fitness_range.0 < self.fitness_range.1) {
            return bad(format!("empty fitness range {:?}", self.fitness_range));
        }
        self.default_preference
            .validate()
            .map_err(|e| UqdError::InvalidTask(e.to_string()))?;
        self.profile.validate()?;
        let (lo, hi) = self.initial_fitness_gene;
        if !(0.0 <= lo && lo <= hi && hi <= 1.0) {
            return bad(format!("initial_fitness_gene {:?} is not a sub-range of [0, 1]", self.initial_fitness_gene));
        }
        if self.profile.kind_name() != self.name {
            return bad(format!("task `{}` declares profile `{}`", self.name, self.profile.kind_name()));
        }
        Ok(())
    }

    pub fn genotype_bounds(&self) -> (f64, f64) {
        (0.0, 1.0)
    }

    pub fn fitness_lower_bound(&self) -> f64 {
        self.fitness_range.0
    }

    pub fn is_reproducibility_task(&self) -> bool {
        self.profile.is_reproducibility_task()
    }

    pub fn profile_sigma(&self, f: f64) -> Result<f64> {
        self.profile.sigma(f)
    }

    /// Largest noise level the profile reaches on `[0, 1]`.
    pub fn sigma_max(&self) -> f64 {
        (0..=SCAN_POINTS)
            .map(|i| self.profile.sigma_unchecked(i as f64 / SCAN_POINTS as f64))
            .fold(0.0, f64::max)
    }

    /// Deterministic fitness attached to fitness gene `g_f`.
    pub fn fitness_of(&self, g_f: f64) -> f64 {
        if self.is_reproducibility_task() {
            0.0
        } else {
            g_f
        }
    }

    /// One stochastic evaluation of `g`.
    pub fn evaluate<R: Rng + ?Sized>(&self, g: &Genotype, rng: &mut R) -> Result<EvaluationSample> {
        if g.len() != self.genotype_dim {
            return Err(UqdError::DimensionMismatch { expected: self.genotype_dim, actual: g.len() });
        }
        let v = g.values();
        let sigma = self.profile.sigma(v[0])?;
        let features = v[1..]
            .iter()
            .enumerate()
            .map(|(j, &d)| {
                let eps: f64 = rng.sample(StandardNormal);
                (d + sigma * eps).clamp(self.grid.feature_mins[j], self.grid.feature_maxs[j])
            })
            .collect();
        Ok(EvaluationSample::new(self.fitness_of(v[0]), features))
    }

    /// Reproducibility that noise level `sigma` implies under `estimator`,
    /// ignoring the clipping at the feature-space boundary.
    pub fn implied_reproducibility(&self, g_f: f64, estimator: ReproducibilityEstimator) -> f64 {
        -self.profile.sigma_unchecked(g_f) * estimator.gaussian_scale()
    }

    /// Dense scan of the weighted fitness over the fitness gene.
    pub fn optimum_band(&self, pref: &DeltaPreference, estimator: ReproducibilityEstimator) -> OptimumBand {
        let values: Vec<(f64, f64)> = (0..=SCAN_POINTS)
            .map(|i| {
                let g = i as f64 / SCAN_POINTS as f64;
                let w = weighted_fitness(self.fitness_of(g), self.implied_reproducibility(g, estimator), pref);
                (g, w)
            })
            .collect();
        let best_value = values.iter().map(|&(_, w)| w).fold(f64::NEG_INFINITY, f64::max);
        let mut intervals: Vec<Interval> = Vec::new();
        let mut open: Option<Interval> = None;
        for &(g, w) in &values {
            if w >= best_value - BAND_TOLERANCE {
                open = Some(match open {
                    Some(iv) => Interval { low: iv.low, high: g },
                    None => Interval { low: g, high: g },
                });
            } else if let Some(iv) = open.take() {
                intervals.push(iv);
            }
        }
        intervals.extend(open);
        OptimumBand { best_value, tolerance: BAND_TOLERANCE, intervals }
    }

    /// Optimum band under the task's own preference.
    pub fn expected_optimum_band(&self, estimator: ReproducibilityEstimator) -> OptimumBand {
        self.optimum_band(&self.default_preference, estimator)
    }

    /// A genotype whose expected features sit at `features` with fitness
    /// gene `g_f`.
    pub fn genotype_for(&self, g_f: f64, features: &[f64]) -> Genotype {
        let mut v = Vec::with_capacity(self.genotype_dim);
        v.push(g_f);
        v.extend_from_slice(features);
        Genotype::clamped(v, 0.0, 1.0)
    }
}

/// Noise level of `profile` at `f`; errors outside `[0, 1]`.
pub fn profile_sigma(profile: &ProfileSpec, f: f64) -> Result<f64> {
    profile.sigma(f)
}
