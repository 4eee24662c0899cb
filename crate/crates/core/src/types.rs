use serde::{Deserialize, Serialize};

use crate::error::{Result, UqdError};
use crate::estimators::{self, EstimatorConfig};

/// Default tie-break constant for [`DeltaPreference`].
pub const DEFAULT_RHO: f64 = 1e-6;

/// A point in the search space.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Genotype(Vec<f64>);

impl Genotype {
    pub fn new(values: Vec<f64>) -> Self {
        Self(values)
    }

    /// Builds a genotype with every coordinate clamped to `[low, high]`.
    pub fn clamped(mut values: Vec<f64>, low: f64, high: f64) -> Self {
        for v in &mut values {
            *v = v.clamp(low, high);
        }
        Self(values)
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn within(&self, low: f64, high: f64) -> bool {
        self.0.iter().all(|v| (low..=high).contains(v))
    }
}

/// Outcome of one stochastic evaluation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvaluationSample {
    pub fitness: f64,
    pub features: Vec<f64>,
}

impl EvaluationSample {
    pub fn new(fitness: f64, features: Vec<f64>) -> Self {
        Self { fitness, features }
    }
}

/// A genotype with its evaluation history and cached estimates.
///
/// Records built with [`SolutionRecord::from_samples`] keep their full
/// history and the caches always equal a fresh estimator run on it. Records
/// restored from an archive file without the sample sidecar carry only the
/// cached estimates and `sample_count`; they can be projected and
/// reevaluated but not added to an archive.
#[derive(Clone, Debug, PartialEq)]
pub struct SolutionRecord {
    id: u64,
    genotype: Genotype,
    samples: Vec<EvaluationSample>,
    sample_count: usize,
    est_fitness: f64,
    est_features: Vec<f64>,
    est_reproducibility: f64,
}

impl SolutionRecord {
    /// `id` orders records by creation: lower ids are older.
    pub fn from_samples(
        id: u64,
        genotype: Genotype,
        samples: Vec<EvaluationSample>,
        cfg: &EstimatorConfig,
    ) -> Result<Self> {
        let mut rec = Self {
            id,
            genotype,
            samples,
            sample_count: 0,
            est_fitness: 0.0,
            est_features: Vec::new(),
            est_reproducibility: 0.0,
        };
        rec.refresh(cfg)?;
        Ok(rec)
    }

    /// Rebuilds a record from stored values. `samples` may be empty when the
    /// history was not persisted.
    pub fn restored(
        id: u64,
        genotype: Genotype,
        samples: Vec<EvaluationSample>,
        sample_count: usize,
        est_fitness: f64,
        est_features: Vec<f64>,
        est_reproducibility: f64,
    ) -> Self {
        Self {
            id,
            genotype,
            samples,
            sample_count,
            est_fitness,
            est_features,
            est_reproducibility,
        }
    }

    /// Appends a sample and refreshes every cached estimate.
    pub fn push_sample(&mut self, sample: EvaluationSample, cfg: &EstimatorConfig) -> Result<()> {
        self.samples.push(sample);
        self.refresh(cfg)
    }

    fn refresh(&mut self, cfg: &EstimatorConfig) -> Result<()> {
        self.est_fitness = estimators::estimate_performance(&self.samples, cfg)?;
        self.est_features = estimators::estimate_features(&self.samples, cfg)?;
        self.est_reproducibility = estimators::estimate_reproducibility(&self.samples, cfg)?;
        self.sample_count = self.samples.len();
        Ok(())
    }

    /// True when the caches equal a fresh estimator run on the stored history.
    pub fn cache_consistent(&self, cfg: &EstimatorConfig) -> bool {
        if self.samples.len() != self.sample_count {
            return false;
        }
        let (Ok(f), Ok(d), Ok(r)) = (
            estimators::estimate_performance(&self.samples, cfg),
            estimators::estimate_features(&self.samples, cfg),
            estimators::estimate_reproducibility(&self.samples, cfg),
        ) else {
            return false;
        };
        f.to_bits() == self.est_fitness.to_bits()
            && r.to_bits() == self.est_reproducibility.to_bits()
            && d.len() == self.est_features.len()
            && d.iter().zip(&self.est_features).all(|(a, b)| a.to_bits() == b.to_bits())
    }

    pub fn id(&self) -> u64 {
        self.id
    }

    pub fn genotype(&self) -> &Genotype {
        &self.genotype
    }

    pub fn samples(&self) -> &[EvaluationSample] {
        &self.samples
    }

    pub fn has_history(&self) -> bool {
        !self.samples.is_empty() && self.samples.len() == self.sample_count
    }

    pub fn sample_count(&self) -> usize {
        self.sample_count
    }

    pub fn est_fitness(&self) -> f64 {
        self.est_fitness
    }

    pub fn est_features(&self) -> &[f64] {
        &self.est_features
    }

    pub fn est_reproducibility(&self) -> f64 {
        self.est_reproducibility
    }
}

/// A user's performance-reproducibility trade-off: a gain of `delta_r` in
/// reproducibility compensates a loss of `delta_f` in fitness. `rho` keeps
/// the weighted-sum coefficient defined when `delta_r = 0` and makes the
/// more reproducible of two equal-fitness solutions win when `delta_f = 0`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DeltaPreference {
    pub delta_f: f64,
    pub delta_r: f64,
    #[serde(default = "default_rho")]
    pub rho: f64,
}

fn default_rho() -> f64 {
    DEFAULT_RHO
}

impl DeltaPreference {
    /// Validating constructor. Infinite deltas are accepted (they disable
    /// the corresponding delta-comparison cases).
    pub fn new(delta_f: f64, delta_r: f64, rho: f64) -> Result<Self> {
        let pref = Self { delta_f, delta_r, rho };
        pref.validate()?;
        Ok(pref)
    }

    pub fn with_default_rho(delta_f: f64, delta_r: f64) -> Result<Self> {
        Self::new(delta_f, delta_r, DEFAULT_RHO)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.delta_f >= 0.0) {
            return Err(UqdError::InvalidPreference(format!(
                "delta_f must be >= 0, got {}",
                self.delta_f
            )));
        }
        if !(self.delta_r >= 0.0) {
            return Err(UqdError::InvalidPreference(format!(
                "delta_r must be >= 0, got {}",
                self.delta_r
            )));
        }
        if !(self.rho > 0.0 && self.rho.is_finite()) {
            return Err(UqdError::InvalidPreference(format!(
                "rho must be finite and > 0, got {}",
                self.rho
            )));
        }
        Ok(())
    }

    /// Weight applied to reproducibility in the adjusted fitness.
    pub fn coefficient(&self) -> f64 {
        (self.delta_f + self.rho) / (self.delta_r + self.rho)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn preference_validation() {
        assert!(DeltaPreference::new(0.0, 0.0, 1e-9).is_ok());
        assert!(DeltaPreference::new(f64::INFINITY, f64::INFINITY, 1e-9).is_ok());
        assert!(DeltaPreference::new(-0.1, 0.0, 1e-9).is_err());
        assert!(DeltaPreference::new(0.0, -0.1, 1e-9).is_err());
        assert!(DeltaPreference::new(0.0, 0.0, 0.0).is_err());
        assert!(DeltaPreference::new(f64::NAN, 0.0, 1e-9).is_err());
    }

    #[test]
    fn record_counts_and_caches() {
        let cfg = EstimatorConfig::default();
        let samples = vec![
            EvaluationSample::new(1.0, vec![0.0, 0.0]),
            EvaluationSample::new(3.0, vec![2.0, 0.0]),
        ];
        let mut rec =
            SolutionRecord::from_samples(0, Genotype::new(vec![0.5; 3]), samples, &cfg).unwrap();
        assert_eq!(rec.sample_count(), 2);
        assert_eq!(rec.est_fitness(), 2.0);
        assert!(rec.cache_consistent(&cfg));
        rec.push_sample(EvaluationSample::new(5.0, vec![1.0, 0.0]), &cfg).unwrap();
        assert_eq!(rec.sample_count(), 3);
        assert!(rec.cache_consistent(&cfg));
    }

    #[test]
    fn record_without_samples_is_rejected() {
        let cfg = EstimatorConfig::default();
        let err = SolutionRecord::from_samples(0, Genotype::new(vec![0.5]), vec![], &cfg);
        assert!(matches!(err, Err(UqdError::EmptySamples)));
    }

    #[test]
    fn clamped_genotype_stays_in_box() {
        let g = Genotype::clamped(vec![-0.5, 0.5, 1.5], 0.0, 1.0);
        assert_eq!(g.values(), &[0.0, 0.5, 1.0]);
        assert!(g.within(0.0, 1.0));
    }
}
