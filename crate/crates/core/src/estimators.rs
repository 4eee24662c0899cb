//! Performance, feature and reproducibility estimators.
//!
//! Reproducibility is reported so that higher means more reproducible: the
//! negated dispersion of the feature samples. Per-coordinate dispersions are
//! combined by root-mean-square. A single sample yields 0, the maximum, so
//! one-sample additions are reproducibility-neutral.

use serde::{Deserialize, Serialize};

use crate::error::{Result, UqdError};
use crate::types::EvaluationSample;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PerformanceEstimator {
    #[default]
    Mean,
    Median,
    ClosestToMedian,
    Mode,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReproducibilityEstimator {
    #[default]
    NegStd,
    NegMad,
    NegIqr,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureEstimator {
    #[default]
    Mean,
    Median,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct EstimatorConfig {
    #[serde(default)]
    pub performance: PerformanceEstimator,
    #[serde(default)]
    pub reproducibility: ReproducibilityEstimator,
    #[serde(default)]
    pub features: FeatureEstimator,
}

impl ReproducibilityEstimator {
    /// Dispersion of a centred Gaussian with unit standard deviation under
    /// this estimator, used to turn a noise level into the reproducibility it
    /// implies.
    pub fn gaussian_scale(self) -> f64 {
        // Standard normal 0.75 quantile.
        const Q75: f64 = 0.674_489_750_196_081_7;
        match self {
            ReproducibilityEstimator::NegStd => 1.0,
            ReproducibilityEstimator::NegMad => Q75,
            ReproducibilityEstimator::NegIqr => 2.0 * Q75,
        }
    }
}

pub fn estimate_performance(samples: &[EvaluationSample], cfg: &EstimatorConfig) -> Result<f64> {
    if samples.is_empty() {
        return Err(UqdError::EmptySamples);
    }
    let values: Vec<f64> = samples.iter().map(|s| s.fitness).collect();
    Ok(match cfg.performance {
        PerformanceEstimator::Mean => mean(&values),
        PerformanceEstimator::Median => median(&values),
        PerformanceEstimator::ClosestToMedian => closest_to_median(&values),
        PerformanceEstimator::Mode => histogram_mode(&values),
    })
}

pub fn estimate_features(samples: &[EvaluationSample], cfg: &EstimatorConfig) -> Result<Vec<f64>> {
    let dim = feature_dim(samples)?;
    let mut column = Vec::with_capacity(samples.len());
    Ok((0..dim)
        .map(|j| {
            column.clear();
            column.extend(samples.iter().map(|s| s.features[j]));
            match cfg.features {
                FeatureEstimator::Mean => mean(&column),
                FeatureEstimator::Median => median(&column),
            }
        })
        .collect())
}

pub fn estimate_reproducibility(
    samples: &[EvaluationSample],
    cfg: &EstimatorConfig,
) -> Result<f64> {
    let dim = feature_dim(samples)?;
    if samples.len() == 1 || dim == 0 {
        return Ok(0.0);
    }
    let mut column = Vec::with_capacity(samples.len());
    let mut sum_sq = 0.0;
    for j in 0..dim {
        column.clear();
        column.extend(samples.iter().map(|s| s.features[j]));
        let d = match cfg.reproducibility {
            ReproducibilityEstimator::NegStd => population_variance(&column).sqrt(),
            ReproducibilityEstimator::NegMad => median_absolute_deviation(&column),
            ReproducibilityEstimator::NegIqr => interquartile_range(&column),
        };
        sum_sq += d * d;
    }
    let rms = (sum_sq / dim as f64).sqrt();
    Ok(if rms == 0.0 { 0.0 } else { -rms })
}

/// Mean over coordinates of the per-coordinate population variance of the
/// feature samples.
pub fn descriptor_variance(samples: &[EvaluationSample]) -> Result<f64> {
    let dim = feature_dim(samples)?;
    if dim == 0 {
        return Ok(0.0);
    }
    let mut column = Vec::with_capacity(samples.len());
    let mut total = 0.0;
    for j in 0..dim {
        column.clear();
        column.extend(samples.iter().map(|s| s.features[j]));
        total += population_variance(&column);
    }
    Ok(total / dim as f64)
}

fn feature_dim(samples: &[EvaluationSample]) -> Result<usize> {
    let first = samples.first().ok_or(UqdError::EmptySamples)?;
    let dim = first.features.len();
    if let Some(bad) = samples.iter().find(|s| s.features.len() != dim) {
        return Err(UqdError::DimensionMismatch {
            expected: dim,
            actual: bad.features.len(),
        });
    }
    Ok(dim)
}

pub(crate) fn mean(values: &[f64]) -> f64 {
    // A constant list returns its value exactly rather than sum/n.
    if values.windows(2).all(|w| w[0] == w[1]) {
        return values.first().copied().unwrap_or(f64::NAN);
    }
    values.iter().sum::<f64>() / values.len() as f64
}

pub(crate) fn median(values: &[f64]) -> f64 {
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    median_sorted(&sorted)
}

fn median_sorted(sorted: &[f64]) -> f64 {
    let n = sorted.len();
    if n % 2 == 1 {
        sorted[n / 2]
    } else {
        0.5 * (sorted[n / 2 - 1] + sorted[n / 2])
    }
}

fn closest_to_median(values: &[f64]) -> f64 {
    let m = median(values);
    let mut best = values[0];
    let mut best_dist = (best - m).abs();
    for &v in &values[1..] {
        let d = (v - m).abs();
        if d < best_dist {
            best = v;
            best_dist = d;
        }
    }
    best
}

/// Centre of the most populated of `ceil(sqrt(n))` equal-width bins spanning
/// the sample range. Ties go to the lowest bin.
fn histogram_mode(values: &[f64]) -> f64 {
    let (lo, hi) = values
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    if lo == hi {
        return lo;
    }
    let bins = (values.len() as f64).sqrt().ceil() as usize;
    let width = (hi - lo) / bins as f64;
    let mut counts = vec![0usize; bins];
    for &v in values {
        let b = (((v - lo) / width) as usize).min(bins - 1);
        counts[b] += 1;
    }
    let mut best = 0;
    for (b, &c) in counts.iter().enumerate() {
        if c > counts[best] {
            best = b;
        }
    }
    lo + (best as f64 + 0.5) * width
}

pub(crate) fn population_variance(values: &[f64]) -> f64 {
    if values.iter().all(|&v| v == values[0]) {
        return 0.0;
    }
    let m = mean(values);
    values.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / values.len() as f64
}

fn median_absolute_deviation(values: &[f64]) -> f64 {
    let m = median(values);
    let dev: Vec<f64> = values.iter().map(|v| (v - m).abs()).collect();
    median(&dev)
}

/// Linear-interpolation quantile on sorted data.
fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo])
}

fn interquartile_range(values: &[f64]) -> f64 {
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    quantile_sorted(&sorted, 0.75) - quantile_sorted(&sorted, 0.25)
}
