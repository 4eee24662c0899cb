//! Post-hoc evaluation of final archives.
//!
//! Every elite is reevaluated many times with streams disjoint from
//! training. The medians of those samples place each solution into an empty
//! corrected archive, from which the Corrected QD-Score, the
//! Reproducibility-Score and the archive averages are computed. The
//! Reproducibility-Score normalizes each cell by the largest descriptor
//! variance observed in that cell across the whole comparison set, so it is
//! computed over all runs at once.

use serde::{Deserialize, Serialize};

use crate::archive::{weighted_fitness, EliteArchive, GridSpec};
use crate::error::{Result, UqdError};
use crate::estimators::{self, median, ReproducibilityEstimator};
use crate::exec::{self, Execution};
use crate::rng::{RngStream, StreamRole};
use crate::tasks::TaskSpec;
use crate::types::{DeltaPreference, EvaluationSample, Genotype};

pub const DEFAULT_REEVALUATIONS: usize = 512;

#[derive(Clone, Debug, PartialEq)]
pub struct ReevalEntry {
    /// Flat cell the solution occupied in the training archive.
    pub training_cell: usize,
    pub genotype: Genotype,
    pub samples: Vec<EvaluationSample>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ReevalDataset {
    pub grid: GridSpec,
    pub reevaluations: usize,
    pub entries: Vec<ReevalEntry>,
}

/// Reevaluates the elite (slot 0) of every non-empty cell `n` times.
pub fn reevaluate_archive(
    archive: &EliteArchive,
    task: &TaskSpec,
    n: usize,
    seed: u64,
    execution: Execution,
) -> Result<ReevalDataset> {
    if n < 2 {
        return Err(UqdError::InvalidInput(format!("need at least 2 reevaluations, got {n}")));
    }
    let elites: Vec<_> = archive.elites().collect();
    let entries = exec::map_indexed(execution, elites.len(), |i| {
        let (cell, rec) = elites[i];
        let mut rng = RngStream::keyed(seed, StreamRole::Reevaluation, &[cell as u64]).rng();
        let samples = (0..n)
            .map(|_| task.evaluate(rec.genotype(), &mut rng))
            .collect::<Result<Vec<_>>>()?;
        Ok(ReevalEntry { training_cell: cell, genotype: rec.genotype().clone(), samples })
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    Ok(ReevalDataset { grid: archive.grid().clone(), reevaluations: n, entries })
}

/// One reevaluated solution summarized by medians.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CorrectedSolution {
    pub entry: usize,
    pub cell: usize,
    pub fitness: f64,
    pub features: Vec<f64>,
    /// Mean over coordinates of the per-coordinate feature variance.
    pub descriptor_variance: f64,
    /// Negated root-mean-square feature standard deviation.
    pub reproducibility: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CorrectedArchive {
    pub grid: GridSpec,
    /// Winner of each cell, as an index into `solutions`.
    pub cells: Vec<Option<usize>>,
    /// Every reevaluated solution, winners and collision losers alike.
    pub solutions: Vec<CorrectedSolution>,
}

impl CorrectedArchive {
    pub fn filled(&self) -> impl Iterator<Item = (usize, &CorrectedSolution)> {
        self.cells
            .iter()
            .enumerate()
            .filter_map(|(c, s)| s.map(|i| (c, &self.solutions[i])))
    }

    pub fn filled_cells(&self) -> usize {
        self.cells.iter().filter(|c| c.is_some()).count()
    }

    pub fn coverage(&self) -> f64 {
        self.filled_cells() as f64 / self.cells.len() as f64
    }
}

fn summarize(entry: usize, e: &ReevalEntry, grid: &GridSpec) -> Result<CorrectedSolution> {
    let fitness: Vec<f64> = e.samples.iter().map(|s| s.fitness).collect();
    if fitness.is_empty() {
        return Err(UqdError::EmptySamples);
    }
    let dim = e.samples[0].features.len();
    let features: Vec<f64> = (0..dim)
        .map(|j| median(&e.samples.iter().map(|s| s.features[j]).collect::<Vec<_>>()))
        .collect();
    let descriptor_variance = estimators::descriptor_variance(&e.samples)?;
    Ok(CorrectedSolution {
        entry,
        cell: grid.flat_cell(&features),
        fitness: median(&fitness),
        features,
        descriptor_variance,
        reproducibility: if descriptor_variance == 0.0 { 0.0 } else { -descriptor_variance.sqrt() },
    })
}

/// Builds the corrected archive. Collisions keep the higher corrected
/// fitness, then the higher reproducibility, then the earlier entry.
pub fn corrected_archive(dataset: &ReevalDataset) -> Result<CorrectedArchive> {
    let grid = dataset.grid.clone();
    let solutions = dataset
        .entries
        .iter()
        .enumerate()
        .map(|(i, e)| summarize(i, e, &grid))
        .collect::<Result<Vec<_>>>()?;
    let mut cells: Vec<Option<usize>> = vec![None; grid.total_cells()];
    for (i, s) in solutions.iter().enumerate() {
        let slot = &mut cells[s.cell];
        match *slot {
            None => *slot = Some(i),
            Some(j) => {
                let cur = &solutions[j];
                let better = s.fitness > cur.fitness
                    || (s.fitness == cur.fitness && s.reproducibility > cur.reproducibility);
                if better {
                    *slot = Some(i);
                }
            }
        }
    }
    Ok(CorrectedArchive { grid, cells, solutions })
}

/// Sum over filled cells of `corrected fitness - offset`.
pub fn corrected_qd_score(ca: &CorrectedArchive, offset: f64) -> f64 {
    ca.filled().map(|(_, s)| s.fitness - offset).sum()
}

/// Largest descriptor variance observed per cell over every solution of
/// every run whose corrected cell it is.
pub fn cell_max_variances(runs: &[&CorrectedArchive]) -> Result<Vec<f64>> {
    let Some(first) = runs.first() else {
        return Ok(Vec::new());
    };
    if let Some(bad) = runs.iter().find(|r| r.grid != first.grid) {
        return Err(UqdError::InvalidInput(format!(
            "runs use different grids: {:?} vs {:?}",
            first.grid.cells_per_dim, bad.grid.cells_per_dim
        )));
    }
    let mut max = vec![0.0f64; first.grid.total_cells()];
    for run in runs {
        for s in &run.solutions {
            max[s.cell] = max[s.cell].max(s.descriptor_variance);
        }
    }
    Ok(max)
}

/// Contribution of one filled cell: `1 - variance / cell maximum`, or 1
/// when the maximum is 0.
pub fn cell_reproducibility(variance: f64, cell_max: f64) -> f64 {
    if cell_max > 0.0 {
        1.0 - variance / cell_max
    } else {
        1.0
    }
}

/// Reproducibility-Score of each run against the pooled per-cell maxima.
pub fn reproducibility_score(runs: &[&CorrectedArchive]) -> Result<Vec<f64>> {
    let max = cell_max_variances(runs)?;
    Ok(runs
        .iter()
        .map(|run| {
            run.filled()
                .map(|(c, s)| cell_reproducibility(s.descriptor_variance, max[c]))
                .sum()
        })
        .collect())
}

/// Mean over reevaluated solutions of `1 - sigma_hat / sigma_max`, clamped
/// to `[0, 1]`, where `sigma_hat` is the RMS feature standard deviation.
pub fn average_reproducibility(dataset: &ReevalDataset, sigma_max: f64) -> Result<Option<f64>> {
    if dataset.entries.is_empty() {
        return Ok(None);
    }
    let mut total = 0.0;
    for e in &dataset.entries {
        let sigma_hat = estimators::descriptor_variance(&e.samples)?.sqrt();
        let v = if sigma_max > 0.0 { 1.0 - sigma_hat / sigma_max } else { 1.0 };
        total += v.clamp(0.0, 1.0);
    }
    Ok(Some(total / dataset.entries.len() as f64))
}

/// Mean corrected fitness over filled cells.
pub fn average_fitness(ca: &CorrectedArchive) -> Option<f64> {
    let n = ca.filled_cells();
    (n > 0).then(|| ca.filled().map(|(_, s)| s.fitness).sum::<f64>() / n as f64)
}

/// Mean over filled cells of the gap between the best attainable weighted
/// fitness and the cell's, floored at 0 per cell. Clipping at the feature
/// boundary can make a measured reproducibility slightly better than the
/// profile implies; the floor keeps such cells from offsetting real regret.
pub fn weighted_regret(ca: &CorrectedArchive, task: &TaskSpec, pref: &DeltaPreference) -> Option<f64> {
    let n = ca.filled_cells();
    if n == 0 {
        return None;
    }
    let best = task.optimum_band(pref, ReproducibilityEstimator::NegStd).best_value;
    let total: f64 = ca
        .filled()
        .map(|(_, s)| (best - weighted_fitness(s.fitness, s.reproducibility, pref)).max(0.0))
        .sum();
    Some(total / n as f64)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CellReport {
    pub cell_index: Vec<usize>,
    pub corrected_fitness: f64,
    pub reproducibility: f64,
    pub descriptor_variance: f64,
    pub cell_max_variance: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub corrected_qd_score: f64,
    pub reproducibility_score: f64,
    pub average_reproducibility: Option<f64>,
    pub average_fitness: Option<f64>,
    pub coverage: f64,
    pub weighted_regret: Option<f64>,
    pub filled_cells: usize,
    pub cells: Vec<CellReport>,
}

/// One run entering a comparison.
pub struct RunInput<'a> {
    pub dataset: &'a ReevalDataset,
    pub task: &'a TaskSpec,
    pub preference: DeltaPreference,
}

/// Builds the metric report of every run. The Reproducibility-Score
/// normalizers are pooled over all `runs`.
pub fn compare_runs(runs: &[RunInput<'_>]) -> Result<Vec<MetricReport>> {
    let corrected = runs.iter().map(|r| corrected_archive(r.dataset)).collect::<Result<Vec<_>>>()?;
    let refs: Vec<&CorrectedArchive> = corrected.iter().collect();
    let max = cell_max_variances(&refs)?;
    let scores = reproducibility_score(&refs)?;
    runs.iter()
        .zip(&corrected)
        .zip(scores)
        .map(|((run, ca), reproducibility_score)| {
            let cells = ca
                .filled()
                .map(|(c, s)| CellReport {
                    cell_index: ca.grid.unflatten(c),
                    corrected_fitness: s.fitness,
                    reproducibility: cell_reproducibility(s.descriptor_variance, max[c]),
                    descriptor_variance: s.descriptor_variance,
                    cell_max_variance: max[c],
                })
                .collect();
            Ok(MetricReport {
                corrected_qd_score: corrected_qd_score(ca, run.task.fitness_lower_bound()),
                reproducibility_score,
                average_reproducibility: average_reproducibility(run.dataset, run.task.sigma_max())?,
                average_fitness: average_fitness(ca),
                coverage: ca.coverage(),
                weighted_regret: weighted_regret(ca, run.task, &run.preference),
                filled_cells: ca.filled_cells(),
                cells,
            })
        })
        .collect()
}
