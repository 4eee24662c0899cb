//! Generation loops for the ten supported algorithms.
//!
//! Fixed-sampling algorithms evaluate every offspring the same number of
//! times before adding it. Archive-sampling (AS) algorithms give each
//! occupant one extra evaluation per generation, re-settle the archive with
//! the refreshed estimates, then spend the rest of the budget on offspring.
//!
//! Offspring are produced and evaluated in parallel; additions are applied
//! afterwards by one writer in offspring-index order.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::archive::{
    AdditionRule, Archive, EliteArchive, Outcome, ParetoArchive, DEFAULT_MAX_FRONT_SIZE,
};
use crate::error::{Result, UqdError};
use crate::estimators::EstimatorConfig;
use crate::exec::{self, Execution};
use crate::rng::{RngStream, StreamRole};
use crate::tasks::TaskSpec;
use crate::types::{DeltaPreference, Genotype, SolutionRecord};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AlgorithmKind {
    VanillaMe,
    MeSampling,
    MeSamplingReproducibility,
    MeLs,
    MeWeighted,
    MeDelta,
    VanillaAs,
    AsWeighted,
    AsDelta,
    MomeX,
}

impl AlgorithmKind {
    pub const ALL: [AlgorithmKind; 10] = [
        AlgorithmKind::VanillaMe,
        AlgorithmKind::MeSampling,
        AlgorithmKind::MeSamplingReproducibility,
        AlgorithmKind::MeLs,
        AlgorithmKind::MeWeighted,
        AlgorithmKind::MeDelta,
        AlgorithmKind::VanillaAs,
        AlgorithmKind::AsWeighted,
        AlgorithmKind::AsDelta,
        AlgorithmKind::MomeX,
    ];

    pub fn name(self) -> &'static str {
        match self {
            AlgorithmKind::VanillaMe => "vanilla_me",
            AlgorithmKind::MeSampling => "me_sampling",
            AlgorithmKind::MeSamplingReproducibility => "me_sampling_reproducibility",
            AlgorithmKind::MeLs => "me_ls",
            AlgorithmKind::MeWeighted => "me_weighted",
            AlgorithmKind::MeDelta => "me_delta",
            AlgorithmKind::VanillaAs => "vanilla_as",
            AlgorithmKind::AsWeighted => "as_weighted",
            AlgorithmKind::AsDelta => "as_delta",
            AlgorithmKind::MomeX => "mome_x",
        }
    }

    pub fn is_adaptive(self) -> bool {
        matches!(self, AlgorithmKind::VanillaAs | AlgorithmKind::AsWeighted | AlgorithmKind::AsDelta)
    }

    pub fn needs_preference(self) -> bool {
        matches!(
            self,
            AlgorithmKind::MeWeighted | AlgorithmKind::MeDelta | AlgorithmKind::AsWeighted | AlgorithmKind::AsDelta
        )
    }

    /// MOME-X keeps a preference only for projecting its archive afterwards.
    pub fn uses_preference(self) -> bool {
        self.needs_preference() || self == AlgorithmKind::MomeX
    }
}

impl fmt::Display for AlgorithmKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for AlgorithmKind {
    type Err = UqdError;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| UqdError::InvalidConfig(format!("unknown algorithm `{s}`")))
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MutationOperator {
    #[default]
    IsoLine,
    Gaussian,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MutationConfig {
    pub operator: MutationOperator,
    pub sigma_iso: f64,
    pub sigma_line: f64,
}

impl Default for MutationConfig {
    fn default() -> Self {
        Self { operator: MutationOperator::IsoLine, sigma_iso: 0.01, sigma_line: 0.1 }
    }
}

impl MutationConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.sigma_iso >= 0.0 && self.sigma_iso.is_finite()) {
            return Err(UqdError::InvalidConfig(format!("sigma_iso must be >= 0, got {}", self.sigma_iso)));
        }
        if !(self.sigma_line >= 0.0 && self.sigma_line.is_finite()) {
            return Err(UqdError::InvalidConfig(format!("sigma_line must be >= 0, got {}", self.sigma_line)));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AlgorithmConfig {
    pub algorithm: AlgorithmKind,
    /// Evaluations available per generation.
    pub sampling_size: usize,
    /// Evaluations per offspring for fixed-sampling algorithms.
    pub fixed_samples: usize,
    /// Evaluations per new offspring for AS algorithms.
    pub as_initial_samples: usize,
    /// Occupants per cell for AS algorithms.
    pub depth: usize,
    pub preference: Option<DeltaPreference>,
    pub generations: usize,
    pub mutation: MutationConfig,
    pub estimators: EstimatorConfig,
    pub max_front_size: usize,
    pub execution: Execution,
}

impl AlgorithmConfig {
    /// Desk-scale defaults: 4096 evaluations per generation, 250 generations.
    pub fn new(algorithm: AlgorithmKind) -> Self {
        Self {
            algorithm,
            sampling_size: 4096,
            fixed_samples: 32,
            as_initial_samples: 2,
            depth: 3,
            preference: None,
            generations: 250,
            mutation: MutationConfig::default(),
            estimators: EstimatorConfig::default(),
            max_front_size: DEFAULT_MAX_FRONT_SIZE,
            execution: Execution::default(),
        }
    }

    pub fn with_preference(mut self, pref: DeltaPreference) -> Self {
        self.preference = Some(pref);
        self
    }

    pub fn with_generations(mut self, generations: usize) -> Self {
        self.generations = generations;
        self
    }

    pub fn with_sampling_size(mut self, sampling_size: usize) -> Self {
        self.sampling_size = sampling_size;
        self
    }

    pub fn with_execution(mut self, execution: Execution) -> Self {
        self.execution = execution;
        self
    }

    /// Evaluations given to each newly created offspring.
    pub fn samples_per_offspring(&self) -> usize {
        match self.algorithm {
            AlgorithmKind::VanillaMe => 1,
            k if k.is_adaptive() => self.as_initial_samples,
            _ => self.fixed_samples,
        }
    }

    pub fn archive_depth(&self) -> usize {
        if self.algorithm.is_adaptive() {
            self.depth
        } else {
            1
        }
    }

    fn preference_required(&self) -> Result<DeltaPreference> {
        self.preference.ok_or_else(|| {
            UqdError::InvalidConfig(format!("{} needs a (delta_f, delta_r) preference", self.algorithm))
        })
    }

    pub fn rule(&self) -> Result<AdditionRule> {
        Ok(match self.algorithm {
            AlgorithmKind::VanillaMe | AlgorithmKind::MeSampling | AlgorithmKind::VanillaAs => AdditionRule::FitnessOnly,
            AlgorithmKind::MeSamplingReproducibility => AdditionRule::ReproducibilityOnly,
            AlgorithmKind::MeLs => AdditionRule::Ls,
            AlgorithmKind::MeWeighted | AlgorithmKind::AsWeighted => AdditionRule::Weighted(self.preference_required()?),
            AlgorithmKind::MeDelta | AlgorithmKind::AsDelta => AdditionRule::Delta(self.preference_required()?),
            AlgorithmKind::MomeX => AdditionRule::Pareto,
        })
    }

    pub fn validate(&self, task: &TaskSpec) -> Result<()> {
        let bad = |m: String| Err(UqdError::InvalidConfig(m));
        if self.sampling_size == 0 || self.fixed_samples == 0 || self.as_initial_samples == 0 || self.depth == 0 {
            return bad("sampling_size, fixed_samples, as_initial_samples and depth must be positive".into());
        }
        if self.max_front_size == 0 {
            return bad("max_front_size must be positive".into());
        }
        self.mutation.validate()?;
        if let Some(p) = &self.preference {
            p.validate()?;
        }
        self.rule()?;
        if self.algorithm.is_adaptive() {
            let capacity = task.grid.total_cells() * self.depth;
            if self.sampling_size <= capacity {
                return bad(format!(
                    "{} needs sampling_size > archive capacity ({capacity}), got {}",
                    self.algorithm, self.sampling_size
                ));
            }
        } else if self.sampling_size < self.samples_per_offspring() {
            return bad(format!(
                "sampling_size {} is below the {} samples each offspring needs",
                self.sampling_size,
                self.samples_per_offspring()
            ));
        }
        Ok(())
    }
}

/// Evaluation counts for one generation.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct GenerationBudget {
    pub offspring: usize,
    pub offspring_evals: usize,
    pub reevaluation_evals: usize,
    pub total: usize,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct BudgetLedger {
    pub generations: Vec<GenerationBudget>,
    pub cumulative: usize,
}

impl BudgetLedger {
    fn record(&mut self, offspring: usize, offspring_evals: usize, reevaluation_evals: usize) -> GenerationBudget {
        let g = GenerationBudget {
            offspring,
            offspring_evals,
            reevaluation_evals,
            total: offspring_evals + reevaluation_evals,
        };
        self.cumulative += g.total;
        self.generations.push(g);
        g
    }
}

/// Per-generation training-time summary.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub generation: usize,
    pub cumulative_evaluations: usize,
    pub offspring: usize,
    pub offspring_evals: usize,
    pub reevaluation_evals: usize,
    pub occupancy: usize,
    pub filled_cells: usize,
    pub max_fitness: f64,
    pub mean_fitness: f64,
    pub mean_reproducibility: f64,
}

impl TraceRow {
    pub const HEADER: [&'static str; 10] = [
        "generation",
        "cumulative_evaluations",
        "offspring",
        "offspring_evals",
        "reevaluation_evals",
        "occupancy",
        "filled_cells",
        "max_fitness",
        "mean_fitness",
        "mean_reproducibility",
    ];
}

/// Mutable state threaded through the generations of one run.
#[derive(Clone, Debug)]
pub struct ExperimentState {
    pub archive: Archive,
    pub ledger: BudgetLedger,
    pub generation: usize,
    pub next_id: u64,
    pub seed: u64,
}

impl ExperimentState {
    pub fn new(task: &TaskSpec, cfg: &AlgorithmConfig, seed: u64) -> Result<Self> {
        let archive = if cfg.algorithm == AlgorithmKind::MomeX {
            Archive::Pareto(ParetoArchive::new(task.grid.clone(), cfg.max_front_size)?)
        } else {
            Archive::Elite(EliteArchive::new(task.grid.clone(), cfg.archive_depth())?)
        };
        Ok(Self { archive, ledger: BudgetLedger::default(), generation: 0, next_id: 0, seed })
    }
}

#[derive(Clone, Debug)]
pub struct ExperimentResult {
    pub archive: Archive,
    pub ledger: BudgetLedger,
    pub trace: Vec<TraceRow>,
}

/// Initial genotype: fitness gene uniform in the task's initial range,
/// feature genes uniform in the box.
fn random_genotype<R: Rng + ?Sized>(task: &TaskSpec, rng: &mut R) -> Genotype {
    let (lo, hi) = task.genotype_bounds();
    let (f_lo, f_hi) = task.initial_fitness_gene;
    Genotype::new(
        (0..task.genotype_dim)
            .map(|i| if i == 0 { rng.random_range(f_lo..=f_hi) } else { rng.random_range(lo..=hi) })
            .collect(),
    )
}

/// Parent sampler built once per generation from a read-only archive.
enum Selector<'a> {
    Initial,
    Uniform(Vec<&'a SolutionRecord>),
    /// Cells chosen uniformly, members by crowding weight.
    Crowding(Vec<Vec<(&'a SolutionRecord, f64)>>),
}

impl<'a> Selector<'a> {
    fn new(archive: &'a Archive) -> Self {
        match archive {
            Archive::Elite(a) if !a.is_empty() => Selector::Uniform(a.occupants().collect()),
            Archive::Pareto(a) if a.occupancy() > 0 => Selector::Crowding(
                a.cells()
                    .filter(|(_, c)| !c.is_empty())
                    .map(|(_, c)| {
                        let w = crowding_weights(&c.crowding_distances());
                        c.front().iter().zip(w).collect()
                    })
                    .collect(),
            ),
            _ => Selector::Initial,
        }
    }

    fn pick<R: Rng + ?Sized>(&self, task: &TaskSpec, rng: &mut R) -> Genotype {
        match self {
            Selector::Initial => random_genotype(task, rng),
            Selector::Uniform(all) => all[rng.random_range(0..all.len())].genotype().clone(),
            Selector::Crowding(cells) => {
                let cell = &cells[rng.random_range(0..cells.len())];
                let total: f64 = cell.iter().map(|(_, w)| w).sum();
                if !(total > 0.0) {
                    return cell[rng.random_range(0..cell.len())].0.genotype().clone();
                }
                let mut x = rng.random::<f64>() * total;
                for (rec, w) in cell {
                    if x < *w {
                        return rec.genotype().clone();
                    }
                    x -= w;
                }
                cell[cell.len() - 1].0.genotype().clone()
            }
        }
    }
}

/// Selection weights from crowding distances: infinite (boundary)
/// distances are capped at twice the median finite distance of the cell.
/// Falls back to uniform weights when no finite positive reference exists.
pub fn crowding_weights(distances: &[f64]) -> Vec<f64> {
    let mut finite: Vec<f64> = distances.iter().copied().filter(|d| d.is_finite()).collect();
    if finite.is_empty() {
        return vec![1.0; distances.len()];
    }
    finite.sort_by(f64::total_cmp);
    let median = crate::estimators::median(&finite);
    if !(median > 0.0) {
        return vec![1.0; distances.len()];
    }
    distances.iter().map(|&d| if d.is_finite() { d } else { 2.0 * median }).collect()
}

/// Draws `count` parents uniformly over every occupant of the archive (all
/// depth slots; crowding-weighted within cells for Pareto archives). An
/// empty archive falls back to uniform genotypes in the task's box.
pub fn select_parents<R: Rng + ?Sized>(archive: &Archive, task: &TaskSpec, count: usize, rng: &mut R) -> Vec<Genotype> {
    let sel = Selector::new(archive);
    (0..count).map(|_| sel.pick(task, rng)).collect()
}

/// Variation operator. `iso_line` adds isotropic Gaussian noise plus a
/// Gaussian step along the line to `second_parent`; `gaussian` only the
/// isotropic part. The child is clamped to `[low, high]`.
pub fn mutate<R: Rng + ?Sized>(
    parent: &Genotype,
    cfg: &MutationConfig,
    second_parent: &Genotype,
    bounds: (f64, f64),
    rng: &mut R,
) -> Genotype {
    let p = parent.values();
    let values: Vec<f64> = match cfg.operator {
        MutationOperator::IsoLine => {
            let iso: Vec<f64> = (0..p.len()).map(|_| rng.sample(StandardNormal)).collect();
            let u: f64 = rng.sample(StandardNormal);
            p.iter()
                .zip(second_parent.values())
                .zip(iso)
                .map(|((&x, &y), e)| x + cfg.sigma_iso * e + cfg.sigma_line * u * (y - x))
                .collect()
        }
        MutationOperator::Gaussian => p
            .iter()
            .map(|&x| {
                let e: f64 = rng.sample(StandardNormal);
                x + cfg.sigma_iso * e
            })
            .collect(),
    };
    Genotype::clamped(values, bounds.0, bounds.1)
}

/// Creates, mutates and evaluates `count` offspring. Each offspring uses
/// its own streams keyed by `(generation, index)`. The first `extra`
/// offspring get one sample more than `samples_each`.
fn make_offspring(
    state: &ExperimentState,
    task: &TaskSpec,
    cfg: &AlgorithmConfig,
    count: usize,
    samples_each: usize,
    extra: usize,
) -> Result<Vec<SolutionRecord>> {
    let selector = Selector::new(&state.archive);
    let gen = state.generation as u64;
    let seed = state.seed;
    let bounds = task.genotype_bounds();
    let id_base = state.next_id;
    let built = exec::map_indexed(cfg.execution, count, |i| {
        let key = [gen, i as u64];
        let child = match selector {
            Selector::Initial => {
                let mut rng = RngStream::keyed(seed, StreamRole::Initial, &key).rng();
                let a = random_genotype(task, &mut rng);
                let b = random_genotype(task, &mut rng);
                let mut m = RngStream::keyed(seed, StreamRole::Mutation, &key).rng();
                mutate(&a, &cfg.mutation, &b, bounds, &mut m)
            }
            _ => {
                let mut rng = RngStream::keyed(seed, StreamRole::Selection, &key).rng();
                let a = selector.pick(task, &mut rng);
                let b = selector.pick(task, &mut rng);
                let mut m = RngStream::keyed(seed, StreamRole::Mutation, &key).rng();
                mutate(&a, &cfg.mutation, &b, bounds, &mut m)
            }
        };
        let mut noise = RngStream::keyed(seed, StreamRole::Evaluation, &key).rng();
        let n = samples_each + usize::from(i < extra);
        let samples = (0..n)
            .map(|_| task.evaluate(&child, &mut noise))
            .collect::<Result<Vec<_>>>()?;
        SolutionRecord::from_samples(id_base + i as u64, child, samples, &cfg.estimators)
    });
    built.into_iter().collect()
}

fn add_to(archive: &mut Archive, rec: SolutionRecord, rule: &AdditionRule) -> Result<Outcome> {
    match archive {
        Archive::Elite(a) => a.add(rec, rule),
        Archive::Pareto(a) => a.add(rec),
    }
}

/// One fixed-sampling generation.
pub fn run_generation_fixed(state: &mut ExperimentState, task: &TaskSpec, cfg: &AlgorithmConfig) -> Result<GenerationBudget> {
    if cfg.algorithm.is_adaptive() {
        return Err(UqdError::InvalidConfig(format!("{} is not a fixed-sampling algorithm", cfg.algorithm)));
    }
    let rule = cfg.rule()?;
    let spo = cfg.samples_per_offspring();
    let count = cfg.sampling_size / spo;
    let offspring = make_offspring(state, task, cfg, count, spo, 0)?;
    for rec in offspring {
        add_to(&mut state.archive, rec, &rule)?;
    }
    state.next_id += count as u64;
    state.generation += 1;
    Ok(state.ledger.record(count, count * spo, 0))
}

/// Order in which AS re-adds occupants: descending previous score for score
/// rules, cascade order (slot, then cell) for the delta rule.
fn resettle_order(rule: &AdditionRule, drained: &mut [(usize, usize, SolutionRecord)]) {
    match rule {
        AdditionRule::Delta(_) => drained.sort_by_key(|(cell, slot, _)| (*slot, *cell)),
        _ => {
            let score = |r: &SolutionRecord| rule.score(r).unwrap_or(f64::NEG_INFINITY);
            drained.sort_by(|a, b| {
                score(&b.2)
                    .total_cmp(&score(&a.2))
                    .then((a.1, a.0).cmp(&(b.1, b.0)))
            });
        }
    }
}

/// Re-adds `records` into `archive` in the given order and returns the ids
/// of every record that did not survive.
pub fn resettle(
    archive: &mut EliteArchive,
    records: Vec<SolutionRecord>,
    rule: &AdditionRule,
) -> Result<Vec<u64>> {
    let mut lost = Vec::new();
    for rec in records {
        let id = rec.id();
        match archive.add(rec, rule)? {
            Outcome::Added => {}
            Outcome::Replaced(removed) => lost.extend(removed.iter().map(SolutionRecord::id)),
            Outcome::Rejected => lost.push(id),
        }
    }
    Ok(lost)
}

/// One archive-sampling generation: reevaluate every occupant once,
/// re-settle the archive, then spend the remaining budget on offspring.
pub fn run_generation_as(state: &mut ExperimentState, task: &TaskSpec, cfg: &AlgorithmConfig) -> Result<GenerationBudget> {
    if !cfg.algorithm.is_adaptive() {
        return Err(UqdError::InvalidConfig(format!("{} is not an archive-sampling algorithm", cfg.algorithm)));
    }
    let rule = cfg.rule()?;
    let Archive::Elite(archive) = &mut state.archive else {
        return Err(UqdError::InvalidConfig("archive-sampling needs an elite archive".into()));
    };
    let gen = state.generation as u64;
    let seed = state.seed;

    let mut drained = archive.drain();
    let reevals = drained.len();
    // Ordering uses the scores from before this generation's sample.
    resettle_order(&rule, &mut drained);
    let estimators = cfg.estimators;
    let refreshed = exec::map_mut(cfg.execution, &mut drained, |_, (_, _, rec)| {
        let mut rng = RngStream::keyed(seed, StreamRole::Resample, &[gen, rec.id()]).rng();
        let sample = task.evaluate(rec.genotype(), &mut rng)?;
        rec.push_sample(sample, &estimators)
    });
    refreshed.into_iter().collect::<Result<Vec<()>>>()?;
    resettle(archive, drained.into_iter().map(|(_, _, r)| r).collect(), &rule)?;

    // The remainder of the budget goes to the first offspring as one
    // extra sample each, so the generation spends exactly `sampling_size`.
    let spo = cfg.samples_per_offspring();
    let remaining = cfg.sampling_size.saturating_sub(reevals);
    let count = remaining / spo;
    let extra = if count > 0 { remaining - count * spo } else { 0 };
    let offspring = make_offspring(state, task, cfg, count, spo, extra)?;
    for rec in offspring {
        add_to(&mut state.archive, rec, &rule)?;
    }
    state.next_id += count as u64;
    state.generation += 1;
    Ok(state.ledger.record(count, count * spo + extra, reevals))
}

/// Runs `cfg.generations` generations from an empty archive.
pub fn run_experiment(task: &TaskSpec, cfg: &AlgorithmConfig, seed: u64) -> Result<ExperimentResult> {
    cfg.validate(task)?;
    let mut state = ExperimentState::new(task, cfg, seed)?;
    let mut trace = Vec::with_capacity(cfg.generations);
    for _ in 0..cfg.generations {
        let budget = if cfg.algorithm.is_adaptive() {
            run_generation_as(&mut state, task, cfg)?
        } else {
            run_generation_fixed(&mut state, task, cfg)?
        };
        debug_assert!(budget.total <= cfg.sampling_size);
        trace.push(trace_row(&state, budget));
    }
    Ok(ExperimentResult { archive: state.archive, ledger: state.ledger, trace })
}

fn trace_row(state: &ExperimentState, budget: GenerationBudget) -> TraceRow {
    let mut n = 0usize;
    let mut max_f = f64::NEG_INFINITY;
    let mut sum_f = 0.0;
    let mut sum_r = 0.0;
    for r in state.archive.occupants() {
        n += 1;
        max_f = max_f.max(r.est_fitness());
        sum_f += r.est_fitness();
        sum_r += r.est_reproducibility();
    }
    let (max_fitness, mean_fitness, mean_reproducibility) = if n == 0 {
        (f64::NAN, f64::NAN, f64::NAN)
    } else {
        (max_f, sum_f / n as f64, sum_r / n as f64)
    };
    TraceRow {
        generation: state.generation - 1,
        cumulative_evaluations: state.ledger.cumulative,
        offspring: budget.offspring,
        offspring_evals: budget.offspring_evals,
        reevaluation_evals: budget.reevaluation_evals,
        occupancy: state.archive.occupancy(),
        filled_cells: state.archive.filled_cells(),
        max_fitness,
        mean_fitness,
        mean_reproducibility,
    }
}
