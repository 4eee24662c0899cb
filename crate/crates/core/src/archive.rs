//! Grid archives over feature space and their addition rules.
//!
//! [`EliteArchive`] holds up to `depth` occupants per cell. For score-based
//! rules the occupants are kept sorted by non-increasing score; for the
//! delta rule they are kept in cascade order, where position 0 is the most
//! senior elite. [`ParetoArchive`] holds a bounded Pareto front per cell over
//! `(est_fitness, est_reproducibility)`.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::error::{Result, UqdError};
use crate::types::{DeltaPreference, SolutionRecord};

/// Default capacity of a Pareto cell.
pub const DEFAULT_MAX_FRONT_SIZE: usize = 6;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub feature_mins: Vec<f64>,
    pub feature_maxs: Vec<f64>,
    pub cells_per_dim: Vec<usize>,
}

impl GridSpec {
    pub fn new(feature_mins: Vec<f64>, feature_maxs: Vec<f64>, cells_per_dim: Vec<usize>) -> Result<Self> {
        let grid = Self { feature_mins, feature_maxs, cells_per_dim };
        grid.validate()?;
        Ok(grid)
    }

    /// Uniform grid on `[0, 1]^dims` with `cells` cells per dimension.
    pub fn unit(dims: usize, cells: usize) -> Self {
        Self {
            feature_mins: vec![0.0; dims],
            feature_maxs: vec![1.0; dims],
            cells_per_dim: vec![cells; dims],
        }
    }

    pub fn validate(&self) -> Result<()> {
        let d = self.feature_mins.len();
        if d == 0 || self.feature_maxs.len() != d || self.cells_per_dim.len() != d {
            return Err(UqdError::InvalidConfig(
                "grid bounds and cell counts must share a non-zero dimension".into(),
            ));
        }
        for j in 0..d {
            if !(self.feature_mins[j] < self.feature_maxs[j]) {
                return Err(UqdError::InvalidConfig(format!(
                    "grid dimension {j}: min {} must be below max {}",
                    self.feature_mins[j], self.feature_maxs[j]
                )));
            }
            if self.cells_per_dim[j] == 0 {
                return Err(UqdError::InvalidConfig(format!("grid dimension {j} has no cells")));
            }
        }
        Ok(())
    }

    pub fn dims(&self) -> usize {
        self.cells_per_dim.len()
    }

    pub fn total_cells(&self) -> usize {
        self.cells_per_dim.iter().product()
    }

    /// Per-dimension cell index; out-of-range features clamp to edge cells.
    pub fn cell_index(&self, features: &[f64]) -> Vec<usize> {
        features
            .iter()
            .zip(&self.feature_mins)
            .zip(&self.feature_maxs)
            .zip(&self.cells_per_dim)
            .map(|(((&f, &lo), &hi), &n)| {
                let scaled = ((f - lo) / (hi - lo) * n as f64).floor();
                if scaled.is_nan() || scaled < 0.0 {
                    0
                } else {
                    (scaled as usize).min(n - 1)
                }
            })
            .collect()
    }

    /// Row-major flat index; the last dimension varies fastest.
    pub fn flatten(&self, index: &[usize]) -> usize {
        index
            .iter()
            .zip(&self.cells_per_dim)
            .fold(0, |acc, (&i, &n)| acc * n + i)
    }

    pub fn unflatten(&self, mut flat: usize) -> Vec<usize> {
        let mut index = vec![0; self.dims()];
        for (slot, &n) in index.iter_mut().zip(&self.cells_per_dim).rev() {
            *slot = flat % n;
            flat /= n;
        }
        index
    }

    pub fn flat_cell(&self, features: &[f64]) -> usize {
        self.flatten(&self.cell_index(features))
    }

    /// Centre of a cell in feature space.
    pub fn cell_center(&self, index: &[usize]) -> Vec<f64> {
        index
            .iter()
            .enumerate()
            .map(|(j, &i)| {
                let w = (self.feature_maxs[j] - self.feature_mins[j]) / self.cells_per_dim[j] as f64;
                self.feature_mins[j] + (i as f64 + 0.5) * w
            })
            .collect()
    }
}

/// Per-dimension cell index of `features` in `grid`.
pub fn cell_index(features: &[f64], grid: &GridSpec) -> Vec<usize> {
    grid.cell_index(features)
}

/// Adjusted fitness `f + ((delta_f + rho) / (delta_r + rho)) * r`.
pub fn weighted_fitness(f: f64, r: f64, pref: &DeltaPreference) -> f64 {
    f + pref.coefficient() * r
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DeltaDecision {
    ReplaceElite,
    KeepElite,
}

/// Three-region replacement test between a candidate and an elite, each
/// given as `(fitness, reproducibility)`. All inequalities are inclusive.
pub fn delta_compare(candidate: (f64, f64), elite: (f64, f64), pref: &DeltaPreference) -> DeltaDecision {
    let (fi, ri) = candidate;
    let (fe, re) = elite;
    let clear_fitness_gain = fi >= fe + pref.delta_f;
    let no_worse = fi >= fe && ri >= re;
    let compensated = fi >= fe - pref.delta_f && ri >= re + pref.delta_r;
    if clear_fitness_gain || no_worse || compensated {
        DeltaDecision::ReplaceElite
    } else {
        DeltaDecision::KeepElite
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "snake_case")]
pub enum AdditionRule {
    FitnessOnly,
    ReproducibilityOnly,
    /// Replace only when neither fitness nor reproducibility is worse.
    Ls,
    Weighted(DeltaPreference),
    Delta(DeltaPreference),
    Pareto,
}

impl AdditionRule {
    /// Ranking score for score-based rules, `None` for the others.
    pub fn score(&self, rec: &SolutionRecord) -> Option<f64> {
        match self {
            AdditionRule::FitnessOnly => Some(rec.est_fitness()),
            AdditionRule::ReproducibilityOnly => Some(rec.est_reproducibility()),
            AdditionRule::Weighted(p) => Some(weighted_fitness(rec.est_fitness(), rec.est_reproducibility(), p)),
            AdditionRule::Ls | AdditionRule::Delta(_) | AdditionRule::Pareto => None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            AdditionRule::Weighted(p) | AdditionRule::Delta(p) => p.validate(),
            _ => Ok(()),
        }
    }

    /// Whether `candidate` displaces `elite` in a single-slot comparison.
    fn replaces(&self, candidate: &SolutionRecord, elite: &SolutionRecord) -> bool {
        match self {
            AdditionRule::Ls => {
                candidate.est_fitness() >= elite.est_fitness()
                    && candidate.est_reproducibility() >= elite.est_reproducibility()
            }
            AdditionRule::Delta(p) => {
                delta_compare(objectives(candidate), objectives(elite), p) == DeltaDecision::ReplaceElite
            }
            AdditionRule::Pareto => false,
            scored => scored.score(candidate) > scored.score(elite),
        }
    }
}

fn objectives(rec: &SolutionRecord) -> (f64, f64) {
    (rec.est_fitness(), rec.est_reproducibility())
}

/// Result of an addition attempt.
#[derive(Clone, Debug, PartialEq)]
pub enum Outcome {
    /// The candidate entered the cell and nothing left it.
    Added,
    /// The candidate entered the cell and these records left the archive.
    Replaced(Vec<SolutionRecord>),
    /// The candidate was not stored.
    Rejected,
}

impl Outcome {
    pub fn accepted(&self) -> bool {
        !matches!(self, Outcome::Rejected)
    }

    pub fn removed(&self) -> &[SolutionRecord] {
        match self {
            Outcome::Replaced(v) => v,
            _ => &[],
        }
    }
}

fn require_samples(rec: &SolutionRecord) -> Result<()> {
    if rec.sample_count() == 0 || rec.samples().is_empty() {
        return Err(UqdError::EmptySamples);
    }
    Ok(())
}

/// Grid archive with `depth` occupants per cell.
#[derive(Clone, Debug, PartialEq)]
pub struct EliteArchive {
    grid: GridSpec,
    depth: usize,
    cells: Vec<Vec<SolutionRecord>>,
}

impl EliteArchive {
    pub fn new(grid: GridSpec, depth: usize) -> Result<Self> {
        grid.validate()?;
        if depth == 0 {
            return Err(UqdError::InvalidConfig("archive depth must be >= 1".into()));
        }
        let cells = vec![Vec::new(); grid.total_cells()];
        Ok(Self { grid, depth, cells })
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn cell(&self, flat: usize) -> &[SolutionRecord] {
        &self.cells[flat]
    }

    pub fn cells(&self) -> impl Iterator<Item = (usize, &[SolutionRecord])> {
        self.cells.iter().enumerate().map(|(i, c)| (i, c.as_slice()))
    }

    /// Every occupant, in cell order then slot order.
    pub fn occupants(&self) -> impl Iterator<Item = &SolutionRecord> {
        self.cells.iter().flatten()
    }

    /// The slot-0 record of every non-empty cell.
    pub fn elites(&self) -> impl Iterator<Item = (usize, &SolutionRecord)> {
        self.cells.iter().enumerate().filter_map(|(i, c)| c.first().map(|r| (i, r)))
    }

    pub fn occupancy(&self) -> usize {
        self.cells.iter().map(Vec::len).sum()
    }

    pub fn filled_cells(&self) -> usize {
        self.cells.iter().filter(|c| !c.is_empty()).count()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.iter().all(Vec::is_empty)
    }

    /// Removes and returns every occupant as `(flat cell, slot, record)`.
    pub fn drain(&mut self) -> Vec<(usize, usize, SolutionRecord)> {
        let mut out = Vec::with_capacity(self.occupancy());
        for (flat, cell) in self.cells.iter_mut().enumerate() {
            out.extend(cell.drain(..).enumerate().map(|(slot, r)| (flat, slot, r)));
        }
        out
    }

    /// Places a record at the end of a cell without applying any rule.
    /// Used when restoring archives from storage.
    pub fn insert_raw(&mut self, flat: usize, rec: SolutionRecord) -> Result<()> {
        let cell = self
            .cells
            .get_mut(flat)
            .ok_or_else(|| UqdError::InvalidInput(format!("cell {flat} outside grid")))?;
        if cell.len() >= self.depth {
            return Err(UqdError::InvalidInput(format!("cell {flat} already holds {} records", cell.len())));
        }
        cell.push(rec);
        Ok(())
    }

    fn target_cell(&self, candidate: &SolutionRecord) -> Result<usize> {
        if candidate.est_features().len() != self.grid.dims() {
            return Err(UqdError::DimensionMismatch {
                expected: self.grid.dims(),
                actual: candidate.est_features().len(),
            });
        }
        Ok(self.grid.flat_cell(candidate.est_features()))
    }

    /// Adds under `rule`, dispatching on depth: single-slot comparison when
    /// `depth == 1`, sorted insertion for score rules and the cascade for
    /// the delta rule otherwise.
    pub fn add(&mut self, candidate: SolutionRecord, rule: &AdditionRule) -> Result<Outcome> {
        match (self.depth, rule) {
            (_, AdditionRule::Pareto) => Err(UqdError::InvalidConfig(
                "the pareto rule needs a ParetoArchive".into(),
            )),
            (1, _) => self.add_single(candidate, rule),
            (_, AdditionRule::Delta(p)) => self.add_delta_depth(candidate, p),
            (_, AdditionRule::Ls) => Err(UqdError::InvalidConfig(
                "the ls rule is only defined for depth 1".into(),
            )),
            _ => self.add_scored_depth(candidate, rule),
        }
    }

    /// Single-elite addition. Requires `depth == 1`.
    pub fn add_single(&mut self, candidate: SolutionRecord, rule: &AdditionRule) -> Result<Outcome> {
        require_samples(&candidate)?;
        rule.validate()?;
        if self.depth != 1 {
            return Err(UqdError::InvalidConfig("add_single needs a depth-1 archive".into()));
        }
        if matches!(rule, AdditionRule::Pareto) {
            return Err(UqdError::InvalidConfig("the pareto rule needs a ParetoArchive".into()));
        }
        let flat = self.target_cell(&candidate)?;
        let cell = &mut self.cells[flat];
        match cell.first() {
            None => {
                cell.push(candidate);
                Ok(Outcome::Added)
            }
            Some(elite) if rule.replaces(&candidate, elite) => {
                let old = std::mem::replace(&mut cell[0], candidate);
                Ok(Outcome::Replaced(vec![old]))
            }
            Some(_) => Ok(Outcome::Rejected),
        }
    }

    /// Sorted insertion for score rules. Equal scores keep the incumbent
    /// ahead of the candidate; overflow evicts the last occupant.
    pub fn add_scored_depth(&mut self, candidate: SolutionRecord, rule: &AdditionRule) -> Result<Outcome> {
        require_samples(&candidate)?;
        rule.validate()?;
        let Some(score) = rule.score(&candidate) else {
            return Err(UqdError::InvalidConfig(format!("{rule:?} is not a score rule")));
        };
        let flat = self.target_cell(&candidate)?;
        let depth = self.depth;
        let cell = &mut self.cells[flat];
        let pos = cell.partition_point(|r| rule.score(r).unwrap_or(f64::NEG_INFINITY) >= score);
        if pos >= depth {
            return Ok(Outcome::Rejected);
        }
        cell.insert(pos, candidate);
        if cell.len() > depth {
            let evicted = cell.pop().expect("overfull cell");
            Ok(Outcome::Replaced(vec![evicted]))
        } else {
            Ok(Outcome::Added)
        }
    }

    /// Cascade insertion for the delta rule. The candidate walks the cell
    /// from slot 0; on the first occupant it displaces it takes that slot and
    /// the displaced occupant continues the walk against the lower slots.
    /// The record left at the end is appended if the cell has room and
    /// evicted otherwise.
    pub fn add_delta_depth(&mut self, candidate: SolutionRecord, pref: &DeltaPreference) -> Result<Outcome> {
        require_samples(&candidate)?;
        pref.validate()?;
        let flat = self.target_cell(&candidate)?;
        let depth = self.depth;
        let cell = &mut self.cells[flat];
        let result = cascade_insert(cell, candidate, depth, |c, e| {
            delta_compare(objectives(c), objectives(e), pref) == DeltaDecision::ReplaceElite
        });
        Ok(match result {
            Cascade::Appended { .. } => Outcome::Added,
            Cascade::Evicted(rec) => Outcome::Replaced(vec![rec]),
            Cascade::Rejected(_) => Outcome::Rejected,
        })
    }
}

/// Result of [`cascade_insert`].
#[derive(Debug, PartialEq)]
pub enum Cascade<T> {
    /// The cell had room; `displaced` tells whether any occupant moved.
    Appended { displaced: bool },
    /// The final displaced occupant fell out of a full cell.
    Evicted(T),
    /// The candidate displaced nobody and the cell is full.
    Rejected(T),
}

/// Cascade walk over `cell` with a generic replacement test
/// `replaces(challenger, occupant)`.
pub fn cascade_insert<T>(
    cell: &mut Vec<T>,
    candidate: T,
    depth: usize,
    replaces: impl Fn(&T, &T) -> bool,
) -> Cascade<T> {
    let mut current = candidate;
    let mut displaced = false;
    for slot in cell.iter_mut() {
        if replaces(&current, slot) {
            std::mem::swap(&mut current, slot);
            displaced = true;
        }
    }
    if cell.len() < depth {
        cell.push(current);
        Cascade::Appended { displaced }
    } else if displaced {
        Cascade::Evicted(current)
    } else {
        Cascade::Rejected(current)
    }
}

/// Per-cell Pareto front over `(est_fitness, est_reproducibility)`. Members
/// are stored in insertion order.
#[derive(Clone, Debug, PartialEq)]
pub struct ParetoCell {
    front: Vec<SolutionRecord>,
    max_front_size: usize,
}

/// `a` is at least as good as `b` on both objectives.
fn weakly_dominates(a: (f64, f64), b: (f64, f64)) -> bool {
    a.0 >= b.0 && a.1 >= b.1
}

impl ParetoCell {
    pub fn new(max_front_size: usize) -> Self {
        Self { front: Vec::new(), max_front_size: max_front_size.max(1) }
    }

    pub fn front(&self) -> &[SolutionRecord] {
        &self.front
    }

    pub fn max_front_size(&self) -> usize {
        self.max_front_size
    }

    pub fn is_empty(&self) -> bool {
        self.front.is_empty()
    }

    pub fn len(&self) -> usize {
        self.front.len()
    }

    pub(crate) fn push_raw(&mut self, rec: SolutionRecord) {
        self.front.push(rec);
    }

    /// Rejects the candidate when a member is at least as good on both
    /// objectives (exact duplicates included). Otherwise the candidate joins
    /// and every member it dominates leaves. Overflow evicts the member with
    /// the smallest crowding distance, the most recent one on ties.
    pub fn add(&mut self, candidate: SolutionRecord) -> Result<Outcome> {
        require_samples(&candidate)?;
        let c = objectives(&candidate);
        if self.front.iter().any(|m| weakly_dominates(objectives(m), c)) {
            return Ok(Outcome::Rejected);
        }
        let mut removed = Vec::new();
        let mut kept = Vec::with_capacity(self.front.len() + 1);
        for m in self.front.drain(..) {
            if weakly_dominates(c, objectives(&m)) {
                removed.push(m);
            } else {
                kept.push(m);
            }
        }
        self.front = kept;
        self.front.push(candidate);
        if self.front.len() > self.max_front_size {
            let dist = self.crowding_distances();
            let mut victim = 0;
            for (i, &d) in dist.iter().enumerate() {
                if d <= dist[victim] {
                    victim = i;
                }
            }
            removed.push(self.front.remove(victim));
        }
        Ok(if removed.is_empty() { Outcome::Added } else { Outcome::Replaced(removed) })
    }

    /// Crowding distance of every member, in front order. Objective ranges
    /// are normalized within this front; the extremes of each objective get
    /// `+inf`.
    pub fn crowding_distances(&self) -> Vec<f64> {
        let points: Vec<(f64, f64)> = self.front.iter().map(objectives).collect();
        crowding_distances(&points)
    }
}

/// Crowding distances of a set of two-objective points.
pub fn crowding_distances(points: &[(f64, f64)]) -> Vec<f64> {
    let n = points.len();
    let mut dist = vec![0.0; n];
    if n <= 2 {
        return vec![f64::INFINITY; n];
    }
    let getters: [fn(&(f64, f64)) -> f64; 2] = [|p| p.0, |p| p.1];
    for get in getters {
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| get(&points[a]).total_cmp(&get(&points[b])).then(a.cmp(&b)));
        let lo = get(&points[order[0]]);
        let hi = get(&points[order[n - 1]]);
        dist[order[0]] = f64::INFINITY;
        dist[order[n - 1]] = f64::INFINITY;
        let span = hi - lo;
        if span > 0.0 {
            for k in 1..n - 1 {
                let gap = get(&points[order[k + 1]]) - get(&points[order[k - 1]]);
                dist[order[k]] += gap / span;
            }
        }
    }
    dist
}

/// Grid of Pareto cells.
#[derive(Clone, Debug, PartialEq)]
pub struct ParetoArchive {
    grid: GridSpec,
    max_front_size: usize,
    cells: Vec<ParetoCell>,
}

impl ParetoArchive {
    pub fn new(grid: GridSpec, max_front_size: usize) -> Result<Self> {
        grid.validate()?;
        if max_front_size == 0 {
            return Err(UqdError::InvalidConfig("max_front_size must be >= 1".into()));
        }
        let cells = vec![ParetoCell::new(max_front_size); grid.total_cells()];
        Ok(Self { grid, max_front_size, cells })
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn max_front_size(&self) -> usize {
        self.max_front_size
    }

    pub fn cell(&self, flat: usize) -> &ParetoCell {
        &self.cells[flat]
    }

    pub fn cells(&self) -> impl Iterator<Item = (usize, &ParetoCell)> {
        self.cells.iter().enumerate()
    }

    pub fn occupants(&self) -> impl Iterator<Item = &SolutionRecord> {
        self.cells.iter().flat_map(|c| c.front.iter())
    }

    pub fn occupancy(&self) -> usize {
        self.cells.iter().map(ParetoCell::len).sum()
    }

    pub fn filled_cells(&self) -> usize {
        self.cells.iter().filter(|c| !c.is_empty()).count()
    }

    pub fn add(&mut self, candidate: SolutionRecord) -> Result<Outcome> {
        if candidate.est_features().len() != self.grid.dims() {
            return Err(UqdError::DimensionMismatch {
                expected: self.grid.dims(),
                actual: candidate.est_features().len(),
            });
        }
        let flat = self.grid.flat_cell(candidate.est_features());
        self.cells[flat].add(candidate)
    }

    pub(crate) fn insert_raw(&mut self, flat: usize, rec: SolutionRecord) -> Result<()> {
        let cell = self
            .cells
            .get_mut(flat)
            .ok_or_else(|| UqdError::InvalidInput(format!("cell {flat} outside grid")))?;
        if cell.len() >= self.max_front_size {
            return Err(UqdError::InvalidInput(format!("cell {flat} front is full")));
        }
        cell.push_raw(rec);
        Ok(())
    }

    /// One record per non-empty cell: the front member with the largest
    /// weighted fitness under `pref`. Ties prefer higher reproducibility,
    /// then earlier insertion.
    pub fn project(&self, pref: &DeltaPreference) -> Result<EliteArchive> {
        pref.validate()?;
        let mut out = EliteArchive::new(self.grid.clone(), 1)?;
        for (flat, cell) in self.cells() {
            if let Some(best) = project_front(cell.front(), pref) {
                out.cells[flat].push(best.clone());
            }
        }
        Ok(out)
    }
}

/// Argmax of the weighted fitness over a front.
pub fn project_front<'a>(front: &'a [SolutionRecord], pref: &DeltaPreference) -> Option<&'a SolutionRecord> {
    let key = |r: &SolutionRecord| (weighted_fitness(r.est_fitness(), r.est_reproducibility(), pref), r.est_reproducibility());
    let mut best: Option<&SolutionRecord> = None;
    for r in front {
        best = match best {
            None => Some(r),
            Some(b) => {
                let (wr, rr) = key(r);
                let (wb, rb) = key(b);
                match wr.total_cmp(&wb).then(rr.total_cmp(&rb)) {
                    Ordering::Greater => Some(r),
                    _ => Some(b),
                }
            }
        };
    }
    best
}

/// Projects a multi-objective archive onto a single-elite archive.
pub fn project_pareto_archive(archive: &ParetoArchive, pref: &DeltaPreference) -> Result<EliteArchive> {
    archive.project(pref)
}

/// Either kind of archive, as produced by the generation loops.
#[derive(Clone, Debug, PartialEq)]
pub enum Archive {
    Elite(EliteArchive),
    Pareto(ParetoArchive),
}

impl Archive {
    pub fn grid(&self) -> &GridSpec {
        match self {
            Archive::Elite(a) => a.grid(),
            Archive::Pareto(a) => a.grid(),
        }
    }

    pub fn occupancy(&self) -> usize {
        match self {
            Archive::Elite(a) => a.occupancy(),
            Archive::Pareto(a) => a.occupancy(),
        }
    }

    pub fn filled_cells(&self) -> usize {
        match self {
            Archive::Elite(a) => a.filled_cells(),
            Archive::Pareto(a) => a.filled_cells(),
        }
    }

    pub fn occupants(&self) -> Box<dyn Iterator<Item = &SolutionRecord> + '_> {
        match self {
            Archive::Elite(a) => Box::new(a.occupants()),
            Archive::Pareto(a) => Box::new(a.occupants()),
        }
    }

    /// Occupants grouped by cell as `(flat cell, slot, record)`.
    pub fn slots(&self) -> Vec<(usize, usize, &SolutionRecord)> {
        match self {
            Archive::Elite(a) => a
                .cells()
                .flat_map(|(i, c)| c.iter().enumerate().map(move |(s, r)| (i, s, r)))
                .collect(),
            Archive::Pareto(a) => a
                .cells()
                .flat_map(|(i, c)| c.front().iter().enumerate().map(move |(s, r)| (i, s, r)))
                .collect(),
        }
    }

    pub fn as_elite(&self) -> Option<&EliteArchive> {
        match self {
            Archive::Elite(a) => Some(a),
            Archive::Pareto(_) => None,
        }
    }

    pub fn as_pareto(&self) -> Option<&ParetoArchive> {
        match self {
            Archive::Pareto(a) => Some(a),
            Archive::Elite(_) => None,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimators::EstimatorConfig;
    use crate::types::{EvaluationSample, Genotype};

    /// Record with chosen estimates. The single sample pins the features;
    /// the estimates are then overwritten so tests can pick any (f, r).
    fn rec(id: u64, f: f64, r: f64, features: [f64; 2]) -> SolutionRecord {
        let s = vec![EvaluationSample::new(f, features.to_vec())];
        let base = SolutionRecord::from_samples(id, Genotype::new(vec![f, features[0], features[1]]), s, &EstimatorConfig::default()).unwrap();
        SolutionRecord::restored(id, base.genotype().clone(), base.samples().to_vec(), 1, f, features.to_vec(), r)
    }

    fn pref(df: f64, dr: f64) -> DeltaPreference {
        DeltaPreference::new(df, dr, 1e-12).unwrap()
    }

    #[test]
    fn cell_index_examples() {
        let g = GridSpec::unit(2, 32);
        assert_eq!(g.cell_index(&[0.5, 0.5]), vec![16, 16]);
        assert_eq!(g.cell_index(&[0.0, 0.0]), vec![0, 0]);
        assert_eq!(g.cell_index(&[1.0, 1.0]), vec![31, 31]);
        assert_eq!(g.cell_index(&[1.7, -0.2]), vec![31, 0]);
    }

    #[test]
    fn flatten_roundtrip() {
        let g = GridSpec::new(vec![0.0, -1.0], vec![1.0, 1.0], vec![4, 7]).unwrap();
        for flat in 0..g.total_cells() {
            assert_eq!(g.flatten(&g.unflatten(flat)), flat);
        }
        assert_eq!(g.flatten(&[1, 2]), 9);
    }

    #[test]
    fn grid_validation() {
        assert!(GridSpec::new(vec![0.0], vec![0.0], vec![4]).is_err());
        assert!(GridSpec::new(vec![0.0], vec![1.0], vec![0]).is_err());
        assert!(GridSpec::new(vec![0.0, 0.0], vec![1.0], vec![4, 4]).is_err());
    }

    #[test]
    fn weighted_fitness_examples() {
        let p = pref(2.0, 1.0);
        assert!((weighted_fitness(10.0, -2.0, &p) - 6.0).abs() < 1e-9);
        let zero_df = pref(0.0, 1.0);
        assert!(weighted_fitness(1.0, -0.1, &zero_df) > weighted_fitness(1.0, -0.2, &zero_df));
        let zero_dr = DeltaPreference::new(1.0, 0.0, 1e-9).unwrap();
        let v = weighted_fitness(0.0, -1.0, &zero_dr);
        assert!(v.is_finite());
        assert!((v + 1e9).abs() / 1e9 < 1e-6);
    }

    #[test]
    fn delta_compare_examples() {
        let p = pref(2.0, 0.5);
        assert_eq!(delta_compare((12.0, -100.0), (10.0, -1.0), &p), DeltaDecision::ReplaceElite);
        assert_eq!(delta_compare((10.0, -1.0), (10.0, -1.0), &p), DeltaDecision::ReplaceElite);
        assert_eq!(delta_compare((8.5, -0.4), (10.0, -1.0), &p), DeltaDecision::ReplaceElite);
        assert_eq!(delta_compare((7.9, 0.0), (10.0, -1.0), &p), DeltaDecision::KeepElite);
    }

    #[test]
    fn infinite_deltas_reduce_delta_to_ls() {
        let p = DeltaPreference::new(f64::INFINITY, f64::INFINITY, 1e-9).unwrap();
        let cases = [((2.0, -0.5), (1.0, -0.4)), ((1.0, -0.1), (1.0, -0.1)), ((1.5, -0.1), (1.0, -0.2))];
        for (c, e) in cases {
            let ls = c.0 >= e.0 && c.1 >= e.1;
            assert_eq!(delta_compare(c, e, &p) == DeltaDecision::ReplaceElite, ls);
        }
    }

    #[test]
    fn add_single_rules() {
        let grid = GridSpec::unit(2, 4);
        let at = [0.1, 0.1];
        for rule in [
            AdditionRule::FitnessOnly,
            AdditionRule::ReproducibilityOnly,
            AdditionRule::Ls,
            AdditionRule::Weighted(pref(1.0, 1.0)),
            AdditionRule::Delta(pref(1.0, 1.0)),
        ] {
            let mut a = EliteArchive::new(grid.clone(), 1).unwrap();
            assert_eq!(a.add_single(rec(0, 1.0, -1.0, at), &rule).unwrap(), Outcome::Added, "{rule:?}");
        }

        let mut ls = EliteArchive::new(grid.clone(), 1).unwrap();
        ls.add_single(rec(0, 1.0, -0.1, at), &AdditionRule::Ls).unwrap();
        assert_eq!(ls.add_single(rec(1, 2.0, -0.2, at), &AdditionRule::Ls).unwrap(), Outcome::Rejected);
        assert!(ls.add_single(rec(2, 1.0, -0.1, at), &AdditionRule::Ls).unwrap().accepted());

        let mut w = EliteArchive::new(grid.clone(), 1).unwrap();
        let rule = AdditionRule::Weighted(pref(2.0, 1.0));
        w.add_single(rec(0, 10.0, -2.0, at), &rule).unwrap();
        let out = w.add_single(rec(1, 8.0, -0.5, at), &rule).unwrap();
        assert_eq!(out.removed().len(), 1);
        assert_eq!(out.removed()[0].id(), 0);
        assert_eq!(w.cell(grid.flat_cell(&at))[0].id(), 1);

        let mut fit = EliteArchive::new(grid, 1).unwrap();
        fit.add_single(rec(0, 1.0, -1.0, at), &AdditionRule::FitnessOnly).unwrap();
        assert_eq!(fit.add_single(rec(1, 1.0, 0.0, at), &AdditionRule::FitnessOnly).unwrap(), Outcome::Rejected);
    }

    #[test]
    fn add_rejects_sampleless_candidate() {
        let mut a = EliteArchive::new(GridSpec::unit(2, 4), 1).unwrap();
        let bare = SolutionRecord::restored(0, Genotype::new(vec![0.0; 3]), vec![], 0, 0.0, vec![0.1, 0.1], 0.0);
        assert!(matches!(a.add_single(bare, &AdditionRule::FitnessOnly), Err(UqdError::EmptySamples)));
    }

    #[test]
    fn scored_depth_examples() {
        let grid = GridSpec::unit(2, 4);
        let at = [0.1, 0.1];
        let flat = grid.flat_cell(&at);
        let rule = AdditionRule::FitnessOnly;

        let mut a = EliteArchive::new(grid.clone(), 3).unwrap();
        a.add_scored_depth(rec(0, 5.0, 0.0, at), &rule).unwrap();
        a.add_scored_depth(rec(1, 3.0, 0.0, at), &rule).unwrap();
        assert_eq!(a.add_scored_depth(rec(2, 1.0, 0.0, at), &rule).unwrap(), Outcome::Added);

        let mut b = EliteArchive::new(grid.clone(), 2).unwrap();
        b.add_scored_depth(rec(0, 5.0, 0.0, at), &rule).unwrap();
        b.add_scored_depth(rec(1, 3.0, 0.0, at), &rule).unwrap();
        let out = b.add_scored_depth(rec(2, 4.0, 0.0, at), &rule).unwrap();
        assert_eq!(out.removed()[0].id(), 1);
        let scores: Vec<f64> = b.cell(flat).iter().map(|r| r.est_fitness()).collect();
        assert_eq!(scores, vec![5.0, 4.0]);
        assert_eq!(b.add_scored_depth(rec(3, 4.0, 0.0, at), &rule).unwrap(), Outcome::Rejected);
    }

    #[test]
    fn delta_depth_examples() {
        let grid = GridSpec::unit(2, 4);
        let at = [0.1, 0.1];
        let flat = grid.flat_cell(&at);
        let p = pref(0.5, 0.5);

        let mut a = EliteArchive::new(grid.clone(), 2).unwrap();
        assert_eq!(a.add_delta_depth(rec(0, 1.0, -1.0, at), &p).unwrap(), Outcome::Added);
        assert_eq!(a.cell(flat)[0].id(), 0);
        // B is worse than A in both objectives and fills slot 1.
        assert_eq!(a.add_delta_depth(rec(1, 0.2, -2.0, at), &p).unwrap(), Outcome::Added);
        let ids: Vec<u64> = a.cell(flat).iter().map(|r| r.id()).collect();
        assert_eq!(ids, vec![0, 1]);
        // C beats A by a clear fitness margin; A then beats B.
        let out = a.add_delta_depth(rec(2, 2.0, -1.5, at), &p).unwrap();
        assert_eq!(out.removed()[0].id(), 1);
        let ids: Vec<u64> = a.cell(flat).iter().map(|r| r.id()).collect();
        assert_eq!(ids, vec![2, 0]);
    }

    /// Hand-written table of the cascade for a full depth-2 cell `[A, B]`
    /// and challenger `C`, for every pattern of the three pairwise tests.
    #[test]
    fn cascade_matches_exhaustive_table() {
        for mask in 0u8..8 {
            let c_beats_a = mask & 1 != 0;
            let c_beats_b = mask & 2 != 0;
            let a_beats_b = mask & 4 != 0;
            let table = |x: &char, y: &char| match (x, y) {
                ('C', 'A') => c_beats_a,
                ('C', 'B') => c_beats_b,
                ('A', 'B') => a_beats_b,
                _ => false,
            };
            let mut cell = vec!['A', 'B'];
            let res = cascade_insert(&mut cell, 'C', 2, table);
            let (expected_cell, expected_res) = match (c_beats_a, c_beats_b, a_beats_b) {
                (true, _, true) => (vec!['C', 'A'], Cascade::Evicted('B')),
                (true, _, false) => (vec!['C', 'B'], Cascade::Evicted('A')),
                (false, true, _) => (vec!['A', 'C'], Cascade::Evicted('B')),
                (false, false, _) => (vec!['A', 'B'], Cascade::Rejected('C')),
            };
            assert_eq!(cell, expected_cell, "mask {mask}");
            assert_eq!(res, expected_res, "mask {mask}");

            // Same patterns with a free slot: nothing is evicted.
            let mut roomy = vec!['A', 'B'];
            let res = cascade_insert(&mut roomy, 'C', 3, table);
            let mut expected = expected_cell.clone();
            expected.push(match expected_res {
                Cascade::Evicted(x) | Cascade::Rejected(x) => x,
                Cascade::Appended { .. } => unreachable!(),
            });
            assert_eq!(roomy, expected, "mask {mask}");
            assert_eq!(res, Cascade::Appended { displaced: c_beats_a || c_beats_b });
        }
    }

    #[test]
    fn pareto_examples() {
        let at = [0.1, 0.1];
        let mut cell = ParetoCell::new(6);
        cell.add(rec(0, 1.0, -1.0, at)).unwrap();
        let out = cell.add(rec(1, 2.0, -0.5, at)).unwrap();
        assert_eq!(out.removed().len(), 1);
        assert_eq!(cell.front().len(), 1);
        assert_eq!(cell.front()[0].id(), 1);

        let mut cell = ParetoCell::new(6);
        cell.add(rec(0, 1.0, -1.0, at)).unwrap();
        assert_eq!(cell.add(rec(1, 2.0, -2.0, at)).unwrap(), Outcome::Added);
        assert_eq!(cell.front().len(), 2);
        assert_eq!(cell.add(rec(2, 2.0, -2.0, at)).unwrap(), Outcome::Rejected);
    }

    #[test]
    fn pareto_overflow_evicts_most_crowded() {
        let at = [0.1, 0.1];
        let mut cell = ParetoCell::new(3);
        cell.add(rec(0, 0.0, -0.0, at)).unwrap();
        cell.add(rec(1, 1.0, -1.0, at)).unwrap();
        cell.add(rec(2, 0.9, -0.85, at)).unwrap();
        // Front sorted by fitness: 0.0, 0.5, 0.9, 1.0 after adding id 3.
        let out = cell.add(rec(3, 0.5, -0.5, at)).unwrap();
        // Interior distances: id3 = (0.9-0)/1 + (0.85-0)/1 = 1.75, id2 = (1-0.5) + (1-0.5) = 1.0
        assert_eq!(out.removed()[0].id(), 2);
        let ids: Vec<u64> = cell.front().iter().map(|r| r.id()).collect();
        assert_eq!(ids, vec![0, 1, 3]);
    }

    #[test]
    fn crowding_boundary_and_ties() {
        let d = crowding_distances(&[(0.0, 0.0), (1.0, -1.0)]);
        assert!(d.iter().all(|x| x.is_infinite()));
        let d = crowding_distances(&[(0.0, 0.0), (0.5, -0.5), (1.0, -1.0)]);
        assert!(d[0].is_infinite() && d[2].is_infinite());
        assert!((d[1] - 2.0).abs() < 1e-12);
    }

    #[test]
    fn projection_examples() {
        let grid = GridSpec::unit(2, 4);
        let at = [0.1, 0.1];
        let mut pa = ParetoArchive::new(grid.clone(), 6).unwrap();
        pa.add(rec(0, 10.0, -2.0, at)).unwrap();
        pa.add(rec(1, 8.0, -0.5, at)).unwrap();
        let out = pa.project(&pref(2.0, 1.0)).unwrap();
        assert_eq!(out.depth(), 1);
        assert_eq!(out.cell(grid.flat_cell(&at))[0].id(), 1);

        // Limits: huge delta_f favours reproducibility, zero delta_f fitness.
        let repro = pa.project(&DeltaPreference::new(1e6, 0.0, 1e-9).unwrap()).unwrap();
        assert_eq!(repro.cell(grid.flat_cell(&at))[0].id(), 1);
        let fit = pa.project(&DeltaPreference::new(0.0, 1e6, 1e-9).unwrap()).unwrap();
        assert_eq!(fit.cell(grid.flat_cell(&at))[0].id(), 0);
    }

    #[test]
    fn projection_of_singleton_ignores_preference() {
        let grid = GridSpec::unit(2, 4);
        let mut pa = ParetoArchive::new(grid.clone(), 6).unwrap();
        pa.add(rec(7, 0.3, -0.2, [0.6, 0.6])).unwrap();
        for p in [pref(0.0, 0.0), pref(5.0, 0.01), pref(0.01, 5.0)] {
            let out = pa.project(&p).unwrap();
            assert_eq!(out.filled_cells(), 1);
            assert_eq!(out.occupants().next().unwrap().id(), 7);
        }
    }
}
