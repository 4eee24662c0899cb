//! Post-hoc evaluation of run directories into metric CSVs.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use uqd_core::archive_io::{fmt_f64, read_archive};
use uqd_core::exec::map_indexed;
use uqd_core::metrics::{compare_runs, reevaluate_archive, MetricReport, ReevalDataset, RunInput};
use uqd_core::{Archive, EliteArchive, Execution};

use crate::config::RunConfig;
use crate::error::{CliError, CliResult};
use crate::runner::{ARCHIVE_FILE, RUN_FILE, SAMPLES_FILE};

pub const METRICS_FILE: &str = "metrics.csv";
pub const CELLS_FILE: &str = "cells.csv";

pub const METRIC_COLUMNS: [&str; 13] = [
    "task",
    "algorithm",
    "seed",
    "run",
    "reevaluations",
    "corrected_qd_score",
    "reproducibility_score",
    "average_reproducibility",
    "average_fitness",
    "coverage",
    "weighted_regret",
    "filled_cells",
    "cells_per_dim",
];

/// Scalar metrics compared across algorithms by `report`.
pub const SCORE_METRICS: [&str; 6] = [
    "corrected_qd_score",
    "reproducibility_score",
    "average_reproducibility",
    "average_fitness",
    "coverage",
    "weighted_regret",
];

/// Column names of the cell coordinates: `cell_x`, `cell_y`, `cell_z`,
/// then `cell_3`, `cell_4`, ...
pub fn cell_columns(dims: usize) -> Vec<String> {
    (0..dims)
        .map(|i| match i {
            0 => "cell_x".to_string(),
            1 => "cell_y".to_string(),
            2 => "cell_z".to_string(),
            _ => format!("cell_{i}"),
        })
        .collect()
}

/// A run directory loaded for evaluation.
pub struct LoadedRun {
    pub dir: PathBuf,
    pub name: String,
    pub config: RunConfig,
    /// Single-elite view: Pareto archives are projected with the run's
    /// preference.
    pub archive: EliteArchive,
}

pub fn load_run(dir: &Path) -> CliResult<LoadedRun> {
    let name = dir.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_else(|| dir.display().to_string());
    let read = |file: &str| {
        let path = dir.join(file);
        std::fs::read_to_string(&path)
            .map_err(|e| CliError::Runtime(format!("run `{name}`: cannot read {}: {e}", path.display())))
    };
    let config = RunConfig::from_toml(&read(RUN_FILE)?).map_err(|e| e.context(format!("run `{name}`")))?;
    let text = read(ARCHIVE_FILE)?;
    let samples = if dir.join(SAMPLES_FILE).is_file() { Some(read(SAMPLES_FILE)?) } else { None };
    let archive = read_archive(&text, samples.as_deref())
        .map_err(|e| CliError::Runtime(format!("run `{name}`: {e}")))?;
    let archive = match archive {
        Archive::Elite(a) => a,
        Archive::Pareto(p) => p.project(&config.preference())?,
    };
    Ok(LoadedRun { dir: dir.to_path_buf(), name, config, archive })
}

pub struct Evaluated {
    pub run: LoadedRun,
    pub reevaluations: usize,
    pub report: MetricReport,
}

/// Reevaluates every run and scores them. Runs are pooled per task name
/// for the Reproducibility-Score normalizers.
pub fn evaluate_runs(dirs: &[PathBuf], reevals: Option<usize>, execution: Execution) -> CliResult<Vec<Evaluated>> {
    if dirs.is_empty() {
        return Err(CliError::Usage("no run directories given".into()));
    }
    if reevals.is_some_and(|n| n < 2) {
        return Err(CliError::Usage("--reevals must be at least 2".into()));
    }
    let runs = dirs.iter().map(|d| load_run(d)).collect::<CliResult<Vec<_>>>()?;
    let datasets = map_indexed(execution, runs.len(), |i| {
        let r = &runs[i];
        let n = reevals.unwrap_or(r.config.reevaluations);
        reevaluate_archive(&r.archive, &r.config.task, n, r.config.seed, Execution::Sequential)
            .map_err(|e| CliError::from(e).context(format!("run `{}`", r.name)))
    })
    .into_iter()
    .collect::<CliResult<Vec<ReevalDataset>>>()?;

    let mut groups: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for (i, r) in runs.iter().enumerate() {
        groups.entry(r.config.task.name.as_str()).or_default().push(i);
    }
    let mut reports: Vec<Option<MetricReport>> = (0..runs.len()).map(|_| None).collect();
    for (task, members) in groups {
        let inputs: Vec<RunInput<'_>> = members
            .iter()
            .map(|&i| RunInput { dataset: &datasets[i], task: &runs[i].config.task, preference: runs[i].config.preference() })
            .collect();
        let out = compare_runs(&inputs).map_err(|e| CliError::from(e).context(format!("task `{task}`")))?;
        for (&i, rep) in members.iter().zip(out) {
            reports[i] = Some(rep);
        }
    }
    Ok(runs
        .into_iter()
        .zip(datasets)
        .zip(reports)
        .map(|((run, ds), rep)| Evaluated { run, reevaluations: ds.reevaluations, report: rep.expect("every run is grouped") })
        .collect())
}

fn opt(x: Option<f64>) -> String {
    x.map(fmt_f64).unwrap_or_default()
}

fn dims_string(dims: &[usize]) -> String {
    dims.iter().map(usize::to_string).collect::<Vec<_>>().join("x")
}

pub fn metrics_csv(results: &[Evaluated]) -> CliResult<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(METRIC_COLUMNS)?;
    for e in results {
        let c = &e.run.config;
        let r = &e.report;
        w.write_record([
            c.task.name.clone(),
            c.label.clone(),
            c.seed.to_string(),
            e.run.name.clone(),
            e.reevaluations.to_string(),
            fmt_f64(r.corrected_qd_score),
            fmt_f64(r.reproducibility_score),
            opt(r.average_reproducibility),
            opt(r.average_fitness),
            fmt_f64(r.coverage),
            opt(r.weighted_regret),
            r.filled_cells.to_string(),
            dims_string(&c.task.grid.cells_per_dim),
        ])?;
    }
    finish(w)
}

/// Per-cell rows. All runs must share the dimensionality so the header is
/// fixed.
pub fn cells_csv(results: &[Evaluated]) -> CliResult<String> {
    let dims = results.first().map_or(2, |e| e.run.config.task.grid.dims());
    if results.iter().any(|e| e.run.config.task.grid.dims() != dims) {
        return Err(CliError::Usage("runs with different feature dimensionality cannot share cells.csv".into()));
    }
    let mut header = vec!["task".to_string(), "algorithm".into(), "seed".into(), "run".into()];
    header.extend(cell_columns(dims));
    header.extend(["corrected_fitness", "reproducibility", "descriptor_variance", "cell_max_variance"].map(String::from));
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(&header)?;
    for e in results {
        let c = &e.run.config;
        for cell in &e.report.cells {
            let mut row = vec![c.task.name.clone(), c.label.clone(), c.seed.to_string(), e.run.name.clone()];
            row.extend(cell.cell_index.iter().map(usize::to_string));
            row.extend([
                fmt_f64(cell.corrected_fitness),
                fmt_f64(cell.reproducibility),
                fmt_f64(cell.descriptor_variance),
                fmt_f64(cell.cell_max_variance),
            ]);
            w.write_record(&row)?;
        }
    }
    finish(w)
}

pub(crate) fn finish(w: csv::Writer<Vec<u8>>) -> CliResult<String> {
    let bytes = w.into_inner().map_err(|e| CliError::Runtime(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

/// Evaluates `dirs` and writes `metrics.csv` and `cells.csv` into `out`.
pub fn evaluate(dirs: &[PathBuf], reevals: Option<usize>, out: &Path, execution: Execution) -> CliResult<Vec<Evaluated>> {
    let results = evaluate_runs(dirs, reevals, execution)?;
    let metrics = metrics_csv(&results)?;
    let cells = cells_csv(&results)?;
    std::fs::create_dir_all(out).map_err(|e| CliError::io(out, e))?;
    for (name, text) in [(METRICS_FILE, metrics), (CELLS_FILE, cells)] {
        let path = out.join(name);
        std::fs::write(&path, text).map_err(|e| CliError::io(&path, e))?;
    }
    Ok(results)
}
