//! Plot data and significance tables from evaluated metric CSVs.

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};

use uqd_core::archive_io::fmt_f64;
use uqd_core::stats::{holm_bonferroni, paired_rank_test, MIN_PAIRS};

use crate::error::{CliError, CliResult};
use crate::evaluate::{cell_columns, finish, CELLS_FILE, METRICS_FILE, SCORE_METRICS};

pub const SCORES_FILE: &str = "scores_long.csv";
pub const SUMMARY_FILE: &str = "summary.csv";
pub const HEATMAP_DIR: &str = "heatmaps";

pub const SIGNIFICANCE_COLUMNS: [&str; 7] = ["task", "algorithm_a", "algorithm_b", "n", "p_value", "p_holm", "status"];

#[derive(Clone, Debug, PartialEq)]
pub struct MetricRow {
    pub task: String,
    pub algorithm: String,
    pub seed: u64,
    pub run: String,
    pub cells_per_dim: Vec<usize>,
    /// Metric name to value; absent values are missing.
    pub scores: BTreeMap<String, f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SignificanceRow {
    pub task: String,
    pub algorithm_a: String,
    pub algorithm_b: String,
    pub n: usize,
    pub p_value: Option<f64>,
    pub p_holm: Option<f64>,
}

fn bad(path: &Path, msg: impl std::fmt::Display) -> CliError {
    CliError::Usage(format!("{}: {msg}", path.display()))
}

fn column(headers: &csv::StringRecord, name: &str, path: &Path) -> CliResult<usize> {
    headers.iter().position(|h| h == name).ok_or_else(|| bad(path, format!("missing column `{name}`")))
}

/// Accepts `metrics.csv` files or directories holding one.
fn metrics_path(p: &Path) -> PathBuf {
    if p.is_dir() {
        p.join(METRICS_FILE)
    } else {
        p.to_path_buf()
    }
}

pub fn read_metrics(path: &Path) -> CliResult<Vec<MetricRow>> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    let mut r = csv::Reader::from_reader(text.as_bytes());
    let headers = r.headers().map_err(|e| bad(path, e))?.clone();
    let task = column(&headers, "task", path)?;
    let algorithm = column(&headers, "algorithm", path)?;
    let seed = column(&headers, "seed", path)?;
    let run = column(&headers, "run", path)?;
    let dims = column(&headers, "cells_per_dim", path)?;
    let metric_cols =
        SCORE_METRICS.iter().map(|m| column(&headers, m, path).map(|c| (*m, c))).collect::<CliResult<Vec<_>>>()?;
    let mut rows = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(|e| bad(path, e))?;
        let mut scores = BTreeMap::new();
        for &(m, c) in &metric_cols {
            if !rec[c].is_empty() {
                let v: f64 = rec[c].parse().map_err(|_| bad(path, format!("bad {m} value `{}`", &rec[c])))?;
                scores.insert(m.to_string(), v);
            }
        }
        rows.push(MetricRow {
            task: rec[task].to_string(),
            algorithm: rec[algorithm].to_string(),
            seed: rec[seed].parse().map_err(|_| bad(path, format!("bad seed `{}`", &rec[seed])))?,
            run: rec[run].to_string(),
            cells_per_dim: rec[dims]
                .split('x')
                .map(|d| d.parse().map_err(|_| bad(path, format!("bad cells_per_dim `{}`", &rec[dims]))))
                .collect::<CliResult<Vec<usize>>>()?,
            scores,
        });
    }
    Ok(rows)
}

pub fn median(xs: &[f64]) -> Option<f64> {
    if xs.is_empty() {
        return None;
    }
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    Some(if n % 2 == 1 { v[n / 2] } else { 0.5 * (v[n / 2 - 1] + v[n / 2]) })
}

/// `(task, algorithm) -> seed -> value` for one metric.
fn by_seed<'a>(rows: &'a [MetricRow], metric: &str) -> BTreeMap<(&'a str, &'a str), BTreeMap<u64, f64>> {
    let mut out: BTreeMap<(&str, &str), BTreeMap<u64, f64>> = BTreeMap::new();
    for r in rows {
        let entry = out.entry((r.task.as_str(), r.algorithm.as_str())).or_default();
        if let Some(&v) = r.scores.get(metric) {
            entry.insert(r.seed, v);
        }
    }
    out
}

/// Pairwise paired rank tests between algorithms on one metric, on the
/// seeds both share. Holm adjustment runs per task over the tested pairs.
pub fn significance(rows: &[MetricRow], metric: &str) -> Vec<SignificanceRow> {
    let table = by_seed(rows, metric);
    let tasks: BTreeSet<&str> = table.keys().map(|k| k.0).collect();
    let mut out = Vec::new();
    for task in tasks {
        let algos: Vec<&str> = table.keys().filter(|k| k.0 == task).map(|k| k.1).collect();
        let start = out.len();
        for (i, a) in algos.iter().enumerate() {
            for b in &algos[i + 1..] {
                let sa = &table[&(task, *a)];
                let sb = &table[&(task, *b)];
                let (xa, xb): (Vec<f64>, Vec<f64>) =
                    sa.iter().filter_map(|(s, va)| sb.get(s).map(|vb| (*va, *vb))).unzip();
                let p_value = if xa.len() >= MIN_PAIRS { paired_rank_test(&xa, &xb).ok() } else { None };
                out.push(SignificanceRow {
                    task: task.to_string(),
                    algorithm_a: a.to_string(),
                    algorithm_b: b.to_string(),
                    n: xa.len(),
                    p_value,
                    p_holm: None,
                });
            }
        }
        let family = &mut out[start..];
        let tested: Vec<usize> = (0..family.len()).filter(|&i| family[i].p_value.is_some()).collect();
        let raw: Vec<f64> = tested.iter().map(|&i| family[i].p_value.unwrap()).collect();
        for (&i, q) in tested.iter().zip(holm_bonferroni(&raw)) {
            family[i].p_holm = Some(q);
        }
    }
    out
}

fn significance_csv(rows: &[SignificanceRow]) -> CliResult<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(SIGNIFICANCE_COLUMNS)?;
    for r in rows {
        let opt = |x: Option<f64>| x.map(fmt_f64).unwrap_or_default();
        let status = if r.p_value.is_some() { "tested" } else { "insufficient n" };
        w.write_record([
            r.task.clone(),
            r.algorithm_a.clone(),
            r.algorithm_b.clone(),
            r.n.to_string(),
            opt(r.p_value),
            opt(r.p_holm),
            status.to_string(),
        ])?;
    }
    finish(w)
}

fn scores_csv(rows: &[MetricRow]) -> CliResult<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["task", "algorithm", "seed", "metric", "value"])?;
    for r in rows {
        for m in SCORE_METRICS {
            if let Some(v) = r.scores.get(m) {
                w.write_record([r.task.clone(), r.algorithm.clone(), r.seed.to_string(), m.to_string(), fmt_f64(*v)])?;
            }
        }
    }
    finish(w)
}

fn summary_csv(rows: &[MetricRow]) -> CliResult<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["task", "algorithm", "metric", "n", "median"])?;
    let groups: BTreeSet<(&str, &str)> = rows.iter().map(|r| (r.task.as_str(), r.algorithm.as_str())).collect();
    for (task, algo) in groups {
        for m in SCORE_METRICS {
            let xs: Vec<f64> =
                rows.iter().filter(|r| r.task == task && r.algorithm == algo).filter_map(|r| r.scores.get(m).copied()).collect();
            w.write_record([
                task.to_string(),
                algo.to_string(),
                m.to_string(),
                xs.len().to_string(),
                median(&xs).map(fmt_f64).unwrap_or_default(),
            ])?;
        }
    }
    finish(w)
}

/// Heatmap matrices of one run for one per-cell value: one row per
/// `cell_y`, one column per `cell_x`, empty where the cell is unfilled.
pub fn heatmap_csv(dims: &[usize], cells: &[(usize, usize, f64)]) -> CliResult<String> {
    let (nx, ny) = (dims[0], dims[1]);
    let mut grid = vec![vec![None; nx]; ny];
    for &(x, y, v) in cells {
        if x >= nx || y >= ny {
            return Err(CliError::Usage(format!("cell ({x}, {y}) outside a {nx}x{ny} grid")));
        }
        grid[y][x] = Some(v);
    }
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["cell_y".to_string()];
    header.extend((0..nx).map(|x| format!("x{x}")));
    w.write_record(&header)?;
    for (y, row) in grid.iter().enumerate() {
        let mut rec = vec![y.to_string()];
        rec.extend(row.iter().map(|v| v.map(fmt_f64).unwrap_or_default()));
        w.write_record(&rec)?;
    }
    finish(w)
}

/// Per-run heatmaps from a `cells.csv`. Only two-dimensional grids have a
/// matrix form; other runs are skipped.
fn write_heatmaps(cells_path: &Path, runs: &BTreeMap<String, Vec<usize>>, out: &Path) -> CliResult<usize> {
    let text = std::fs::read_to_string(cells_path).map_err(|e| CliError::io(cells_path, e))?;
    let mut r = csv::Reader::from_reader(text.as_bytes());
    let headers = r.headers().map_err(|e| bad(cells_path, e))?.clone();
    let run_col = column(&headers, "run", cells_path)?;
    let cols = cell_columns(2);
    if headers.iter().any(|h| h == "cell_z") {
        return Ok(0);
    }
    let x = column(&headers, &cols[0], cells_path)?;
    let y = column(&headers, &cols[1], cells_path)?;
    let fit = column(&headers, "corrected_fitness", cells_path)?;
    let rep = column(&headers, "reproducibility", cells_path)?;
    let mut per_run: BTreeMap<String, Vec<(usize, usize, f64, f64)>> = BTreeMap::new();
    for rec in r.records() {
        let rec = rec.map_err(|e| bad(cells_path, e))?;
        let parse_u = |i: usize| rec[i].parse::<usize>().map_err(|_| bad(cells_path, format!("bad index `{}`", &rec[i])));
        let parse_f = |i: usize| rec[i].parse::<f64>().map_err(|_| bad(cells_path, format!("bad value `{}`", &rec[i])));
        per_run.entry(rec[run_col].to_string()).or_default().push((parse_u(x)?, parse_u(y)?, parse_f(fit)?, parse_f(rep)?));
    }
    let dir = out.join(HEATMAP_DIR);
    std::fs::create_dir_all(&dir).map_err(|e| CliError::io(&dir, e))?;
    let mut written = 0;
    for (run, dims) in runs {
        if dims.len() != 2 {
            continue;
        }
        let cells = per_run.get(run).map(Vec::as_slice).unwrap_or(&[]);
        let fitness: Vec<_> = cells.iter().map(|c| (c.0, c.1, c.2)).collect();
        let repro: Vec<_> = cells.iter().map(|c| (c.0, c.1, c.3)).collect();
        for (suffix, data) in [("fitness", fitness), ("reproducibility", repro)] {
            let path = dir.join(format!("{run}__{suffix}.csv"));
            std::fs::write(&path, heatmap_csv(dims, &data)?).map_err(|e| CliError::io(&path, e))?;
            written += 1;
        }
    }
    Ok(written)
}

/// Reads the given metric files (or evaluation directories) and writes the
/// score table, medians, significance tables and heatmaps into `out`.
pub fn report(inputs: &[PathBuf], out: &Path) -> CliResult<Vec<MetricRow>> {
    if inputs.is_empty() {
        return Err(CliError::Usage("no metrics files given".into()));
    }
    let mut rows = Vec::new();
    let mut cell_files = Vec::new();
    for input in inputs {
        let path = metrics_path(input);
        let part = read_metrics(&path)?;
        let cells = path.with_file_name(CELLS_FILE);
        if cells.is_file() {
            let runs: BTreeMap<String, Vec<usize>> = part.iter().map(|r| (r.run.clone(), r.cells_per_dim.clone())).collect();
            cell_files.push((cells, runs));
        }
        rows.extend(part);
    }
    let mut seen = BTreeSet::new();
    for r in &rows {
        if !seen.insert((&r.task, &r.algorithm, r.seed)) {
            return Err(CliError::Usage(format!("duplicate row for {} / {} / seed {}", r.task, r.algorithm, r.seed)));
        }
    }
    std::fs::create_dir_all(out).map_err(|e| CliError::io(out, e))?;
    let write = |name: String, text: String| {
        let path = out.join(name);
        std::fs::write(&path, text).map_err(|e| CliError::io(&path, e))
    };
    write(SCORES_FILE.into(), scores_csv(&rows)?)?;
    write(SUMMARY_FILE.into(), summary_csv(&rows)?)?;
    for m in SCORE_METRICS {
        write(format!("significance_{m}.csv"), significance_csv(&significance(&rows, m))?)?;
    }
    for (cells, runs) in &cell_files {
        write_heatmaps(cells, runs, out)?;
    }
    Ok(rows)
}
