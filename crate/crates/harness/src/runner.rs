//! Executes resolved runs and persists their directories.

use std::path::{Path, PathBuf};

use uqd_core::archive_io::{fmt_f64, write_archive};
use uqd_core::{run_experiment, Archive, TraceRow};

use crate::config::RunConfig;
use crate::error::{CliError, CliResult};
use crate::manifest::{inventory, now_rfc3339, LedgerTotals, RunManifest};

pub const ARCHIVE_FILE: &str = "archive.tsv";
pub const SAMPLES_FILE: &str = "samples.tsv";
pub const TRACE_FILE: &str = "trace.csv";
pub const RUN_FILE: &str = "run.toml";

pub fn trace_csv(trace: &[TraceRow]) -> CliResult<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(TraceRow::HEADER)?;
    for r in trace {
        w.write_record([
            r.generation.to_string(),
            r.cumulative_evaluations.to_string(),
            r.offspring.to_string(),
            r.offspring_evals.to_string(),
            r.reevaluation_evals.to_string(),
            r.occupancy.to_string(),
            r.filled_cells.to_string(),
            fmt_f64(r.max_fitness),
            fmt_f64(r.mean_fitness),
            fmt_f64(r.mean_reproducibility),
        ])?;
    }
    Ok(String::from_utf8(w.into_inner().map_err(|e| CliError::Runtime(e.to_string()))?).expect("csv output is utf-8"))
}

fn write(dir: &Path, name: &str, text: &str) -> CliResult<()> {
    let path = dir.join(name);
    std::fs::write(&path, text).map_err(|e| CliError::io(&path, e))
}

/// Writes the archive (plus samples when requested), `run.toml` and the
/// manifest into `dir`, which is created fresh.
pub fn persist_archive(
    dir: &Path,
    cfg: &RunConfig,
    archive: &Archive,
    trace: Option<&[TraceRow]>,
    ledger: LedgerTotals,
    started_at: String,
) -> CliResult<RunManifest> {
    if dir.exists() {
        std::fs::remove_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    }
    std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    let (text, samples) = write_archive(archive, cfg.with_samples);
    write(dir, ARCHIVE_FILE, &text)?;
    if let Some(s) = samples {
        write(dir, SAMPLES_FILE, &s)?;
    }
    if let Some(trace) = trace {
        write(dir, TRACE_FILE, &trace_csv(trace)?)?;
    }
    write(dir, RUN_FILE, &cfg.to_toml())?;
    let manifest = RunManifest {
        config_hash: cfg.config_hash(),
        version: env!("CARGO_PKG_VERSION").to_string(),
        started_at,
        finished_at: now_rfc3339(),
        ledger,
        files: inventory(dir)?,
    };
    manifest.write(dir)?;
    Ok(manifest)
}

/// Runs one configuration and writes `root/<dir_name>`.
pub fn run_one(cfg: &RunConfig, root: &Path) -> CliResult<PathBuf> {
    let started_at = now_rfc3339();
    let result = run_experiment(&cfg.task, &cfg.algorithm, cfg.seed)
        .map_err(|e| CliError::from(e).context(cfg.dir_name()))?;
    let dir = root.join(cfg.dir_name());
    persist_archive(&dir, cfg, &result.archive, Some(&result.trace), (&result.ledger).into(), started_at)?;
    Ok(dir)
}

/// Runs every configuration, optionally inside a dedicated thread pool.
pub fn run_all(runs: &[RunConfig], root: &Path, threads: Option<usize>) -> CliResult<Vec<PathBuf>> {
    let go = || runs.iter().map(|cfg| run_one(cfg, root)).collect::<CliResult<Vec<_>>>();
    match threads {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| CliError::Runtime(format!("thread pool: {e}")))?
            .install(go),
        None => go(),
    }
}
