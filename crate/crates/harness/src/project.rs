//! Projection of a MOME-X run onto a single-elite archive.

use std::path::{Path, PathBuf};

use uqd_core::archive_io::read_archive;
use uqd_core::{Archive, DeltaPreference};

use crate::config::RunConfig;
use crate::error::{CliError, CliResult};
use crate::manifest::{now_rfc3339, RunManifest};
use crate::runner::{persist_archive, ARCHIVE_FILE, RUN_FILE, SAMPLES_FILE};

/// Projects the Pareto archive in `run` with `pref` and writes a new run
/// directory at `out`. The source directory is only read. `label`
/// replaces the algorithm label used in reports.
pub fn project(run: &Path, pref: DeltaPreference, label: Option<&str>, out: &Path) -> CliResult<PathBuf> {
    pref.validate()?;
    let read = |file: &str| {
        let path = run.join(file);
        std::fs::read_to_string(&path).map_err(|e| CliError::io(&path, e))
    };
    let mut cfg = RunConfig::from_toml(&read(RUN_FILE)?)?;
    let samples = if run.join(SAMPLES_FILE).is_file() { Some(read(SAMPLES_FILE)?) } else { None };
    let archive = read_archive(&read(ARCHIVE_FILE)?, samples.as_deref())?;
    let Archive::Pareto(pareto) = archive else {
        return Err(CliError::Usage(format!("{}: not a Pareto archive, nothing to project", run.display())));
    };
    let projected = Archive::Elite(pareto.project(&pref)?);

    let source = RunManifest::read(run).ok();
    cfg.algorithm.preference = Some(pref);
    cfg.projected_from = Some(run.display().to_string());
    cfg.with_samples = samples.is_some();
    if let Some(l) = label {
        cfg.label = l.to_string();
    }
    let ledger = source.map(|m| m.ledger).unwrap_or_default();
    if out.canonicalize().ok().is_some_and(|o| run.canonicalize().ok().as_deref() == Some(o.as_path())) {
        return Err(CliError::Usage("--out must differ from --run".into()));
    }
    persist_archive(out, &cfg, &projected, None, ledger, now_rfc3339())?;
    Ok(out.to_path_buf())
}
