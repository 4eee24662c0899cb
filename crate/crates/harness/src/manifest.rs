//! `manifest.json`: provenance and content digests of a run directory.

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use uqd_core::BudgetLedger;

use crate::error::{CliError, CliResult};

pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FileEntry {
    pub path: String,
    pub bytes: u64,
    pub sha256: String,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct LedgerTotals {
    pub generations: usize,
    pub offspring: usize,
    pub offspring_evaluations: usize,
    pub reevaluation_evaluations: usize,
    pub total_evaluations: usize,
}

impl From<&BudgetLedger> for LedgerTotals {
    fn from(l: &BudgetLedger) -> Self {
        Self {
            generations: l.generations.len(),
            offspring: l.generations.iter().map(|g| g.offspring).sum(),
            offspring_evaluations: l.generations.iter().map(|g| g.offspring_evals).sum(),
            reevaluation_evaluations: l.generations.iter().map(|g| g.reevaluation_evals).sum(),
            total_evaluations: l.cumulative,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub config_hash: String,
    pub version: String,
    pub started_at: String,
    pub finished_at: String,
    pub ledger: LedgerTotals,
    /// Every other file of the directory, sorted by path.
    pub files: Vec<FileEntry>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn now_rfc3339() -> String {
    chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Millis, true)
}

/// Lists and digests every regular file of `dir` except the manifest.
pub fn inventory(dir: &Path) -> CliResult<Vec<FileEntry>> {
    let mut files = Vec::new();
    let entries = std::fs::read_dir(dir).map_err(|e| CliError::io(dir, e))?;
    for entry in entries {
        let entry = entry.map_err(|e| CliError::io(dir, e))?;
        let path = entry.path();
        let name = entry.file_name().to_string_lossy().into_owned();
        if name == MANIFEST_FILE || !path.is_file() {
            continue;
        }
        let bytes = std::fs::read(&path).map_err(|e| CliError::io(&path, e))?;
        files.push(FileEntry { path: name, bytes: bytes.len() as u64, sha256: sha256_hex(&bytes) });
    }
    files.sort_by(|a, b| a.path.cmp(&b.path));
    Ok(files)
}

impl RunManifest {
    pub fn write(&self, dir: &Path) -> CliResult<()> {
        let path = dir.join(MANIFEST_FILE);
        let text = serde_json::to_string_pretty(self).expect("manifests always serialize") + "\n";
        std::fs::write(&path, text).map_err(|e| CliError::io(&path, e))
    }

    pub fn read(dir: &Path) -> CliResult<Self> {
        let path = dir.join(MANIFEST_FILE);
        let text = std::fs::read_to_string(&path).map_err(|e| CliError::io(&path, e))?;
        serde_json::from_str(&text).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))
    }

    /// Files whose current digest differs from the recorded one, plus files
    /// present on disk but missing from the manifest.
    pub fn verify(&self, dir: &Path) -> CliResult<Vec<String>> {
        let current = inventory(dir)?;
        let mut bad = Vec::new();
        for f in &current {
            match self.files.iter().find(|m| m.path == f.path) {
                Some(m) if m.sha256 == f.sha256 => {}
                _ => bad.push(f.path.clone()),
            }
        }
        for m in &self.files {
            if !current.iter().any(|f| f.path == m.path) {
                bad.push(m.path.clone());
            }
        }
        Ok(bad)
    }
}
