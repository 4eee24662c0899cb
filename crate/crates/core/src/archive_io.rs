//! Line-delimited archive files.
//!
//! ```text
//! # uqd-archive 1
//! # kind elite            (or: pareto)
//! # depth 1               (elite) / # max_front_size 6 (pareto)
//! # feature_mins <f>,<f>
//! # feature_maxs <f>,<f>
//! # cells_per_dim 32,32
//! cell_index<TAB>slot<TAB>id<TAB>genotype<TAB>sample_count<TAB>est_fitness<TAB>est_features<TAB>est_reproducibility
//! 3,16<TAB>0<TAB>812<TAB><f>,<f>,<f><TAB>32<TAB><f><TAB><f>,<f><TAB><f>
//! ```
//!
//! One occupant per line. Floats are written with 17 significant digits so
//! every value round-trips bit-exactly. The optional sample sidecar holds
//! `cell_index, slot, sample, fitness, features` rows.

use std::fmt::Write as _;

use crate::archive::{Archive, EliteArchive, GridSpec, ParetoArchive};
use crate::error::{Result, UqdError};
use crate::types::{EvaluationSample, Genotype, SolutionRecord};

const MAGIC: &str = "# uqd-archive 1";
pub const ARCHIVE_COLUMNS: [&str; 8] = [
    "cell_index",
    "slot",
    "id",
    "genotype",
    "sample_count",
    "est_fitness",
    "est_features",
    "est_reproducibility",
];
pub const SAMPLE_COLUMNS: [&str; 5] = ["cell_index", "slot", "sample", "fitness", "features"];

/// Formats a float with 17 significant digits.
pub fn fmt_f64(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else {
        format!("{x}")
    }
}

fn fmt_list(xs: &[f64]) -> String {
    xs.iter().map(|&x| fmt_f64(x)).collect::<Vec<_>>().join(",")
}

fn fmt_index(xs: &[usize]) -> String {
    xs.iter().map(usize::to_string).collect::<Vec<_>>().join(",")
}

/// Serializes an archive. With `with_samples`, also returns the sidecar.
pub fn write_archive(archive: &Archive, with_samples: bool) -> (String, Option<String>) {
    let grid = archive.grid();
    let mut out = String::new();
    out.push_str(MAGIC);
    out.push('\n');
    match archive {
        Archive::Elite(a) => {
            let _ = writeln!(out, "# kind elite\n# depth {}", a.depth());
        }
        Archive::Pareto(a) => {
            let _ = writeln!(out, "# kind pareto\n# max_front_size {}", a.max_front_size());
        }
    }
    let _ = writeln!(out, "# feature_mins {}", fmt_list(&grid.feature_mins));
    let _ = writeln!(out, "# feature_maxs {}", fmt_list(&grid.feature_maxs));
    let _ = writeln!(out, "# cells_per_dim {}", fmt_index(&grid.cells_per_dim));
    out.push_str(&ARCHIVE_COLUMNS.join("\t"));
    out.push('\n');

    let mut side = with_samples.then(|| SAMPLE_COLUMNS.join("\t") + "\n");
    for (flat, slot, rec) in archive.slots() {
        let cell = fmt_index(&grid.unflatten(flat));
        let _ = writeln!(
            out,
            "{cell}\t{slot}\t{}\t{}\t{}\t{}\t{}\t{}",
            rec.id(),
            fmt_list(rec.genotype().values()),
            rec.sample_count(),
            fmt_f64(rec.est_fitness()),
            fmt_list(rec.est_features()),
            fmt_f64(rec.est_reproducibility()),
        );
        if let Some(side) = side.as_mut() {
            for (k, s) in rec.samples().iter().enumerate() {
                let _ = writeln!(side, "{cell}\t{slot}\t{k}\t{}\t{}", fmt_f64(s.fitness), fmt_list(&s.features));
            }
        }
    }
    (out, side)
}

fn parse_f64(s: &str, line: usize) -> Result<f64> {
    s.trim()
        .parse::<f64>()
        .map_err(|e| UqdError::Format { line, message: format!("bad float `{s}`: {e}") })
}

fn parse_list(s: &str, line: usize) -> Result<Vec<f64>> {
    if s.is_empty() {
        return Ok(Vec::new());
    }
    s.split(',').map(|x| parse_f64(x, line)).collect()
}

fn parse_usize(s: &str, line: usize) -> Result<usize> {
    s.trim()
        .parse::<usize>()
        .map_err(|e| UqdError::Format { line, message: format!("bad integer `{s}`: {e}") })
}

fn parse_index(s: &str, line: usize) -> Result<Vec<usize>> {
    s.split(',').map(|x| parse_usize(x, line)).collect()
}

#[derive(Default)]
struct Header {
    kind: Option<String>,
    depth: Option<usize>,
    max_front_size: Option<usize>,
    mins: Option<Vec<f64>>,
    maxs: Option<Vec<f64>>,
    cells: Option<Vec<usize>>,
}

/// Kind recorded in an archive file header, without parsing the body.
pub fn archive_kind(text: &str) -> Result<String> {
    for (i, line) in text.lines().enumerate() {
        if let Some(kind) = line.strip_prefix("# kind ") {
            return Ok(kind.trim().to_string());
        }
        if !line.starts_with('#') {
            return Err(UqdError::Format { line: i + 1, message: "missing `# kind` header".into() });
        }
    }
    Err(UqdError::Format { line: 0, message: "empty archive file".into() })
}

/// Parses an archive file and its optional sample sidecar.
pub fn read_archive(text: &str, samples: Option<&str>) -> Result<Archive> {
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));
    match lines.next() {
        Some((_, MAGIC)) => {}
        _ => return Err(UqdError::Format { line: 1, message: format!("expected `{MAGIC}`") }),
    }
    let mut header = Header::default();
    let mut body = Vec::new();
    let mut seen_columns = false;
    for (n, line) in lines {
        if let Some(rest) = line.strip_prefix("# ") {
            let (key, value) = rest.split_once(' ').unwrap_or((rest, ""));
            match key {
                "kind" => header.kind = Some(value.to_string()),
                "depth" => header.depth = Some(parse_usize(value, n)?),
                "max_front_size" => header.max_front_size = Some(parse_usize(value, n)?),
                "feature_mins" => header.mins = Some(parse_list(value, n)?),
                "feature_maxs" => header.maxs = Some(parse_list(value, n)?),
                "cells_per_dim" => header.cells = Some(parse_index(value, n)?),
                _ => {}
            }
        } else if !seen_columns {
            if line != ARCHIVE_COLUMNS.join("\t") {
                return Err(UqdError::Format { line: n, message: "unexpected column header".into() });
            }
            seen_columns = true;
        } else if !line.is_empty() {
            body.push((n, line));
        }
    }
    let missing = |what: &str| UqdError::Format { line: 0, message: format!("missing `{what}` header") };
    let grid = GridSpec::new(
        header.mins.ok_or_else(|| missing("feature_mins"))?,
        header.maxs.ok_or_else(|| missing("feature_maxs"))?,
        header.cells.ok_or_else(|| missing("cells_per_dim"))?,
    )?;

    let sample_map = match samples {
        Some(text) => Some(read_samples(text)?),
        None => None,
    };

    let mut archive = match header.kind.as_deref() {
        Some("elite") => Archive::Elite(EliteArchive::new(grid.clone(), header.depth.ok_or_else(|| missing("depth"))?)?),
        Some("pareto") => Archive::Pareto(ParetoArchive::new(
            grid.clone(),
            header.max_front_size.ok_or_else(|| missing("max_front_size"))?,
        )?),
        other => {
            return Err(UqdError::Format { line: 2, message: format!("unknown archive kind {other:?}") });
        }
    };

    for (n, line) in body {
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != ARCHIVE_COLUMNS.len() {
            return Err(UqdError::Format {
                line: n,
                message: format!("expected {} fields, found {}", ARCHIVE_COLUMNS.len(), fields.len()),
            });
        }
        let cell = parse_index(fields[0], n)?;
        if cell.len() != grid.dims() || cell.iter().zip(&grid.cells_per_dim).any(|(i, m)| i >= m) {
            return Err(UqdError::Format { line: n, message: format!("cell {} outside grid", fields[0]) });
        }
        let slot = parse_usize(fields[1], n)?;
        let id = fields[2]
            .parse::<u64>()
            .map_err(|e| UqdError::Format { line: n, message: format!("bad id `{}`: {e}", fields[2]) })?;
        let genotype = Genotype::new(parse_list(fields[3], n)?);
        let sample_count = parse_usize(fields[4], n)?;
        let est_fitness = parse_f64(fields[5], n)?;
        let est_features = parse_list(fields[6], n)?;
        let est_reproducibility = parse_f64(fields[7], n)?;
        let history = match &sample_map {
            Some(map) => {
                let s = map.get(&(fields[0].to_string(), slot)).cloned().unwrap_or_default();
                if s.len() != sample_count {
                    return Err(UqdError::Format {
                        line: n,
                        message: format!("sidecar has {} samples, archive says {sample_count}", s.len()),
                    });
                }
                s
            }
            None => Vec::new(),
        };
        let rec = SolutionRecord::restored(
            id,
            genotype,
            history,
            sample_count,
            est_fitness,
            est_features,
            est_reproducibility,
        );
        let flat = grid.flatten(&cell);
        let (len, insert) = match &mut archive {
            Archive::Elite(a) => (a.cell(flat).len(), a.insert_raw(flat, rec)),
            Archive::Pareto(a) => (a.cell(flat).len(), a.insert_raw(flat, rec)),
        };
        if slot != len {
            return Err(UqdError::Format { line: n, message: format!("slot {slot} out of order") });
        }
        insert.map_err(|e| UqdError::Format { line: n, message: e.to_string() })?;
    }
    Ok(archive)
}

type SampleMap = std::collections::HashMap<(String, usize), Vec<EvaluationSample>>;

fn read_samples(text: &str) -> Result<SampleMap> {
    let mut map: SampleMap = SampleMap::new();
    for (i, line) in text.lines().enumerate().skip(1) {
        let n = i + 1;
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != SAMPLE_COLUMNS.len() {
            return Err(UqdError::Format { line: n, message: "bad sidecar row".into() });
        }
        let slot = parse_usize(fields[1], n)?;
        let entry = map.entry((fields[0].to_string(), slot)).or_default();
        if parse_usize(fields[2], n)? != entry.len() {
            return Err(UqdError::Format { line: n, message: "sidecar samples out of order".into() });
        }
        entry.push(EvaluationSample::new(parse_f64(fields[3], n)?, parse_list(fields[4], n)?));
    }
    Ok(map)
}
