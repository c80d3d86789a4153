//! CSV writing and reading with a `# schema=1` version line.
//!
//! All files start with the schema comment, then a header row. Values are
//! plain numbers and identifiers, never quoted. Writes are atomic
//! (temp file + rename) so a crashed run never leaves half a file behind.

use anyhow::{bail, Context, Result};
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

pub const SCHEMA_LINE: &str = "# schema=1";

pub const TRACE_HEADER: &str = "run_id,estimator,bound,weighting,dim,seed,epoch,value,epoch_ms";
pub const SUMMARY_HEADER: &str = "run_id,estimator,bound,weighting,dim,seed,truth,final_window_mean,final_window_var,full_var,abs_bias_vs_truth,epochs_to_band";
pub const SCORES_HEADER: &str = "model,metric,feature_map,value,n_replications,std_error";
pub const POINTS_HEADER: &str = "x,y,z";
pub const ABLATION_HEADER: &str = "seed,coverage_with_mi,coverage_no_mi";
pub const AGGREGATE_HEADER: &str = "run_id,estimator,bound,weighting,dim,seed,final_window_mean,full_var,in_band";

/// Write bytes atomically: temp file in the same directory, then rename.
pub fn write_atomic(path: &Path, contents: &str) -> Result<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent)?;
    }
    let tmp = path.with_extension("tmp");
    fs::write(&tmp, contents).with_context(|| format!("writing {}", tmp.display()))?;
    fs::rename(&tmp, path).with_context(|| format!("renaming into {}", path.display()))?;
    Ok(())
}

/// Begin a CSV body with the schema line and header.
pub fn csv_header(header: &str) -> String {
    format!("{SCHEMA_LINE}\n{header}\n")
}

/// One trace file for a run.
pub struct TraceRow<'a> {
    pub run_id: &'a str,
    pub estimator: &'a str,
    pub bound: &'a str,
    pub weighting: &'a str,
    pub dim: usize,
    pub seed: u64,
}

pub fn render_trace_csv(meta: &TraceRow, values: &[f64], epoch_ms: &[f64], timing: bool) -> String {
    let mut out = csv_header(TRACE_HEADER);
    for (i, v) in values.iter().enumerate() {
        let ms = if timing { epoch_ms[i] } else { 0.0 };
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{}",
            meta.run_id, meta.estimator, meta.bound, meta.weighting, meta.dim, meta.seed,
            i + 1,
            v,
            ms
        );
    }
    out
}

/// A parsed trace row.
#[derive(Debug, Clone)]
pub struct ParsedTraceRow {
    pub run_id: String,
    pub estimator: String,
    pub bound: String,
    pub weighting: String,
    pub dim: usize,
    pub seed: u64,
    pub epoch: usize,
    pub value: f64,
}

/// Read a trace CSV, validating the schema line and header. Errors name the
/// file and line.
pub fn read_trace_csv(path: &Path) -> Result<Vec<ParsedTraceRow>> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let mut lines = text.lines().enumerate();
    let schema_err = |line: usize, what: &str| {
        anyhow::anyhow!("schema error in {} line {}: {what}", path.display(), line + 1)
    };
    let (i, first) = lines.next().ok_or_else(|| schema_err(0, "empty file"))?;
    if first.trim() != SCHEMA_LINE {
        bail!(schema_err(i, "missing `# schema=1` line"));
    }
    let (i, header) = lines.next().ok_or_else(|| schema_err(1, "missing header"))?;
    if header.trim() != TRACE_HEADER {
        bail!(schema_err(i, "unexpected trace header"));
    }
    let mut rows = Vec::new();
    for (i, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let parts: Vec<&str> = line.split(',').collect();
        if parts.len() != 9 {
            bail!(schema_err(i, "expected 9 columns"));
        }
        rows.push(ParsedTraceRow {
            run_id: parts[0].to_string(),
            estimator: parts[1].to_string(),
            bound: parts[2].to_string(),
            weighting: parts[3].to_string(),
            dim: parts[4].parse().map_err(|_| schema_err(i, "bad dim"))?,
            seed: parts[5].parse().map_err(|_| schema_err(i, "bad seed"))?,
            epoch: parts[6].parse().map_err(|_| schema_err(i, "bad epoch"))?,
            value: parts[7].parse().map_err(|_| schema_err(i, "bad value"))?,
        });
    }
    Ok(rows)
}

/// Validate that a CSV file starts with the schema line and the expected
/// header; used by the verify subcommand.
pub fn check_schema(path: &Path, expected_header: &str) -> Result<()> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let mut lines = text.lines();
    match lines.next() {
        Some(l) if l.trim() == SCHEMA_LINE => {}
        _ => bail!("{}: missing `{SCHEMA_LINE}`", path.display()),
    }
    match lines.next() {
        Some(l) if l.trim() == expected_header => Ok(()),
        Some(l) => bail!("{}: header mismatch, got `{l}`", path.display()),
        None => bail!("{}: missing header", path.display()),
    }
}

/// Pick the expected header from the file name, or None for non-CSV files.
pub fn expected_header_for(name: &str) -> Option<&'static str> {
    if !name.ends_with(".csv") {
        return None;
    }
    if name.starts_with("trace_") {
        Some(TRACE_HEADER)
    } else if name.starts_with("summary") {
        Some(SUMMARY_HEADER)
    } else if name.starts_with("scores") {
        Some(SCORES_HEADER)
    } else if name.contains("points") {
        Some(POINTS_HEADER)
    } else if name.starts_with("ablation") {
        Some(ABLATION_HEADER)
    } else if name.starts_with("aggregate") {
        Some(AGGREGATE_HEADER)
    } else {
        None
    }
}
