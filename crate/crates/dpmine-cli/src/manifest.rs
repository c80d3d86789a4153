//! Run manifests: a plain-text record of what a command produced.
//!
//! Format: `key = value` lines followed by one `file = <relative path>`
//! line per output. The verify subcommand checks that every listed file
//! exists and that CSV files carry the right schema.

use crate::csvio;
use anyhow::{bail, Context, Result};
use std::fmt::Write as _;
use std::path::Path;
use std::time::{SystemTime, UNIX_EPOCH};

#[derive(Debug, Default)]
pub struct Manifest {
    pub entries: Vec<(String, String)>,
    pub files: Vec<String>,
}

impl Manifest {
    pub fn new(command: &str) -> Self {
        let mut m = Self::default();
        m.push("command", command);
        m.push("library_version", env!("CARGO_PKG_VERSION"));
        m.push("started_unix", &unix_now().to_string());
        m
    }

    pub fn push(&mut self, key: &str, value: &str) {
        self.entries.push((key.to_string(), value.to_string()));
    }

    pub fn add_file(&mut self, name: &str) {
        self.files.push(name.to_string());
    }

    pub fn finish(&mut self) {
        self.push("finished_unix", &unix_now().to_string());
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        for (k, v) in &self.entries {
            let _ = writeln!(out, "{k} = {v}");
        }
        for f in &self.files {
            let _ = writeln!(out, "file = {f}");
        }
        out
    }

    pub fn write(&self, dir: &Path) -> Result<()> {
        csvio::write_atomic(&dir.join("manifest.txt"), &self.render())
    }
}

fn unix_now() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0)
}

/// Verify a manifest: every listed file exists, and CSVs match their schema.
/// Returns the list of verified files.
pub fn verify(manifest_path: &Path) -> Result<Vec<String>> {
    let text = std::fs::read_to_string(manifest_path)
        .with_context(|| format!("reading {}", manifest_path.display()))?;
    let dir = manifest_path.parent().unwrap_or(Path::new("."));
    let mut checked = Vec::new();
    for line in text.lines() {
        let Some((key, value)) = line.split_once('=') else {
            continue;
        };
        if key.trim() != "file" {
            continue;
        }
        let rel = value.trim();
        let path = dir.join(rel);
        if !path.exists() {
            bail!("{}: listed file missing: {rel}", manifest_path.display());
        }
        let name = path
            .file_name()
            .map(|s| s.to_string_lossy().to_string())
            .unwrap_or_default();
        if let Some(header) = csvio::expected_header_for(&name) {
            csvio::check_schema(&path, header)?;
        }
        checked.push(rel.to_string());
    }
    if checked.is_empty() {
        bail!("{}: no files listed", manifest_path.display());
    }
    Ok(checked)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn manifest_roundtrip_and_verify() {
        let dir = std::env::temp_dir().join(format!("dpmine-man-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let body = csvio::csv_header(csvio::POINTS_HEADER) + "0,0,0\n";
        csvio::write_atomic(&dir.join("random_points.csv"), &body).unwrap();
        let mut m = Manifest::new("test");
        m.add_file("random_points.csv");
        m.finish();
        m.write(&dir).unwrap();
        let files = verify(&dir.join("manifest.txt")).unwrap();
        assert_eq!(files, vec!["random_points.csv"]);
        std::fs::remove_dir_all(&dir).ok();
    }

    #[test]
    fn verify_rejects_missing_file() {
        let dir = std::env::temp_dir().join(format!("dpmine-man2-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let mut m = Manifest::new("test");
        m.add_file("not_there.csv");
        m.write(&dir).unwrap();
        assert!(verify(&dir.join("manifest.txt")).is_err());
        std::fs::remove_dir_all(&dir).ok();
    }
}
