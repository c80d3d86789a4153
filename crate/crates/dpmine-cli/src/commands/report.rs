//! `report`: aggregate trace CSVs into charts and a pass/fail table.

use crate::csvio::{self, ParsedTraceRow};
use crate::svg::{self, TraceSeries};
use anyhow::Result;
use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

const DP_COLOR: &str = "#1f77b4";
const EMP_COLOR: &str = "#ff7f0e";

pub struct ReportArgsResolved {
    pub inputs: Vec<PathBuf>,
    pub truth: f64,
    pub window: usize,
    pub tol: f64,
}

/// Group rows of one file back into the run's value sequence.
fn trace_values(rows: &[ParsedTraceRow]) -> Vec<f64> {
    let mut v: Vec<(usize, f64)> = rows.iter().map(|r| (r.epoch, r.value)).collect();
    v.sort_by_key(|(e, _)| *e);
    v.into_iter().map(|(_, x)| x).collect()
}

pub fn cmd_report(args: &ReportArgsResolved, out_dir: &Path) -> Result<()> {
    if args.inputs.is_empty() {
        eprintln!("report: no input traces given; writing empty report");
        csvio::write_atomic(&out_dir.join("aggregate.csv"), &csvio::csv_header(csvio::AGGREGATE_HEADER))?;
        return Ok(());
    }
    // one group per (bound, dim)
    let mut groups: BTreeMap<(String, usize), Vec<(String, String, Vec<f64>, ParsedTraceRow)>> = BTreeMap::new();
    let mut aggregate = csvio::csv_header(csvio::AGGREGATE_HEADER);
    for path in &args.inputs {
        let rows = csvio::read_trace_csv(path)?;
        if rows.is_empty() {
            continue;
        }
        let head = rows[0].clone();
        let values = trace_values(&rows);
        let window = args.window.min(values.len()).max(1);
        let tail = &values[values.len() - window..];
        let mean: f64 = tail.iter().sum::<f64>() / window as f64;
        let full_mean: f64 = values.iter().sum::<f64>() / values.len() as f64;
        let full_var: f64 = if values.len() > 1 {
            values.iter().map(|v| (v - full_mean) * (v - full_mean)).sum::<f64>() / (values.len() as f64 - 1.0)
        } else {
            0.0
        };
        let in_band = (mean - args.truth).abs() <= args.tol;
        let _ = writeln!(
            aggregate,
            "{},{},{},{},{},{},{},{},{}",
            head.run_id, head.estimator, head.bound, head.weighting, head.dim, head.seed, mean, full_var, in_band
        );
        groups
            .entry((head.bound.clone(), head.dim))
            .or_default()
            .push((head.run_id.clone(), head.weighting.clone(), values, head));
    }
    csvio::write_atomic(&out_dir.join("aggregate.csv"), &aggregate)?;

    for ((bound, dim), runs) in &groups {
        let series: Vec<TraceSeries> = runs
            .iter()
            .map(|(run_id, weighting, values, _)| TraceSeries {
                label: run_id.as_str(),
                color: if weighting == "dp" { DP_COLOR } else { EMP_COLOR },
                values,
            })
            .collect();
        let chart = svg::trace_chart(
            &format!("{bound} bound, d={dim}"),
            &series,
            Some(args.truth),
        );
        csvio::write_atomic(&out_dir.join(format!("traces_{bound}_d{dim}.svg")), &chart)?;
    }
    eprintln!(
        "report: {} traces across {} charts, outputs in {}",
        args.inputs.len(),
        groups.len(),
        out_dir.display()
    );
    Ok(())
}
