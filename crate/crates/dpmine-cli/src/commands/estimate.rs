//! `estimate` and `dimsweep`: train estimator cells and write traces,
//! summaries, and a manifest.

use crate::config::Config;
use crate::csvio::{self, TraceRow};
use crate::manifest::Manifest;
use crate::runner::{self, RunSpec};
use anyhow::{bail, Result};
use rayon::prelude::*;
use std::path::Path;
use std::time::Instant;

pub struct CellResult {
    pub spec: RunSpec,
    pub outcome: anyhow::Result<(String, String, f64)>, // (trace body, summary row, seconds)
}

fn run_cells(config: &Config, runs: &[RunSpec]) -> Result<Vec<CellResult>> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.workers)
        .build()?;
    let results: Vec<CellResult> = pool.install(|| {
        runs.par_iter()
            .map(|spec| {
                let t0 = Instant::now();
                let outcome = runner::execute(config, spec).and_then(|out| {
                    let meta = TraceRow {
                        run_id: &spec.run_id,
                        estimator: &out.trace.estimator,
                        bound: out.trace.bound.label(),
                        weighting: &out.trace.weighting,
                        dim: spec.dim,
                        seed: spec.seed,
                    };
                    let body = csvio::render_trace_csv(&meta, &out.trace.values, &out.trace.epoch_ms, config.timing);
                    let row = runner::summary_row(config, spec, &out)?;
                    Ok((body, row, t0.elapsed().as_secs_f64()))
                });
                CellResult {
                    spec: spec.clone(),
                    outcome,
                }
            })
            .collect()
    });
    Ok(results)
}

/// Shared implementation: run the cells, write per-run traces, one summary
/// file, and the manifest. Returns an error only when every run failed.
pub fn write_outputs(command: &str, config: &Config, runs: &[RunSpec], out_dir: &Path) -> Result<()> {
    let results = run_cells(config, runs)?;
    let mut manifest = Manifest::new(command);
    manifest.push("config", &format!("{:?}", config.family));
    manifest.push("bound", config.bound.label());
    manifest.push("n", &config.n.to_string());
    manifest.push("epochs", &config.epochs.to_string());
    manifest.push("seeds", &config.seeds.iter().map(|s| s.to_string()).collect::<Vec<_>>().join(","));

    let mut summary = csvio::csv_header(csvio::SUMMARY_HEADER);
    let mut ok_count = 0usize;
    for r in &results {
        match &r.outcome {
            Ok((trace_body, summary_row, secs)) => {
                let file = format!("trace_{}.csv", r.spec.run_id);
                csvio::write_atomic(&out_dir.join(&file), trace_body)?;
                manifest.add_file(&file);
                manifest.push(
                    "cell_seconds",
                    &format!("{} = {:.3}", r.spec.run_id, secs),
                );
                summary.push_str(summary_row);
                summary.push('\n');
                ok_count += 1;
            }
            Err(e) => {
                manifest.push("failed_run", &format!("{}: {e}", r.spec.run_id));
            }
        }
    }
    csvio::write_atomic(&out_dir.join("summary.csv"), &summary)?;
    manifest.add_file("summary.csv");
    manifest.finish();
    manifest.write(out_dir)?;
    eprintln!(
        "{command}: {ok_count}/{} runs finished, outputs in {}",
        results.len(),
        out_dir.display()
    );
    if ok_count == 0 {
        bail!("all {} runs failed", results.len());
    }
    Ok(())
}

pub fn cmd_estimate(config: &Config, out_dir: &Path) -> Result<()> {
    let runs = runner::build_runs(config, &[config.dim], |_| config.epochs);
    write_outputs("estimate", config, &runs, out_dir)
}

pub fn cmd_dimsweep(config: &Config, out_dir: &Path) -> Result<()> {
    let epochs = config.epochs;
    let epochs_high = if config.epochs_d1000 == 0 {
        config.epochs
    } else {
        config.epochs_d1000
    };
    let dims = config.dims.clone();
    let runs = runner::build_runs(config, &dims, move |d| if d >= 1000 { epochs_high } else { epochs });
    write_outputs("dimsweep", config, &runs, out_dir)
}
