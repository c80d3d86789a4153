//! Experiment harness: configure, run, and report every estimator and
//! generative-demo experiment. Subcommands: estimate, dimsweep, gendemo,
//! report, defaults, verify.

mod commands;
mod config;
mod csvio;
mod manifest;
mod runner;
mod svg;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use config::Config;
use std::path::PathBuf;

#[derive(Parser)]
#[command(name = "dpmine", version, about = "DP-weighted mutual information estimation experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Default)]
struct CommonArgs {
    /// Config file (key = value with [section] headers); defaults apply
    /// when absent.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory (env DPMINE_OUT overrides).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Comma-separated seed list.
    #[arg(long)]
    seeds: Option<String>,
    /// Worker threads (0 = all cores).
    #[arg(long)]
    workers: Option<usize>,
    /// Training epochs.
    #[arg(long)]
    epochs: Option<usize>,
    /// Bound: dv or js.
    #[arg(long)]
    bound: Option<String>,
    /// Weighting: dp, empirical or both.
    #[arg(long)]
    weighting: Option<String>,
    /// Record wall-clock per epoch in trace CSVs (breaks byte-identical
    /// reruns; off by default).
    #[arg(long)]
    timing: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Train MI estimators at one dimension and write traces + summary.
    Estimate(CommonArgs),
    /// Sweep the dimension grid.
    Dimsweep(CommonArgs),
    /// Train the coil generative demo.
    Gendemo {
        #[command(flatten)]
        common: CommonArgs,
        /// Run the paired with/without-MI ablation study instead of a
        /// single training run.
        #[arg(long = "no-mi")]
        no_mi: bool,
    },
    /// Render charts and an aggregate table from trace CSVs.
    Report {
        /// Trace CSV files.
        inputs: Vec<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Reference truth for the horizontal line and the band check.
        #[arg(long, default_value_t = 0.0)]
        truth: f64,
        #[arg(long, default_value_t = 100)]
        window: usize,
        #[arg(long, default_value_t = 0.15)]
        tol: f64,
    },
    /// Print the embedded defaults in config-file form.
    Defaults,
    /// Check that a manifest's files exist and match their schemas.
    Verify {
        /// Path to a manifest.txt.
        manifest: PathBuf,
    },
}

fn load_config(common: &CommonArgs) -> Result<Config> {
    let mut cfg = match &common.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .with_context(|| format!("reading config {}", path.display()))?;
            Config::from_text(&text)?
        }
        None => Config::default(),
    };
    if let Some(seeds) = &common.seeds {
        cfg.seeds = seeds
            .split(',')
            .map(|s| s.trim().parse::<u64>().context("bad seed"))
            .collect::<Result<Vec<u64>>>()?;
    }
    if let Some(w) = common.workers {
        cfg.workers = w;
    }
    if let Some(e) = common.epochs {
        cfg.epochs = e;
    }
    if let Some(b) = &common.bound {
        cfg.bound = config::parse_bound(b)?;
    }
    if let Some(w) = &common.weighting {
        cfg.weighting = config::parse_weighting(w)?;
    }
    if common.timing {
        cfg.timing = true;
    }
    if let Some(out) = &common.out {
        cfg.out = out.display().to_string();
    }
    if let Ok(out) = std::env::var("DPMINE_OUT") {
        if !out.is_empty() {
            cfg.out = out;
        }
    }
    Ok(cfg)
}

fn out_dir(cfg: &Config) -> PathBuf {
    PathBuf::from(&cfg.out)
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    match cli.command {
        Command::Estimate(common) => {
            let cfg = load_config(&common)?;
            commands::estimate::cmd_estimate(&cfg, &out_dir(&cfg))
        }
        Command::Dimsweep(common) => {
            let cfg = load_config(&common)?;
            commands::estimate::cmd_dimsweep(&cfg, &out_dir(&cfg))
        }
        Command::Gendemo { common, no_mi } => {
            let cfg = load_config(&common)?;
            commands::gendemo::cmd_gendemo(&cfg, &out_dir(&cfg), no_mi)
        }
        Command::Report {
            inputs,
            out,
            truth,
            window,
            tol,
        } => {
            let out = std::env::var("DPMINE_OUT")
                .ok()
                .filter(|s| !s.is_empty())
                .map(PathBuf::from)
                .or(out)
                .unwrap_or_else(|| PathBuf::from("out"));
            commands::report::cmd_report(
                &commands::report::ReportArgsResolved {
                    inputs,
                    truth,
                    window,
                    tol,
                },
                &out,
            )
        }
        Command::Defaults => {
            print!("{}", Config::default().to_text());
            Ok(())
        }
        Command::Verify { manifest } => {
            let files = manifest::verify(&manifest)?;
            for f in &files {
                println!("ok {f}");
            }
            println!("verified {} files", files.len());
            Ok(())
        }
    }
}
