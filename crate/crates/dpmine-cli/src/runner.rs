//! Shared machinery for the estimate and dimsweep commands: run
//! specification, data generation, MAP concentration, training, and
//! summary rows.

use crate::config::{Concentration, Config, Family, WeightingChoice};
use anyhow::Result;
use dpmine::dp::{fit_base_measure, fit_concentration_map, DpConfig};
use dpmine::metrics::summarize_trace;
use dpmine::mi::{
    train_mine, BatchPolicy, BoundKind, MineConfig, PairedSample, TrainOutcome, TruncationPolicy, Weighting,
};
use dpmine::rng::{purpose, stream};
use dpmine::synthetic::{gen_independent_uniform, gen_sign_gaussian, true_mi_sign_gaussian};

/// One training cell.
#[derive(Debug, Clone)]
pub struct RunSpec {
    pub run_id: String,
    pub dim: usize,
    pub seed: u64,
    pub dp: bool,
    pub epochs: usize,
}

pub fn run_id(family: &Family, bound: BoundKind, dp: bool, dim: usize, seed: u64) -> String {
    format!(
        "{}-{}-{}-d{}-s{}",
        family.label(),
        bound.label(),
        if dp { "dp" } else { "empirical" },
        dim,
        seed
    )
}

/// Expand the config into run cells over the given dimension list.
pub fn build_runs(config: &Config, dims: &[usize], epochs_for: impl Fn(usize) -> usize) -> Vec<RunSpec> {
    let mut runs = Vec::new();
    let weightings: Vec<bool> = match config.weighting {
        WeightingChoice::Dp => vec![true],
        WeightingChoice::Empirical => vec![false],
        WeightingChoice::Both => vec![true, false],
    };
    for &dim in dims {
        for &seed in &config.seeds {
            for &dp in &weightings {
                runs.push(RunSpec {
                    run_id: run_id(&config.family, config.bound, dp, dim, seed),
                    dim,
                    seed,
                    dp,
                    epochs: epochs_for(dim),
                });
            }
        }
    }
    runs
}

/// Generate the paired sample for one run. DP and empirical arms share the
/// same data stream, so paired comparisons see identical datasets.
pub fn make_sample(config: &Config, dim: usize, seed: u64) -> PairedSample {
    let mut rng = stream(seed, purpose::DATA, 0);
    match config.family {
        Family::IndependentUniform => gen_independent_uniform(dim, config.n, &mut rng),
        Family::SignGaussian => gen_sign_gaussian(dim, config.n, config.noise_scale, &mut rng),
    }
}

/// Ground-truth MI for the summary row; per-coordinate independence makes
/// the d-dimensional truth d times the 1-D value.
pub fn truth_for(config: &Config, dim: usize) -> Result<f64> {
    Ok(match config.family {
        Family::IndependentUniform => 0.0,
        Family::SignGaussian => dim as f64 * true_mi_sign_gaussian(config.noise_scale)?,
    })
}

/// Resolve the DP weighting (MAP concentration when requested) for a sample.
pub fn resolve_weighting(config: &Config, sample: &PairedSample) -> Result<Weighting> {
    let joint: Vec<Vec<f64>> = sample
        .xs()
        .iter()
        .zip(sample.ys())
        .map(|(x, y)| x.iter().chain(y.iter()).cloned().collect())
        .collect();
    let concentration = match config.concentration {
        Concentration::Fixed(a) => a,
        Concentration::Map => {
            let base = fit_base_measure(&joint)?;
            fit_concentration_map(&joint, &base, &config.map_grid)?
        }
    };
    Ok(Weighting::Dp(DpConfig {
        concentration,
        epsilon: config.epsilon,
        truncation_override: if config.truncation_override == 0 {
            None
        } else {
            Some(config.truncation_override)
        },
        n_max: config.n_max,
        uniform_mode: false,
    }))
}

pub fn mine_config(config: &Config, spec: &RunSpec) -> MineConfig {
    MineConfig {
        bound: config.bound,
        epochs: spec.epochs,
        batch: if config.minibatch == 0 {
            BatchPolicy::FullDraw
        } else {
            BatchPolicy::Minibatch(config.minibatch)
        },
        redraw_per_epoch: config.redraw_per_epoch,
        truncation: if config.truncation_per_epoch {
            TruncationPolicy::PerEpoch
        } else {
            TruncationPolicy::FixedAtStart
        },
        learning_rate: config.learning_rate,
        seed: spec.seed,
        derangement: config.derangement,
        critic_hidden: config.critic_hidden.clone(),
        critic_output: config.critic_output,
    }
}

/// Execute one run end to end.
pub fn execute(config: &Config, spec: &RunSpec) -> Result<TrainOutcome> {
    let sample = make_sample(config, spec.dim, spec.seed);
    let weighting = if spec.dp {
        resolve_weighting(config, &sample)?
    } else {
        Weighting::Empirical
    };
    let cfg = mine_config(config, spec);
    Ok(train_mine(sample.xs(), sample.ys(), &weighting, &cfg)?)
}

/// One summary CSV row for a finished run.
pub fn summary_row(config: &Config, spec: &RunSpec, outcome: &TrainOutcome) -> Result<String> {
    let truth = truth_for(config, spec.dim)?;
    let window = config.window.min(outcome.trace.values.len());
    let s = summarize_trace(&outcome.trace.values, truth, window, config.tol)?;
    Ok(format!(
        "{},{},{},{},{},{},{},{},{},{},{},{}",
        spec.run_id,
        outcome.trace.estimator,
        outcome.trace.bound.label(),
        outcome.trace.weighting,
        spec.dim,
        spec.seed,
        truth,
        s.final_window_mean,
        s.final_window_var,
        s.full_var,
        s.abs_bias_vs_truth,
        s.epochs_to_band.map(|e| e.to_string()).unwrap_or_else(|| "never".into()),
    ))
}
