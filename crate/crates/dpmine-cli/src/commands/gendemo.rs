//! `gendemo`: train the coil generative model, emit generated points,
//! coverage and feature-space scores, checkpoints, and optional scatters.

use crate::config::{Concentration, Config};
use crate::csvio;
use crate::manifest::Manifest;
use crate::svg;
use anyhow::Result;
use dpmine::dp::{fit_base_measure, fit_concentration_map, DpConfig};
use dpmine::gendemo::{
    coverage_metric, generate, save_checkpoint, train_genmodel, GenModel, GenTrainConfig, GenerateMode,
};
use dpmine::metrics::{fid, kid, mmd_score, pca2_features};
use dpmine::mi::BoundKind;
use dpmine::nn::Activation;
use dpmine::rng::{purpose, stream};
use dpmine::synthetic::{gen_coil, CoilSample};
use rayon::prelude::*;
use std::fmt::Write as _;
use std::path::Path;

pub fn gen_config(config: &Config, seed: u64, with_mi: bool, concentration: f64) -> GenTrainConfig {
    GenTrainConfig {
        epochs: config.gen_epochs,
        latent_dim: config.latent_dim,
        sublatent_dim: config.sublatent_dim,
        lambda_gp: config.lambda_gp,
        mi_coefficients: if with_mi { config.mi_coefficients } else { [0.0; 4] },
        learning_rate: config.learning_rate,
        seed,
        dp: DpConfig {
            concentration,
            epsilon: config.gen_epsilon,
            truncation_override: None,
            n_max: config.n_max,
            uniform_mode: false,
        },
        atom_cap: config.atom_cap,
        bound: config.bound,
        kernel: dpmine::distances::KernelSpec::default_gaussian_mixture(),
        hidden: config.hidden,
        critic_output: Activation::Identity,
    }
}

pub fn resolve_concentration(config: &Config, coil: &CoilSample) -> Result<f64> {
    Ok(match config.concentration {
        Concentration::Fixed(a) => a,
        Concentration::Map => {
            let data: Vec<Vec<f64>> = coil.points.iter().map(|p| p.to_vec()).collect();
            let base = fit_base_measure(&data)?;
            fit_concentration_map(&data, &base, &config.map_grid)?
        }
    })
}

fn points_csv(points: &[[f64; 3]]) -> String {
    let mut out = csvio::csv_header(csvio::POINTS_HEADER);
    for p in points {
        let _ = writeln!(out, "{},{},{}", p[0], p[1], p[2]);
    }
    out
}

struct Scores {
    coverage: f64,
    fid_mean: f64,
    fid_se: f64,
    kid_mean: f64,
    kid_se: f64,
    mmd_mean: f64,
    mmd_se: f64,
}

/// Coverage plus feature-space scores. The real features stay fixed; each
/// replication regenerates the random sample.
fn score_model(model: &GenModel, coil: &CoilSample, config: &Config, seed: u64) -> Result<Scores> {
    let mut gen_rng = stream(seed, purpose::NOISE, u64::MAX);
    let random = generate(model, config.n_generate, GenerateMode::Random, None, &mut gen_rng)?;
    let coverage = coverage_metric(&random, &coil.points, &coil.t, config.bins)?;

    let real_feats = pca2_features(&coil.points, &coil.points)?;
    let reps = config.score_replications.max(1);
    let mut fids = Vec::with_capacity(reps);
    let mut kids = Vec::with_capacity(reps);
    let mut mmds = Vec::with_capacity(reps);
    for rep in 0..reps {
        let mut rng = stream(seed, purpose::NOISE, 1_000_000 + rep as u64);
        let sample = generate(model, config.n_generate, GenerateMode::Random, None, &mut rng)?;
        let gen_feats = pca2_features(&coil.points, &sample)?;
        fids.push(fid(&real_feats, &gen_feats)?);
        kids.push(kid(&real_feats, &gen_feats)?);
        mmds.push(mmd_score(&real_feats, &gen_feats)?);
    }
    let stats = |v: &[f64]| -> (f64, f64) {
        let n = v.len() as f64;
        let mean = v.iter().sum::<f64>() / n;
        if v.len() < 2 {
            return (mean, 0.0);
        }
        let var = v.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
        (mean, (var / n).sqrt())
    };
    let (fid_mean, fid_se) = stats(&fids);
    let (kid_mean, kid_se) = stats(&kids);
    let (mmd_mean, mmd_se) = stats(&mmds);
    Ok(Scores {
        coverage,
        fid_mean,
        fid_se,
        kid_mean,
        kid_se,
        mmd_mean,
        mmd_se,
    })
}

pub fn cmd_gendemo(config: &Config, out_dir: &Path, no_mi: bool) -> Result<()> {
    let seed0 = config.seeds.first().copied().unwrap_or(0);
    let mut data_rng = stream(seed0, purpose::DATA, u64::MAX);
    let coil = gen_coil(config.gen_points, &mut data_rng);
    let concentration = resolve_concentration(config, &coil)?;

    let mut manifest = Manifest::new("gendemo");
    manifest.push("concentration", &concentration.to_string());
    manifest.push("epochs", &config.gen_epochs.to_string());
    manifest.push("n_points", &config.gen_points.to_string());
    manifest.push("mi", if no_mi { "ablation" } else { "on" });

    if no_mi {
        // paired study: with and without the MI regularizers per seed
        let pool = rayon::ThreadPoolBuilder::new().num_threads(config.workers).build()?;
        let rows: Vec<Result<(u64, f64, f64)>> = pool.install(|| {
            config
                .seeds
                .par_iter()
                .map(|&seed| {
                    let (with_model, _) = train_genmodel(&coil.points, &gen_config(config, seed, true, concentration))?;
                    let (no_model, _) = train_genmodel(&coil.points, &gen_config(config, seed, false, concentration))?;
                    let with_scores = score_model(&with_model, &coil, config, seed)?;
                    let no_scores = score_model(&no_model, &coil, config, seed)?;
                    Ok((seed, with_scores.coverage, no_scores.coverage))
                })
                .collect()
        });
        let mut body = csvio::csv_header(csvio::ABLATION_HEADER);
        for row in rows {
            let (seed, with_cov, no_cov) = row?;
            let _ = writeln!(body, "{seed},{with_cov},{no_cov}");
        }
        csvio::write_atomic(&out_dir.join("ablation.csv"), &body)?;
        manifest.add_file("ablation.csv");
        manifest.finish();
        manifest.write(out_dir)?;
        eprintln!("gendemo ablation written to {}", out_dir.display());
        return Ok(());
    }

    let (model, hist) = train_genmodel(&coil.points, &gen_config(config, seed0, true, concentration))?;
    save_checkpoint(&model, &out_dir.join("checkpoints"))?;
    manifest.add_file("checkpoints/manifest.txt");

    let mut gen_rng = stream(seed0, purpose::NOISE, u64::MAX - 1);
    let random = generate(&model, config.n_generate, GenerateMode::Random, None, &mut gen_rng)?;
    let recon_inputs: Vec<[f64; 3]> = coil.points.iter().take(config.n_generate).copied().collect();
    let reconstructed = generate(&model, 0, GenerateMode::Reconstruct, Some(&recon_inputs), &mut gen_rng)?;
    csvio::write_atomic(&out_dir.join("random_points.csv"), &points_csv(&random))?;
    csvio::write_atomic(&out_dir.join("reconstructed_points.csv"), &points_csv(&reconstructed))?;
    manifest.add_file("random_points.csv");
    manifest.add_file("reconstructed_points.csv");

    let scores = score_model(&model, &coil, config, seed0)?;
    let mut body = csvio::csv_header(csvio::SCORES_HEADER);
    let model_name = "wmmd_mi";
    let _ = writeln!(body, "{model_name},coverage,tbin,{},1,0", scores.coverage);
    let _ = writeln!(
        body,
        "{model_name},fid,pca2,{},{},{}",
        scores.fid_mean, config.score_replications, scores.fid_se
    );
    let _ = writeln!(
        body,
        "{model_name},kid,pca2,{},{},{}",
        scores.kid_mean, config.score_replications, scores.kid_se
    );
    let _ = writeln!(
        body,
        "{model_name},mmd,pca2,{},{},{}",
        scores.mmd_mean, config.score_replications, scores.mmd_se
    );
    csvio::write_atomic(&out_dir.join("scores.csv"), &body)?;
    manifest.add_file("scores.csv");

    if config.emit_svg {
        let proj = |pts: &[[f64; 3]]| -> Vec<(f64, f64)> { pts.iter().map(|p| (p[0], p[2])).collect() };
        let svg_r = svg::scatter_chart("random samples (x,z)", &proj(&random), "#1f77b4");
        let svg_c = svg::scatter_chart("reconstructed samples (x,z)", &proj(&reconstructed), "#2ca02c");
        csvio::write_atomic(&out_dir.join("scatter_random.svg"), &svg_r)?;
        csvio::write_atomic(&out_dir.join("scatter_reconstructed.svg"), &svg_c)?;
        manifest.add_file("scatter_random.svg");
        manifest.add_file("scatter_reconstructed.svg");
    }

    let final_eg = hist.encoder_generator.last().copied().unwrap_or(f64::NAN);
    manifest.push("final_eg_loss", &final_eg.to_string());
    manifest.push("coverage", &scores.coverage.to_string());
    manifest.finish();
    manifest.write(out_dir)?;
    eprintln!(
        "gendemo: coverage {:.3}, outputs in {}",
        scores.coverage,
        out_dir.display()
    );
    let _ = BoundKind::Dv;
    Ok(())
}
