//! Hybrid VAE-GAN demo trained on the coil curve.
//!
//! Six MLPs: encoder E (data → code), generator G (code → data, tanh
//! output), code generator CG (sub-latent noise → code), discriminator D,
//! and two MI critics. Each epoch draws a fresh DP posterior over the data,
//! then updates in order: discriminator, code generator, MI critics,
//! encoder+generator. The encoder/generator objective combines adversarial
//! terms, MMD reconstruction against the posterior, a code-space MMD
//! regularizer, and the four MI bounds that tie codes to data and to every
//! generated batch.
//!
//! The chain rule plumbing follows one pattern throughout: accumulate
//! dLoss/d(batch output) per sample across every term that touches the
//! batch, then run a single backward pass per sample with the summed
//! upstream.

use crate::distances::{mmd_squared, mmd_squared_grad_q, KernelSpec, WeightedPointSet};
use crate::dp::{self, DpConfig, DpPosteriorDraw};
use crate::error::{Error, Result};
use crate::mi::{bound_gradients, draw_permutation, BoundKind, PairedSample};
use crate::nn::{grad_penalty_value_and_grad, Activation, AdamState, MlpNetwork};
use crate::rng::{purpose, stream, Stream};
use rand::Rng;
use rand_distr::StandardNormal;
use std::io::Write as _;
use std::path::Path;

/// The six networks of the demo.
#[derive(Debug, Clone)]
pub struct GenModel {
    pub encoder: MlpNetwork,
    pub generator: MlpNetwork,
    pub code_generator: MlpNetwork,
    pub discriminator: MlpNetwork,
    pub critic_data_code: MlpNetwork,
    pub critic_fake_code: MlpNetwork,
}

/// Training configuration for [`train_genmodel`].
#[derive(Debug, Clone)]
pub struct GenTrainConfig {
    pub epochs: usize,
    /// Latent (code) dimension p.
    pub latent_dim: usize,
    /// Sub-latent dimension q < p.
    pub sublatent_dim: usize,
    pub lambda_gp: f64,
    /// Multipliers on the four MI bounds in the encoder/generator objective;
    /// zeros disable the regularizers (and the critic updates).
    pub mi_coefficients: [f64; 4],
    pub learning_rate: f64,
    pub seed: u64,
    pub dp: DpConfig,
    /// Per-epoch atom count ceiling when the stopping rule overshoots.
    pub atom_cap: usize,
    pub bound: BoundKind,
    pub kernel: KernelSpec,
    /// Hidden width of encoder/generator/discriminator/critics.
    pub hidden: usize,
    pub critic_output: Activation,
}

impl Default for GenTrainConfig {
    fn default() -> Self {
        Self {
            epochs: 5000,
            latent_dim: 100,
            sublatent_dim: 10,
            lambda_gp: 10.0,
            mi_coefficients: [1.0; 4],
            learning_rate: 0.0002,
            seed: 0,
            dp: DpConfig {
                concentration: 0.1,
                epsilon: 0.01,
                ..DpConfig::default()
            },
            atom_cap: 256,
            bound: BoundKind::Dv,
            kernel: KernelSpec::default_gaussian_mixture(),
            hidden: 128,
            critic_output: Activation::Identity,
        }
    }
}

impl GenTrainConfig {
    fn validate(&self) -> Result<()> {
        if self.latent_dim <= self.sublatent_dim || self.sublatent_dim == 0 {
            return Err(Error::DimensionMismatch {
                expected: self.latent_dim,
                got: self.sublatent_dim,
            });
        }
        if self.epochs == 0 || self.lambda_gp < 0.0 {
            return Err(Error::EmptyDataset);
        }
        Ok(())
    }
}

impl GenModel {
    /// Glorot-initialized model for a given config.
    pub fn init(config: &GenTrainConfig, rng: &mut Stream) -> Result<Self> {
        let p = config.latent_dim;
        let q = config.sublatent_dim;
        let h = config.hidden;
        let relu = Activation::Relu;
        let encoder = MlpNetwork::init_glorot(&[3, h, h, p], &[relu, relu, Activation::Identity], rng)?;
        let generator = MlpNetwork::init_glorot(&[p, h, h, 3], &[relu, relu, Activation::Tanh], rng)?;
        let code_generator =
            MlpNetwork::init_glorot(&[q, 64, 64, p], &[relu, relu, Activation::Identity], rng)?;
        let discriminator =
            MlpNetwork::init_glorot(&[3, h, h, 1], &[relu, relu, Activation::Identity], rng)?;
        let critic_data_code =
            MlpNetwork::init_glorot(&[3 + p, h, h, 1], &[relu, relu, config.critic_output], rng)?;
        let critic_fake_code =
            MlpNetwork::init_glorot(&[3 + p, h, h, 1], &[relu, relu, config.critic_output], rng)?;
        Ok(Self {
            encoder,
            generator,
            code_generator,
            discriminator,
            critic_data_code,
            critic_fake_code,
        })
    }

    fn forward_batch(net: &MlpNetwork, inputs: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
        inputs.iter().map(|x| net.forward(x)).collect()
    }
}

/// Noise batches for one epoch: ξ (latent) and ξ′ (sub-latent), both
/// standard normal, sized to the atom count.
#[derive(Debug, Clone)]
pub struct NoiseBatch {
    pub latent: Vec<Vec<f64>>,
    pub sublatent: Vec<Vec<f64>>,
}

pub fn sample_noise(n: usize, latent_dim: usize, sublatent_dim: usize, rng: &mut Stream) -> NoiseBatch {
    let draw = |rng: &mut Stream, d: usize| -> Vec<f64> {
        (0..d).map(|_| rng.sample::<f64, _>(StandardNormal)).collect()
    };
    NoiseBatch {
        latent: (0..n).map(|_| draw(rng, latent_dim)).collect(),
        sublatent: (0..n).map(|_| draw(rng, sublatent_dim)).collect(),
    }
}

fn atoms_as_points(draw: &DpPosteriorDraw) -> Result<WeightedPointSet> {
    WeightedPointSet::new(draw.atoms.clone(), draw.weights.clone())
}

/// Encoder/generator loss without the MI terms: adversarial terms on the
/// three fake batches, three MMD reconstruction terms against the posterior,
/// and the code-space regularizer MMD²(F_ξ, F_c).
#[derive(Debug, Clone)]
pub struct EgLoss {
    pub value: f64,
    pub encoder_grad: Vec<f64>,
    pub generator_grad: Vec<f64>,
}

pub fn loss_encoder_generator(
    draw: &DpPosteriorDraw,
    model: &GenModel,
    noises: &NoiseBatch,
    kernel: &KernelSpec,
) -> Result<EgLoss> {
    let n = draw.len();
    if noises.latent.len() != n || noises.sublatent.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: noises.latent.len(),
        });
    }
    let inv_n = 1.0 / n as f64;
    let codes = GenModel::forward_batch(&model.encoder, &draw.atoms)?;
    let codes_fake = GenModel::forward_batch(&model.code_generator, &noises.sublatent)?;
    let g_xi = GenModel::forward_batch(&model.generator, &noises.latent)?;
    let g_c = GenModel::forward_batch(&model.generator, &codes)?;
    let g_ct = GenModel::forward_batch(&model.generator, &codes_fake)?;

    let pos = atoms_as_points(draw)?;
    let set_xi = WeightedPointSet::uniform(g_xi.clone())?;
    let set_c = WeightedPointSet::uniform(g_c.clone())?;
    let set_ct = WeightedPointSet::uniform(g_ct.clone())?;
    let noise_set = WeightedPointSet::uniform(noises.latent.clone())?;
    let code_set = WeightedPointSet::uniform(codes.clone())?;

    let mut value = 0.0;
    // adversarial terms
    let mut d_vals = [0.0; 3];
    for (k, batch) in [&g_xi, &g_c, &g_ct].into_iter().enumerate() {
        for x in batch {
            d_vals[k] += model.discriminator.forward_scalar(x)?;
        }
    }
    value -= inv_n * (d_vals[0] + d_vals[1] + d_vals[2]);
    // reconstruction and regularizer terms
    let mmd_xi = mmd_squared(&pos, &set_xi, kernel)?;
    let mmd_ct = mmd_squared(&pos, &set_ct, kernel)?;
    let mmd_c = mmd_squared(&pos, &set_c, kernel)?;
    let mmd_code = mmd_squared(&noise_set, &code_set, kernel)?;
    value += mmd_xi + mmd_ct + mmd_c + mmd_code;

    // dLoss/d(fake_i) per batch: −(1/N)·∇D plus the MMD chain.
    let grad_mmd_xi = mmd_squared_grad_q(&pos, &set_xi, kernel)?;
    let grad_mmd_ct = mmd_squared_grad_q(&pos, &set_ct, kernel)?;
    let grad_mmd_c = mmd_squared_grad_q(&pos, &set_c, kernel)?;
    let grad_mmd_code = mmd_squared_grad_q(&noise_set, &code_set, kernel)?;

    let mut generator_grad = vec![0.0; model.generator.n_params()];
    let mut encoder_grad = vec![0.0; model.encoder.n_params()];
    // dLoss/dc accumulates across every appearance of the codes
    let mut code_upstream = grad_mmd_code;

    for (batch, inputs, mmd_grad, chain_codes) in [
        (&g_xi, &noises.latent, &grad_mmd_xi, false),
        (&g_c, &codes, &grad_mmd_c, true),
        (&g_ct, &codes_fake, &grad_mmd_ct, false),
    ] {
        for i in 0..n {
            // adversarial chain: −(1/N)·∇_x D(fake_i)
            let d_trace = model.discriminator.forward_trace(&batch[i])?;
            let mut dummy = vec![0.0; model.discriminator.n_params()];
            let d_input = model.discriminator.backward_into(&d_trace, &[-inv_n], &mut dummy)?;
            let upstream: Vec<f64> = (0..3).map(|k| d_input[k] + mmd_grad[i][k]).collect();
            let g_trace = model.generator.forward_trace(&inputs[i])?;
            let g_input = model.generator.backward_into(&g_trace, &upstream, &mut generator_grad)?;
            if chain_codes {
                for (k, v) in g_input.iter().enumerate() {
                    code_upstream[i][k] += v;
                }
            }
        }
    }
    for i in 0..n {
        let e_trace = model.encoder.forward_trace(&draw.atoms[i])?;
        model
            .encoder
            .backward_into(&e_trace, &code_upstream[i], &mut encoder_grad)?;
    }
    if !value.is_finite() {
        return Err(Error::DivergedTraining { epoch: 0 });
    }
    Ok(EgLoss {
        value,
        encoder_grad,
        generator_grad,
    })
}

/// Discriminator loss: mean critic value on the three fake batches minus
/// the weighted posterior term, plus the gradient penalty on interpolates
/// pooled from the three fake sources.
pub fn loss_discriminator(
    draw: &DpPosteriorDraw,
    model: &GenModel,
    noises: &NoiseBatch,
    lambda_gp: f64,
    rng: &mut Stream,
) -> Result<(f64, Vec<f64>)> {
    let n = draw.len();
    if noises.latent.len() != n || noises.sublatent.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: noises.latent.len(),
        });
    }
    let inv_n = 1.0 / n as f64;
    let codes = GenModel::forward_batch(&model.encoder, &draw.atoms)?;
    let codes_fake = GenModel::forward_batch(&model.code_generator, &noises.sublatent)?;
    let g_xi = GenModel::forward_batch(&model.generator, &noises.latent)?;
    let g_c = GenModel::forward_batch(&model.generator, &codes)?;
    let g_ct = GenModel::forward_batch(&model.generator, &codes_fake)?;

    let mut value = 0.0;
    let mut inputs: Vec<Vec<f64>> = Vec::with_capacity(4 * n);
    let mut upstreams: Vec<Vec<f64>> = Vec::with_capacity(4 * n);
    for batch in [&g_xi, &g_c, &g_ct] {
        for x in batch {
            value += inv_n * model.discriminator.forward_scalar(x)?;
            inputs.push(x.clone());
            upstreams.push(vec![inv_n]);
        }
    }
    for (i, atom) in draw.atoms.iter().enumerate() {
        let w = 3.0 * draw.weights[i];
        value -= w * model.discriminator.forward_scalar(atom)?;
        inputs.push(atom.clone());
        upstreams.push(vec![-w]);
    }
    let mut grad = model.discriminator.backward_batch(&inputs, &upstreams)?;

    if lambda_gp > 0.0 {
        let interpolates: Vec<Vec<f64>> = (0..n)
            .map(|i| {
                let source = match rng.random_range(0..3u8) {
                    0 => &g_xi[i],
                    1 => &g_c[i],
                    _ => &g_ct[i],
                };
                let u: f64 = rng.random_range(0.0..1.0);
                source
                    .iter()
                    .zip(&draw.atoms[i])
                    .map(|(f, r)| u * f + (1.0 - u) * r)
                    .collect()
            })
            .collect();
        let (penalty, pen_grad) = grad_penalty_value_and_grad(&model.discriminator, &interpolates)?;
        value += lambda_gp * penalty;
        for (g, pg) in grad.iter_mut().zip(&pen_grad) {
            *g += lambda_gp * pg;
        }
    }
    if !value.is_finite() {
        return Err(Error::DivergedTraining { epoch: 0 });
    }
    Ok((value, grad))
}

/// Code-generator loss: MMD² between encoder codes and generated codes,
/// uniform weights, gradients to the code generator only.
pub fn loss_code_generator(
    model: &GenModel,
    codes: &[Vec<f64>],
    sublatent: &[Vec<f64>],
    kernel: &KernelSpec,
) -> Result<(f64, Vec<f64>)> {
    if codes.is_empty() || sublatent.is_empty() {
        return Err(Error::EmptySample);
    }
    let codes_fake = GenModel::forward_batch(&model.code_generator, sublatent)?;
    let c_set = WeightedPointSet::uniform(codes.to_vec())?;
    let ct_set = WeightedPointSet::uniform(codes_fake)?;
    let value = mmd_squared(&c_set, &ct_set, kernel)?;
    let ct_grads = mmd_squared_grad_q(&c_set, &ct_set, kernel)?;
    let mut grad = vec![0.0; model.code_generator.n_params()];
    for (i, xi) in sublatent.iter().enumerate() {
        let trace = model.code_generator.forward_trace(xi)?;
        model.code_generator.backward_into(&trace, &ct_grads[i], &mut grad)?;
    }
    Ok((value, grad))
}

/// The four MI bounds of the refinement objective and every gradient the
/// training loop needs from them.
#[derive(Debug, Clone)]
pub struct MiRegularizers {
    /// Bound values for (data, c), (G(c), c), (G(c̃), c), (G(ξ), c).
    pub values: [f64; 4],
    /// Ascent gradient for the data-code critic (first bound).
    pub critic_data_code_grad: Vec<f64>,
    /// Ascent gradient for the fake-code critic (sum of the last three).
    pub critic_fake_code_grad: Vec<f64>,
    /// Gradient of −Σ coeff_k·bound_k with respect to encoder params.
    pub encoder_grad: Vec<f64>,
    /// Same for generator params.
    pub generator_grad: Vec<f64>,
}

/// Evaluate the four DP-weighted bounds, pairing each batch with the codes
/// under the draw's weights and a fresh permutation per term.
pub fn mi_regularizers(
    draw: &DpPosteriorDraw,
    model: &GenModel,
    noises: &NoiseBatch,
    bound: BoundKind,
    coefficients: &[f64; 4],
    perm_rng: &mut Stream,
) -> Result<MiRegularizers> {
    let n = draw.len();
    if n < 2 {
        return Err(Error::TooFewPairs(n));
    }
    let codes = GenModel::forward_batch(&model.encoder, &draw.atoms)?;
    let codes_fake = GenModel::forward_batch(&model.code_generator, &noises.sublatent)?;
    let g_xi = GenModel::forward_batch(&model.generator, &noises.latent)?;
    let g_c = GenModel::forward_batch(&model.generator, &codes)?;
    let g_ct = GenModel::forward_batch(&model.generator, &codes_fake)?;

    let mut values = [0.0; 4];
    let mut critic_data_code_grad = vec![0.0; model.critic_data_code.n_params()];
    let mut critic_fake_code_grad = vec![0.0; model.critic_fake_code.n_params()];
    let mut encoder_grad = vec![0.0; model.encoder.n_params()];
    let mut generator_grad = vec![0.0; model.generator.n_params()];
    // dLoss/dc from all four bounds, then one encoder pass at the end
    let mut code_upstream = vec![vec![0.0; codes[0].len()]; n];

    // (batch, critic index, generator-chain inputs)
    let term_batches: [(&Vec<Vec<f64>>, usize, Option<&Vec<Vec<f64>>>); 4] = [
        (&draw.atoms, 0, None),
        (&g_c, 1, Some(&codes)),
        (&g_ct, 1, Some(&codes_fake)),
        (&g_xi, 1, Some(&noises.latent)),
    ];
    for (k, (batch, critic_idx, gen_inputs)) in term_batches.into_iter().enumerate() {
        let critic = if critic_idx == 0 {
            &model.critic_data_code
        } else {
            &model.critic_fake_code
        };
        let sample = PairedSample::with_weights((*batch).clone(), codes.clone(), draw.weights.clone())?;
        let perm = draw_permutation(n, perm_rng)?;
        let grads = bound_gradients(bound, &sample, critic, &perm)?;
        values[k] = grads.value;
        let target = if critic_idx == 0 {
            &mut critic_data_code_grad
        } else {
            &mut critic_fake_code_grad
        };
        for (t, g) in target.iter_mut().zip(&grads.critic_grad) {
            *t += g;
        }
        let coeff = coefficients[k];
        if coeff == 0.0 {
            continue;
        }
        // encoder/generator minimize −coeff·bound
        for i in 0..n {
            for (c, g) in code_upstream[i].iter_mut().zip(&grads.y_grads[i]) {
                *c -= coeff * g;
            }
        }
        if let Some(inputs) = gen_inputs {
            let chain_to_codes = k == 1; // G(c): input grads flow back into c
            for i in 0..n {
                let upstream: Vec<f64> = grads.x_grads[i].iter().map(|g| -coeff * g).collect();
                let trace = model.generator.forward_trace(&inputs[i])?;
                let g_input = model.generator.backward_into(&trace, &upstream, &mut generator_grad)?;
                if chain_to_codes {
                    for (c, v) in code_upstream[i].iter_mut().zip(&g_input) {
                        *c += v;
                    }
                }
            }
        }
    }
    for i in 0..n {
        let trace = model.encoder.forward_trace(&draw.atoms[i])?;
        model.encoder.backward_into(&trace, &code_upstream[i], &mut encoder_grad)?;
    }
    Ok(MiRegularizers {
        values,
        critic_data_code_grad,
        critic_fake_code_grad,
        encoder_grad,
        generator_grad,
    })
}

/// Per-epoch loss record.
#[derive(Debug, Clone)]
pub struct GenHistories {
    pub discriminator: Vec<f64>,
    pub code_generator: Vec<f64>,
    pub encoder_generator: Vec<f64>,
    pub mi_bounds: Vec<[f64; 4]>,
    pub atom_counts: Vec<usize>,
}

/// Adam states for every network in the model.
struct Optimizers {
    encoder: AdamState,
    generator: AdamState,
    code_generator: AdamState,
    discriminator: AdamState,
    critic_data_code: AdamState,
    critic_fake_code: AdamState,
}

impl Optimizers {
    fn new(model: &GenModel, lr: f64) -> Self {
        Self {
            encoder: AdamState::with_learning_rate(model.encoder.n_params(), lr),
            generator: AdamState::with_learning_rate(model.generator.n_params(), lr),
            code_generator: AdamState::with_learning_rate(model.code_generator.n_params(), lr),
            discriminator: AdamState::with_learning_rate(model.discriminator.n_params(), lr),
            critic_data_code: AdamState::with_learning_rate(model.critic_data_code.n_params(), lr),
            critic_fake_code: AdamState::with_learning_rate(model.critic_fake_code.n_params(), lr),
        }
    }
}

fn apply_step(net: &mut MlpNetwork, adam: &mut AdamState, grad: &[f64]) -> Result<()> {
    let mut params = net.params().to_vec();
    adam.step(&mut params, grad)?;
    net.params_mut().copy_from_slice(&params);
    Ok(())
}

/// Posterior draw for one epoch: the stopping rule chooses N, clamped to
/// the configured cap.
fn epoch_draw(
    data: &[Vec<f64>],
    base: &dp::BaseMeasure,
    config: &GenTrainConfig,
    rng: &mut Stream,
) -> Result<DpPosteriorDraw> {
    let mut dp_cfg = config.dp.clone();
    if dp_cfg.truncation_override.is_none() {
        let total_mass = dp_cfg.concentration + data.len() as f64;
        let n = match dp::select_truncation(total_mass, dp_cfg.epsilon, config.atom_cap, rng) {
            Ok(n) => n,
            Err(Error::TruncationCapExceeded { cap }) => cap,
            Err(e) => return Err(e),
        };
        dp_cfg.truncation_override = Some(n.max(2));
    }
    dp::draw_posterior_with_base(data, base, &dp_cfg, rng)
}

/// Train the full model on 3-D points (the coil sample's normalized
/// points). Returns the model and per-epoch loss histories.
pub fn train_genmodel(data: &[[f64; 3]], config: &GenTrainConfig) -> Result<(GenModel, GenHistories)> {
    config.validate()?;
    if data.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let data_vec: Vec<Vec<f64>> = data.iter().map(|p| p.to_vec()).collect();
    let base = dp::fit_base_measure(&data_vec)?;

    let mut init_rng = stream(config.seed, purpose::INIT, 0);
    let mut model = GenModel::init(config, &mut init_rng)?;
    let mut opt = Optimizers::new(&model, config.learning_rate);

    let mi_active = config.mi_coefficients.iter().any(|&c| c != 0.0);
    let mut hist = GenHistories {
        discriminator: Vec::with_capacity(config.epochs),
        code_generator: Vec::with_capacity(config.epochs),
        encoder_generator: Vec::with_capacity(config.epochs),
        mi_bounds: Vec::with_capacity(config.epochs),
        atom_counts: Vec::with_capacity(config.epochs),
    };

    for epoch in 0..config.epochs {
        let mut draw_rng = stream(config.seed, purpose::DRAW, epoch as u64);
        let draw = epoch_draw(&data_vec, &base, config, &mut draw_rng)?;
        let n = draw.len();
        let mut noise_rng = stream(config.seed, purpose::NOISE, epoch as u64);
        let noises = sample_noise(n, config.latent_dim, config.sublatent_dim, &mut noise_rng);
        let mut gp_rng = stream(config.seed, purpose::GP, epoch as u64);
        let mut perm_rng = stream(config.seed, purpose::PERM, epoch as u64);

        // discriminator
        let (d_loss, d_grad) = loss_discriminator(&draw, &model, &noises, config.lambda_gp, &mut gp_rng)?;
        if !d_loss.is_finite() {
            return Err(Error::DivergedTraining { epoch });
        }
        apply_step(&mut model.discriminator, &mut opt.discriminator, &d_grad)?;

        // code generator
        let codes = GenModel::forward_batch(&model.encoder, &draw.atoms)?;
        let (cg_loss, cg_grad) = loss_code_generator(&model, &codes, &noises.sublatent, &config.kernel)?;
        if !cg_loss.is_finite() {
            return Err(Error::DivergedTraining { epoch });
        }
        apply_step(&mut model.code_generator, &mut opt.code_generator, &cg_grad)?;

        // MI critics, then encoder/generator with fresh bound gradients
        let mut mi_values = [0.0; 4];
        if mi_active {
            let critic_pass = mi_regularizers(
                &draw,
                &model,
                &noises,
                config.bound,
                &config.mi_coefficients,
                &mut perm_rng,
            )?;
            // ascend each critic's own bound
            let neg1: Vec<f64> = critic_pass.critic_data_code_grad.iter().map(|g| -g).collect();
            apply_step(&mut model.critic_data_code, &mut opt.critic_data_code, &neg1)?;
            let neg2: Vec<f64> = critic_pass.critic_fake_code_grad.iter().map(|g| -g).collect();
            apply_step(&mut model.critic_fake_code, &mut opt.critic_fake_code, &neg2)?;
        }

        let eg = loss_encoder_generator(&draw, &model, &noises, &config.kernel)?;
        let mut encoder_grad = eg.encoder_grad;
        let mut generator_grad = eg.generator_grad;
        let mut eg_value = eg.value;
        if mi_active {
            let mi = mi_regularizers(
                &draw,
                &model,
                &noises,
                config.bound,
                &config.mi_coefficients,
                &mut perm_rng,
            )?;
            mi_values = mi.values;
            for (k, &v) in mi.values.iter().enumerate() {
                eg_value -= config.mi_coefficients[k] * v;
            }
            for (g, m) in encoder_grad.iter_mut().zip(&mi.encoder_grad) {
                *g += m;
            }
            for (g, m) in generator_grad.iter_mut().zip(&mi.generator_grad) {
                *g += m;
            }
        }
        if !eg_value.is_finite() {
            return Err(Error::DivergedTraining { epoch });
        }
        apply_step(&mut model.encoder, &mut opt.encoder, &encoder_grad)?;
        apply_step(&mut model.generator, &mut opt.generator, &generator_grad)?;

        hist.discriminator.push(d_loss);
        hist.code_generator.push(cg_loss);
        hist.encoder_generator.push(eg_value);
        hist.mi_bounds.push(mi_values);
        hist.atom_counts.push(n);
    }
    Ok((model, hist))
}

/// Sampling modes for a trained model.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GenerateMode {
    /// G(ξ) from latent noise.
    Random,
    /// G(CG(ξ′)) from sub-latent noise through the code generator.
    RandomViaCode,
    /// G(E(x)) on provided real inputs.
    Reconstruct,
}

/// Generate points from a trained model. `inputs` is required for
/// reconstruction and ignored otherwise.
pub fn generate(
    model: &GenModel,
    count: usize,
    mode: GenerateMode,
    inputs: Option<&[[f64; 3]]>,
    rng: &mut Stream,
) -> Result<Vec<[f64; 3]>> {
    let p = model.generator.input_dim();
    let q = model.code_generator.input_dim();
    let to3 = |v: Vec<f64>| -> [f64; 3] { [v[0], v[1], v[2]] };
    match mode {
        GenerateMode::Random => (0..count)
            .map(|_| {
                let xi: Vec<f64> = (0..p).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
                Ok(to3(model.generator.forward(&xi)?))
            })
            .collect(),
        GenerateMode::RandomViaCode => (0..count)
            .map(|_| {
                let xi: Vec<f64> = (0..q).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
                let code = model.code_generator.forward(&xi)?;
                Ok(to3(model.generator.forward(&code)?))
            })
            .collect(),
        GenerateMode::Reconstruct => {
            let inputs = inputs.ok_or(Error::EmptyDataset)?;
            inputs
                .iter()
                .map(|x| {
                    let code = model.encoder.forward(x)?;
                    Ok(to3(model.generator.forward(&code)?))
                })
                .collect()
        }
    }
}

/// Fraction of the reference's parameter bins reached by the generated
/// points: each generated point maps to its nearest reference point
/// (Euclidean) and lands in that point's t-bin.
pub fn coverage_metric(
    generated: &[[f64; 3]],
    reference_points: &[[f64; 3]],
    reference_t: &[f64],
    bins: usize,
) -> Result<f64> {
    if generated.is_empty() || reference_points.is_empty() || reference_points.len() != reference_t.len() {
        return Err(Error::EmptySample);
    }
    let bins = bins.max(1);
    let t_min = reference_t.iter().cloned().fold(f64::INFINITY, f64::min);
    let t_max = reference_t.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let span = (t_max - t_min).max(f64::MIN_POSITIVE);
    let mut hit = vec![false; bins];
    for g in generated {
        let mut best = 0usize;
        let mut best_d = f64::INFINITY;
        for (i, r) in reference_points.iter().enumerate() {
            let d = (g[0] - r[0]).powi(2) + (g[1] - r[1]).powi(2) + (g[2] - r[2]).powi(2);
            if d < best_d {
                best_d = d;
                best = i;
            }
        }
        let b = (((reference_t[best] - t_min) / span) * bins as f64).floor() as usize;
        hit[b.min(bins - 1)] = true;
    }
    Ok(hit.iter().filter(|&&h| h).count() as f64 / bins as f64)
}

/// Reconstruction mean squared error over a point set.
pub fn reconstruction_mse(model: &GenModel, points: &[[f64; 3]]) -> Result<f64> {
    if points.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let mut acc = 0.0;
    for x in points {
        let code = model.encoder.forward(x)?;
        let rec = model.generator.forward(&code)?;
        acc += x.iter().zip(&rec).map(|(a, b)| (a - b) * (a - b)).sum::<f64>();
    }
    Ok(acc / points.len() as f64)
}

const CHECKPOINT_NETS: [&str; 6] = [
    "encoder",
    "generator",
    "code_generator",
    "discriminator",
    "critic_data_code",
    "critic_fake_code",
];

fn net_by_name<'a>(model: &'a GenModel, name: &str) -> &'a MlpNetwork {
    match name {
        "encoder" => &model.encoder,
        "generator" => &model.generator,
        "code_generator" => &model.code_generator,
        "discriminator" => &model.discriminator,
        "critic_data_code" => &model.critic_data_code,
        _ => &model.critic_fake_code,
    }
}

fn activation_name(a: Activation) -> String {
    match a {
        Activation::Relu => "relu".into(),
        Activation::LeakyRelu(s) => format!("leaky_relu({s})"),
        Activation::Tanh => "tanh".into(),
        Activation::Sigmoid => "sigmoid".into(),
        Activation::Identity => "identity".into(),
    }
}

/// Write one blob per network plus a plain-text manifest into `dir`.
pub fn save_checkpoint(model: &GenModel, dir: &Path) -> std::io::Result<()> {
    std::fs::create_dir_all(dir)?;
    let mut manifest = String::new();
    for name in CHECKPOINT_NETS {
        let net = net_by_name(model, name);
        let file = format!("{name}.mlp");
        std::fs::write(dir.join(&file), net.to_blob())?;
        let dims: Vec<String> = net.layer_dims().iter().map(|d| d.to_string()).collect();
        let acts: Vec<String> = net.activations().iter().map(|&a| activation_name(a)).collect();
        manifest.push_str(&format!(
            "{name} = {file} dims={} acts={}\n",
            dims.join(","),
            acts.join(",")
        ));
    }
    let mut f = std::fs::File::create(dir.join("manifest.txt"))?;
    f.write_all(manifest.as_bytes())
}

/// Load a model from a checkpoint directory written by [`save_checkpoint`].
pub fn load_checkpoint(dir: &Path) -> Result<GenModel> {
    let load = |name: &str| -> Result<MlpNetwork> {
        let bytes = std::fs::read(dir.join(format!("{name}.mlp")))
            .map_err(|e| Error::MalformedBlob(format!("{name}: {e}")))?;
        MlpNetwork::from_blob(&bytes)
    };
    Ok(GenModel {
        encoder: load("encoder")?,
        generator: load("generator")?,
        code_generator: load("code_generator")?,
        discriminator: load("discriminator")?,
        critic_data_code: load("critic_data_code")?,
        critic_fake_code: load("critic_fake_code")?,
    })
}
