//! Variational lower bounds on mutual information and the training loop
//! that maximizes them.
//!
//! Two bounds over a critic T, each in a weighted form that covers both the
//! empirical estimator (uniform weights over observed pairs) and the
//! DP-weighted estimator (Dirichlet weights over posterior atoms):
//!
//! - Donsker-Varadhan:  Σ_ℓ w_ℓ T(x_ℓ, y_ℓ) − ln Σ_ℓ w_ℓ exp T(x_ℓ, y_{π(ℓ)})
//! - Jensen-Shannon:    Σ_ℓ w_ℓ [ −ζ(−T(x_ℓ, y_ℓ)) − ζ(T(x_ℓ, y_{π(ℓ)})) ]
//!
//! with ζ the softplus and π a random permutation emulating the product of
//! marginals. The log-sum-exp is always computed with max subtraction.

use crate::dp::{self, DpConfig};
use crate::error::{Error, Result};
use crate::nn::{Activation, AdamState, MlpNetwork};
use crate::rng::{purpose, stream};
use rand::Rng;
use std::time::Instant;

/// Aligned (x, y) vector pairs, optionally weighted.
#[derive(Debug, Clone)]
pub struct PairedSample {
    xs: Vec<Vec<f64>>,
    ys: Vec<Vec<f64>>,
    weights: Option<Vec<f64>>,
}

impl PairedSample {
    pub fn new(xs: Vec<Vec<f64>>, ys: Vec<Vec<f64>>) -> Result<Self> {
        Self::build(xs, ys, None)
    }

    pub fn with_weights(xs: Vec<Vec<f64>>, ys: Vec<Vec<f64>>, weights: Vec<f64>) -> Result<Self> {
        Self::build(xs, ys, Some(weights))
    }

    fn build(xs: Vec<Vec<f64>>, ys: Vec<Vec<f64>>, weights: Option<Vec<f64>>) -> Result<Self> {
        if xs.is_empty() || ys.is_empty() {
            return Err(Error::EmptySample);
        }
        if xs.len() != ys.len() {
            return Err(Error::DimensionMismatch {
                expected: xs.len(),
                got: ys.len(),
            });
        }
        let dx = xs[0].len();
        let dy = ys[0].len();
        if xs.iter().any(|x| x.len() != dx) || ys.iter().any(|y| y.len() != dy) {
            return Err(Error::DimensionMismatch { expected: dx, got: dy });
        }
        if let Some(w) = &weights {
            if w.len() != xs.len() {
                return Err(Error::DimensionMismatch {
                    expected: xs.len(),
                    got: w.len(),
                });
            }
            if w.iter().any(|&v| v < 0.0 || !v.is_finite()) {
                return Err(Error::EmptySample);
            }
            let sum: f64 = w.iter().sum();
            if (sum - 1.0).abs() > 1e-9 {
                return Err(Error::EmptySample);
            }
        }
        Ok(Self { xs, ys, weights })
    }

    pub fn len(&self) -> usize {
        self.xs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.xs.is_empty()
    }

    pub fn dim_x(&self) -> usize {
        self.xs[0].len()
    }

    pub fn dim_y(&self) -> usize {
        self.ys[0].len()
    }

    pub fn xs(&self) -> &[Vec<f64>] {
        &self.xs
    }

    pub fn ys(&self) -> &[Vec<f64>] {
        &self.ys
    }

    /// Weight of pair ℓ; uniform 1/n when no weights are stored.
    pub fn weight(&self, idx: usize) -> f64 {
        match &self.weights {
            Some(w) => w[idx],
            None => 1.0 / self.xs.len() as f64,
        }
    }

    pub fn weights_vec(&self) -> Vec<f64> {
        (0..self.len()).map(|i| self.weight(i)).collect()
    }
}

/// Which variational bound to compute.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BoundKind {
    Dv,
    Js,
}

impl BoundKind {
    pub fn label(self) -> &'static str {
        match self {
            BoundKind::Dv => "dv",
            BoundKind::Js => "js",
        }
    }
}

/// Uniform random permutation of 0..n (fixed points allowed).
pub fn draw_permutation(n: usize, rng: &mut crate::rng::Stream) -> Result<Vec<usize>> {
    if n < 2 {
        return Err(Error::TooFewPairs(n));
    }
    let mut perm: Vec<usize> = (0..n).collect();
    for i in (1..n).rev() {
        let j = rng.random_range(0..=i);
        perm.swap(i, j);
    }
    Ok(perm)
}

/// Permutation without fixed points, by rejection. Off by default in
/// training; exposed for bias studies at tiny n.
pub fn draw_derangement(n: usize, rng: &mut crate::rng::Stream) -> Result<Vec<usize>> {
    if n < 2 {
        return Err(Error::TooFewPairs(n));
    }
    loop {
        let perm = draw_permutation(n, rng)?;
        if perm.iter().enumerate().all(|(i, &p)| i != p) {
            return Ok(perm);
        }
    }
}

fn softplus(t: f64) -> f64 {
    t.max(0.0) + (-t.abs()).exp().ln_1p()
}

fn sigmoid(t: f64) -> f64 {
    1.0 / (1.0 + (-t).exp())
}

fn check_critic(sample: &PairedSample, critic: &MlpNetwork) -> Result<()> {
    let want = sample.dim_x() + sample.dim_y();
    if critic.input_dim() != want {
        return Err(Error::DimensionMismatch {
            expected: want,
            got: critic.input_dim(),
        });
    }
    if critic.output_dim() != 1 {
        return Err(Error::NonScalarOutput(critic.output_dim()));
    }
    Ok(())
}

fn concat(x: &[f64], y: &[f64]) -> Vec<f64> {
    let mut z = Vec::with_capacity(x.len() + y.len());
    z.extend_from_slice(x);
    z.extend_from_slice(y);
    z
}

/// Critic values on the joint pairs and on the permuted pairs.
fn critic_values(sample: &PairedSample, critic: &MlpNetwork, perm: &[usize]) -> Result<(Vec<f64>, Vec<f64>)> {
    let n = sample.len();
    let mut joint = Vec::with_capacity(n);
    let mut marg = Vec::with_capacity(n);
    for l in 0..n {
        joint.push(critic.forward_scalar(&concat(&sample.xs[l], &sample.ys[l]))?);
        marg.push(critic.forward_scalar(&concat(&sample.xs[l], &sample.ys[perm[l]]))?);
    }
    Ok((joint, marg))
}

/// Weighted log-sum-exp ln Σ w_ℓ exp(t_ℓ), max-subtracted over the
/// positive-weight entries.
fn weighted_lse(weights: &[f64], values: &[f64]) -> f64 {
    let m = weights
        .iter()
        .zip(values)
        .filter(|(w, _)| **w > 0.0)
        .map(|(_, v)| *v)
        .fold(f64::NEG_INFINITY, f64::max);
    let s: f64 = weights
        .iter()
        .zip(values)
        .map(|(&w, &v)| if w > 0.0 { w * (v - m).exp() } else { 0.0 })
        .sum();
    s.ln() + m
}

/// Donsker-Varadhan lower bound under the sample's weights.
pub fn dv_bound(sample: &PairedSample, critic: &MlpNetwork, perm: &[usize]) -> Result<f64> {
    check_critic(sample, critic)?;
    let (joint, marg) = critic_values(sample, critic, perm)?;
    let w = sample.weights_vec();
    let term1: f64 = w.iter().zip(&joint).map(|(&w, &t)| w * t).sum();
    Ok(term1 - weighted_lse(&w, &marg))
}

/// Jensen-Shannon-style lower bound under the sample's weights.
pub fn js_bound(sample: &PairedSample, critic: &MlpNetwork, perm: &[usize]) -> Result<f64> {
    check_critic(sample, critic)?;
    let (joint, marg) = critic_values(sample, critic, perm)?;
    let w = sample.weights_vec();
    Ok(w
        .iter()
        .enumerate()
        .map(|(l, &wl)| wl * (-softplus(-joint[l]) - softplus(marg[l])))
        .sum())
}

pub fn bound_value(kind: BoundKind, sample: &PairedSample, critic: &MlpNetwork, perm: &[usize]) -> Result<f64> {
    match kind {
        BoundKind::Dv => dv_bound(sample, critic, perm),
        BoundKind::Js => js_bound(sample, critic, perm),
    }
}

/// Bound value together with its exact gradients.
#[derive(Debug, Clone)]
pub struct BoundGradients {
    pub value: f64,
    /// Gradient with respect to the critic parameters.
    pub critic_grad: Vec<f64>,
    /// ∂bound/∂x_ℓ, accumulated over the joint and permuted appearances.
    pub x_grads: Vec<Vec<f64>>,
    /// ∂bound/∂y_ℓ, with permuted contributions folded back to the owner.
    pub y_grads: Vec<Vec<f64>>,
}

/// Exact gradient of the chosen bound. The DV second term differentiates the
/// weighted log-sum-exp, so the permuted pairs carry softmax coefficients
/// w_ℓ e^{T_ℓ} / Σ_t w_t e^{T_t}.
pub fn bound_gradients(
    kind: BoundKind,
    sample: &PairedSample,
    critic: &MlpNetwork,
    perm: &[usize],
) -> Result<BoundGradients> {
    check_critic(sample, critic)?;
    let n = sample.len();
    let w = sample.weights_vec();
    let dx = sample.dim_x();

    let mut joint_traces = Vec::with_capacity(n);
    let mut marg_traces = Vec::with_capacity(n);
    for l in 0..n {
        joint_traces.push(critic.forward_trace(&concat(&sample.xs[l], &sample.ys[l]))?);
        marg_traces.push(critic.forward_trace(&concat(&sample.xs[l], &sample.ys[perm[l]]))?);
    }
    let joint: Vec<f64> = joint_traces.iter().map(|t| t.output()[0]).collect();
    let marg: Vec<f64> = marg_traces.iter().map(|t| t.output()[0]).collect();

    // Per-pair upstream coefficients dBound/dT.
    let (value, joint_coeff, marg_coeff) = match kind {
        BoundKind::Dv => {
            let term1: f64 = w.iter().zip(&joint).map(|(&w, &t)| w * t).sum();
            let lse = weighted_lse(&w, &marg);
            let m = w
                .iter()
                .zip(&marg)
                .filter(|(w, _)| **w > 0.0)
                .map(|(_, v)| *v)
                .fold(f64::NEG_INFINITY, f64::max);
            let exps: Vec<f64> = w
                .iter()
                .zip(&marg)
                .map(|(&wl, &t)| if wl > 0.0 { wl * (t - m).exp() } else { 0.0 })
                .collect();
            let total: f64 = exps.iter().sum();
            let softmax: Vec<f64> = exps.iter().map(|e| -e / total).collect();
            (term1 - lse, w.clone(), softmax)
        }
        BoundKind::Js => {
            let value: f64 = w
                .iter()
                .enumerate()
                .map(|(l, &wl)| wl * (-softplus(-joint[l]) - softplus(marg[l])))
                .sum();
            let jc: Vec<f64> = w.iter().zip(&joint).map(|(&wl, &t)| wl * sigmoid(-t)).collect();
            let mc: Vec<f64> = w.iter().zip(&marg).map(|(&wl, &t)| -wl * sigmoid(t)).collect();
            (value, jc, mc)
        }
    };

    let mut critic_grad = vec![0.0; critic.n_params()];
    let mut x_grads = vec![vec![0.0; dx]; n];
    let mut y_grads = vec![vec![0.0; sample.dim_y()]; n];
    for l in 0..n {
        let gin = critic.backward_into(&joint_traces[l], &[joint_coeff[l]], &mut critic_grad)?;
        for (k, v) in gin[..dx].iter().enumerate() {
            x_grads[l][k] += v;
        }
        for (k, v) in gin[dx..].iter().enumerate() {
            y_grads[l][k] += v;
        }
        let gin = critic.backward_into(&marg_traces[l], &[marg_coeff[l]], &mut critic_grad)?;
        for (k, v) in gin[..dx].iter().enumerate() {
            x_grads[l][k] += v;
        }
        for (k, v) in gin[dx..].iter().enumerate() {
            y_grads[perm[l]][k] += v;
        }
    }
    Ok(BoundGradients {
        value,
        critic_grad,
        x_grads,
        y_grads,
    })
}

/// Gradient of the chosen bound with respect to critic parameters only.
pub fn bound_gradient(sample: &PairedSample, critic: &MlpNetwork, perm: &[usize], kind: BoundKind) -> Result<Vec<f64>> {
    Ok(bound_gradients(kind, sample, critic, perm)?.critic_grad)
}

/// How sample weights are formed each epoch.
#[derive(Debug, Clone)]
pub enum Weighting {
    /// Fresh finite DP posterior draws over the joint pairs.
    Dp(DpConfig),
    /// The raw pairs with uniform weights.
    Empirical,
}

impl Weighting {
    pub fn label(&self) -> &'static str {
        match self {
            Weighting::Dp(_) => "dp",
            Weighting::Empirical => "empirical",
        }
    }
}

/// Epoch batch policy.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BatchPolicy {
    /// Use every atom (or every pair) each epoch.
    FullDraw,
    /// Uniform subsample without replacement, weights renormalized.
    Minibatch(usize),
}

/// When the stopping rule runs in DP mode.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TruncationPolicy {
    /// One N drawn at startup and reused for every epoch.
    FixedAtStart,
    /// N redrawn by the stopping rule inside every posterior draw.
    PerEpoch,
}

/// Training-loop configuration.
#[derive(Debug, Clone)]
pub struct MineConfig {
    pub bound: BoundKind,
    pub epochs: usize,
    pub batch: BatchPolicy,
    pub redraw_per_epoch: bool,
    pub truncation: TruncationPolicy,
    pub learning_rate: f64,
    pub seed: u64,
    /// Reject permutation fixed points (bias study switch).
    pub derangement: bool,
    pub critic_hidden: Vec<usize>,
    /// Output activation: relu keeps the stock critic architecture; identity
    /// avoids the dead-output failure mode at initialization and is what the
    /// experiment harness uses.
    pub critic_output: Activation,
}

impl MineConfig {
    pub fn new(bound: BoundKind, epochs: usize, seed: u64) -> Self {
        Self {
            bound,
            epochs,
            batch: BatchPolicy::FullDraw,
            redraw_per_epoch: true,
            truncation: TruncationPolicy::FixedAtStart,
            learning_rate: 0.0002,
            seed,
            derangement: false,
            critic_hidden: vec![400, 400, 400],
            critic_output: Activation::Relu,
        }
    }

    fn critic_dims(&self, dx: usize, dy: usize) -> (Vec<usize>, Vec<Activation>) {
        let mut dims = Vec::with_capacity(self.critic_hidden.len() + 2);
        dims.push(dx + dy);
        dims.extend_from_slice(&self.critic_hidden);
        dims.push(1);
        let mut acts = vec![Activation::Relu; self.critic_hidden.len()];
        acts.push(self.critic_output);
        (dims, acts)
    }
}

/// Per-epoch scalar estimates from one training run.
#[derive(Debug, Clone)]
pub struct EstimateTrace {
    pub values: Vec<f64>,
    pub estimator: String,
    pub bound: BoundKind,
    pub weighting: String,
    pub seed: u64,
    pub dim: usize,
    pub epoch_ms: Vec<f64>,
}

impl EstimateTrace {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// A finished training run.
#[derive(Debug)]
pub struct TrainOutcome {
    pub trace: EstimateTrace,
    pub critic: MlpNetwork,
}

/// Maximize the chosen bound by Adam ascent.
///
/// DP mode forms the per-epoch sample from a posterior draw over joint
/// (x, y) atoms: pairs resampled from the data keep both blocks, atoms from
/// the base measure draw the full concatenated vector from the fitted joint
/// diagonal normal and are split back into (x, y). Empirical mode uses the
/// raw pairs with uniform weights. Streams are split by purpose so both
/// modes consume identical initialization and permutation randomness.
pub fn train_mine(
    x_data: &[Vec<f64>],
    y_data: &[Vec<f64>],
    weighting: &Weighting,
    config: &MineConfig,
) -> Result<TrainOutcome> {
    let base_sample = PairedSample::new(x_data.to_vec(), y_data.to_vec())?;
    let n = base_sample.len();
    let dx = base_sample.dim_x();
    let dy = base_sample.dim_y();

    let (dims, acts) = config.critic_dims(dx, dy);
    let mut init_rng = stream(config.seed, purpose::INIT, 0);
    let mut critic = MlpNetwork::init_glorot(&dims, &acts, &mut init_rng)?;
    let mut adam = AdamState::with_learning_rate(critic.n_params(), config.learning_rate);

    // DP-mode setup: joint data, fitted base, resolved truncation level.
    let joint: Vec<Vec<f64>> = (0..n)
        .map(|i| concat(&base_sample.xs()[i], &base_sample.ys()[i]))
        .collect();
    let mut dp_setup: Option<(crate::dp::BaseMeasure, DpConfig)> = None;
    if let Weighting::Dp(cfg) = weighting {
        let base = dp::fit_base_measure(&joint)?;
        let mut cfg = cfg.clone();
        if cfg.truncation_override.is_none() && config.truncation == TruncationPolicy::FixedAtStart {
            let mut trunc_rng = stream(config.seed, purpose::DRAW, u64::MAX);
            let total_mass = cfg.concentration + n as f64;
            cfg.truncation_override =
                Some(dp::select_truncation(total_mass, cfg.epsilon, cfg.n_max, &mut trunc_rng)?);
        }
        dp_setup = Some((base, cfg));
    }

    let mut values = Vec::with_capacity(config.epochs);
    let mut epoch_ms = Vec::with_capacity(config.epochs);
    let mut current: Option<PairedSample> = None;

    for epoch in 0..config.epochs {
        let t0 = Instant::now();
        if current.is_none() || config.redraw_per_epoch {
            current = Some(match &dp_setup {
                Some((base, cfg)) => {
                    let mut draw_rng = stream(config.seed, purpose::DRAW, epoch as u64);
                    let draw = dp::draw_posterior_with_base(&joint, base, cfg, &mut draw_rng)?;
                    let xs: Vec<Vec<f64>> = draw.atoms.iter().map(|a| a[..dx].to_vec()).collect();
                    let ys: Vec<Vec<f64>> = draw.atoms.iter().map(|a| a[dx..].to_vec()).collect();
                    PairedSample::with_weights(xs, ys, draw.weights)?
                }
                None => base_sample.clone(),
            });
        }
        let full = current.as_ref().unwrap();

        let batch_sample;
        let sample = match config.batch {
            BatchPolicy::FullDraw => full,
            BatchPolicy::Minibatch(size) => {
                let size = size.min(full.len()).max(2);
                let mut batch_rng = stream(config.seed, purpose::BATCH, epoch as u64);
                let picks = draw_permutation(full.len(), &mut batch_rng)?;
                let idx = &picks[..size];
                let xs: Vec<Vec<f64>> = idx.iter().map(|&i| full.xs()[i].clone()).collect();
                let ys: Vec<Vec<f64>> = idx.iter().map(|&i| full.ys()[i].clone()).collect();
                let mut w: Vec<f64> = idx.iter().map(|&i| full.weight(i)).collect();
                let s: f64 = w.iter().sum();
                if s > 0.0 {
                    for v in w.iter_mut() {
                        *v /= s;
                    }
                } else {
                    w = vec![1.0 / size as f64; size];
                }
                batch_sample = PairedSample::with_weights(xs, ys, w)?;
                &batch_sample
            }
        };

        let mut perm_rng = stream(config.seed, purpose::PERM, epoch as u64);
        let perm = if config.derangement {
            draw_derangement(sample.len(), &mut perm_rng)?
        } else {
            draw_permutation(sample.len(), &mut perm_rng)?
        };

        let grads = bound_gradients(config.bound, sample, &critic, &perm)?;
        if !grads.value.is_finite() {
            return Err(Error::DivergedTraining { epoch });
        }
        let neg: Vec<f64> = grads.critic_grad.iter().map(|g| -g).collect();
        let mut params = critic.params().to_vec();
        adam.step(&mut params, &neg)?;
        critic.params_mut().copy_from_slice(&params);

        values.push(grads.value);
        epoch_ms.push(t0.elapsed().as_secs_f64() * 1e3);
    }

    let estimator = match weighting {
        Weighting::Dp(_) => "dpmine",
        Weighting::Empirical => "mine",
    };
    Ok(TrainOutcome {
        trace: EstimateTrace {
            values,
            estimator: estimator.to_string(),
            bound: config.bound,
            weighting: weighting.label().to_string(),
            seed: config.seed,
            dim: dx,
            epoch_ms,
        },
        critic,
    })
}
