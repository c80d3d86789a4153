//! Kernel MMD, the dual-form Wasserstein estimator, and their sum.
//!
//! All three operate on weighted point sets, so the DP-weighted and
//! empirical versions share one code path: the empirical case is just
//! uniform weights. MMD² is the biased V-statistic (diagonal terms kept);
//! the Wasserstein estimate trains a small critic by Adam ascent on the
//! dual objective with a gradient penalty standing in for the Lipschitz
//! constraint.

use crate::error::{Error, Result};
use crate::nn::{grad_penalty_value_and_grad, Activation, AdamState, MlpNetwork};
use crate::rng::Stream;
use rand::Rng;

/// Points with nonnegative weights summing to one.
#[derive(Debug, Clone)]
pub struct WeightedPointSet {
    points: Vec<Vec<f64>>,
    weights: Vec<f64>,
}

impl WeightedPointSet {
    pub fn new(points: Vec<Vec<f64>>, weights: Vec<f64>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::EmptySample);
        }
        if points.len() != weights.len() {
            return Err(Error::DimensionMismatch {
                expected: points.len(),
                got: weights.len(),
            });
        }
        let d = points[0].len();
        if points.iter().any(|p| p.len() != d) {
            return Err(Error::DimensionMismatch { expected: d, got: 0 });
        }
        if weights.iter().any(|&w| w < 0.0 || !w.is_finite()) {
            return Err(Error::EmptySample);
        }
        let sum: f64 = weights.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(Error::EmptySample);
        }
        Ok(Self { points, weights })
    }

    /// Uniform weights over the given points.
    pub fn uniform(points: Vec<Vec<f64>>) -> Result<Self> {
        let n = points.len();
        if n == 0 {
            return Err(Error::EmptySample);
        }
        Self::new(points, vec![1.0 / n as f64; n])
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.points[0].len()
    }

    pub fn points(&self) -> &[Vec<f64>] {
        &self.points
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }
}

/// Kernel family for MMD-style comparisons.
#[derive(Debug, Clone)]
pub enum KernelSpec {
    /// Σ_σ exp(−‖x−y‖²/(2σ²)) over the bandwidth grid.
    GaussianMixture { sigmas: Vec<f64> },
    /// (scale·xᵀy + offset)^degree.
    Polynomial { scale: f64, offset: f64, degree: u32 },
}

impl KernelSpec {
    /// The bandwidth grid used by the generative training and scores.
    pub fn default_gaussian_mixture() -> Self {
        KernelSpec::GaussianMixture {
            sigmas: vec![2.0, 5.0, 10.0, 20.0, 40.0, 80.0],
        }
    }

    /// The cubic polynomial kernel used by the KID-style score.
    pub fn kid_polynomial() -> Self {
        KernelSpec::Polynomial {
            scale: 0.5,
            offset: 1.0,
            degree: 3,
        }
    }
}

fn check_dims(x: &[f64], y: &[f64]) -> Result<()> {
    if x.len() != y.len() {
        return Err(Error::DimensionMismatch {
            expected: x.len(),
            got: y.len(),
        });
    }
    Ok(())
}

/// Evaluate the kernel at a pair of points.
pub fn kernel_eval(spec: &KernelSpec, x: &[f64], y: &[f64]) -> Result<f64> {
    check_dims(x, y)?;
    Ok(match spec {
        KernelSpec::GaussianMixture { sigmas } => {
            let r2: f64 = x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum();
            sigmas.iter().map(|s| (-r2 / (2.0 * s * s)).exp()).sum()
        }
        KernelSpec::Polynomial { scale, offset, degree } => {
            let dot: f64 = x.iter().zip(y).map(|(a, b)| a * b).sum();
            (scale * dot + offset).powi(*degree as i32)
        }
    })
}

/// Gradient of the kernel with respect to its second argument.
pub fn kernel_grad_y(spec: &KernelSpec, x: &[f64], y: &[f64]) -> Result<Vec<f64>> {
    check_dims(x, y)?;
    Ok(match spec {
        KernelSpec::GaussianMixture { sigmas } => {
            let r2: f64 = x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum();
            let coeff: f64 = sigmas.iter().map(|s| (-r2 / (2.0 * s * s)).exp() / (s * s)).sum();
            x.iter().zip(y).map(|(a, b)| coeff * (a - b)).collect()
        }
        KernelSpec::Polynomial { scale, offset, degree } => {
            let dot: f64 = x.iter().zip(y).map(|(a, b)| a * b).sum();
            let coeff = *degree as f64 * (scale * dot + offset).powi(*degree as i32 - 1) * scale;
            x.iter().map(|a| coeff * a).collect()
        }
    })
}

/// Biased (V-statistic) squared MMD between two weighted point sets:
/// Σ w_ℓ w_t k(p_ℓ,p_t) − 2 Σ w_ℓ v_t k(p_ℓ,q_t) + Σ v_ℓ v_t k(q_ℓ,q_t),
/// clamped to zero from below.
pub fn mmd_squared(p: &WeightedPointSet, q: &WeightedPointSet, spec: &KernelSpec) -> Result<f64> {
    if p.dim() != q.dim() {
        return Err(Error::DimensionMismatch {
            expected: p.dim(),
            got: q.dim(),
        });
    }
    let mut pp = 0.0;
    for (i, pi) in p.points.iter().enumerate() {
        for (j, pj) in p.points.iter().enumerate() {
            pp += p.weights[i] * p.weights[j] * kernel_eval(spec, pi, pj)?;
        }
    }
    let mut pq = 0.0;
    for (i, pi) in p.points.iter().enumerate() {
        for (j, qj) in q.points.iter().enumerate() {
            pq += p.weights[i] * q.weights[j] * kernel_eval(spec, pi, qj)?;
        }
    }
    let mut qq = 0.0;
    for (i, qi) in q.points.iter().enumerate() {
        for (j, qj) in q.points.iter().enumerate() {
            qq += q.weights[i] * q.weights[j] * kernel_eval(spec, qi, qj)?;
        }
    }
    Ok((pp - 2.0 * pq + qq).max(0.0))
}

/// Gradient of [`mmd_squared`] with respect to the points of `q`.
/// Used by training loops that push generated samples toward a target.
pub fn mmd_squared_grad_q(p: &WeightedPointSet, q: &WeightedPointSet, spec: &KernelSpec) -> Result<Vec<Vec<f64>>> {
    if p.dim() != q.dim() {
        return Err(Error::DimensionMismatch {
            expected: p.dim(),
            got: q.dim(),
        });
    }
    let d = q.dim();
    let mut grads = vec![vec![0.0; d]; q.len()];
    // −2 Σ_{ℓt} w_ℓ v_t k(p_ℓ, q_t) term
    for (i, pi) in p.points.iter().enumerate() {
        for (t, qt) in q.points.iter().enumerate() {
            let g = kernel_grad_y(spec, pi, qt)?;
            let c = -2.0 * p.weights[i] * q.weights[t];
            for k in 0..d {
                grads[t][k] += c * g[k];
            }
        }
    }
    // Σ_{ℓt} v_ℓ v_t k(q_ℓ, q_t): q_t appears as both arguments; by symmetry
    // of the kernels the two contributions double the second-argument grad.
    for (l, ql) in q.points.iter().enumerate() {
        for (t, qt) in q.points.iter().enumerate() {
            let g = kernel_grad_y(spec, ql, qt)?;
            let c = 2.0 * q.weights[l] * q.weights[t];
            for k in 0..d {
                grads[t][k] += c * g[k];
            }
        }
    }
    Ok(grads)
}

/// Critic-training settings for the dual-form Wasserstein estimate.
#[derive(Debug, Clone)]
pub struct DualTrainConfig {
    pub steps: usize,
    pub learning_rate: f64,
    pub gp_coefficient: f64,
    pub critic_hidden: Vec<usize>,
    /// Interpolation points per step for the gradient penalty.
    pub gp_points: usize,
}

impl Default for DualTrainConfig {
    fn default() -> Self {
        Self {
            steps: 200,
            learning_rate: 0.0002,
            gp_coefficient: 10.0,
            critic_hidden: vec![64, 64],
            gp_points: 16,
        }
    }
}

impl DualTrainConfig {
    fn critic(&self, dim: usize, rng: &mut Stream) -> Result<MlpNetwork> {
        let mut dims = vec![dim];
        dims.extend_from_slice(&self.critic_hidden);
        dims.push(1);
        let mut acts = vec![Activation::Relu; self.critic_hidden.len()];
        acts.push(Activation::Identity);
        MlpNetwork::init_glorot(&dims, &acts, rng)
    }
}

/// Outcome of one dual-objective training run.
#[derive(Debug)]
pub struct DualOutcome {
    /// Penalized objective at the final iterate.
    pub value: f64,
    /// Objective after every step (diagnostics and monotonicity checks).
    pub history: Vec<f64>,
    pub critic: MlpNetwork,
}

/// Kantorovich-Rubinstein dual estimate of the Wasserstein distance:
/// max over a penalized critic of Σ w_i D(p_i) − Σ v_j D(q_j), with the
/// gradient penalty enforcing ‖∇D‖ ≈ 1 on random interpolates.
pub fn wasserstein_dual(
    p: &WeightedPointSet,
    q: &WeightedPointSet,
    config: &DualTrainConfig,
    rng: &mut Stream,
) -> Result<DualOutcome> {
    if p.dim() != q.dim() {
        return Err(Error::DimensionMismatch {
            expected: p.dim(),
            got: q.dim(),
        });
    }
    let mut critic = config.critic(p.dim(), rng)?;
    let mut adam = AdamState::with_learning_rate(critic.n_params(), config.learning_rate);
    let mut history = Vec::with_capacity(config.steps);
    let mut value = 0.0;
    for step in 0..config.steps {
        // difference term and its parameter gradient
        let mut inputs: Vec<Vec<f64>> = Vec::with_capacity(p.len() + q.len());
        let mut upstreams: Vec<Vec<f64>> = Vec::with_capacity(p.len() + q.len());
        let mut diff = 0.0;
        for (pt, &w) in p.points.iter().zip(&p.weights) {
            diff += w * critic.forward_scalar(pt)?;
            inputs.push(pt.clone());
            upstreams.push(vec![w]);
        }
        for (qt, &v) in q.points.iter().zip(&q.weights) {
            diff -= v * critic.forward_scalar(qt)?;
            inputs.push(qt.clone());
            upstreams.push(vec![-v]);
        }
        let mut grad = critic.backward_batch(&inputs, &upstreams)?;

        let mut objective = diff;
        if config.gp_coefficient > 0.0 {
            let m = config.gp_points.max(1);
            let interpolates: Vec<Vec<f64>> = (0..m)
                .map(|_| {
                    let pi = &p.points[rng.random_range(0..p.len())];
                    let qi = &q.points[rng.random_range(0..q.len())];
                    let u: f64 = rng.random_range(0.0..1.0);
                    pi.iter().zip(qi).map(|(a, b)| u * a + (1.0 - u) * b).collect()
                })
                .collect();
            let (penalty, pen_grad) = grad_penalty_value_and_grad(&critic, &interpolates)?;
            objective -= config.gp_coefficient * penalty;
            for (g, pg) in grad.iter_mut().zip(&pen_grad) {
                *g -= config.gp_coefficient * pg;
            }
        }
        if !objective.is_finite() {
            return Err(Error::DivergedTraining { epoch: step });
        }

        // ascent
        let neg: Vec<f64> = grad.iter().map(|g| -g).collect();
        let mut params = critic.params().to_vec();
        adam.step(&mut params, &neg)?;
        critic.params_mut().copy_from_slice(&params);

        history.push(objective);
        value = objective;
    }
    Ok(DualOutcome {
        value,
        history,
        critic,
    })
}

/// The combined distance: Wasserstein dual plus squared MMD on the same
/// inputs, with the two components reported separately.
#[derive(Debug)]
pub struct WmmdBreakdown {
    pub wasserstein: f64,
    pub mmd: f64,
}

impl WmmdBreakdown {
    pub fn total(&self) -> f64 {
        self.wasserstein + self.mmd
    }
}

pub fn wmmd_parts(
    p: &WeightedPointSet,
    q: &WeightedPointSet,
    spec: &KernelSpec,
    config: &DualTrainConfig,
    rng: &mut Stream,
) -> Result<WmmdBreakdown> {
    let ws = wasserstein_dual(p, q, config, rng)?.value;
    let mmd = mmd_squared(p, q, spec)?;
    Ok(WmmdBreakdown { wasserstein: ws, mmd })
}

/// Sum of the dual Wasserstein estimate and the squared MMD.
pub fn wmmd(
    p: &WeightedPointSet,
    q: &WeightedPointSet,
    spec: &KernelSpec,
    config: &DualTrainConfig,
    rng: &mut Stream,
) -> Result<f64> {
    Ok(wmmd_parts(p, q, spec, config, rng)?.total())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{purpose, stream};

    fn single_gaussian(sigma: f64) -> KernelSpec {
        KernelSpec::GaussianMixture { sigmas: vec![sigma] }
    }

    #[test]
    fn gaussian_kernel_at_equal_points_counts_components() {
        let spec = KernelSpec::default_gaussian_mixture();
        let x = vec![0.3, -0.4];
        assert_eq!(kernel_eval(&spec, &x, &x).unwrap(), 6.0);
    }

    #[test]
    fn gaussian_kernel_unit_distance() {
        let spec = single_gaussian(1.0);
        let v = kernel_eval(&spec, &[0.0], &[1.0]).unwrap();
        assert!((v - (-0.5f64).exp()).abs() < 1e-12);
        assert!((v - 0.606531).abs() < 1e-6);
    }

    #[test]
    fn polynomial_kernel_arithmetic() {
        let spec = KernelSpec::Polynomial {
            scale: 0.5,
            offset: 1.0,
            degree: 3,
        };
        let v = kernel_eval(&spec, &[1.0, 1.0], &[1.0, 1.0]).unwrap();
        assert_eq!(v, 8.0);
    }

    #[test]
    fn kernel_rejects_dim_mismatch() {
        let spec = single_gaussian(1.0);
        assert!(kernel_eval(&spec, &[1.0], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn gaussian_kernel_bounded_and_peaked_at_equality() {
        let spec = KernelSpec::default_gaussian_mixture();
        let mut rng = stream(1, purpose::DATA, 0);
        for _ in 0..100 {
            let x: Vec<f64> = (0..3).map(|_| rng.random_range(-5.0..5.0)).collect();
            let y: Vec<f64> = (0..3).map(|_| rng.random_range(-5.0..5.0)).collect();
            let v = kernel_eval(&spec, &x, &y).unwrap();
            assert!(v > 0.0 && v <= 6.0);
            if x != y {
                assert!(v < 6.0);
            }
        }
    }

    #[test]
    fn kernel_grad_matches_finite_differences() {
        let specs = [KernelSpec::default_gaussian_mixture(), KernelSpec::kid_polynomial()];
        let mut rng = stream(2, purpose::DATA, 0);
        for spec in &specs {
            for _ in 0..20 {
                let x: Vec<f64> = (0..3).map(|_| rng.random_range(-1.0..1.0)).collect();
                let y: Vec<f64> = (0..3).map(|_| rng.random_range(-1.0..1.0)).collect();
                let g = kernel_grad_y(spec, &x, &y).unwrap();
                let h = 1e-6;
                for k in 0..3 {
                    let mut yp = y.clone();
                    let mut ym = y.clone();
                    yp[k] += h;
                    ym[k] -= h;
                    let fd = (kernel_eval(spec, &x, &yp).unwrap() - kernel_eval(spec, &x, &ym).unwrap()) / (2.0 * h);
                    assert!((g[k] - fd).abs() < 1e-6, "{} vs {}", g[k], fd);
                }
            }
        }
    }

    #[test]
    fn mmd_of_identical_sets_is_zero() {
        let pts = vec![vec![0.1, 0.2], vec![-0.5, 0.7], vec![0.0, 0.0]];
        let w = vec![0.2, 0.5, 0.3];
        let p = WeightedPointSet::new(pts.clone(), w.clone()).unwrap();
        let q = WeightedPointSet::new(pts, w).unwrap();
        let v = mmd_squared(&p, &q, &KernelSpec::default_gaussian_mixture()).unwrap();
        assert!(v < 1e-12, "{v}");
    }

    #[test]
    fn mmd_two_point_masses() {
        let p = WeightedPointSet::uniform(vec![vec![0.0]]).unwrap();
        let q = WeightedPointSet::uniform(vec![vec![1.0]]).unwrap();
        let v = mmd_squared(&p, &q, &single_gaussian(1.0)).unwrap();
        let want = 2.0 - 2.0 * (-0.5f64).exp();
        assert!((v - want).abs() < 1e-12);
        assert!((v - 0.786939).abs() < 1e-6);
    }

    /// Independent double-loop biased MMD² with uniform weights.
    fn mmd_oracle(xs: &[Vec<f64>], ys: &[Vec<f64>], spec: &KernelSpec) -> f64 {
        let n = xs.len() as f64;
        let m = ys.len() as f64;
        let mut xx = 0.0;
        for a in xs {
            for b in xs {
                xx += kernel_eval(spec, a, b).unwrap();
            }
        }
        let mut yy = 0.0;
        for a in ys {
            for b in ys {
                yy += kernel_eval(spec, a, b).unwrap();
            }
        }
        let mut xy = 0.0;
        for a in xs {
            for b in ys {
                xy += kernel_eval(spec, a, b).unwrap();
            }
        }
        xx / (n * n) - 2.0 * xy / (n * m) + yy / (m * m)
    }

    #[test]
    fn mmd_uniform_weights_match_double_loop_oracle() {
        let mut rng = stream(3, purpose::DATA, 0);
        let spec = KernelSpec::default_gaussian_mixture();
        for _ in 0..100 {
            let n = rng.random_range(2..8);
            let m = rng.random_range(2..8);
            let xs: Vec<Vec<f64>> = (0..n)
                .map(|_| (0..2).map(|_| rng.random_range(-2.0..2.0)).collect())
                .collect();
            let ys: Vec<Vec<f64>> = (0..m)
                .map(|_| (0..2).map(|_| rng.random_range(-2.0..2.0)).collect())
                .collect();
            let p = WeightedPointSet::uniform(xs.clone()).unwrap();
            let q = WeightedPointSet::uniform(ys.clone()).unwrap();
            let got = mmd_squared(&p, &q, &spec).unwrap();
            let want = mmd_oracle(&xs, &ys, &spec).max(0.0);
            assert!((got - want).abs() < 1e-10, "{got} vs {want}");
        }
    }

    #[test]
    fn mmd_is_symmetric() {
        let mut rng = stream(4, purpose::DATA, 0);
        let spec = KernelSpec::default_gaussian_mixture();
        for _ in 0..20 {
            let xs: Vec<Vec<f64>> = (0..5)
                .map(|_| (0..2).map(|_| rng.random_range(-1.0..1.0)).collect())
                .collect();
            let ys: Vec<Vec<f64>> = (0..4)
                .map(|_| (0..2).map(|_| rng.random_range(-1.0..1.0)).collect())
                .collect();
            let p = WeightedPointSet::uniform(xs).unwrap();
            let q = WeightedPointSet::uniform(ys).unwrap();
            let a = mmd_squared(&p, &q, &spec).unwrap();
            let b = mmd_squared(&q, &p, &spec).unwrap();
            assert!((a - b).abs() < 1e-12);
            assert!(a >= 0.0);
        }
    }

    #[test]
    fn mmd_grad_matches_finite_differences() {
        let mut rng = stream(5, purpose::DATA, 0);
        let spec = KernelSpec::default_gaussian_mixture();
        let p = WeightedPointSet::new(
            vec![vec![0.5, -0.5], vec![-0.3, 0.8]],
            vec![0.6, 0.4],
        )
        .unwrap();
        let qpts: Vec<Vec<f64>> = (0..3)
            .map(|_| (0..2).map(|_| rng.random_range(-1.0..1.0)).collect())
            .collect();
        let q = WeightedPointSet::uniform(qpts.clone()).unwrap();
        let grads = mmd_squared_grad_q(&p, &q, &spec).unwrap();
        let h = 1e-6;
        for t in 0..3 {
            for k in 0..2 {
                let mut up = qpts.clone();
                up[t][k] += h;
                let mut dn = qpts.clone();
                dn[t][k] -= h;
                let vu = mmd_squared(&p, &WeightedPointSet::uniform(up).unwrap(), &spec).unwrap();
                let vd = mmd_squared(&p, &WeightedPointSet::uniform(dn).unwrap(), &spec).unwrap();
                let fd = (vu - vd) / (2.0 * h);
                assert!((grads[t][k] - fd).abs() < 1e-6, "{} vs {}", grads[t][k], fd);
            }
        }
    }

    #[test]
    fn wasserstein_identical_sets_near_zero() {
        let pts: Vec<Vec<f64>> = (0..8).map(|i| vec![0.25 * i as f64]).collect();
        let p = WeightedPointSet::uniform(pts.clone()).unwrap();
        let q = WeightedPointSet::uniform(pts).unwrap();
        let mut rng = stream(6, purpose::GP, 0);
        let out = wasserstein_dual(&p, &q, &DualTrainConfig::default(), &mut rng).unwrap();
        assert!(out.value.abs() < 0.05, "{}", out.value);
    }

    #[test]
    fn wasserstein_point_masses_estimate_distance() {
        for m in [1.0, 2.0] {
            let p = WeightedPointSet::uniform(vec![vec![0.0]]).unwrap();
            let q = WeightedPointSet::uniform(vec![vec![m]]).unwrap();
            let mut rng = stream(7, purpose::GP, m as u64);
            let mut cfg = DualTrainConfig::default();
            cfg.steps = 600;
            cfg.learning_rate = 0.01;
            let out = wasserstein_dual(&p, &q, &cfg, &mut rng).unwrap();
            assert!(
                (out.value - m).abs() < 0.1 * m,
                "m={m}: estimate {}",
                out.value
            );
        }
    }

    #[test]
    fn unpenalized_linear_critic_grows_without_bound() {
        // λ = 0 with a pure linear critic: the dual objective keeps growing,
        // which is why the penalty is required.
        let p = WeightedPointSet::uniform(vec![vec![0.0]]).unwrap();
        let q = WeightedPointSet::uniform(vec![vec![1.0]]).unwrap();
        let mut cfg = DualTrainConfig::default();
        cfg.steps = 50;
        cfg.gp_coefficient = 0.0;
        cfg.critic_hidden = vec![];
        let mut rng = stream(8, purpose::GP, 0);
        let out = wasserstein_dual(&p, &q, &cfg, &mut rng).unwrap();
        for w in out.history.windows(2) {
            assert!(w[1] > w[0], "objective not increasing: {:?}", &out.history[..10]);
        }
    }

    #[test]
    fn wmmd_components_sum_exactly() {
        let pts: Vec<Vec<f64>> = (0..5).map(|i| vec![0.2 * i as f64, -0.1 * i as f64]).collect();
        let qts: Vec<Vec<f64>> = (0..5).map(|i| vec![0.2 * i as f64 + 0.5, 0.1 * i as f64]).collect();
        let p = WeightedPointSet::uniform(pts).unwrap();
        let q = WeightedPointSet::uniform(qts).unwrap();
        let spec = KernelSpec::default_gaussian_mixture();
        let cfg = DualTrainConfig {
            steps: 40,
            ..DualTrainConfig::default()
        };
        let mut r1 = stream(9, purpose::GP, 0);
        let parts = wmmd_parts(&p, &q, &spec, &cfg, &mut r1).unwrap();
        let mut r2 = stream(9, purpose::GP, 0);
        let total = wmmd(&p, &q, &spec, &cfg, &mut r2).unwrap();
        assert_eq!(parts.total(), total);
    }

    #[test]
    fn wmmd_identical_sets_near_zero() {
        let pts: Vec<Vec<f64>> = (0..6).map(|i| vec![(i as f64) * 0.3 - 1.0]).collect();
        let p = WeightedPointSet::uniform(pts.clone()).unwrap();
        let q = WeightedPointSet::uniform(pts).unwrap();
        let mut rng = stream(10, purpose::GP, 0);
        let v = wmmd(
            &p,
            &q,
            &KernelSpec::default_gaussian_mixture(),
            &DualTrainConfig::default(),
            &mut rng,
        )
        .unwrap();
        assert!(v.abs() < 0.05, "{v}");
    }

    #[test]
    fn wmmd_monotone_under_shift() {
        // coil-like data against a shifted copy scores strictly higher than
        // against itself across seeds
        for seed in 0..10u64 {
            let mut data_rng = stream(11, purpose::DATA, seed);
            let coil = crate::synthetic::gen_coil(64, &mut data_rng);
            let pts: Vec<Vec<f64>> = coil.points.iter().map(|p| p.to_vec()).collect();
            let shifted: Vec<Vec<f64>> = pts.iter().map(|p| p.iter().map(|v| v + 1.0).collect()).collect();
            let p = WeightedPointSet::uniform(pts.clone()).unwrap();
            let q_same = WeightedPointSet::uniform(pts).unwrap();
            let q_shift = WeightedPointSet::uniform(shifted).unwrap();
            let spec = KernelSpec::default_gaussian_mixture();
            let cfg = DualTrainConfig {
                steps: 400,
                learning_rate: 0.01,
                gp_points: 8,
                ..DualTrainConfig::default()
            };
            let mut r1 = stream(12, purpose::GP, seed);
            let same = wmmd(&p, &q_same, &spec, &cfg, &mut r1).unwrap();
            let mut r2 = stream(12, purpose::GP, seed);
            let shift = wmmd(&p, &q_shift, &spec, &cfg, &mut r2).unwrap();
            assert!(shift > same, "seed {seed}: {shift} vs {same}");
        }
    }
}
