//! Finite Dirichlet-process posterior draws.
//!
//! A draw is N atoms with Dirichlet weights: weights come from normalized
//! Gamma(total_mass/N, 1) variates, and each atom is sampled from the
//! posterior base measure H* = a/(a+n)·H + n/(a+n)·F_emp — a coin flip
//! between the fitted diagonal-normal prior and a uniform data resample.
//! The truncation level N is either fixed by the caller or chosen by the
//! random stopping rule N = inf{ j : Γ_{j,j} / Σ_{i≤j} Γ_{i,j} < ε }.

use crate::error::{Error, Result};
use crate::rng::Stream;
use rand::Rng;
use rand_distr::{Distribution, Gamma, StandardNormal};

/// Diagonal-covariance normal fitted to a dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct BaseMeasure {
    pub mean: Vec<f64>,
    pub variances: Vec<f64>,
}

impl BaseMeasure {
    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    /// Density at a point.
    pub fn density(&self, x: &[f64]) -> f64 {
        let d = self.dim();
        let mut log_norm = 0.0;
        let mut quad = 0.0;
        for k in 0..d {
            log_norm += (2.0 * std::f64::consts::PI * self.variances[k]).ln();
            let z = x[k] - self.mean[k];
            quad += z * z / self.variances[k];
        }
        (-0.5 * (log_norm + quad)).exp()
    }

    /// One sample from the diagonal normal.
    pub fn sample(&self, rng: &mut Stream) -> Vec<f64> {
        self.mean
            .iter()
            .zip(&self.variances)
            .map(|(&m, &v)| m + v.sqrt() * rng.sample::<f64, _>(StandardNormal))
            .collect()
    }
}

/// Hyperparameters of one DP posterior.
#[derive(Debug, Clone)]
pub struct DpConfig {
    /// Concentration parameter a > 0 (a = 0 is accepted and collapses the
    /// base-measure branch entirely).
    pub concentration: f64,
    /// Threshold of the stopping rule, in (0, 1).
    pub epsilon: f64,
    /// Fixed truncation level; bypasses the stopping rule when set.
    pub truncation_override: Option<usize>,
    /// Stopping-rule scan cap.
    pub n_max: usize,
    /// Substitute exact 1/N weights (reduction tests and Dirichlet-mean
    /// property checks only). Skips the weight sampling entirely.
    pub uniform_mode: bool,
}

impl Default for DpConfig {
    fn default() -> Self {
        Self {
            concentration: 1.0,
            epsilon: 1e-3,
            truncation_override: None,
            n_max: 10_000,
            uniform_mode: false,
        }
    }
}

/// Where a posterior atom came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AtomSource {
    Base,
    Data,
}

/// One realization of the truncated DP posterior.
#[derive(Debug, Clone)]
pub struct DpPosteriorDraw {
    pub atoms: Vec<Vec<f64>>,
    pub weights: Vec<f64>,
    pub n_data: usize,
    pub source_flags: Vec<AtomSource>,
}

impl DpPosteriorDraw {
    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }
}

/// Variance floor for degenerate (constant) coordinates.
pub const VARIANCE_FLOOR: f64 = 1e-8;

/// Fit the diagonal-normal base measure: coordinatewise mean and variance
/// (divisor n), variances floored at `VARIANCE_FLOOR`.
pub fn fit_base_measure(data: &[Vec<f64>]) -> Result<BaseMeasure> {
    if data.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let d = data[0].len();
    for row in data {
        if row.len() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                got: row.len(),
            });
        }
    }
    let n = data.len() as f64;
    let mut mean = vec![0.0; d];
    for row in data {
        for k in 0..d {
            mean[k] += row[k];
        }
    }
    for m in mean.iter_mut() {
        *m /= n;
    }
    let mut variances = vec![0.0; d];
    for row in data {
        for k in 0..d {
            let z = row[k] - mean[k];
            variances[k] += z * z;
        }
    }
    for v in variances.iter_mut() {
        *v = (*v / n).max(VARIANCE_FLOOR);
    }
    Ok(BaseMeasure { mean, variances })
}

/// Independent Gamma(total_mass/N, 1) draws normalized to sum to one.
pub fn sample_dirichlet_weights(n_atoms: usize, total_mass: f64, rng: &mut Stream) -> Result<Vec<f64>> {
    assert!(n_atoms >= 1, "need at least one atom");
    assert!(total_mass > 0.0, "total mass must be positive");
    if n_atoms == 1 {
        return Ok(vec![1.0]);
    }
    let gamma = Gamma::new(total_mass / n_atoms as f64, 1.0).expect("valid gamma shape");
    for _attempt in 0..2 {
        let draws: Vec<f64> = (0..n_atoms).map(|_| gamma.sample(rng)).collect();
        let sum: f64 = draws.iter().sum();
        if sum.is_finite() && sum > 0.0 && draws.iter().all(|w| w.is_finite()) {
            return Ok(draws.into_iter().map(|w| w / sum).collect());
        }
    }
    Err(Error::SamplerFailure)
}

/// Random stopping rule for the truncation level: scan j = 2, 3, … drawing
/// j fresh Gamma(total_mass/j, 1) variates per candidate and stop at the
/// first j whose last draw contributes less than `epsilon` of the sum.
pub fn select_truncation(total_mass: f64, epsilon: f64, n_max: usize, rng: &mut Stream) -> Result<usize> {
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(Error::InvalidEpsilon(epsilon));
    }
    assert!(total_mass > 0.0, "total mass must be positive");
    for j in 2..=n_max {
        let gamma = Gamma::new(total_mass / j as f64, 1.0).expect("valid gamma shape");
        let mut sum = 0.0;
        let mut last = 0.0;
        for _ in 0..j {
            last = gamma.sample(rng);
            sum += last;
        }
        if sum > 0.0 && last / sum < epsilon {
            return Ok(j);
        }
    }
    Err(Error::TruncationCapExceeded { cap: n_max })
}

/// Sample N atoms from H*: with probability a/(a+n) a draw from the base
/// measure, otherwise a uniformly resampled data point.
pub fn sample_posterior_atoms(
    data: &[Vec<f64>],
    base: &BaseMeasure,
    concentration: f64,
    n_atoms: usize,
    rng: &mut Stream,
) -> Result<(Vec<Vec<f64>>, Vec<AtomSource>)> {
    if data.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let n = data.len();
    let base_prob = concentration / (concentration + n as f64);
    let mut atoms = Vec::with_capacity(n_atoms);
    let mut flags = Vec::with_capacity(n_atoms);
    for _ in 0..n_atoms {
        if rng.random::<f64>() < base_prob {
            atoms.push(base.sample(rng));
            flags.push(AtomSource::Base);
        } else {
            let idx = rng.random_range(0..n);
            atoms.push(data[idx].clone());
            flags.push(AtomSource::Data);
        }
    }
    Ok((atoms, flags))
}

/// Compose truncation, weights, and atoms into one posterior draw.
/// The base measure is refit from `data` on every call.
pub fn draw_posterior(data: &[Vec<f64>], config: &DpConfig, rng: &mut Stream) -> Result<DpPosteriorDraw> {
    let base = fit_base_measure(data)?;
    draw_posterior_with_base(data, &base, config, rng)
}

/// As [`draw_posterior`] with a caller-supplied base measure, so repeated
/// draws over the same dataset can share one fit.
pub fn draw_posterior_with_base(
    data: &[Vec<f64>],
    base: &BaseMeasure,
    config: &DpConfig,
    rng: &mut Stream,
) -> Result<DpPosteriorDraw> {
    if data.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let n = data.len();
    let total_mass = config.concentration + n as f64;
    let n_atoms = match config.truncation_override {
        Some(n_fixed) => {
            assert!(n_fixed >= 1, "truncation override must be >= 1");
            n_fixed
        }
        None => select_truncation(total_mass, config.epsilon, config.n_max, rng)?,
    };
    let weights = if config.uniform_mode {
        vec![1.0 / n_atoms as f64; n_atoms]
    } else {
        sample_dirichlet_weights(n_atoms, total_mass, rng)?
    };
    let (atoms, source_flags) = sample_posterior_atoms(data, base, config.concentration, n_atoms, rng)?;
    Ok(DpPosteriorDraw {
        atoms,
        weights,
        n_data: n,
        source_flags,
    })
}

/// Grid-search MAP estimate of the concentration parameter.
///
/// Scores each candidate by the leave-one-out predictive log-likelihood
/// Σ_i ln[ a/(a+n−1)·φ_base(x_i) + (n−1)/(a+n−1)·kde_{−i}(x_i) ], where the
/// empirical component is smoothed by a Gaussian product kernel with
/// Silverman's rule bandwidth per coordinate. Ties break toward smaller a.
pub fn fit_concentration_map(data: &[Vec<f64>], base: &BaseMeasure, grid: &[f64]) -> Result<f64> {
    if grid.is_empty() {
        return Err(Error::EmptyGrid);
    }
    if data.len() < 2 {
        return Err(Error::EmptyDataset);
    }
    let n = data.len();
    let d = data[0].len();
    for row in data {
        if row.len() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                got: row.len(),
            });
        }
    }
    // Silverman per-coordinate bandwidths from the data itself.
    let fitted = fit_base_measure(data)?;
    let factor = (4.0 / ((d as f64 + 2.0) * n as f64)).powf(1.0 / (d as f64 + 4.0));
    let bandwidths: Vec<f64> = fitted.variances.iter().map(|v| v.sqrt() * factor).collect();
    let kern_norm: f64 = bandwidths
        .iter()
        .map(|h| 1.0 / ((2.0 * std::f64::consts::PI).sqrt() * h))
        .product();

    // kde_{-i}(x_i) for every i.
    let mut loo = vec![0.0; n];
    for i in 0..n {
        let mut s = 0.0;
        for j in 0..n {
            if i == j {
                continue;
            }
            let mut quad = 0.0;
            for k in 0..d {
                let z = (data[i][k] - data[j][k]) / bandwidths[k];
                quad += z * z;
            }
            s += (-0.5 * quad).exp();
        }
        loo[i] = kern_norm * s / (n as f64 - 1.0);
    }
    let phis: Vec<f64> = data.iter().map(|x| base.density(x)).collect();

    let mut best_a = grid[0];
    let mut best_ll = f64::NEG_INFINITY;
    for &a in grid {
        let w_base = a / (a + n as f64 - 1.0);
        let w_emp = (n as f64 - 1.0) / (a + n as f64 - 1.0);
        let ll: f64 = (0..n)
            .map(|i| (w_base * phis[i] + w_emp * loo[i]).max(f64::MIN_POSITIVE).ln())
            .sum();
        if ll > best_ll || (ll == best_ll && a < best_a) {
            best_ll = ll;
            best_a = a;
        }
    }
    Ok(best_a)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{purpose, stream};
    use rand_distr::{Distribution, Gamma};

    #[test]
    fn base_measure_two_point_arithmetic() {
        let b = fit_base_measure(&[vec![0.0, 0.0], vec![2.0, 2.0]]).unwrap();
        assert_eq!(b.mean, vec![1.0, 1.0]);
        assert_eq!(b.variances, vec![1.0, 1.0]);
    }

    #[test]
    fn base_measure_floors_degenerate_variance() {
        let data = vec![vec![5.0]; 10];
        let b = fit_base_measure(&data).unwrap();
        assert_eq!(b.mean, vec![5.0]);
        assert_eq!(b.variances, vec![VARIANCE_FLOOR]);
    }

    #[test]
    fn base_measure_recovers_known_normal() {
        // 1e5 draws from N(3, 4).
        let mut rng = stream(2024, purpose::DATA, 0);
        let data: Vec<Vec<f64>> = (0..100_000)
            .map(|_| vec![3.0 + 2.0 * rng.sample::<f64, _>(StandardNormal)])
            .collect();
        let b = fit_base_measure(&data).unwrap();
        assert!((b.mean[0] - 3.0).abs() < 0.05, "mean {}", b.mean[0]);
        assert!((b.variances[0] - 4.0).abs() < 0.2, "var {}", b.variances[0]);
    }

    #[test]
    fn base_measure_errors() {
        assert!(matches!(fit_base_measure(&[]), Err(Error::EmptyDataset)));
        let ragged = vec![vec![1.0, 2.0], vec![3.0]];
        assert!(matches!(
            fit_base_measure(&ragged),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn single_atom_weight_is_one() {
        let mut rng = stream(1, purpose::DRAW, 0);
        assert_eq!(sample_dirichlet_weights(1, 3.7, &mut rng).unwrap(), vec![1.0]);
    }

    #[test]
    fn weights_normalize_exactly() {
        let mut rng = stream(5, purpose::DRAW, 0);
        for &(n, mass) in &[(2usize, 0.5), (7, 3.0), (40, 216.0), (500, 1e4)] {
            let w = sample_dirichlet_weights(n, mass, &mut rng).unwrap();
            assert_eq!(w.len(), n);
            assert!(w.iter().all(|&x| x >= 0.0));
            let sum: f64 = w.iter().sum();
            assert!((sum - 1.0).abs() < 1e-12, "n={n} mass={mass} sum={sum}");
        }
    }

    #[test]
    fn dirichlet_component_means_match_theory() {
        // N = 4, mass = 216, 1e5 replications: component means within 0.005 of 1/4.
        let mut rng = stream(9, purpose::DRAW, 1);
        let mut acc = [0.0f64; 4];
        let reps = 100_000;
        for _ in 0..reps {
            let w = sample_dirichlet_weights(4, 216.0, &mut rng).unwrap();
            for (a, &x) in acc.iter_mut().zip(&w) {
                *a += x;
            }
        }
        for a in acc {
            let mean = a / reps as f64;
            assert!((mean - 0.25).abs() < 0.005, "component mean {mean}");
        }
    }

    #[test]
    fn truncation_rejects_bad_epsilon() {
        let mut rng = stream(3, purpose::DRAW, 2);
        assert!(matches!(
            select_truncation(10.0, 0.0, 100, &mut rng),
            Err(Error::InvalidEpsilon(_))
        ));
        assert!(matches!(
            select_truncation(10.0, 1.0, 100, &mut rng),
            Err(Error::InvalidEpsilon(_))
        ));
    }

    #[test]
    fn truncation_is_at_least_two() {
        let mut rng = stream(11, purpose::DRAW, 3);
        for _ in 0..200 {
            let n = select_truncation(5.0, 0.9, 10_000, &mut rng).unwrap();
            assert!(n >= 2);
        }
    }

    /// Straight-line reimplementation of the stopping rule, kept independent
    /// of the library path; must agree draw-for-draw under a shared stream.
    fn stopping_rule_oracle(total_mass: f64, epsilon: f64, rng: &mut Stream) -> usize {
        let mut j = 2;
        loop {
            let g = Gamma::new(total_mass / j as f64, 1.0).unwrap();
            let draws: Vec<f64> = (0..j).map(|_| g.sample(rng)).collect();
            let sum: f64 = draws.iter().sum();
            if draws[j - 1] / sum < epsilon {
                return j;
            }
            j += 1;
        }
    }

    #[test]
    fn truncation_matches_oracle_run_for_run() {
        let mut lib_values = Vec::new();
        let mut oracle_values = Vec::new();
        for run in 0..1000u64 {
            let mut r1 = stream(216, purpose::DRAW, run);
            let mut r2 = stream(216, purpose::DRAW, run);
            lib_values.push(select_truncation(216.0, 0.01, 10_000, &mut r1).unwrap());
            oracle_values.push(stopping_rule_oracle(216.0, 0.01, &mut r2));
        }
        assert_eq!(lib_values, oracle_values);
        let mut sorted = lib_values.clone();
        sorted.sort_unstable();
        let median = sorted[sorted.len() / 2];
        // Gamma-share concentration puts the median in the low tens here.
        assert!((25..=75).contains(&median), "median {median}");
    }

    #[test]
    fn truncation_stops_at_two_for_loose_epsilon() {
        // mass 10, epsilon 0.99: Beta(5,5) mass above 0.99 is ~1e-8.
        let mut rng = stream(77, purpose::DRAW, 9);
        let mut twos = 0;
        for _ in 0..1000 {
            if select_truncation(10.0, 0.99, 10_000, &mut rng).unwrap() == 2 {
                twos += 1;
            }
        }
        assert!(twos > 500, "N=2 in {twos}/1000 runs");
    }

    #[test]
    fn truncation_median_monotone_in_epsilon() {
        let median_at = |eps: f64| -> usize {
            let mut vals: Vec<usize> = (0..1000u64)
                .map(|run| {
                    let mut r = stream(31, purpose::DRAW, run);
                    select_truncation(50.0, eps, 10_000, &mut r).unwrap()
                })
                .collect();
            vals.sort_unstable();
            vals[vals.len() / 2]
        };
        assert!(median_at(0.5) <= median_at(0.01));
    }

    #[test]
    fn truncation_cap_error_carries_cap() {
        let mut rng = stream(4, purpose::DRAW, 4);
        // epsilon so small the rule cannot stop within the cap
        let err = select_truncation(1e6, 1e-12, 50, &mut rng).unwrap_err();
        assert!(matches!(err, Error::TruncationCapExceeded { cap: 50 }));
    }

    #[test]
    fn zero_concentration_atoms_are_all_data() {
        let data = vec![vec![1.0], vec![2.0], vec![3.0]];
        let base = fit_base_measure(&data).unwrap();
        let mut rng = stream(8, purpose::DRAW, 5);
        let (atoms, flags) = sample_posterior_atoms(&data, &base, 0.0, 500, &mut rng).unwrap();
        assert!(flags.iter().all(|&f| f == AtomSource::Data));
        assert!(atoms.iter().all(|a| data.contains(a)));
    }

    #[test]
    fn base_fraction_matches_mixture_weight() {
        // a = n: over 1e5 atoms the base fraction sits within 0.01 of 1/2.
        let data: Vec<Vec<f64>> = (0..50).map(|i| vec![i as f64]).collect();
        let base = fit_base_measure(&data).unwrap();
        let mut rng = stream(13, purpose::DRAW, 6);
        let (_, flags) = sample_posterior_atoms(&data, &base, 50.0, 100_000, &mut rng).unwrap();
        let frac = flags.iter().filter(|&&f| f == AtomSource::Base).count() as f64 / 100_000.0;
        assert!((frac - 0.5).abs() < 0.01, "base fraction {frac}");
    }

    #[test]
    fn huge_concentration_dominates() {
        let data = vec![vec![0.0]];
        let base = fit_base_measure(&data).unwrap();
        let mut rng = stream(14, purpose::DRAW, 7);
        let (_, flags) = sample_posterior_atoms(&data, &base, 1e9, 10_000, &mut rng).unwrap();
        let frac = flags.iter().filter(|&&f| f == AtomSource::Base).count() as f64 / 10_000.0;
        assert!(frac >= 0.999, "base fraction {frac}");
    }

    #[test]
    fn draw_respects_truncation_override() {
        let data = vec![vec![0.0], vec![1.0]];
        let cfg = DpConfig {
            truncation_override: Some(5),
            ..DpConfig::default()
        };
        let mut rng = stream(20, purpose::DRAW, 8);
        let draw = draw_posterior(&data, &cfg, &mut rng).unwrap();
        assert_eq!(draw.len(), 5);
        assert_eq!(draw.weights.len(), 5);
        assert_eq!(draw.n_data, 2);
    }

    #[test]
    fn identical_seeds_identical_draws() {
        let data: Vec<Vec<f64>> = (0..10).map(|i| vec![i as f64, -(i as f64)]).collect();
        let cfg = DpConfig {
            concentration: 2.0,
            ..DpConfig::default()
        };
        let mut r1 = stream(99, purpose::DRAW, 0);
        let mut r2 = stream(99, purpose::DRAW, 0);
        let d1 = draw_posterior(&data, &cfg, &mut r1).unwrap();
        let d2 = draw_posterior(&data, &cfg, &mut r2).unwrap();
        assert_eq!(d1.atoms, d2.atoms);
        assert_eq!(d1.weights, d2.weights);
        assert_eq!(d1.source_flags, d2.source_flags);
    }

    #[test]
    fn reduction_to_bootstrap_empirical() {
        // a = 0, truncation = n, uniform weights: exactly the empirical
        // distribution on a bootstrap resample.
        let data: Vec<Vec<f64>> = (0..6).map(|i| vec![i as f64]).collect();
        let cfg = DpConfig {
            concentration: 0.0,
            truncation_override: Some(6),
            uniform_mode: true,
            ..DpConfig::default()
        };
        let mut rng = stream(7, purpose::DRAW, 11);
        let draw = draw_posterior(&data, &cfg, &mut rng).unwrap();
        assert_eq!(draw.weights, vec![1.0 / 6.0; 6]);
        assert!(draw.source_flags.iter().all(|&f| f == AtomSource::Data));
        assert!(draw.atoms.iter().all(|a| data.contains(a)));
    }

    #[test]
    fn weight_mean_is_one_over_n() {
        // Empirical mean of each weight within 3 MC standard errors of 1/N.
        let n_atoms = 8;
        let mass = 12.0;
        let reps = 20_000;
        let mut rng = stream(55, purpose::DRAW, 12);
        let mut acc = vec![0.0; n_atoms];
        let mut acc2 = vec![0.0; n_atoms];
        for _ in 0..reps {
            let w = sample_dirichlet_weights(n_atoms, mass, &mut rng).unwrap();
            for k in 0..n_atoms {
                acc[k] += w[k];
                acc2[k] += w[k] * w[k];
            }
        }
        for k in 0..n_atoms {
            let mean = acc[k] / reps as f64;
            let var = acc2[k] / reps as f64 - mean * mean;
            let se = (var / reps as f64).sqrt();
            assert!(
                (mean - 1.0 / n_atoms as f64).abs() < 3.0 * se,
                "weight {k}: mean {mean}, se {se}"
            );
        }
    }

    #[test]
    fn map_rejects_empty_grid() {
        let data = vec![vec![0.0], vec![1.0]];
        let base = fit_base_measure(&data).unwrap();
        assert!(matches!(
            fit_concentration_map(&data, &base, &[]),
            Err(Error::EmptyGrid)
        ));
    }

    #[test]
    fn map_singleton_grid() {
        let data = vec![vec![0.0], vec![1.0], vec![2.0]];
        let base = fit_base_measure(&data).unwrap();
        assert_eq!(fit_concentration_map(&data, &base, &[3.7]).unwrap(), 3.7);
    }

    #[test]
    fn map_prefers_large_a_when_data_matches_base() {
        let grid = [0.1, 1.0, 10.0, 100.0];
        let mut hits = 0;
        for run in 0..100u64 {
            let mut rng = stream(700, purpose::DATA, run);
            let data: Vec<Vec<f64>> = (0..50)
                .map(|_| vec![rng.sample::<f64, _>(StandardNormal)])
                .collect();
            let base = BaseMeasure {
                mean: vec![0.0],
                variances: vec![1.0],
            };
            if fit_concentration_map(&data, &base, &grid).unwrap() == 100.0 {
                hits += 1;
            }
        }
        assert!(hits >= 70, "grid max chosen in {hits}/100 runs");
    }

    #[test]
    fn map_prefers_small_a_when_data_far_from_base() {
        let grid = [0.1, 1.0, 10.0, 100.0];
        let mut hits = 0;
        for run in 0..100u64 {
            let mut rng = stream(701, purpose::DATA, run);
            // data mean shifted 10 sd away from the base
            let data: Vec<Vec<f64>> = (0..50)
                .map(|_| vec![10.0 + rng.sample::<f64, _>(StandardNormal)])
                .collect();
            let base = BaseMeasure {
                mean: vec![0.0],
                variances: vec![1.0],
            };
            if fit_concentration_map(&data, &base, &grid).unwrap() == 0.1 {
                hits += 1;
            }
        }
        assert!(hits >= 70, "grid min chosen in {hits}/100 runs");
    }
}
