//! Scores for generated-versus-real feature sets and trace summaries.
//!
//! Features are 2-D by construction (the demo projects 3-D points onto
//! their first two principal components), which lets the Fréchet distance
//! use the closed-form 2×2 matrix square root instead of a general
//! eigensolver.

use crate::distances::{mmd_squared, KernelSpec, WeightedPointSet};
use crate::error::{Error, Result};

/// Rows of 2-D feature vectors.
pub type FeatureSet = Vec<[f64; 2]>;

/// Mean vector and covariance matrix (divisor n−1) of a feature set.
pub fn feature_moments(features: &[[f64; 2]]) -> Result<([f64; 2], [[f64; 2]; 2])> {
    if features.len() < 2 {
        return Err(Error::EmptySample);
    }
    if features.iter().any(|f| f.iter().any(|v| !v.is_finite())) {
        return Err(Error::EmptySample);
    }
    let n = features.len() as f64;
    let mut mean = [0.0; 2];
    for f in features {
        mean[0] += f[0];
        mean[1] += f[1];
    }
    mean[0] /= n;
    mean[1] /= n;
    let mut cov = [[0.0; 2]; 2];
    for f in features {
        let d0 = f[0] - mean[0];
        let d1 = f[1] - mean[1];
        cov[0][0] += d0 * d0;
        cov[0][1] += d0 * d1;
        cov[1][0] += d1 * d0;
        cov[1][1] += d1 * d1;
    }
    for row in cov.iter_mut() {
        for v in row.iter_mut() {
            *v /= n - 1.0;
        }
    }
    Ok((mean, cov))
}

fn mat_mul(a: &[[f64; 2]; 2], b: &[[f64; 2]; 2]) -> [[f64; 2]; 2] {
    let mut c = [[0.0; 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            for (k, bk) in b.iter().enumerate() {
                c[i][j] += a[i][k] * bk[j];
            }
        }
    }
    c
}

/// Trace of the square root of the symmetrized product (Σr·Σg + (Σr·Σg)ᵀ)/2
/// via the 2×2 closed form √M = (M + √(det M)·I)/√(tr M + 2√(det M)).
fn trace_sqrt_product(sr: &[[f64; 2]; 2], sg: &[[f64; 2]; 2]) -> Result<f64> {
    let m_raw = mat_mul(sr, sg);
    let m = [
        [m_raw[0][0], 0.5 * (m_raw[0][1] + m_raw[1][0])],
        [0.5 * (m_raw[0][1] + m_raw[1][0]), m_raw[1][1]],
    ];
    let det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
    let tr = m[0][0] + m[1][1];
    const TOL: f64 = 1e-9;
    if det < -TOL {
        return Err(Error::NumericalDegeneracy(format!("negative determinant {det}")));
    }
    let sqrt_det = det.max(0.0).sqrt();
    let denom_sq = tr + 2.0 * sqrt_det;
    if denom_sq < -TOL {
        return Err(Error::NumericalDegeneracy(format!("negative trace term {denom_sq}")));
    }
    if denom_sq <= TOL {
        // both eigenvalues vanish
        return Ok(0.0);
    }
    // tr √M = (tr M + 2√det M) / √(tr M + 2√det M) = √(tr M + 2√det M)
    Ok(denom_sq.sqrt())
}

/// Fréchet distance between Gaussian fits of two feature sets:
/// ‖μr − μg‖² + Tr(Σr + Σg − 2√(ΣrΣg)), clamped at zero.
pub fn fid(fr: &[[f64; 2]], fg: &[[f64; 2]]) -> Result<f64> {
    let (mr, sr) = feature_moments(fr)?;
    let (mg, sg) = feature_moments(fg)?;
    fid_from_moments(&mr, &sr, &mg, &sg)
}

/// Fréchet distance from explicit moments; exposed so tests can inject
/// exact means and covariances.
pub fn fid_from_moments(
    mean_r: &[f64; 2],
    cov_r: &[[f64; 2]; 2],
    mean_g: &[f64; 2],
    cov_g: &[[f64; 2]; 2],
) -> Result<f64> {
    let d0 = mean_r[0] - mean_g[0];
    let d1 = mean_r[1] - mean_g[1];
    let mean_term = d0 * d0 + d1 * d1;
    let tr_sum = cov_r[0][0] + cov_r[1][1] + cov_g[0][0] + cov_g[1][1];
    let tr_sqrt = trace_sqrt_product(cov_r, cov_g)?;
    Ok((mean_term + tr_sum - 2.0 * tr_sqrt).max(0.0))
}

fn to_point_set(features: &[[f64; 2]]) -> Result<WeightedPointSet> {
    WeightedPointSet::uniform(features.iter().map(|f| f.to_vec()).collect())
}

/// Kernel score: biased MMD² with the cubic polynomial kernel
/// (0.5·uᵀv + 1)³ and uniform weights.
pub fn kid(fr: &[[f64; 2]], fg: &[[f64; 2]]) -> Result<f64> {
    if fr.is_empty() || fg.is_empty() {
        return Err(Error::EmptySample);
    }
    mmd_squared(&to_point_set(fr)?, &to_point_set(fg)?, &KernelSpec::kid_polynomial())
}

/// Biased MMD² with the stock Gaussian bandwidth mixture, uniform weights.
pub fn mmd_score(fr: &[[f64; 2]], fg: &[[f64; 2]]) -> Result<f64> {
    if fr.is_empty() || fg.is_empty() {
        return Err(Error::EmptySample);
    }
    mmd_squared(
        &to_point_set(fr)?,
        &to_point_set(fg)?,
        &KernelSpec::default_gaussian_mixture(),
    )
}

/// Summary statistics of an estimate trace against a known truth.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceSummary {
    pub final_window_mean: f64,
    pub final_window_var: f64,
    pub full_var: f64,
    pub abs_bias_vs_truth: f64,
    /// First 1-based epoch from which the trace stays within ±tol of truth;
    /// `None` when the band is never entered for good.
    pub epochs_to_band: Option<usize>,
}

fn sample_var(values: &[f64]) -> f64 {
    if values.len() < 2 {
        return 0.0;
    }
    let n = values.len() as f64;
    let mean: f64 = values.iter().sum::<f64>() / n;
    values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0)
}

/// Summarize the last `window` epochs of a trace against `truth`.
pub fn summarize_trace(values: &[f64], truth: f64, window: usize, tol: f64) -> Result<TraceSummary> {
    if window == 0 || window > values.len() {
        return Err(Error::InvalidWindow {
            window,
            len: values.len(),
        });
    }
    let tail = &values[values.len() - window..];
    let final_window_mean: f64 = tail.iter().sum::<f64>() / window as f64;
    let final_window_var = sample_var(tail);
    let full_var = sample_var(values);
    let abs_bias_vs_truth = (final_window_mean - truth).abs();
    // walk backwards over the trailing in-band suffix
    let mut first_in_band = None;
    for (i, v) in values.iter().enumerate().rev() {
        if (v - truth).abs() <= tol {
            first_in_band = Some(i + 1);
        } else {
            break;
        }
    }
    Ok(TraceSummary {
        final_window_mean,
        final_window_var,
        full_var,
        abs_bias_vs_truth,
        epochs_to_band: first_in_band,
    })
}

/// Project 3-D points onto the first two principal components of a
/// reference cloud. Returns the projection of `points` in the basis fitted
/// to `reference` (centered at the reference mean).
pub fn pca2_features(reference: &[[f64; 3]], points: &[[f64; 3]]) -> Result<FeatureSet> {
    if reference.len() < 2 {
        return Err(Error::EmptySample);
    }
    let n = reference.len() as f64;
    let mut mean = [0.0; 3];
    for p in reference {
        for k in 0..3 {
            mean[k] += p[k];
        }
    }
    for m in mean.iter_mut() {
        *m /= n;
    }
    let mut cov = [[0.0; 3]; 3];
    for p in reference {
        let d = [p[0] - mean[0], p[1] - mean[1], p[2] - mean[2]];
        for i in 0..3 {
            for j in 0..3 {
                cov[i][j] += d[i] * d[j];
            }
        }
    }
    for row in cov.iter_mut() {
        for v in row.iter_mut() {
            *v /= n - 1.0;
        }
    }
    let (vals, vecs) = jacobi_eigen_3x3(&cov);
    // order indices by eigenvalue, descending
    let mut order = [0usize, 1, 2];
    order.sort_by(|&a, &b| vals[b].partial_cmp(&vals[a]).unwrap());
    let mut basis = [[0.0; 3]; 2];
    for (row, &idx) in basis.iter_mut().zip(order.iter().take(2)) {
        for k in 0..3 {
            row[k] = vecs[k][idx];
        }
        // deterministic sign: largest-magnitude component positive
        let lead = row
            .iter()
            .cloned()
            .fold(0.0f64, |acc, v| if v.abs() > acc.abs() { v } else { acc });
        if lead < 0.0 {
            for v in row.iter_mut() {
                *v = -*v;
            }
        }
    }
    Ok(points
        .iter()
        .map(|p| {
            let d = [p[0] - mean[0], p[1] - mean[1], p[2] - mean[2]];
            [
                basis[0][0] * d[0] + basis[0][1] * d[1] + basis[0][2] * d[2],
                basis[1][0] * d[0] + basis[1][1] * d[1] + basis[1][2] * d[2],
            ]
        })
        .collect())
}

/// Cyclic Jacobi eigendecomposition of a symmetric 3×3 matrix.
/// Returns (eigenvalues, eigenvectors as columns).
fn jacobi_eigen_3x3(m: &[[f64; 3]; 3]) -> ([f64; 3], [[f64; 3]; 3]) {
    let mut a = *m;
    let mut v = [[0.0; 3]; 3];
    for (i, row) in v.iter_mut().enumerate() {
        row[i] = 1.0;
    }
    for _sweep in 0..50 {
        let off = a[0][1] * a[0][1] + a[0][2] * a[0][2] + a[1][2] * a[1][2];
        if off < 1e-30 {
            break;
        }
        for &(p, q) in &[(0usize, 1usize), (0, 2), (1, 2)] {
            if a[p][q].abs() < 1e-300 {
                continue;
            }
            let theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
            let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
            let c = 1.0 / (t * t + 1.0).sqrt();
            let s = t * c;
            let app = a[p][p];
            let aqq = a[q][q];
            let apq = a[p][q];
            a[p][p] = c * c * app - 2.0 * s * c * apq + s * s * aqq;
            a[q][q] = s * s * app + 2.0 * s * c * apq + c * c * aqq;
            a[p][q] = 0.0;
            a[q][p] = 0.0;
            for k in 0..3 {
                if k != p && k != q {
                    let akp = a[k][p];
                    let akq = a[k][q];
                    a[k][p] = c * akp - s * akq;
                    a[p][k] = a[k][p];
                    a[k][q] = s * akp + c * akq;
                    a[q][k] = a[k][q];
                }
            }
            for row in v.iter_mut() {
                let vkp = row[p];
                let vkq = row[q];
                row[p] = c * vkp - s * vkq;
                row[q] = s * vkp + c * vkq;
            }
        }
    }
    ([a[0][0], a[1][1], a[2][2]], v)
}
