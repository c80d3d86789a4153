//! Synthetic pair generators and ground-truth mutual information oracles.
//!
//! Families:
//! - independent uniform pairs on (−1, 1)^d, true MI = 0
//! - sign-Gaussian pairs: x = sign(Z) coordinatewise, y = x + σ·ε, with the
//!   exact 1-D MI computable by quadrature; coordinates are independent so
//!   the d-dimensional MI is d times the 1-D value
//! - finite joint pmf tables with the exact finite-sum MI
//! - the 3-D coil curve used by the generative demo

use crate::error::{Error, Result};
use crate::mi::PairedSample;
use crate::rng::Stream;
use rand::Rng;
use rand_distr::StandardNormal;

/// Independent x, y ~ U(−1, 1)^dim. True MI is zero.
pub fn gen_independent_uniform(dim: usize, n: usize, rng: &mut Stream) -> PairedSample {
    assert!(dim >= 1 && n >= 1);
    let mut xs = Vec::with_capacity(n);
    let mut ys = Vec::with_capacity(n);
    for _ in 0..n {
        xs.push((0..dim).map(|_| rng.random_range(-1.0..1.0)).collect());
        ys.push((0..dim).map(|_| rng.random_range(-1.0..1.0)).collect());
    }
    PairedSample::new(xs, ys).expect("nonempty by construction")
}

/// Dependent pairs: each x coordinate is ±1 (sign of a standard normal),
/// y = x + noise with the given per-coordinate standard deviation.
pub fn gen_sign_gaussian(dim: usize, n: usize, noise_scale: f64, rng: &mut Stream) -> PairedSample {
    assert!(dim >= 1 && n >= 1 && noise_scale > 0.0);
    let mut xs = Vec::with_capacity(n);
    let mut ys = Vec::with_capacity(n);
    for _ in 0..n {
        let x: Vec<f64> = (0..dim)
            .map(|_| {
                if rng.sample::<f64, _>(StandardNormal) >= 0.0 {
                    1.0
                } else {
                    -1.0
                }
            })
            .collect();
        let y: Vec<f64> = x
            .iter()
            .map(|&v| v + noise_scale * rng.sample::<f64, _>(StandardNormal))
            .collect();
        xs.push(x);
        ys.push(y);
    }
    PairedSample::new(xs, ys).expect("nonempty by construction")
}

/// Exact 1-D mutual information of the sign-Gaussian pair, by adaptive
/// quadrature: MI = H(Y) − ½ln(2πeσ²) with Y the symmetric two-component
/// normal mixture at ±1 and σ the noise standard deviation.
pub fn true_mi_sign_gaussian(noise_scale: f64) -> Result<f64> {
    if noise_scale <= 0.0 {
        return Err(Error::InvalidVariance(noise_scale));
    }
    let sigma = noise_scale;
    let var = sigma * sigma;
    let density = move |y: f64| -> f64 {
        let norm = 1.0 / ((2.0 * std::f64::consts::PI * var).sqrt());
        0.5 * norm * ((-(y - 1.0) * (y - 1.0) / (2.0 * var)).exp() + (-(y + 1.0) * (y + 1.0) / (2.0 * var)).exp())
    };
    let integrand = move |y: f64| -> f64 {
        let p = density(y);
        if p <= 0.0 {
            0.0
        } else {
            -p * p.ln()
        }
    };
    let (lo, hi) = (-1.0 - 10.0 * sigma, 1.0 + 10.0 * sigma);
    let h_y = adaptive_simpson(&integrand, lo, hi, 1e-6);
    let h_cond = 0.5 * (2.0 * std::f64::consts::PI * std::f64::consts::E * var).ln();
    Ok(h_y - h_cond)
}

/// Adaptive Simpson quadrature to the requested absolute tolerance.
fn adaptive_simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    fn simpson(f: &dyn Fn(f64) -> f64, a: f64, fa: f64, b: f64, fb: f64) -> (f64, f64, f64) {
        let m = 0.5 * (a + b);
        let fm = f(m);
        ((b - a) / 6.0 * (fa + 4.0 * fm + fb), m, fm)
    }
    fn recurse(
        f: &dyn Fn(f64) -> f64,
        a: f64,
        fa: f64,
        b: f64,
        fb: f64,
        whole: f64,
        m: f64,
        fm: f64,
        tol: f64,
        depth: u32,
    ) -> f64 {
        let (left, lm, flm) = simpson(f, a, fa, m, fm);
        let (right, rm, frm) = simpson(f, m, fm, b, fb);
        let delta = left + right - whole;
        if depth == 0 || delta.abs() <= 15.0 * tol {
            left + right + delta / 15.0
        } else {
            recurse(f, a, fa, m, fm, left, lm, flm, tol / 2.0, depth - 1)
                + recurse(f, m, fm, b, fb, right, rm, frm, tol / 2.0, depth - 1)
        }
    }
    let fa = f(a);
    let fb = f(b);
    let (whole, m, fm) = simpson(f, a, fa, b, fb);
    recurse(f, a, fa, b, fb, whole, m, fm, tol, 48)
}

/// Exact MI of a finite joint pmf: Σ p_ij ln(p_ij / (p_i· p_·j)), 0·ln0 = 0.
pub fn discrete_mi_oracle(pmf: &[Vec<f64>]) -> Result<f64> {
    if pmf.is_empty() || pmf[0].is_empty() {
        return Err(Error::InvalidPmf("empty table".into()));
    }
    let cols = pmf[0].len();
    if pmf.iter().any(|row| row.len() != cols) {
        return Err(Error::InvalidPmf("ragged rows".into()));
    }
    let mut total = 0.0;
    for row in pmf {
        for &p in row {
            if p < 0.0 || !p.is_finite() {
                return Err(Error::InvalidPmf(format!("bad entry {p}")));
            }
            total += p;
        }
    }
    if (total - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidPmf(format!("entries sum to {total}")));
    }
    let rows = pmf.len();
    let row_marg: Vec<f64> = pmf.iter().map(|r| r.iter().sum()).collect();
    let col_marg: Vec<f64> = (0..cols).map(|j| pmf.iter().map(|r| r[j]).sum()).collect();
    let mut mi = 0.0;
    for i in 0..rows {
        for j in 0..cols {
            let p = pmf[i][j];
            if p > 0.0 {
                mi += p * (p / (row_marg[i] * col_marg[j])).ln();
            }
        }
    }
    Ok(mi)
}

/// The coil sample: parameters t, raw 3-D points on the curve
/// (6cos t, 6sin t, t), and the per-coordinate min-max normalization of the
/// raw points to [−1, 1].
#[derive(Debug, Clone)]
pub struct CoilSample {
    /// Normalized points, each coordinate in [−1, 1].
    pub points: Vec<[f64; 3]>,
    /// Raw curve points before normalization.
    pub raw: Vec<[f64; 3]>,
    /// Curve parameters, uniform on [−2π, 4π].
    pub t: Vec<f64>,
}

/// Sample n points of the coil curve with t ~ U(−2π, 4π).
pub fn gen_coil(n: usize, rng: &mut Stream) -> CoilSample {
    assert!(n >= 1);
    let lo = -2.0 * std::f64::consts::PI;
    let hi = 4.0 * std::f64::consts::PI;
    let t: Vec<f64> = (0..n).map(|_| rng.random_range(lo..hi)).collect();
    let raw: Vec<[f64; 3]> = t.iter().map(|&v| [6.0 * v.cos(), 6.0 * v.sin(), v]).collect();
    let mut mins = [f64::INFINITY; 3];
    let mut maxs = [f64::NEG_INFINITY; 3];
    for p in &raw {
        for k in 0..3 {
            mins[k] = mins[k].min(p[k]);
            maxs[k] = maxs[k].max(p[k]);
        }
    }
    let points = raw
        .iter()
        .map(|p| {
            let mut q = [0.0; 3];
            for k in 0..3 {
                let span = maxs[k] - mins[k];
                q[k] = if span > 0.0 {
                    2.0 * (p[k] - mins[k]) / span - 1.0
                } else {
                    0.0
                };
            }
            q
        })
        .collect();
    CoilSample { points, raw, t }
}
