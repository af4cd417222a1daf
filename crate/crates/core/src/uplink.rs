//! Achievable-rate lower bounds for spatial modulation over a Gaussian channel, energy
//! efficiency, and a Monte-Carlo mutual-information estimator used to check the bounds.

use std::f64::consts::{LN_2, LOG2_E};

use nalgebra::{Cholesky, DMatrix, Dyn};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::math::log_sum_exp;
use crate::sm::{Constellation, ReceivedPoints};
use crate::{Error, Result};

/// Coefficient in the pairwise exponent of the first bound.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum L1Exponent {
    /// `exp(-||H(s_i - s_j)||^2 / (4 sigma^2))`, as obtained from the Gaussian overlap integral.
    #[default]
    Quarter,
    /// `exp(-||H(s_i - s_j)||^2 / sigma^2)`.
    Unit,
}

impl L1Exponent {
    fn coefficient(self) -> f64 {
        match self {
            L1Exponent::Quarter => 0.25,
            L1Exponent::Unit => 1.0,
        }
    }
}

/// Per-LED input variance `I^2 (M - 1) / (3 N_t (M + 1))`.
pub fn input_variance(intensity: f64, m: usize, n_t: usize) -> f64 {
    let m = m as f64;
    intensity * intensity * (m - 1.0) / (3.0 * n_t as f64 * (m + 1.0))
}

/// Input variance for the transmitters driven by `c`.
pub fn constellation_input_variance(c: &Constellation) -> f64 {
    input_variance(c.intensity(), c.m(), c.n_tx())
}

fn squared_distances(pts: &ReceivedPoints) -> Vec<f64> {
    let k = pts.len();
    let mut out = vec![0.0; k * k];
    for i in 0..k {
        for j in (i + 1)..k {
            let d: f64 = pts
                .point(i)
                .iter()
                .zip(pts.point(j))
                .map(|(a, b)| (a - b) * (a - b))
                .sum();
            out[i * k + j] = d;
            out[j * k + i] = d;
        }
    }
    out
}

/// First lower bound on the mutual information, in bits per channel use.
pub fn lower_bound_l1(c: &Constellation, h: &DMatrix<f64>, sigma2: f64, exponent: L1Exponent) -> Result<f64> {
    if !(sigma2 > 0.0) {
        return Err(Error::invalid("noise variance must be > 0"));
    }
    let pts = ReceivedPoints::new(c, h)?;
    let coef = exponent.coefficient() / sigma2;
    let exps: Vec<f64> = squared_distances(&pts).iter().map(|d| -coef * d).collect();
    let k = c.len() as f64;
    let n_r = h.nrows() as f64;
    Ok(2.0 * k.log2() - n_r / 2.0 * (LOG2_E - 1.0) - log_sum_exp(&exps) / LN_2)
}

fn cholesky(m: DMatrix<f64>, what: &str) -> Result<Cholesky<f64, Dyn>> {
    Cholesky::new(m).ok_or_else(|| Error::Numerical(format!("{what} is not positive definite")))
}

fn log2_det(ch: &Cholesky<f64, Dyn>) -> f64 {
    2.0 * ch.l_dirty().diagonal().iter().map(|d| d.log2()).sum::<f64>()
}

/// Second lower bound on the mutual information, in bits per channel use, with input covariance
/// `sigma_x2 * I`.
pub fn lower_bound_l2(c: &Constellation, h: &DMatrix<f64>, sigma2: f64, sigma_x2: f64) -> Result<f64> {
    if !(sigma2 > 0.0) {
        return Err(Error::invalid("noise variance must be > 0"));
    }
    ReceivedPoints::new(c, h)?;
    let n_r = h.nrows();
    let k = c.len();
    let hht = h * h.transpose();
    let eye = DMatrix::<f64>::identity(n_r, n_r);
    let ratio = sigma_x2 / sigma2;
    let a = &hht * (2.0 * ratio) + &eye;
    let b = &hht * ratio + &eye;
    let a_ch = cholesky(a, "2 (sigma_x^2/sigma^2) H H^T + I")?;
    let b_ch = cholesky(b, "(sigma_x^2/sigma^2) H H^T + I")?;
    let log_det_ratio = log2_det(&a_ch) - log2_det(&b_ch);

    // Y = H S, W = A^{-1} Y; s_i^T H^T A^{-1} H s_j = (Y^T W)_ij and the second quadratic form
    // uses Z = (H H^T Y)^T W.
    let y = h * c.points();
    let w = a_ch.solve(&y);
    let q = y.transpose() * &w;
    let z = (&hht * &y).transpose() * &w;
    let second = sigma_x2 / (2.0 * sigma2 * sigma2);
    let mut exps = Vec::with_capacity(k * k);
    for i in 0..k {
        for j in 0..k {
            let quad = z[(i, i)] - z[(i, j)] - z[(j, i)] + z[(j, j)];
            exps.push(q[(i, j)] / sigma2 - second * quad);
        }
    }
    Ok(2.0 * (k as f64).log2() + 0.5 * log_det_ratio - log_sum_exp(&exps) / LN_2)
}

/// `max(L1^+, L2^+)`.
pub fn achievable_rate(l1: f64, l2: f64) -> f64 {
    l1.max(0.0).max(l2.max(0.0))
}

/// High-SNR gaps `(Delta_1, Delta_2)` between the transmit spectral efficiency and the two
/// bounds.
pub fn high_snr_gaps(m: usize, n_t: usize, n_r: usize) -> Result<(f64, f64)> {
    if m < 2 {
        return Err(Error::invalid("the gaps need a PAM order of at least 2"));
    }
    let mf = m as f64;
    let d1 = n_r as f64 / 2.0 * (LOG2_E - 1.0);
    let exps: Vec<f64> = (1..=m)
        .map(|i| 3.0 * n_t as f64 * (2.0 * i as f64 - mf - 1.0) / (2.0 * (mf * mf - 1.0)))
        .collect();
    let d2 = log_sum_exp(&exps) / LN_2 - mf.log2() - 0.5;
    Ok((d1, d2))
}

/// Bits per joule for a rate `r_up` (bits per channel use) at symbol energy `e_s` and symbol
/// rate `r_s`.
pub fn energy_efficiency(r_up: f64, e_s: f64, r_s: f64) -> Result<f64> {
    let p = e_s * r_s;
    if !(p > 0.0) {
        return Err(Error::invalid("transmit power must be > 0"));
    }
    Ok(r_up / p)
}

/// Replace `h` by `Sigma V^T` from its thin SVD, keeping only nonzero singular values. The
/// pairwise distances and `H H^T` spectrum are unchanged, so the mutual information is too, but
/// the observation dimension drops to the channel rank.
pub fn signal_subspace(h: &DMatrix<f64>) -> DMatrix<f64> {
    let svd = h.clone().svd(false, true);
    let v_t = svd.v_t.expect("requested V^T");
    let smax = svd.singular_values.iter().cloned().fold(0.0, f64::max);
    let tol = smax * 1e-12 * h.nrows().max(h.ncols()) as f64;
    let keep: Vec<usize> = (0..svd.singular_values.len())
        .filter(|&i| svd.singular_values[i] > tol)
        .collect();
    let mut out = DMatrix::zeros(keep.len(), h.ncols());
    for (r, &i) in keep.iter().enumerate() {
        out.set_row(r, &(v_t.row(i) * svd.singular_values[i]));
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateBounds {
    pub l1: f64,
    pub l2: f64,
    pub r_up: f64,
    pub eta_tse: f64,
    pub eta_ee: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundOptions {
    pub exponent: L1Exponent,
    /// Evaluate the bounds on the channel's signal subspace.
    pub reduce_to_rank: bool,
}

impl Default for BoundOptions {
    fn default() -> Self {
        Self {
            exponent: L1Exponent::Quarter,
            reduce_to_rank: true,
        }
    }
}

/// Both bounds, the achievable rate and the energy efficiency for one channel realisation.
pub fn rate_bounds(
    c: &Constellation,
    h: &DMatrix<f64>,
    sigma2: f64,
    e_s: f64,
    r_s: f64,
    opts: BoundOptions,
) -> Result<RateBounds> {
    let reduced;
    let h_eff = if opts.reduce_to_rank {
        reduced = signal_subspace(h);
        &reduced
    } else {
        h
    };
    let l1 = lower_bound_l1(c, h_eff, sigma2, opts.exponent)?;
    let l2 = lower_bound_l2(c, h_eff, sigma2, constellation_input_variance(c))?;
    let r_up = achievable_rate(l1, l2);
    Ok(RateBounds {
        l1,
        l2,
        r_up,
        eta_tse: c.bits() as f64,
        eta_ee: energy_efficiency(r_up, e_s, r_s)?,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MiEstimate {
    pub bits: f64,
    pub stderr: f64,
}

const MI_CHUNKS: u64 = 64;

/// Monte-Carlo estimate of the mutual information between a uniformly drawn symbol and the
/// channel output.
pub fn mi_monte_carlo<R: Rng + ?Sized>(
    c: &Constellation,
    h: &DMatrix<f64>,
    sigma2: f64,
    n_samples: u64,
    rng: &mut R,
) -> Result<MiEstimate> {
    if n_samples < 1000 {
        return Err(Error::invalid("mutual-information estimate needs at least 1000 samples"));
    }
    if !(sigma2 > 0.0) {
        return Err(Error::invalid("noise variance must be > 0"));
    }
    let pts = ReceivedPoints::new(c, h)?;
    let k = c.len();
    let n_r = h.nrows();
    let sigma = sigma2.sqrt();
    let seed: u64 = rng.random();
    let partial: Vec<(f64, f64)> = (0..MI_CHUNKS)
        .into_par_iter()
        .map(|chunk| {
            let lo = n_samples * chunk / MI_CHUNKS;
            let hi = n_samples * (chunk + 1) / MI_CHUNKS;
            let mut r = ChaCha8Rng::seed_from_u64(seed);
            r.set_stream(chunk);
            let mut noise = vec![0.0; n_r];
            let mut exps = vec![0.0; k];
            let (mut sum, mut sum_sq) = (0.0, 0.0);
            for _ in lo..hi {
                let sent = r.random_range(0..k);
                for n in noise.iter_mut() {
                    let z: f64 = r.sample(StandardNormal);
                    *n = sigma * z;
                }
                let base = pts.point(sent);
                let own: f64 = noise.iter().map(|n| n * n).sum();
                for (kk, e) in exps.iter_mut().enumerate() {
                    let d: f64 = pts
                        .point(kk)
                        .iter()
                        .zip(base.iter().zip(&noise))
                        .map(|(p, (b, n))| {
                            let diff = b + n - p;
                            diff * diff
                        })
                        .sum();
                    *e = -(d - own) / (2.0 * sigma2);
                }
                let term = (k as f64).log2() - log_sum_exp(&exps) / LN_2;
                sum += term;
                sum_sq += term * term;
            }
            (sum, sum_sq)
        })
        .collect();
    let (sum, sum_sq) = partial.iter().fold((0.0, 0.0), |a, b| (a.0 + b.0, a.1 + b.1));
    let n = n_samples as f64;
    let mean = sum / n;
    let var = (sum_sq / n - mean * mean).max(0.0) * n / (n - 1.0);
    Ok(MiEstimate {
        bits: mean,
        stderr: (var / n).sqrt(),
    })
}
