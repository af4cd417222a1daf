//! Spatial modulation: constellations, ML detection, pairwise error probability, union-bound
//! and Monte-Carlo BER, and the spatial-multiplexing benchmark.

mod constellation;

pub use constellation::{
    build_constellation, build_multiplexing, pam_levels, Constellation, Scheme, MAX_JOINT_SYMBOLS,
};

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::math::{q_function, wilson_interval};
use crate::{Error, Result};

/// Number of independent random streams a Monte-Carlo run is split into. Fixed so results do
/// not depend on the number of worker threads.
pub const MC_CHUNKS: u64 = 64;

/// Noise variance giving `E_s / N_0 = gamma_tx` when the symbol energy is `I^2`.
pub fn noise_variance(intensity: f64, gamma_tx: f64) -> f64 {
    intensity * intensity / gamma_tx
}

/// Received SNR of `n_a` equally likely transmitters seen through `h` (`n_r x n_a`).
pub fn received_snr(h: &DMatrix<f64>, n_a: usize, gamma_tx: f64) -> f64 {
    gamma_tx / (n_a * n_a) as f64 * channel_snr_factor(h)
}

/// `sum_i (sum_j h_ij)^2`, the factor between transmit and received SNR before the `1 / n_a^2`
/// normalisation.
pub fn channel_snr_factor(h: &DMatrix<f64>) -> f64 {
    h.row_iter().map(|r| r.sum().powi(2)).sum()
}

/// Pairwise error probability between two transmit vectors.
pub fn pep(s1: &DVector<f64>, s2: &DVector<f64>, h: &DMatrix<f64>, gamma_tx: f64, intensity: f64) -> f64 {
    let d2 = (h * (s1 - s2)).norm_squared();
    q_function((gamma_tx / (4.0 * intensity * intensity) * d2).sqrt())
}

fn check_dims(c: &Constellation, h: &DMatrix<f64>) -> Result<()> {
    if h.ncols() != c.n_tx() {
        return Err(Error::invalid(format!(
            "channel has {} columns but the constellation drives {} transmitters",
            h.ncols(),
            c.n_tx()
        )));
    }
    Ok(())
}

/// Noiseless received points `H s_k`, stored row-major per symbol for fast distance scans.
#[derive(Debug, Clone)]
pub struct ReceivedPoints {
    n_r: usize,
    data: Vec<f64>,
}

impl ReceivedPoints {
    pub fn new(c: &Constellation, h: &DMatrix<f64>) -> Result<Self> {
        check_dims(c, h)?;
        let hs = h * c.points();
        let n_r = hs.nrows();
        let mut data = Vec::with_capacity(hs.len());
        for col in hs.column_iter() {
            data.extend(col.iter());
        }
        Ok(Self { n_r, data })
    }

    pub fn point(&self, k: usize) -> &[f64] {
        &self.data[k * self.n_r..(k + 1) * self.n_r]
    }

    pub fn len(&self) -> usize {
        if self.n_r == 0 {
            0
        } else {
            self.data.len() / self.n_r
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Index of the nearest point; ties go to the lowest index.
    pub fn nearest(&self, y: &[f64]) -> usize {
        let mut best = 0;
        let mut best_d = f64::INFINITY;
        for (k, p) in self.data.chunks_exact(self.n_r.max(1)).enumerate() {
            let d: f64 = p.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum();
            if d < best_d {
                best_d = d;
                best = k;
            }
        }
        best
    }
}

/// Maximum-likelihood detection: `argmin_k ||y - H s_k||`, lowest index on ties.
pub fn ml_detect(y: &DVector<f64>, h: &DMatrix<f64>, c: &Constellation) -> Result<usize> {
    let pts = ReceivedPoints::new(c, h)?;
    if y.len() != h.nrows() {
        return Err(Error::invalid("received vector length does not match the channel"));
    }
    Ok(pts.nearest(y.as_slice()))
}

/// Squared distances and Hamming weights of every unordered symbol pair, reusable across SNRs.
#[derive(Debug, Clone)]
pub struct PairwiseTable {
    d2: Vec<f64>,
    weight: Vec<f64>,
    norm: f64,
    intensity: f64,
}

impl PairwiseTable {
    pub fn new(c: &Constellation, h: &DMatrix<f64>) -> Result<Self> {
        let pts = ReceivedPoints::new(c, h)?;
        let k = c.len();
        let mut d2 = Vec::with_capacity(k * (k - 1) / 2);
        let mut weight = Vec::with_capacity(d2.capacity());
        for a in 0..k {
            for b in (a + 1)..k {
                let dist: f64 = pts
                    .point(a)
                    .iter()
                    .zip(pts.point(b))
                    .map(|(x, y)| (x - y) * (x - y))
                    .sum();
                d2.push(dist);
                // both orderings of the pair
                weight.push(2.0 * c.hamming(a, b) as f64);
            }
        }
        Ok(Self {
            d2,
            weight,
            norm: 1.0 / (k as f64 * c.bits().max(1) as f64),
            intensity: c.intensity(),
        })
    }

    /// Union bound on the bit error rate at transmit SNR `gamma_tx` (linear).
    pub fn ber(&self, gamma_tx: f64) -> f64 {
        let scale = gamma_tx / (4.0 * self.intensity * self.intensity);
        let sum: f64 = self
            .d2
            .iter()
            .zip(&self.weight)
            .map(|(d2, w)| w * q_function((scale * d2).sqrt()))
            .sum();
        sum * self.norm
    }

    /// Limit of the bound as the SNR grows: pairs with identical noiseless outputs never
    /// separate.
    pub fn floor(&self) -> f64 {
        let sum: f64 = self
            .d2
            .iter()
            .zip(&self.weight)
            .filter(|(d2, _)| **d2 == 0.0)
            .map(|(_, w)| 0.5 * w)
            .sum();
        sum * self.norm
    }
}

/// Union bound on the BER of ML detection.
pub fn union_bound_ber(c: &Constellation, h: &DMatrix<f64>, gamma_tx: f64) -> Result<f64> {
    Ok(PairwiseTable::new(c, h)?.ber(gamma_tx))
}

/// Union bound for `streams`-stream spatial multiplexing of `m`-PAM over `h_sub`.
pub fn mimo_union_bound_ber(m: usize, streams: usize, h_sub: &DMatrix<f64>, gamma_tx: f64) -> Result<f64> {
    let c = build_multiplexing(m, streams, 1.0)?;
    union_bound_ber(&c, h_sub, gamma_tx)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BerEstimate {
    pub ber: f64,
    pub bit_errors: u64,
    pub bits: u64,
    pub ci_low: f64,
    pub ci_high: f64,
}

/// Monte-Carlo BER of ML detection with uniformly drawn symbols and AWGN calibrated to
/// `gamma_tx`. The run is split into [`MC_CHUNKS`] streams derived from one draw of `rng`, so
/// the result is identical for any thread count.
pub fn monte_carlo_ber<R: Rng + ?Sized>(
    c: &Constellation,
    h: &DMatrix<f64>,
    gamma_tx: f64,
    n_symbols: u64,
    rng: &mut R,
) -> Result<BerEstimate> {
    if n_symbols == 0 {
        return Err(Error::invalid("need at least one symbol"));
    }
    let pts = ReceivedPoints::new(c, h)?;
    let sigma = noise_variance(c.intensity(), gamma_tx).sqrt();
    let seed: u64 = rng.random();
    let k = c.len();
    let n_r = h.nrows();
    let errors: u64 = (0..MC_CHUNKS)
        .into_par_iter()
        .map(|chunk| {
            let lo = n_symbols * chunk / MC_CHUNKS;
            let hi = n_symbols * (chunk + 1) / MC_CHUNKS;
            let mut r = ChaCha8Rng::seed_from_u64(seed);
            r.set_stream(chunk);
            let mut y = vec![0.0; n_r];
            let mut errs = 0u64;
            for _ in lo..hi {
                let sent = r.random_range(0..k);
                for (yi, pi) in y.iter_mut().zip(pts.point(sent)) {
                    let z: f64 = r.sample(StandardNormal);
                    *yi = pi + sigma * z;
                }
                let got = pts.nearest(&y);
                errs += c.hamming(sent, got) as u64;
            }
            errs
        })
        .collect::<Vec<u64>>()
        .into_iter()
        .sum();
    let bits = n_symbols * c.bits() as u64;
    let (ci_low, ci_high) = wilson_interval(errors, bits);
    Ok(BerEstimate {
        ber: errors as f64 / bits as f64,
        bit_errors: errors,
        bits,
        ci_low,
        ci_high,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::Rng;

    fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    fn random_h(r: &mut ChaCha8Rng, n_r: usize, n_t: usize) -> DMatrix<f64> {
        DMatrix::from_fn(n_r, n_t, |_, _| r.random::<f64>())
    }

    #[test]
    fn received_snr_examples() {
        let one = DMatrix::from_element(1, 1, 1.0);
        assert_eq!(received_snr(&one, 1, 7.0), 7.0);
        let h = DMatrix::from_row_slice(2, 2, &[0.1, 0.2, 0.3, 0.05]);
        let a = received_snr(&h, 2, 3.0);
        assert!((received_snr(&(&h * 2.0), 2, 3.0) - 4.0 * a).abs() < 1e-12);
        let h = DMatrix::from_row_slice(1, 2, &[0.5, 0.5]);
        assert!((received_snr(&h, 2, 9.0) - 9.0 / 4.0).abs() < 1e-12);
        let h = DMatrix::from_row_slice(1, 2, &[1.0, 1.0]);
        assert!((received_snr(&h, 2, 9.0) - 9.0).abs() < 1e-12);
    }

    #[test]
    fn pep_examples() {
        let h = DMatrix::from_row_slice(2, 2, &[1.0, 0.2, 0.1, 0.8]);
        let s1 = DVector::from_vec(vec![1.0, 0.0]);
        let s2 = DVector::from_vec(vec![0.0, 1.0]);
        assert_eq!(pep(&s1, &s1, &h, 10.0, 1.0), 0.5);
        assert!(pep(&s1, &s2, &h, 1e12, 1.0) < 1e-300);
        let p1 = pep(&s1, &s2, &h, 4.0, 1.0);
        let p2 = pep(&s1, &s2, &(&h * 2.0), 4.0, 1.0);
        // scaling H by 2 is the same as scaling the SNR by 4
        assert!((p2 - pep(&s1, &s2, &h, 16.0, 1.0)).abs() < 1e-15);
        assert!(p2 < p1);
    }

    #[test]
    fn ml_detect_noiseless_and_degenerate() {
        let c = build_constellation(4, 4, 1.0).unwrap();
        let mut r = rng(1);
        let h = random_h(&mut r, 4, 4);
        for k in 0..c.len() {
            let y = &h * c.points().column(k);
            assert_eq!(ml_detect(&y, &h, &c).unwrap(), k);
        }
        let zero = DMatrix::zeros(4, 4);
        let y = DVector::from_vec(vec![0.3, 0.1, 0.0, 2.0]);
        assert_eq!(ml_detect(&y, &zero, &c).unwrap(), 0);
    }

    #[test]
    fn ml_detect_matches_brute_force() {
        let c = build_constellation(4, 4, 1.0).unwrap();
        let mut r = rng(2);
        for _ in 0..200 {
            let h = random_h(&mut r, 4, 4);
            let y = DVector::from_fn(4, |_, _| r.random::<f64>() * 2.0);
            let brute = (0..c.len())
                .map(|k| (&y - &h * c.points().column(k)).norm())
                .enumerate()
                .fold((0, f64::INFINITY), |acc, (k, d)| if d < acc.1 { (k, d) } else { acc })
                .0;
            assert_eq!(ml_detect(&y, &h, &c).unwrap(), brute);
            // joint positive scaling does not change the decision
            assert_eq!(ml_detect(&(&y * 3.5), &(&h * 3.5), &c).unwrap(), brute);
        }
    }

    #[test]
    fn union_bound_at_zero_channel() {
        let c = build_constellation(4, 4, 1.0).unwrap();
        let zero = DMatrix::zeros(4, 4);
        let mut sum = 0.0;
        for a in 0..16 {
            for b in 0..16 {
                sum += c.hamming(a, b) as f64;
            }
        }
        let expect = 0.5 * sum / (16.0 * 4.0);
        assert!((union_bound_ber(&c, &zero, 100.0).unwrap() - expect).abs() < 1e-12);
        assert!((PairwiseTable::new(&c, &zero).unwrap().floor() - expect).abs() < 1e-12);
    }

    #[test]
    fn union_bound_decreases_with_snr() {
        let c = build_constellation(8, 4, 1.0).unwrap();
        let mut r = rng(3);
        let h = random_h(&mut r, 4, 4);
        let t = PairwiseTable::new(&c, &h).unwrap();
        let mut prev = f64::INFINITY;
        for db in (-10..60).map(|x| x as f64) {
            let b = t.ber(crate::math::db_to_linear(db));
            assert!(b <= prev);
            prev = b;
        }
    }

    #[test]
    fn single_stream_multiplexing_is_sm_with_one_transmitter() {
        let mut r = rng(4);
        let h = random_h(&mut r, 4, 1);
        for g in [1.0, 10.0, 100.0] {
            let a = mimo_union_bound_ber(4, 1, &h, g).unwrap();
            let sm = build_constellation(4, 1, 1.0).unwrap();
            let b = union_bound_ber(&sm, &h, g).unwrap();
            assert!((a - b).abs() < 1e-15);
        }
        assert_eq!(build_multiplexing(2, 4, 1.0).unwrap().len(), 16);
    }

    #[test]
    fn monte_carlo_limits() {
        let c = build_constellation(4, 4, 1.0).unwrap();
        let mut r = rng(5);
        let h = random_h(&mut r, 4, 4);
        let est = monte_carlo_ber(&c, &h, 1e16, 10_000, &mut r).unwrap();
        assert_eq!(est.bit_errors, 0);
        let zero = DMatrix::zeros(4, 4);
        let est = monte_carlo_ber(&c, &zero, 1.0, 100_000, &mut r).unwrap();
        // always detects symbol 0, whose label is 0: a uniformly random label has half its bits set
        assert!((est.ber - 0.5).abs() < 0.01);
    }

    #[test]
    fn union_bound_dominates_monte_carlo() {
        let c = build_constellation(4, 4, 1.0).unwrap();
        let mut r = rng(6);
        for _ in 0..5 {
            let h = random_h(&mut r, 4, 4);
            for db in [10.0, 20.0, 30.0] {
                let g = crate::math::db_to_linear(db);
                let mc = monte_carlo_ber(&c, &h, g, 200_000, &mut r).unwrap();
                let ub = union_bound_ber(&c, &h, g).unwrap();
                assert!(mc.ci_low <= ub, "mc {mc:?} bound {ub}");
            }
        }
        let m = build_multiplexing(2, 4, 1.0).unwrap();
        let h = DMatrix::from_fn(4, 4, |i, j| if i == j { 1.0 } else { 0.1 });
        for db in [5.0, 10.0, 15.0] {
            let g = crate::math::db_to_linear(db);
            let mc = monte_carlo_ber(&m, &h, g, 200_000, &mut r).unwrap();
            let ub = union_bound_ber(&m, &h, g).unwrap();
            assert!(mc.ci_low <= ub);
        }
    }

    #[test]
    fn monte_carlo_is_thread_count_independent() {
        let c = build_constellation(4, 2, 1.0).unwrap();
        let h = DMatrix::from_row_slice(2, 2, &[1.0, 0.3, 0.2, 0.9]);
        let run = |threads: usize| {
            let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
            pool.install(|| monte_carlo_ber(&c, &h, 10.0, 50_000, &mut rng(9)).unwrap())
        };
        assert_eq!(run(1), run(3));
    }

    proptest! {
        #[test]
        fn nearest_is_brute_force_argmin(
            entries in prop::collection::vec(0.0..1.0f64, 16),
            y in prop::collection::vec(-0.5..2.0f64, 4),
        ) {
            let c = build_constellation(2, 4, 1.0).unwrap();
            let h = DMatrix::from_row_slice(4, 4, &entries);
            let yv = DVector::from_vec(y);
            let got = ml_detect(&yv, &h, &c).unwrap();
            let dists: Vec<f64> = (0..c.len()).map(|k| (&yv - &h * c.points().column(k)).norm_squared()).collect();
            let min = dists.iter().cloned().fold(f64::INFINITY, f64::min);
            prop_assert_eq!(dists.iter().position(|d| *d == min).unwrap(), got);
        }
    }
}
