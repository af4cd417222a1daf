use nalgebra::DMatrix;

use crate::math::{gray_code, is_power_of_two};
use crate::{Error, Result};

/// Largest joint symbol alphabet accepted for the spatial-multiplexing benchmark.
pub const MAX_JOINT_SYMBOLS: usize = 4096;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scheme {
    /// One of `n_a` transmitters active per symbol, carrying an `m`-PAM level.
    SpatialModulation { m: usize, n_a: usize },
    /// Every one of `streams` transmitters carries its own `m`-PAM level.
    Multiplexing { m: usize, streams: usize },
}

/// Set of transmit vectors (one per column) with their bit labels.
#[derive(Debug, Clone, PartialEq)]
pub struct Constellation {
    scheme: Scheme,
    intensity: f64,
    points: DMatrix<f64>,
    labels: Vec<u32>,
    bits: u32,
}

/// The `m` unipolar PAM levels `2 I k / (m + 1)`, `k = 1..m`, whose mean is `I`.
pub fn pam_levels(m: usize, intensity: f64) -> Vec<f64> {
    (1..=m)
        .map(|k| 2.0 * intensity * k as f64 / (m as f64 + 1.0))
        .collect()
}

fn check_order(name: &str, v: usize) -> Result<()> {
    if !is_power_of_two(v) {
        return Err(Error::invalid(format!("{name} must be a power of two, got {v}")));
    }
    Ok(())
}

/// Spatial-modulation constellation with `m * n_a` symbols.
///
/// Column `level * n_a + led` activates transmitter `led` at PAM level `level`. Its label is the
/// transmitter index in natural binary (most significant bits) followed by the Gray code of the
/// level.
pub fn build_constellation(m: usize, n_a: usize, intensity: f64) -> Result<Constellation> {
    check_order("PAM order", m)?;
    check_order("active transmitter count", n_a)?;
    if m < 2 {
        return Err(Error::invalid("PAM order must be at least 2"));
    }
    if !(intensity > 0.0) {
        return Err(Error::invalid("average intensity must be > 0"));
    }
    let levels = pam_levels(m, intensity);
    let level_bits = m.trailing_zeros();
    let k = m * n_a;
    let mut points = DMatrix::zeros(n_a, k);
    let mut labels = Vec::with_capacity(k);
    for (level, &amp) in levels.iter().enumerate() {
        for led in 0..n_a {
            points[(led, level * n_a + led)] = amp;
            labels.push(((led as u32) << level_bits) | gray_code(level as u32));
        }
    }
    Ok(Constellation {
        scheme: Scheme::SpatialModulation { m, n_a },
        intensity,
        points,
        labels,
        bits: k.trailing_zeros(),
    })
}

/// Spatial-multiplexing constellation: `streams` transmitters each sending an `m`-PAM level with
/// per-transmitter mean `intensity / streams`, so the total mean optical power equals
/// `intensity` as for spatial modulation.
///
/// Joint symbol `k` uses level digit `(k / m^s) % m` on stream `s`; its label concatenates the
/// Gray codes of the stream levels, stream 0 most significant.
pub fn build_multiplexing(m: usize, streams: usize, intensity: f64) -> Result<Constellation> {
    check_order("PAM order", m)?;
    if m < 2 || streams == 0 {
        return Err(Error::invalid("multiplexing needs m >= 2 and at least one stream"));
    }
    if !(intensity > 0.0) {
        return Err(Error::invalid("average intensity must be > 0"));
    }
    let k = (m as u128).pow(streams as u32);
    if k > MAX_JOINT_SYMBOLS as u128 {
        return Err(Error::invalid(format!(
            "{m}-PAM over {streams} streams gives {k} joint symbols (limit {MAX_JOINT_SYMBOLS})"
        )));
    }
    let k = k as usize;
    let levels = pam_levels(m, intensity / streams as f64);
    let level_bits = m.trailing_zeros();
    let mut points = DMatrix::zeros(streams, k);
    let mut labels = Vec::with_capacity(k);
    for idx in 0..k {
        let mut label = 0u32;
        let mut rest = idx;
        let mut digits = vec![0usize; streams];
        for d in digits.iter_mut() {
            *d = rest % m;
            rest /= m;
        }
        for (s, &d) in digits.iter().enumerate() {
            points[(s, idx)] = levels[d];
            label = (label << level_bits) | gray_code(d as u32);
        }
        labels.push(label);
    }
    Ok(Constellation {
        scheme: Scheme::Multiplexing { m, streams },
        intensity,
        points,
        labels,
        bits: k.trailing_zeros(),
    })
}

impl Constellation {
    pub fn scheme(&self) -> Scheme {
        self.scheme
    }

    /// PAM order per transmitter.
    pub fn m(&self) -> usize {
        match self.scheme {
            Scheme::SpatialModulation { m, .. } | Scheme::Multiplexing { m, .. } => m,
        }
    }

    /// Number of transmitters the constellation drives.
    pub fn n_tx(&self) -> usize {
        self.points.nrows()
    }

    pub fn len(&self) -> usize {
        self.points.ncols()
    }

    pub fn is_empty(&self) -> bool {
        self.points.ncols() == 0
    }

    /// Bits per symbol, `log2(K)`.
    pub fn bits(&self) -> u32 {
        self.bits
    }

    /// Average optical power `I` of a symbol.
    pub fn intensity(&self) -> f64 {
        self.intensity
    }

    /// `n_tx x K` symbol matrix.
    pub fn points(&self) -> &DMatrix<f64> {
        &self.points
    }

    pub fn labels(&self) -> &[u32] {
        &self.labels
    }

    pub fn hamming(&self, a: usize, b: usize) -> u32 {
        (self.labels[a] ^ self.labels[b]).count_ones()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn binary_levels() {
        let c = build_constellation(2, 1, 1.0).unwrap();
        assert_eq!(c.len(), 2);
        assert!((c.points()[(0, 0)] - 2.0 / 3.0).abs() < 1e-15);
        assert!((c.points()[(0, 1)] - 4.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn sixteen_symbols_carry_four_bits() {
        let c = build_constellation(4, 4, 1.0).unwrap();
        assert_eq!(c.len(), 16);
        assert_eq!(c.bits(), 4);
        for col in c.points().column_iter() {
            assert_eq!(col.iter().filter(|v| **v != 0.0).count(), 1);
        }
    }

    #[test]
    fn labels_are_a_bijection() {
        for (m, n_a) in [(2, 1), (4, 4), (32, 1), (2, 16), (8, 4)] {
            let c = build_constellation(m, n_a, 1.0).unwrap();
            let mut seen = vec![false; c.len()];
            for &l in c.labels() {
                assert!(!seen[l as usize]);
                seen[l as usize] = true;
            }
        }
        let c = build_multiplexing(2, 4, 1.0).unwrap();
        let mut labels = c.labels().to_vec();
        labels.sort();
        assert_eq!(labels, (0..16).collect::<Vec<u32>>());
    }

    #[test]
    fn mean_optical_power_is_intensity() {
        for (m, n_a) in [(2, 1), (4, 4), (8, 2), (16, 16)] {
            let c = build_constellation(m, n_a, 0.7).unwrap();
            let mean = c.points().sum() / c.len() as f64;
            assert!((mean - 0.7).abs() < 1e-12);
        }
        let c = build_multiplexing(4, 3, 0.7).unwrap();
        assert!((c.points().sum() / c.len() as f64 - 0.7).abs() < 1e-12);
    }

    #[test]
    fn gray_adjacent_levels_differ_in_one_bit() {
        let c = build_constellation(8, 2, 1.0).unwrap();
        for level in 0..7 {
            for led in 0..2 {
                assert_eq!(c.hamming(level * 2 + led, (level + 1) * 2 + led), 1);
            }
        }
    }

    #[test]
    fn rejects_bad_orders() {
        assert!(build_constellation(3, 1, 1.0).is_err());
        assert!(build_constellation(4, 3, 1.0).is_err());
        assert!(build_constellation(1, 4, 1.0).is_err());
        assert!(build_multiplexing(16, 3, 1.0).is_ok());
        assert!(build_multiplexing(16, 4, 1.0).is_err());
    }
}
