//! BER versus received SNR at one location: union bound and Monte-Carlo ML detection.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::realization_rng;
use crate::adaptive::{pam_order_for, strongest_columns};
use crate::math::{db_to_linear, wilson_interval};
use crate::scenario::{Direction, Simulator};
use crate::sm::{build_constellation, channel_snr_factor, monte_carlo_ber, PairwiseTable};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BerRecord {
    pub variant: String,
    pub snr_rx_db: f64,
    /// Union bound, capped at 0.5 and averaged over the channel draws.
    pub ber_bound: f64,
    /// Monte-Carlo BER pooled over the draws; NaN when no symbols were simulated.
    pub ber_mc: f64,
    pub bit_errors: u64,
    pub bits: u64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub n_a: usize,
    pub m: usize,
    pub draws: usize,
}

struct DrawCurve {
    bound: Vec<f64>,
    errors: Vec<u64>,
    bits: Vec<u64>,
}

/// Sweep every configured variant over the received-SNR grid.
///
/// Each variant uses the `n_a` strongest APs of each channel draw with `M`-PAM such that the
/// symbol carries the target spectral efficiency. At every grid point the transmit SNR is set
/// so that the draw's received SNR equals the grid value. Draw `d` of variant `v` uses stream
/// `(v << 32) | d`.
pub fn run_ber_sweep(sim: &Simulator) -> Result<Vec<BerRecord>> {
    let s = sim.scenario();
    if s.direction != Direction::Downlink {
        return Err(Error::Config("ber-sweep needs a downlink scenario".into()));
    }
    let cfg = &s.ber_sweep;
    let xy = cfg.resolve_position()?;
    let n_a = cfg.n_a;
    let m = pam_order_for(s.targets.spectral_efficiency, n_a)
        .ok_or_else(|| Error::Config(format!("no PAM order for n_a = {n_a}")))?;
    let c = build_constellation(m, n_a, 1.0)?;
    let mut out = Vec::new();
    for (vi, v) in cfg.variants.iter().enumerate() {
        if v.nlos && !sim.has_nlos() {
            return Err(Error::Config(format!(
                "variant {:?} asks for NLOS but the scenario disables it",
                v.label
            )));
        }
        let symbols_per_draw = cfg.mc_symbols.div_ceil(v.draws as u64);
        let curves: Vec<Result<DrawCurve>> = (0..v.draws)
            .into_par_iter()
            .map(|d| {
                let mut rng = realization_rng(s.seed, ((vi as u64) << 32) | d as u64);
                let pose = if v.random_orientation {
                    sim.random_pose(xy, cfg.facing_deg, &mut rng)
                } else {
                    sim.mean_pose(xy, cfg.facing_deg)
                };
                let blockers = sim.blockers(&pose, v.kappa_b, &mut rng);
                let h_full = sim.channel_with(&pose, &blockers, v.nlos)?.h;
                let h = h_full.select_columns(&strongest_columns(&h_full, n_a));
                let table = PairwiseTable::new(&c, &h)?;
                let factor = channel_snr_factor(&h) / (n_a * n_a) as f64;
                let mut curve = DrawCurve {
                    bound: Vec::with_capacity(cfg.snr_db.len()),
                    errors: Vec::with_capacity(cfg.snr_db.len()),
                    bits: Vec::with_capacity(cfg.snr_db.len()),
                };
                for &rx_db in &cfg.snr_db {
                    if factor <= 0.0 {
                        // nothing reaches the receiver: every decision is a guess
                        curve.bound.push(0.5);
                        curve.errors.push(0);
                        curve.bits.push(0);
                        continue;
                    }
                    let gamma_tx = db_to_linear(rx_db) / factor;
                    curve.bound.push(table.ber(gamma_tx).min(0.5));
                    if symbols_per_draw > 0 {
                        let est = monte_carlo_ber(&c, &h, gamma_tx, symbols_per_draw, &mut rng)?;
                        curve.errors.push(est.bit_errors);
                        curve.bits.push(est.bits);
                    } else {
                        curve.errors.push(0);
                        curve.bits.push(0);
                    }
                }
                Ok(curve)
            })
            .collect();
        let curves = curves.into_iter().collect::<Result<Vec<_>>>()?;
        for (k, &rx_db) in cfg.snr_db.iter().enumerate() {
            let bound = curves.iter().map(|c| c.bound[k]).sum::<f64>() / curves.len() as f64;
            let errors: u64 = curves.iter().map(|c| c.errors[k]).sum();
            let bits: u64 = curves.iter().map(|c| c.bits[k]).sum();
            let (ci_low, ci_high, ber_mc) = if bits > 0 {
                let (lo, hi) = wilson_interval(errors, bits);
                (lo, hi, errors as f64 / bits as f64)
            } else {
                (f64::NAN, f64::NAN, f64::NAN)
            };
            out.push(BerRecord {
                variant: v.label.clone(),
                snr_rx_db: rx_db,
                ber_bound: bound,
                ber_mc,
                bit_errors: errors,
                bits,
                ci_low,
                ci_high,
                n_a,
                m,
                draws: v.draws,
            });
        }
    }
    Ok(out)
}
