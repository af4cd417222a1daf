//! Required-SNR search, adaptive selection of the active AP set on the downlink and LED
//! selection on the uplink.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::math::{db_to_linear, is_power_of_two, linear_to_db};
use crate::sm::{
    build_constellation, build_multiplexing, channel_snr_factor, Constellation, PairwiseTable,
};
use crate::{Error, Result};

/// Bisection precision in dB.
pub const SNR_PRECISION_DB: f64 = 0.01;
const BRACKET_LOW_DB: f64 = -20.0;
const BRACKET_HIGH_DB: f64 = 80.0;
const BRACKET_STEP_DB: f64 = 20.0;
const BRACKET_MAX_DB: f64 = 200.0;
const BRACKET_MIN_DB: f64 = -100.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SelectionTargets {
    pub target_ber: f64,
    /// Target spectral efficiency in bits per channel use.
    pub spectral_efficiency: u32,
}

impl Default for SelectionTargets {
    fn default() -> Self {
        Self {
            target_ber: 3.8e-3,
            spectral_efficiency: 5,
        }
    }
}

impl SelectionTargets {
    pub fn validate(&self) -> Result<()> {
        if !(self.target_ber > 0.0 && self.target_ber < 0.5) {
            return Err(Error::invalid("target BER must lie in (0, 0.5)"));
        }
        if self.spectral_efficiency == 0 {
            return Err(Error::invalid("target spectral efficiency must be >= 1"));
        }
        Ok(())
    }
}

/// SNR needed to reach a target BER.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SnrRequirement {
    pub gamma_rx_db: f64,
    pub gamma_tx_db: f64,
}

/// Smallest SNR at which the union bound of `c` over `h` reaches `target_ber`, or `None` when
/// no finite SNR does (the bound floor lies above the target or the channel is all zero).
///
/// The search runs on the received SNR in dB, which differs from the transmit SNR by the
/// constant `10 log10(sum_i (sum_j h_ij)^2 / n_a^2)`; the bracket starts at [-20, 80] dB and the
/// upper end grows in 20 dB steps up to 200 dB.
pub fn required_snr(c: &Constellation, h: &DMatrix<f64>, target_ber: f64) -> Result<Option<SnrRequirement>> {
    let table = PairwiseTable::new(c, h)?;
    let n_a = c.n_tx();
    let factor = channel_snr_factor(h) / (n_a * n_a) as f64;
    if factor <= 0.0 || table.floor() > target_ber {
        return Ok(None);
    }
    let offset_db = linear_to_db(factor);
    let ber_at = |rx_db: f64| table.ber(db_to_linear(rx_db - offset_db));

    let mut hi = BRACKET_HIGH_DB;
    while ber_at(hi) > target_ber {
        hi += BRACKET_STEP_DB;
        if hi > BRACKET_MAX_DB {
            return Ok(None);
        }
    }
    let mut lo = BRACKET_LOW_DB;
    while ber_at(lo) <= target_ber {
        if lo <= BRACKET_MIN_DB {
            return Ok(Some(SnrRequirement {
                gamma_rx_db: lo,
                gamma_tx_db: lo - offset_db,
            }));
        }
        hi = lo;
        lo -= BRACKET_STEP_DB;
    }
    while hi - lo > SNR_PRECISION_DB {
        let mid = 0.5 * (lo + hi);
        if ber_at(mid) <= target_ber {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(Some(SnrRequirement {
        gamma_rx_db: hi,
        gamma_tx_db: hi - offset_db,
    }))
}

/// Indices of the `n` columns with the largest Euclidean norm, returned in ascending order.
/// Equal norms prefer the lower index.
pub fn strongest_columns(h: &DMatrix<f64>, n: usize) -> Vec<usize> {
    let norms: Vec<f64> = h.column_iter().map(|c| c.norm()).collect();
    let mut order: Vec<usize> = (0..h.ncols()).collect();
    order.sort_by(|&a, &b| norms[b].total_cmp(&norms[a]));
    let mut picked: Vec<usize> = order.into_iter().take(n).collect();
    picked.sort_unstable();
    picked
}

/// Outcome for one candidate number of active transmitters.
#[derive(Debug, Clone, PartialEq)]
pub struct CandidateResult {
    pub n_a: usize,
    pub m: usize,
    pub active: Vec<usize>,
    pub requirement: Option<SnrRequirement>,
}

impl CandidateResult {
    pub fn required_rx_db(&self) -> f64 {
        self.requirement.map_or(f64::INFINITY, |r| r.gamma_rx_db)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum AsmDecision {
    Selected(CandidateResult),
    /// No candidate reaches the target BER.
    Outage,
}

impl AsmDecision {
    pub fn required_rx_db(&self) -> f64 {
        match self {
            AsmDecision::Selected(c) => c.required_rx_db(),
            AsmDecision::Outage => f64::INFINITY,
        }
    }
}

/// PAM order for `n_a` active transmitters at `spectral_efficiency` bits, or `None` when it
/// would fall below 2 or `n_a` is not a power of two.
pub fn pam_order_for(spectral_efficiency: u32, n_a: usize) -> Option<usize> {
    if !is_power_of_two(n_a) {
        return None;
    }
    let spatial = n_a.trailing_zeros();
    if spatial >= spectral_efficiency {
        return None;
    }
    Some(1usize << (spectral_efficiency - spatial))
}

/// Required SNR for every admissible candidate count, using the strongest APs for each.
pub fn evaluate_candidates(
    h_full: &DMatrix<f64>,
    targets: &SelectionTargets,
    candidates: &[usize],
) -> Result<Vec<CandidateResult>> {
    let mut out = Vec::with_capacity(candidates.len());
    for &n_a in candidates {
        if n_a == 0 || n_a > h_full.ncols() {
            continue;
        }
        let Some(m) = pam_order_for(targets.spectral_efficiency, n_a) else {
            continue;
        };
        let active = strongest_columns(h_full, n_a);
        let h = h_full.select_columns(&active);
        let c = build_constellation(m, n_a, 1.0)?;
        let requirement = required_snr(&c, &h, targets.target_ber)?;
        out.push(CandidateResult {
            n_a,
            m,
            active,
            requirement,
        });
    }
    Ok(out)
}

/// Pick the candidate with the smallest required received SNR; ties go to the smaller count.
pub fn pick_best(results: &[CandidateResult]) -> AsmDecision {
    let mut best: Option<&CandidateResult> = None;
    for r in results.iter().filter(|r| r.requirement.is_some()) {
        best = match best {
            None => Some(r),
            Some(b) => {
                let better = r.required_rx_db() < b.required_rx_db()
                    || (r.required_rx_db() == b.required_rx_db() && r.n_a < b.n_a);
                Some(if better { r } else { b })
            }
        };
    }
    best.map_or(AsmDecision::Outage, |b| AsmDecision::Selected(b.clone()))
}

/// Adaptive spatial modulation on the downlink.
pub fn asm_select_downlink(
    h_full: &DMatrix<f64>,
    targets: &SelectionTargets,
    candidates: &[usize],
) -> Result<AsmDecision> {
    Ok(pick_best(&evaluate_candidates(h_full, targets, candidates)?))
}

/// Required SNR of spatial multiplexing over the `streams` strongest transmitters, with the PAM
/// order chosen so that `streams * log2(m)` equals the target spectral efficiency.
pub fn mimo_required_snr(
    h_full: &DMatrix<f64>,
    targets: &SelectionTargets,
    streams: usize,
) -> Result<CandidateResult> {
    if streams == 0 || streams > h_full.ncols() || targets.spectral_efficiency as usize % streams != 0 {
        return Err(Error::invalid(format!(
            "{streams} streams cannot carry {} bits per symbol",
            targets.spectral_efficiency
        )));
    }
    let m = 1usize << (targets.spectral_efficiency as usize / streams);
    let active = strongest_columns(h_full, streams);
    let h = h_full.select_columns(&active);
    let c = build_multiplexing(m, streams, 1.0)?;
    let requirement = required_snr(&c, &h, targets.target_ber)?;
    Ok(CandidateResult {
        n_a: streams,
        m,
        active,
        requirement,
    })
}

/// Result of uplink LED selection.
#[derive(Debug, Clone, PartialEq)]
pub struct LedSelection {
    /// Number of active LEDs; zero when no LED reaches the target on its own and the user should
    /// change orientation or location.
    pub n_a: usize,
    /// Active LED indices (columns of the channel), ascending.
    pub active: Vec<usize>,
}

impl LedSelection {
    pub fn failed(&self) -> bool {
        self.n_a == 0
    }
}

/// Single-transmitter BER bound of `m`-PAM over one channel column.
pub fn single_column_ber(h_col: &DMatrix<f64>, m: usize, gamma_tx: f64) -> Result<f64> {
    let c = build_constellation(m, 1, 1.0)?;
    Ok(PairwiseTable::new(&c, h_col)?.ber(gamma_tx))
}

/// Uplink LED selection.
///
/// Columns are ranked by ascending norm. Starting from the largest admissible set (all `n_t`
/// LEDs) and shrinking through power-of-two sizes, the first set whose weakest column meets the
/// target BER on its own is activated.
pub fn led_selection_uplink(h: &DMatrix<f64>, m: usize, gamma_tx: f64, target_ber: f64) -> Result<LedSelection> {
    let n_t = h.ncols();
    let norms: Vec<f64> = h.column_iter().map(|c| c.norm()).collect();
    let mut ascending: Vec<usize> = (0..n_t).collect();
    ascending.sort_by(|&a, &b| norms[a].total_cmp(&norms[b]));
    for g in admissible_start_indices(n_t) {
        let weakest = ascending[g - 1];
        let col = h.select_columns(&[weakest]);
        if single_column_ber(&col, m, gamma_tx)? <= target_ber {
            let mut active: Vec<usize> = ascending[g - 1..].to_vec();
            active.sort_unstable();
            return Ok(LedSelection {
                n_a: n_t - g + 1,
                active,
            });
        }
    }
    Ok(LedSelection {
        n_a: 0,
        active: Vec::new(),
    })
}

/// 1-based positions `g` in the ascending ranking for which `n_t - g + 1` is a power of two.
pub fn admissible_start_indices(n_t: usize) -> Vec<usize> {
    (1..=n_t).filter(|&g| is_power_of_two(n_t - g + 1)).collect()
}
