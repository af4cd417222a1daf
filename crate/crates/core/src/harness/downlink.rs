//! Required-SNR maps over the room (static users) and along ORWP trajectories (walking users).

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::{realization_rng, run_batched, Placement, Placements};
use crate::adaptive::{evaluate_candidates, mimo_required_snr, pick_best, AsmDecision};
use crate::scenario::{Activity, Direction, Simulator};
use crate::sm::MAX_JOINT_SYMBOLS;
use crate::{Error, Result};

/// Required received SNR of one scheme in one realisation.
#[derive(Debug, Clone, PartialEq)]
pub struct SchemeOutcome {
    pub scheme: String,
    pub n_a: usize,
    pub m: usize,
    /// `+inf` when the target BER is out of reach.
    pub required_rx_db: f64,
}

/// One row per realisation and scheme.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DownlinkRecord {
    pub realization: u64,
    pub seed: u64,
    pub stream: u64,
    pub time_s: f64,
    pub x: f64,
    pub y: f64,
    pub omega_deg: f64,
    pub alpha_deg: f64,
    pub beta_deg: f64,
    pub gamma_deg: f64,
    pub blockers: usize,
    pub scheme: String,
    pub n_a: usize,
    pub m: usize,
    pub required_rx_db: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SchemeSummary {
    pub scheme: String,
    pub realizations: usize,
    pub outage_fraction: f64,
    pub p10_rx_db: f64,
    pub median_rx_db: f64,
    pub p90_rx_db: f64,
}

/// Step of an empirical CDF: fraction of realisations with required SNR `<= rx_db`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CdfPoint {
    pub scheme: String,
    pub rx_db: f64,
    pub cdf: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DownlinkResult {
    /// Scheme names in evaluation order.
    pub schemes: Vec<String>,
    /// Required SNR per scheme, indexed by realisation.
    pub values: Vec<Vec<f64>>,
    pub summary: Vec<SchemeSummary>,
    pub curve: Vec<CdfPoint>,
}

impl DownlinkResult {
    pub fn values_of(&self, scheme: &str) -> Option<&[f64]> {
        self.schemes
            .iter()
            .position(|s| s == scheme)
            .map(|i| self.values[i].as_slice())
    }

    pub fn summary_of(&self, scheme: &str) -> Option<&SchemeSummary> {
        self.summary.iter().find(|s| s.scheme == scheme)
    }
}

/// Fixed-count SM for every candidate (`sm_na<N>`), adaptive SM (`asm`) and, when the target
/// spectral efficiency splits evenly over the streams, spatial multiplexing (`mimo`).
pub fn evaluate_downlink(h: &DMatrix<f64>, sim: &Simulator) -> Result<Vec<SchemeOutcome>> {
    let s = sim.scenario();
    let results = evaluate_candidates(h, &s.targets, &s.schemes.candidates)?;
    let mut out: Vec<SchemeOutcome> = results
        .iter()
        .map(|r| SchemeOutcome {
            scheme: format!("sm_na{}", r.n_a),
            n_a: r.n_a,
            m: r.m,
            required_rx_db: r.required_rx_db(),
        })
        .collect();
    out.push(match pick_best(&results) {
        AsmDecision::Selected(r) => SchemeOutcome {
            scheme: "asm".into(),
            n_a: r.n_a,
            m: r.m,
            required_rx_db: r.required_rx_db(),
        },
        AsmDecision::Outage => SchemeOutcome {
            scheme: "asm".into(),
            n_a: 0,
            m: 0,
            required_rx_db: f64::INFINITY,
        },
    });
    let streams = s.schemes.mimo_streams;
    let bits = s.targets.spectral_efficiency as usize;
    if streams > 0 && bits % streams == 0 && bits / streams >= 1 {
        let joint = (bits as u32) < usize::BITS && (1usize << bits) <= MAX_JOINT_SYMBOLS;
        if joint {
            let r = mimo_required_snr(h, &s.targets, streams)?;
            out.push(SchemeOutcome {
                scheme: "mimo".into(),
                n_a: r.n_a,
                m: r.m,
                required_rx_db: r.required_rx_db(),
            });
        }
    }
    Ok(out)
}

fn evaluate_placement(sim: &Simulator, p: &Placement) -> Result<Vec<DownlinkRecord>> {
    let s = sim.scenario();
    let mut rng = realization_rng(s.seed, p.stream);
    let pose = match p.angles {
        Some(a) => sim.pose(p.xy, p.facing_deg, a),
        None => sim.random_pose(p.xy, p.facing_deg, &mut rng),
    };
    let blockers = sim.blockers(&pose, s.blockage.kappa_b, &mut rng);
    let h = sim.channel(&pose, &blockers)?.h;
    Ok(evaluate_downlink(&h, sim)?
        .into_iter()
        .map(|o| DownlinkRecord {
            realization: p.index,
            seed: s.seed,
            stream: p.stream,
            time_s: p.time_s,
            x: p.xy.x,
            y: p.xy.y,
            omega_deg: p.facing_deg,
            alpha_deg: pose.angles.alpha,
            beta_deg: pose.angles.beta,
            gamma_deg: pose.angles.gamma,
            blockers: blockers.len(),
            scheme: o.scheme,
            n_a: o.n_a,
            m: o.m,
            required_rx_db: o.required_rx_db,
        })
        .collect())
}

fn run_downlink(
    sim: &Simulator,
    placements: &Placements,
    sink: &mut dyn FnMut(&DownlinkRecord) -> Result<()>,
) -> Result<DownlinkResult> {
    if sim.scenario().direction != Direction::Downlink {
        return Err(Error::Config("required-SNR maps need a downlink scenario".into()));
    }
    let mut schemes: Vec<String> = Vec::new();
    let mut values: Vec<Vec<f64>> = Vec::new();
    run_batched(
        placements,
        |p| evaluate_placement(sim, p),
        |records| {
            for r in &records {
                let k = match schemes.iter().position(|s| *s == r.scheme) {
                    Some(k) => k,
                    None => {
                        schemes.push(r.scheme.clone());
                        values.push(Vec::new());
                        schemes.len() - 1
                    }
                };
                values[k].push(r.required_rx_db);
                sink(r)?;
            }
            Ok(())
        },
    )?;
    let summary = summarize(&schemes, &values);
    let curve = schemes
        .iter()
        .zip(&values)
        .flat_map(|(s, v)| cdf_curve(s, v))
        .collect();
    Ok(DownlinkResult {
        schemes,
        values,
        summary,
        curve,
    })
}

/// Required-SNR distribution of a static user over the interior grid, every facing direction
/// and random orientation draws.
pub fn run_cdf_map(sim: &Simulator, sink: &mut dyn FnMut(&DownlinkRecord) -> Result<()>) -> Result<DownlinkResult> {
    if sim.scenario().activity != Activity::Sitting {
        return Err(Error::Config("cdf-map needs the sitting activity".into()));
    }
    run_downlink(sim, &Placements::grid(sim), sink)
}

/// Required-SNR distribution along an ORWP trajectory of a walking user.
pub fn run_orwp_eval(sim: &Simulator, sink: &mut dyn FnMut(&DownlinkRecord) -> Result<()>) -> Result<DownlinkResult> {
    if sim.scenario().activity != Activity::Walking {
        return Err(Error::Config("orwp-run needs the walking activity".into()));
    }
    run_downlink(sim, &Placements::trajectory(sim)?, sink)
}

/// Inverse empirical CDF: the smallest value whose CDF reaches `p`. Outages (`+inf`) sort last.
pub fn quantile(values: &[f64], p: f64) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let k = ((p * v.len() as f64).ceil() as usize).clamp(1, v.len());
    v[k - 1]
}

pub fn summarize(schemes: &[String], values: &[Vec<f64>]) -> Vec<SchemeSummary> {
    schemes
        .iter()
        .zip(values)
        .map(|(s, v)| SchemeSummary {
            scheme: s.clone(),
            realizations: v.len(),
            outage_fraction: v.iter().filter(|x| !x.is_finite()).count() as f64 / v.len().max(1) as f64,
            p10_rx_db: quantile(v, 0.1),
            median_rx_db: quantile(v, 0.5),
            p90_rx_db: quantile(v, 0.9),
        })
        .collect()
}

/// Right-continuous empirical CDF over all realisations; it tops out at the finite fraction.
pub fn cdf_curve(scheme: &str, values: &[f64]) -> Vec<CdfPoint> {
    let n = values.len() as f64;
    let mut finite: Vec<f64> = values.iter().copied().filter(|x| x.is_finite()).collect();
    finite.sort_by(f64::total_cmp);
    let mut out: Vec<CdfPoint> = Vec::new();
    for (i, &v) in finite.iter().enumerate() {
        let cdf = (i + 1) as f64 / n;
        match out.last_mut() {
            Some(last) if last.rx_db == v => last.cdf = cdf,
            _ => out.push(CdfPoint {
                scheme: scheme.to_string(),
                rx_db: v,
                cdf,
            }),
        }
    }
    out
}
