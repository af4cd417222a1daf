//! Uplink BER and energy-efficiency sweeps over the symbol energy.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::{realization_rng, run_batched, Placement, Placements};
use crate::adaptive::{led_selection_uplink, single_column_ber};
use crate::geometry::DeviceVariant;
use crate::math::{db_to_linear, linear_to_db};
use crate::scenario::{Direction, Simulator};
use crate::sm::{build_constellation, build_multiplexing, noise_variance, received_snr, union_bound_ber, Constellation};
use crate::uplink::{mi_monte_carlo, rate_bounds, BoundOptions};
use crate::{Error, Result};

/// One realisation, symbol energy and scheme.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UplinkRecord {
    pub realization: u64,
    pub seed: u64,
    pub stream: u64,
    pub x: f64,
    pub y: f64,
    pub omega_deg: f64,
    pub alpha_deg: f64,
    pub beta_deg: f64,
    pub gamma_deg: f64,
    pub scheme: String,
    pub e_s_db: f64,
    pub n_a: usize,
    pub m: usize,
    /// LED selection found no admissible set; the strongest LED alone is reported.
    pub outage: bool,
    pub rx_db: f64,
    pub ber: f64,
    pub l1: f64,
    pub l2: f64,
    pub r_up: f64,
    pub eta_ee: f64,
    pub mi_mc: f64,
    pub mi_stderr: f64,
}

/// Averages over all realisations for one scheme and symbol energy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UplinkSummary {
    pub scheme: String,
    /// Device and activity, e.g. `MDT-sitting`.
    pub config: String,
    pub e_s_db: f64,
    pub gamma_tx_db: f64,
    /// Mean received SNR (averaged in linear scale).
    pub mean_rx_db: f64,
    pub mean_ber: f64,
    pub outage_fraction: f64,
    /// Mean achievable rate, the received spectral efficiency.
    pub eta_rse: f64,
    pub eta_ee: f64,
    pub l1: f64,
    pub l2: f64,
    pub mi_mc: f64,
    pub stderr: f64,
    pub realizations: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct UplinkResult {
    pub config: String,
    pub summary: Vec<UplinkSummary>,
}

impl UplinkResult {
    /// Summary rows of one scheme, in energy-grid order.
    pub fn curve(&self, scheme: &str) -> Vec<&UplinkSummary> {
        self.summary.iter().filter(|s| s.scheme == scheme).collect()
    }
}

/// Name of the device when it transmits: ST for the screen layout, MDT for the multi-directional.
pub fn transmitter_label(v: DeviceVariant) -> &'static str {
    match v {
        DeviceVariant::Sr => "ST",
        DeviceVariant::Mdr => "MDT",
    }
}

#[derive(Default, Clone)]
struct Accumulator {
    rx_lin: f64,
    ber: f64,
    outages: usize,
    r_up: f64,
    eta_ee: f64,
    l1: f64,
    l2: f64,
    mi: f64,
    var: f64,
    n: usize,
}

impl Accumulator {
    fn add(&mut self, r: &UplinkRecord) {
        self.rx_lin += db_to_linear(r.rx_db);
        self.ber += r.ber;
        self.outages += r.outage as usize;
        self.r_up += r.r_up;
        self.eta_ee += r.eta_ee;
        self.l1 += r.l1;
        self.l2 += r.l2;
        self.mi += r.mi_mc;
        self.var += r.mi_stderr * r.mi_stderr;
        self.n += 1;
    }
}

struct Setup {
    m: usize,
    n_t: usize,
    sm_full: Constellation,
    mimo: Option<Constellation>,
}

fn setup(sim: &Simulator) -> Result<Setup> {
    let s = sim.scenario();
    let m = 1usize << s.uplink.eta_tse;
    let n_t = 4usize;
    let bits = s.uplink.eta_tse as usize + n_t.trailing_zeros() as usize;
    // multiplexing over every LED at the bit rate of SM with all LEDs active
    let mimo = if bits % n_t == 0 && bits / n_t >= 1 {
        Some(build_multiplexing(1 << (bits / n_t), n_t, 1.0)?)
    } else {
        None
    };
    Ok(Setup {
        m,
        n_t,
        sm_full: build_constellation(m, n_t, 1.0)?,
        mimo,
    })
}

struct Evaluated {
    n_a: usize,
    m: usize,
    outage: bool,
    constellation: Constellation,
    h: DMatrix<f64>,
    ber: f64,
}

fn evaluate_placement(sim: &Simulator, setup: &Setup, p: &Placement) -> Result<Vec<UplinkRecord>> {
    let s = sim.scenario();
    let up = &s.uplink;
    let mut rng = realization_rng(s.seed, p.stream);
    let pose = match p.angles {
        Some(a) => sim.pose(p.xy, p.facing_deg, a),
        None => sim.random_pose(p.xy, p.facing_deg, &mut rng),
    };
    let blockers = sim.blockers(&pose, s.blockage.kappa_b, &mut rng);
    let h = sim.channel(&pose, &blockers)?.h;
    if h.ncols() != setup.n_t {
        return Err(Error::Numerical(format!("expected {} uplink LEDs, found {}", setup.n_t, h.ncols())));
    }
    let opts = BoundOptions {
        exponent: up.l1_exponent,
        reduce_to_rank: up.reduce_to_rank,
    };
    let mut out = Vec::new();
    for &e_s_db in &up.e_s_db {
        let e_s = db_to_linear(e_s_db);
        let gamma_tx = e_s / s.noise.n0;
        let sigma2 = noise_variance(1.0, gamma_tx);
        let mut schemes: Vec<(&str, Evaluated)> = Vec::with_capacity(3);

        let sel = led_selection_uplink(&h, setup.m, gamma_tx, s.targets.target_ber)?;
        let asm = if sel.failed() {
            let norms: Vec<f64> = h.column_iter().map(|c| c.norm()).collect();
            let best = (0..norms.len())
                .fold(0, |b, j| if norms[j] > norms[b] { j } else { b });
            let col = h.select_columns(&[best]);
            Evaluated {
                n_a: 1,
                m: setup.m,
                outage: true,
                constellation: build_constellation(setup.m, 1, 1.0)?,
                ber: single_column_ber(&col, setup.m, gamma_tx)?.min(0.5),
                h: col,
            }
        } else {
            let hs = h.select_columns(&sel.active);
            let c = build_constellation(setup.m, sel.n_a, 1.0)?;
            Evaluated {
                n_a: sel.n_a,
                m: setup.m,
                outage: false,
                ber: union_bound_ber(&c, &hs, gamma_tx)?.min(0.5),
                constellation: c,
                h: hs,
            }
        };
        schemes.push(("asm", asm));
        schemes.push((
            "sm",
            Evaluated {
                n_a: setup.n_t,
                m: setup.m,
                outage: false,
                ber: union_bound_ber(&setup.sm_full, &h, gamma_tx)?.min(0.5),
                constellation: setup.sm_full.clone(),
                h: h.clone(),
            },
        ));
        if let Some(c) = &setup.mimo {
            schemes.push((
                "mimo",
                Evaluated {
                    n_a: setup.n_t,
                    m: c.m(),
                    outage: false,
                    ber: union_bound_ber(c, &h, gamma_tx)?.min(0.5),
                    constellation: c.clone(),
                    h: h.clone(),
                },
            ));
        }

        for (name, ev) in schemes {
            let bounds = rate_bounds(&ev.constellation, &ev.h, sigma2, e_s, s.noise.symbol_rate, opts)?;
            let (mi_mc, mi_stderr) = if up.mi_samples > 0 {
                let mi = mi_monte_carlo(&ev.constellation, &ev.h, sigma2, up.mi_samples, &mut rng)?;
                (mi.bits, mi.stderr)
            } else {
                (f64::NAN, f64::NAN)
            };
            out.push(UplinkRecord {
                realization: p.index,
                seed: s.seed,
                stream: p.stream,
                x: p.xy.x,
                y: p.xy.y,
                omega_deg: p.facing_deg,
                alpha_deg: pose.angles.alpha,
                beta_deg: pose.angles.beta,
                gamma_deg: pose.angles.gamma,
                scheme: name.to_string(),
                e_s_db,
                n_a: ev.n_a,
                m: ev.m,
                outage: ev.outage,
                // the mean drive per LED is I / n_tx for both SM and multiplexing
                rx_db: linear_to_db(received_snr(&ev.h, ev.constellation.n_tx(), gamma_tx)),
                ber: ev.ber,
                l1: bounds.l1,
                l2: bounds.l2,
                r_up: bounds.r_up,
                eta_ee: bounds.eta_ee,
                mi_mc,
                mi_stderr,
            });
        }
    }
    Ok(out)
}

/// Uplink sweep over the symbol-energy grid for every realisation of the scenario's activity
/// (the interior grid when sitting, an ORWP trajectory when walking).
///
/// Schemes: `asm` (LED selection), `sm` (all LEDs active) and `mimo` (multiplexing over all
/// LEDs at the bit rate of `sm`, when that rate splits evenly). A failed LED selection is
/// counted as an outage and reported with the strongest LED alone.
pub fn run_uplink_eval(sim: &Simulator, sink: &mut dyn FnMut(&UplinkRecord) -> Result<()>) -> Result<UplinkResult> {
    let s = sim.scenario();
    if s.direction != Direction::Uplink {
        return Err(Error::Config("uplink-ee needs an uplink scenario".into()));
    }
    let setup = setup(sim)?;
    let placements = Placements::for_activity(sim)?;
    let n_e = s.uplink.e_s_db.len();
    let mut names: Vec<String> = Vec::new();
    let mut acc: Vec<Vec<Accumulator>> = Vec::new();
    run_batched(
        &placements,
        |p| evaluate_placement(sim, &setup, p),
        |records| {
            for (i, r) in records.iter().enumerate() {
                let k = match names.iter().position(|n| *n == r.scheme) {
                    Some(k) => k,
                    None => {
                        names.push(r.scheme.clone());
                        acc.push(vec![Accumulator::default(); n_e]);
                        names.len() - 1
                    }
                };
                acc[k][i / (records.len() / n_e)].add(r);
                sink(r)?;
            }
            Ok(())
        },
    )?;
    let config = format!("{}-{}", transmitter_label(s.device), s.activity.name());
    let mut summary = Vec::new();
    for (name, per_e) in names.iter().zip(&acc) {
        for (a, &e_s_db) in per_e.iter().zip(&s.uplink.e_s_db) {
            let n = a.n.max(1) as f64;
            summary.push(UplinkSummary {
                scheme: name.clone(),
                config: config.clone(),
                e_s_db,
                gamma_tx_db: e_s_db - linear_to_db(s.noise.n0),
                mean_rx_db: linear_to_db(a.rx_lin / n),
                mean_ber: a.ber / n,
                outage_fraction: a.outages as f64 / n,
                eta_rse: a.r_up / n,
                eta_ee: a.eta_ee / n,
                l1: a.l1 / n,
                l2: a.l2 / n,
                mi_mc: a.mi / n,
                stderr: a.var.sqrt() / n,
                realizations: a.n,
            });
        }
    }
    Ok(UplinkResult { config, summary })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::Scenario;

    fn scenario() -> Scenario {
        let mut s = Scenario::default();
        s.direction = Direction::Uplink;
        s.cdf.grid_step = 1.25;
        s.cdf.directions = 4;
        s.cdf.orientations_per_point = 1;
        s.uplink.e_s_db = vec![-50.0, -30.0, -10.0];
        s
    }

    #[test]
    fn energy_sweep_shapes_and_limits() {
        let sim = Simulator::new(&scenario()).unwrap();
        let mut rows = 0;
        let res = run_uplink_eval(&sim, &mut |_| {
            rows += 1;
            Ok(())
        })
        .unwrap();
        assert_eq!(rows, 36 * 3 * 3);
        assert_eq!(res.config, "MDT-sitting");
        for scheme in ["asm", "sm", "mimo"] {
            let c = res.curve(scheme);
            assert_eq!(c.len(), 3);
            // more energy: lower BER, higher rate, higher received SNR
            assert!(c.windows(2).all(|w| w[1].mean_ber <= w[0].mean_ber + 1e-12), "{scheme}");
            assert!(c.windows(2).all(|w| w[1].eta_rse >= w[0].eta_rse - 1e-9), "{scheme}");
            assert!(c.windows(2).all(|w| w[1].mean_rx_db > w[0].mean_rx_db), "{scheme}");
            for r in &c {
                assert!((r.eta_ee - r.eta_rse / db_to_linear(r.e_s_db)).abs() <= 1e-9 * r.eta_ee.abs().max(1.0));
                assert!(r.mean_ber <= 0.5 && r.outage_fraction <= 1.0);
            }
        }
    }

    #[test]
    fn mutual_information_is_estimated_on_request() {
        let mut s = scenario();
        s.cdf.grid_step = 2.5;
        s.cdf.directions = 1;
        s.uplink.e_s_db = vec![-20.0];
        s.uplink.mi_samples = 2000;
        let sim = Simulator::new(&s).unwrap();
        let mut recs = Vec::new();
        run_uplink_eval(&sim, &mut |r| {
            recs.push(r.clone());
            Ok(())
        })
        .unwrap();
        for r in &recs {
            assert!(r.mi_mc.is_finite());
            assert!(r.r_up <= r.mi_mc + 4.0 * r.mi_stderr + 1e-9, "{r:?}");
        }
    }
}
