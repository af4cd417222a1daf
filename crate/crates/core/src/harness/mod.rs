//! Seeded experiment orchestration.
//!
//! Every realisation draws its randomness from its own stream of a ChaCha8 generator keyed by
//! the scenario seed, so any realisation can be regenerated in isolation and results do not
//! depend on how many worker threads run them. Realisations are processed in fixed-size batches
//! and merged in index order.

mod ber_sweep;
mod downlink;
pub mod emit;
mod outputs;
pub mod svg;
mod uplink_eval;

pub use ber_sweep::{run_ber_sweep, BerRecord};
pub use downlink::{
    cdf_curve, evaluate_downlink, quantile, run_cdf_map, run_orwp_eval, summarize, CdfPoint,
    DownlinkRecord, DownlinkResult, SchemeOutcome, SchemeSummary,
};
pub use outputs::{
    ber_sweep_to_dir, cdf_map_to_dir, orwp_to_dir, read_downlink_records, uplink_to_dir, Written,
};
pub use uplink_eval::{transmitter_label, run_uplink_eval, UplinkRecord, UplinkResult, UplinkSummary};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::geometry::{Room, RotationAngles, Vec2};
use crate::orientation::{orwp_generate, OrwpConfig, TrajectorySample};
use crate::scenario::{Activity, Simulator};
use crate::{Error, Result};

/// Realisations evaluated between two ordered merges.
const BATCH: usize = 1024;

/// Generator for stream `stream` under `seed`.
pub fn realization_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Run `f` on a dedicated pool of `workers` threads, or on the global pool when `None`.
pub fn with_workers<T: Send>(workers: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T> {
    match workers {
        None => Ok(f()),
        Some(0) => Err(Error::Config("worker count must be >= 1".into())),
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| Error::Numerical(format!("cannot start worker pool: {e}")))?;
            Ok(pool.install(f))
        }
    }
}

/// Interior lattice `k * step` in both directions, strictly inside the walls.
pub fn interior_grid(room: &Room, step: f64) -> Vec<Vec2> {
    let axis = |len: f64| -> Vec<f64> {
        (1..)
            .map(|k| k as f64 * step)
            .take_while(|v| *v < len - 1e-9)
            .collect()
    };
    let xs = axis(room.width);
    let ys = axis(room.depth);
    let mut out = Vec::with_capacity(xs.len() * ys.len());
    for &y in &ys {
        for &x in &xs {
            out.push(Vec2::new(x, y));
        }
    }
    out
}

/// `n` facing directions `360 i / n` degrees.
pub fn directions(n: usize) -> Vec<f64> {
    (0..n).map(|i| 360.0 * i as f64 / n as f64).collect()
}

/// Where and how the device sits in one realisation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Placement {
    pub index: u64,
    /// Random stream used by the realisation.
    pub stream: u64,
    pub time_s: f64,
    pub xy: Vec2,
    pub facing_deg: f64,
    /// Fixed orientation, or `None` to draw one from the realisation stream.
    pub angles: Option<RotationAngles>,
}

/// The realisations of a run, enumerated lazily.
#[derive(Debug, Clone)]
pub enum Placements {
    /// Grid point x direction x orientation draw, draw index fastest.
    Grid {
        points: Vec<Vec2>,
        directions: Vec<f64>,
        draws: usize,
    },
    /// Samples of one trajectory, generated from stream 0; sample `i` uses stream `i + 1`.
    Trajectory { samples: Vec<TrajectorySample>, sample_time: f64 },
}

impl Placements {
    /// Grid placements from the scenario's CDF settings.
    pub fn grid(sim: &Simulator) -> Self {
        let s = sim.scenario();
        Placements::Grid {
            points: interior_grid(&s.room, s.cdf.grid_step),
            directions: directions(s.cdf.directions),
            draws: s.cdf.orientations_per_point,
        }
    }

    /// ORWP trajectory from the scenario's mobility settings.
    pub fn trajectory(sim: &Simulator) -> Result<Self> {
        let s = sim.scenario();
        let sample_time = s.orwp.sample_time.unwrap_or(sim.stats().min_coherence_time());
        let cfg = OrwpConfig {
            n_waypoints: s.orwp.waypoints,
            speed: s.orwp.speed,
            sample_time: Some(sample_time),
            footprint: (s.room.width, s.room.depth),
        };
        let mut rng = realization_rng(s.seed, 0);
        let mut samples = orwp_generate(&cfg, sim.stats(), &mut rng).map_err(|e| match e {
            Error::InvalidParameter(m) => Error::Config(m),
            other => other,
        })?;
        if let Some(max) = s.orwp.max_samples {
            samples.truncate(max);
        }
        Ok(Placements::Trajectory {
            samples,
            sample_time,
        })
    }

    /// Grid for a sitting scenario, trajectory for a walking one.
    pub fn for_activity(sim: &Simulator) -> Result<Self> {
        match sim.scenario().activity {
            Activity::Sitting => Ok(Self::grid(sim)),
            Activity::Walking => Self::trajectory(sim),
        }
    }

    pub fn len(&self) -> usize {
        match self {
            Placements::Grid {
                points,
                directions,
                draws,
            } => points.len() * directions.len() * draws,
            Placements::Trajectory { samples, .. } => samples.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn get(&self, i: usize) -> Placement {
        match self {
            Placements::Grid {
                points,
                directions,
                draws,
            } => {
                let draw_block = directions.len() * draws;
                let p = i / draw_block;
                let d = (i % draw_block) / draws;
                Placement {
                    index: i as u64,
                    stream: i as u64,
                    time_s: 0.0,
                    xy: points[p],
                    facing_deg: directions[d],
                    angles: None,
                }
            }
            Placements::Trajectory {
                samples,
                sample_time,
            } => {
                let s = &samples[i];
                Placement {
                    index: i as u64,
                    stream: i as u64 + 1,
                    time_s: (i + 1) as f64 * sample_time,
                    xy: s.position,
                    facing_deg: s.facing_deg,
                    angles: Some(s.angles),
                }
            }
        }
    }
}

/// Evaluate `eval` on every placement in parallel batches and hand the results to `sink` in
/// index order.
pub(crate) fn run_batched<T, F, S>(placements: &Placements, eval: F, mut sink: S) -> Result<()>
where
    T: Send,
    F: Fn(&Placement) -> Result<T> + Sync,
    S: FnMut(T) -> Result<()>,
{
    let n = placements.len();
    let mut lo = 0;
    while lo < n {
        let hi = (lo + BATCH).min(n);
        let out: Vec<Result<T>> = (lo..hi)
            .into_par_iter()
            .map(|i| eval(&placements.get(i)))
            .collect();
        for r in out {
            sink(r?)?;
        }
        lo = hi;
    }
    Ok(())
}
