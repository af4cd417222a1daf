//! Random device orientation and orientation-aware random-waypoint mobility.

use rand::Rng;
use rand_distr::{Distribution, Normal, Open01};
use serde::{Deserialize, Serialize};

use crate::geometry::{RotationAngles, Vec2};
use crate::{Error, Result};

/// Autocorrelation level that defines the coherence time of an angle process.
pub const COHERENCE_CORRELATION: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AngleFamily {
    Laplace,
    Gaussian,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AngleStats {
    /// Mean in degrees. For yaw this is an offset added to `facing - 90`.
    pub mean: f64,
    pub std: f64,
    /// Coherence time in seconds.
    pub coherence_time: f64,
}

impl AngleStats {
    pub const fn new(mean: f64, std: f64, coherence_time: f64) -> Self {
        Self {
            mean,
            std,
            coherence_time,
        }
    }
}

/// Per-angle orientation statistics of one activity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OrientationStats {
    pub family: AngleFamily,
    pub alpha: AngleStats,
    pub beta: AngleStats,
    pub gamma: AngleStats,
}

impl OrientationStats {
    /// Measured statistics for a seated user.
    pub const fn sitting() -> Self {
        Self {
            family: AngleFamily::Laplace,
            alpha: AngleStats::new(0.0, 3.67, 0.342),
            beta: AngleStats::new(40.78, 2.39, 0.377),
            gamma: AngleStats::new(-0.84, 2.21, 0.331),
        }
    }

    /// Measured statistics for a walking user.
    pub const fn walking() -> Self {
        Self {
            family: AngleFamily::Gaussian,
            alpha: AngleStats::new(0.0, 10.0, 0.131),
            beta: AngleStats::new(28.81, 3.26, 0.176),
            gamma: AngleStats::new(-1.35, 5.42, 0.142),
        }
    }

    /// Built-in dataset by name (`"sitting"` or `"walking"`).
    pub fn builtin(name: &str) -> Option<Self> {
        match name {
            "sitting" => Some(Self::sitting()),
            "walking" => Some(Self::walking()),
            _ => None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, a) in [("alpha", self.alpha), ("beta", self.beta), ("gamma", self.gamma)] {
            if !(a.std >= 0.0 && a.std.is_finite()) {
                return Err(Error::invalid(format!("{name} std must be >= 0")));
            }
            if !(a.coherence_time > 0.0) {
                return Err(Error::invalid(format!("{name} coherence time must be > 0")));
            }
        }
        Ok(())
    }

    /// Shortest of the three coherence times.
    pub fn min_coherence_time(&self) -> f64 {
        self.alpha
            .coherence_time
            .min(self.beta.coherence_time)
            .min(self.gamma.coherence_time)
    }

    /// Mean orientation for a user facing `facing_deg`.
    pub fn mean_angles(&self, facing_deg: f64) -> RotationAngles {
        RotationAngles::new(facing_deg - 90.0 + self.alpha.mean, self.beta.mean, self.gamma.mean)
    }
}

fn sample_laplace<R: Rng + ?Sized>(mean: f64, std: f64, rng: &mut R) -> f64 {
    let b = std / std::f64::consts::SQRT_2;
    let u: f64 = rng.sample::<f64, _>(Open01) - 0.5;
    mean - b * u.signum() * (1.0 - 2.0 * u.abs()).ln()
}

fn sample_gaussian<R: Rng + ?Sized>(mean: f64, std: f64, rng: &mut R) -> f64 {
    let z: f64 = rng.sample(rand_distr::StandardNormal);
    mean + std * z
}

fn sample_angle<R: Rng + ?Sized>(family: AngleFamily, mean: f64, std: f64, rng: &mut R) -> f64 {
    if std == 0.0 {
        return mean;
    }
    match family {
        AngleFamily::Laplace => sample_laplace(mean, std, rng),
        AngleFamily::Gaussian => sample_gaussian(mean, std, rng),
    }
}

/// One independent orientation draw for a user facing `facing_deg`.
pub fn sample_static_orientation<R: Rng + ?Sized>(
    stats: &OrientationStats,
    facing_deg: f64,
    rng: &mut R,
) -> RotationAngles {
    let mean = stats.mean_angles(facing_deg);
    RotationAngles::new(
        sample_angle(stats.family, mean.alpha, stats.alpha.std, rng),
        sample_angle(stats.family, mean.beta, stats.beta.std, rng),
        sample_angle(stats.family, mean.gamma, stats.gamma.std, rng),
    )
}

/// Coefficients of `x[k] = c0 + c1 * x[k-1] + w[k]`, `w ~ N(0, sigma_w^2)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Ar1Params {
    pub c0: f64,
    pub c1: f64,
    pub sigma_w: f64,
}

impl Ar1Params {
    pub fn stationary_mean(&self) -> f64 {
        self.c0 / (1.0 - self.c1)
    }

    pub fn stationary_variance(&self) -> f64 {
        self.sigma_w * self.sigma_w / (1.0 - self.c1 * self.c1)
    }
}

/// AR(1) parameters matching mean `mean`, standard deviation `std` and an autocorrelation of
/// 0.05 at a lag of one coherence time, when sampled every `sample_time` seconds.
pub fn ar1_params(mean: f64, std: f64, coherence_time: f64, sample_time: f64) -> Result<Ar1Params> {
    if !(sample_time > 0.0) || !(coherence_time > 0.0) || !(std > 0.0) {
        return Err(Error::invalid(format!(
            "AR(1) requires positive std, coherence and sample time (got {std}, {coherence_time}, {sample_time})"
        )));
    }
    let c1 = COHERENCE_CORRELATION.powf(sample_time / coherence_time);
    Ok(Ar1Params {
        c0: (1.0 - c1) * mean,
        c1,
        sigma_w: ((1.0 - c1 * c1) * std * std).sqrt(),
    })
}

pub fn ar1_step<R: Rng + ?Sized>(prev: f64, p: &Ar1Params, rng: &mut R) -> f64 {
    let w = if p.sigma_w == 0.0 {
        0.0
    } else {
        Normal::new(0.0, p.sigma_w)
            .expect("sigma_w is finite and non-negative")
            .sample(rng)
    };
    p.c0 + p.c1 * prev + w
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OrwpConfig {
    pub n_waypoints: usize,
    /// Walking speed in m/s.
    pub speed: f64,
    /// Sampling period in seconds; defaults to the shortest coherence time.
    pub sample_time: Option<f64>,
    /// Footprint `(width, depth)` in metres.
    pub footprint: (f64, f64),
}

/// One step of an ORWP trajectory.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrajectorySample {
    pub previous: Vec2,
    pub position: Vec2,
    pub speed: f64,
    pub facing_deg: f64,
    pub angles: RotationAngles,
    /// Index of the waypoint leg (1-based).
    pub leg: usize,
}

/// Positions visited when walking from `start` to `target` in steps of length `step`: every full
/// step that fits strictly inside the leg, then one final (possibly shorter) step onto `target`.
pub fn leg_positions(start: Vec2, target: Vec2, step: f64) -> Vec<Vec2> {
    let delta = target - start;
    let dist = delta.norm();
    if dist == 0.0 {
        return Vec::new();
    }
    let dir = delta / dist;
    let ratio = dist / step;
    let mut n_full = ratio.floor() as usize;
    if n_full > 0 && (ratio - n_full as f64) * step <= 1e-12 * dist.max(1.0) {
        // the last full step already lands on the target
        n_full -= 1;
    }
    let mut out: Vec<Vec2> = (1..=n_full)
        .map(|k| start + dir * (step * k as f64))
        .collect();
    out.push(target);
    out
}

fn uniform_point<R: Rng + ?Sized>(footprint: (f64, f64), rng: &mut R) -> Vec2 {
    Vec2::new(
        rng.random::<f64>() * footprint.0,
        rng.random::<f64>() * footprint.1,
    )
}

/// Generate an orientation-based random-waypoint trajectory.
///
/// Each leg walks in full steps of `speed * T_s` while they fit inside the leg, followed by
/// one partial step that lands exactly on the waypoint. Each angle follows its own AR(1)
/// process around its mean; the yaw mean tracks `facing - 90` of the current leg.
pub fn orwp_generate<R: Rng + ?Sized>(
    cfg: &OrwpConfig,
    stats: &OrientationStats,
    rng: &mut R,
) -> Result<Vec<TrajectorySample>> {
    stats.validate()?;
    if !(cfg.speed > 0.0) {
        return Err(Error::invalid("ORWP speed must be > 0"));
    }
    if !(cfg.footprint.0 > 0.0 && cfg.footprint.1 > 0.0) {
        return Err(Error::invalid("ORWP footprint must be positive"));
    }
    let tc = stats.min_coherence_time();
    let ts = cfg.sample_time.unwrap_or(tc);
    if !(ts > 0.0) || ts > tc * (1.0 + 1e-12) {
        return Err(Error::invalid(format!(
            "sample time {ts} must lie in (0, {tc}] (shortest coherence time)"
        )));
    }
    let procs = [stats.alpha, stats.beta, stats.gamma].map(|a| {
        if a.std > 0.0 {
            ar1_params(0.0, a.std, a.coherence_time, ts)
        } else {
            Ok(Ar1Params {
                c0: 0.0,
                c1: 0.0,
                sigma_w: 0.0,
            })
        }
    });
    let [pa, pb, pg] = procs;
    let procs = [pa?, pb?, pg?];
    // deviations from the per-angle means, initialised at the stationary mean
    let mut dev = [0.0f64; 3];
    let step = cfg.speed * ts;

    let mut out = Vec::new();
    let mut current = uniform_point(cfg.footprint, rng);
    for leg in 1..=cfg.n_waypoints {
        let target = loop {
            let p = uniform_point(cfg.footprint, rng);
            if (p - current).norm() > 0.0 {
                break p;
            }
        };
        let delta = target - current;
        let facing = delta.y.atan2(delta.x).to_degrees();
        let mean = stats.mean_angles(facing);

        let mut prev = current;
        for pos in leg_positions(current, target, step) {
            for (d, p) in dev.iter_mut().zip(procs.iter()) {
                *d = ar1_step(*d, p, rng);
            }
            out.push(TrajectorySample {
                previous: prev,
                position: pos,
                speed: cfg.speed,
                facing_deg: facing,
                angles: RotationAngles::new(
                    mean.alpha + dev[0],
                    mean.beta + dev[1],
                    mean.gamma + dev[2],
                ),
                leg,
            });
            prev = pos;
        }
        current = target;
    }
    Ok(out)
}
