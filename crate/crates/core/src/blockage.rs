//! Human blockers modelled as vertical rectangular prisms.

use nalgebra::DMatrix;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::geometry::{DevicePose, Room, Vec2, Vec3};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BlockerKind {
    SelfBody,
    NonUser,
}

/// A prism standing on the floor. Its footprint spans `width` along the facing direction and
/// `length` across it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Blocker {
    pub center: Vec2,
    pub facing_deg: f64,
    pub length: f64,
    pub width: f64,
    pub height: f64,
    pub kind: BlockerKind,
}

impl Blocker {
    fn to_local(&self, p: &Vec3) -> Vec3 {
        let (s, c) = self.facing_deg.to_radians().sin_cos();
        let dx = p.x - self.center.x;
        let dy = p.y - self.center.y;
        Vec3::new(c * dx + s * dy, -s * dx + c * dy, p.z)
    }

    fn half_extents(&self) -> ([f64; 3], [f64; 3]) {
        (
            [-self.width / 2.0, -self.length / 2.0, 0.0],
            [self.width / 2.0, self.length / 2.0, self.height],
        )
    }

    /// Closed point-in-prism test.
    pub fn contains(&self, p: &Vec3) -> bool {
        let q = self.to_local(p);
        let (lo, hi) = self.half_extents();
        (0..3).all(|k| q[k] >= lo[k] && q[k] <= hi[k])
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BlockageConfig {
    /// Non-user blockers per square metre of floor.
    pub kappa_b: f64,
    /// Distance between the device and the user's body centre.
    pub d_p: f64,
    pub length: f64,
    pub width: f64,
    pub height: f64,
}

impl Default for BlockageConfig {
    fn default() -> Self {
        Self {
            kappa_b: 0.0,
            d_p: 0.3,
            length: 0.7,
            width: 0.2,
            height: 1.75,
        }
    }
}

impl BlockageConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.kappa_b >= 0.0 && self.kappa_b.is_finite()) {
            return Err(Error::invalid("kappa_b must be >= 0"));
        }
        if !(self.d_p > 0.0) {
            return Err(Error::invalid("d_p must be > 0"));
        }
        if !(self.length > 0.0 && self.width > 0.0 && self.height > 0.0) {
            return Err(Error::invalid("blocker dimensions must be > 0"));
        }
        Ok(())
    }

    pub fn non_user_count(&self, room: &Room) -> usize {
        (self.kappa_b * room.floor_area()).round() as usize
    }

    fn blocker(&self, center: Vec2, facing_deg: f64, kind: BlockerKind) -> Blocker {
        Blocker {
            center,
            facing_deg,
            length: self.length,
            width: self.width,
            height: self.height,
            kind,
        }
    }

    /// The user's own body, `d_p` behind the device and facing it.
    pub fn self_blocker(&self, pose: &DevicePose) -> Blocker {
        let (s, c) = pose.facing_deg.to_radians().sin_cos();
        let center = Vec2::new(pose.position.x - self.d_p * c, pose.position.y - self.d_p * s);
        self.blocker(center, pose.facing_deg, BlockerKind::SelfBody)
    }
}

/// The self-blocker followed by `round(kappa_b * area)` uniformly placed non-user blockers.
pub fn place_blockers<R: Rng + ?Sized>(
    cfg: &BlockageConfig,
    room: &Room,
    pose: &DevicePose,
    rng: &mut R,
) -> Vec<Blocker> {
    let n = cfg.non_user_count(room);
    let mut out = Vec::with_capacity(n + 1);
    out.push(cfg.self_blocker(pose));
    for _ in 0..n {
        let center = Vec2::new(
            rng.random::<f64>() * room.width,
            rng.random::<f64>() * room.depth,
        );
        let facing = rng.random::<f64>() * 360.0;
        out.push(cfg.blocker(center, facing, BlockerKind::NonUser));
    }
    out
}

/// Whether the open segment from `a` to `b` meets the closed prism.
pub fn segment_blocked(a: &Vec3, b: &Vec3, blocker: &Blocker) -> bool {
    let p = blocker.to_local(a);
    let d = blocker.to_local(b) - p;
    let (lo, hi) = blocker.half_extents();
    let mut t_min = f64::NEG_INFINITY;
    let mut t_max = f64::INFINITY;
    for k in 0..3 {
        if d[k] == 0.0 {
            if p[k] < lo[k] || p[k] > hi[k] {
                return false;
            }
        } else {
            let t1 = (lo[k] - p[k]) / d[k];
            let t2 = (hi[k] - p[k]) / d[k];
            t_min = t_min.max(t1.min(t2));
            t_max = t_max.min(t1.max(t2));
        }
    }
    t_min <= t_max && t_max > 0.0 && t_min < 1.0
}

/// `mask[(i, j)]` is true when any blocker occludes the link from transmitter `j` to receiver `i`.
pub fn blockage_mask(tx: &[Vec3], rx: &[Vec3], blockers: &[Blocker]) -> DMatrix<bool> {
    DMatrix::from_fn(rx.len(), tx.len(), |i, j| {
        blockers.iter().any(|b| segment_blocked(&tx[j], &rx[i], b))
    })
}
