//! Coordinate frames, rotations and placement of APs and device elements.
//!
//! World frame: `x` points East, `y` North, `z` up, origin at a floor corner of the room.
//!
//! Device frame (identity orientation): the device lies flat with its screen facing `+z`,
//! its top edge pointing `+y` (North) and its right side `+x`. The device reference point
//! is the centre of the top end-face of the body, so the body occupies
//! `x in [-w/2, w/2]`, `y in [-l, 0]`, `z in [-t/2, t/2]`.

use nalgebra::{Matrix3, Vector2, Vector3};
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

pub type Vec3 = Vector3<f64>;
pub type Vec2 = Vector2<f64>;

/// Device body length along its long axis (m).
pub const BODY_LENGTH: f64 = 0.14;
/// Device body width (m).
pub const BODY_WIDTH: f64 = 0.07;
/// Device body thickness (m).
pub const BODY_THICKNESS: f64 = 0.01;

/// Yaw/pitch/roll in degrees. Yaw is about `z`, pitch about `x`, roll about `y`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct RotationAngles {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
}

impl RotationAngles {
    pub fn new(alpha: f64, beta: f64, gamma: f64) -> Self {
        Self { alpha, beta, gamma }
    }
}

/// `R = R_alpha * R_beta * R_gamma` for angles given in degrees.
pub fn rotation_matrix(angles: RotationAngles) -> Matrix3<f64> {
    let (sa, ca) = angles.alpha.to_radians().sin_cos();
    let (sb, cb) = angles.beta.to_radians().sin_cos();
    let (sg, cg) = angles.gamma.to_radians().sin_cos();
    #[rustfmt::skip]
    let r_alpha = Matrix3::new(
        ca, -sa, 0.0,
        sa,  ca, 0.0,
        0.0, 0.0, 1.0,
    );
    #[rustfmt::skip]
    let r_beta = Matrix3::new(
        1.0, 0.0, 0.0,
        0.0,  cb, -sb,
        0.0,  sb,  cb,
    );
    #[rustfmt::skip]
    let r_gamma = Matrix3::new(
         cg, 0.0,  sg,
        0.0, 1.0, 0.0,
        -sg, 0.0,  cg,
    );
    r_alpha * r_beta * r_gamma
}

/// Rectangular room with per-surface reflectivities.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Room {
    pub width: f64,
    pub depth: f64,
    pub height: f64,
    pub rho_wall: f64,
    pub rho_floor: f64,
    pub rho_ceiling: f64,
}

impl Default for Room {
    fn default() -> Self {
        Self {
            width: 5.0,
            depth: 5.0,
            height: 3.0,
            rho_wall: 0.6,
            rho_floor: 0.2,
            rho_ceiling: 0.8,
        }
    }
}

impl Room {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("width", self.width), ("depth", self.depth), ("height", self.height)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::invalid(format!("room {name} must be > 0, got {v}")));
            }
        }
        for (name, v) in [
            ("rho_wall", self.rho_wall),
            ("rho_floor", self.rho_floor),
            ("rho_ceiling", self.rho_ceiling),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::invalid(format!("{name} must lie in [0, 1], got {v}")));
            }
        }
        Ok(())
    }

    pub fn contains(&self, p: &Vec3) -> bool {
        (0.0..=self.width).contains(&p.x)
            && (0.0..=self.depth).contains(&p.y)
            && (0.0..=self.height).contains(&p.z)
    }

    pub fn floor_area(&self) -> f64 {
        self.width * self.depth
    }

    pub fn centre(&self) -> Vec2 {
        Vec2::new(self.width / 2.0, self.depth / 2.0)
    }
}

/// Ceiling-mounted access points, all facing straight down.
#[derive(Debug, Clone, PartialEq)]
pub struct ApLayout {
    pub positions: Vec<Vec3>,
    pub normals: Vec<Vec3>,
}

impl ApLayout {
    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }
}

/// Square lattice of `n_per_side^2` APs centred in the footprint, with a margin of half a
/// lattice spacing to each wall.
pub fn ap_positions(room: &Room, n_per_side: usize, height: f64) -> Result<ApLayout> {
    if n_per_side == 0 {
        return Err(Error::invalid("n_per_side must be >= 1"));
    }
    let sx = room.width / n_per_side as f64;
    let sy = room.depth / n_per_side as f64;
    let mut positions = Vec::with_capacity(n_per_side * n_per_side);
    // row-major: index = iy * n + ix
    for iy in 0..n_per_side {
        for ix in 0..n_per_side {
            positions.push(Vec3::new(
                sx / 2.0 + ix as f64 * sx,
                sy / 2.0 + iy as f64 * sy,
                height,
            ));
        }
    }
    let normals = vec![Vec3::new(0.0, 0.0, -1.0); positions.len()];
    Ok(ApLayout { positions, normals })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DeviceVariant {
    /// All elements on the screen face.
    Sr,
    /// One screen element plus elements on the top edge and both sides.
    Mdr,
}

impl DeviceVariant {
    pub fn label(&self) -> &'static str {
        match self {
            DeviceVariant::Sr => "SR",
            DeviceVariant::Mdr => "MDR",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ElementRole {
    /// Photodiode receiving the downlink.
    Photodiode,
    /// Infrared LED transmitting the uplink.
    Led,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DeviceElement {
    pub position: Vec3,
    pub normal: Vec3,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DeviceLayout {
    pub variant: DeviceVariant,
    pub role: ElementRole,
    pub elements: Vec<DeviceElement>,
}

impl DeviceLayout {
    pub fn new(variant: DeviceVariant, role: ElementRole) -> Self {
        let half_t = BODY_THICKNESS / 2.0;
        let half_w = BODY_WIDTH / 2.0;
        let up = Vec3::new(0.0, 0.0, 1.0);
        let elements = match variant {
            DeviceVariant::Sr => (0..4)
                .map(|i| DeviceElement {
                    // centres of four equal slots across the width
                    position: Vec3::new(
                        -half_w + BODY_WIDTH * (2 * i + 1) as f64 / 8.0,
                        -0.01,
                        half_t,
                    ),
                    normal: up,
                })
                .collect(),
            DeviceVariant::Mdr => vec![
                // screen
                DeviceElement {
                    position: Vec3::new(0.0, -0.01, half_t),
                    normal: up,
                },
                // right side
                DeviceElement {
                    position: Vec3::new(half_w, -0.015, 0.0),
                    normal: Vec3::new(1.0, 0.0, 0.0),
                },
                // top edge
                DeviceElement {
                    position: Vec3::new(0.0, 0.0, 0.0),
                    normal: Vec3::new(0.0, 1.0, 0.0),
                },
                // left side
                DeviceElement {
                    position: Vec3::new(-half_w, -0.015, 0.0),
                    normal: Vec3::new(-1.0, 0.0, 0.0),
                },
            ],
        };
        Self {
            variant,
            role,
            elements,
        }
    }

    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }
}

/// Position of the device reference point, the user's facing direction (degrees from East,
/// counter-clockwise) and the device rotation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DevicePose {
    pub position: Vec3,
    pub facing_deg: f64,
    pub angles: RotationAngles,
}

impl DevicePose {
    /// Pose whose rotation is the mean orientation for `facing_deg` (yaw `facing - 90`).
    pub fn facing(position: Vec3, facing_deg: f64, pitch: f64, roll: f64) -> Self {
        Self {
            position,
            facing_deg,
            angles: RotationAngles::new(facing_deg - 90.0, pitch, roll),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ElementPose {
    pub position: Vec3,
    pub normal: Vec3,
}

/// World positions and normals of every element of `layout` for the given pose.
///
/// No clamping is applied; use [`elements_outside`] to find elements that left the room.
pub fn element_world_pose(pose: &DevicePose, layout: &DeviceLayout) -> Vec<ElementPose> {
    let r = rotation_matrix(pose.angles);
    layout
        .elements
        .iter()
        .map(|e| ElementPose {
            position: pose.position + r * e.position,
            normal: (r * e.normal).normalize(),
        })
        .collect()
}

/// Indices of elements whose world position lies outside `room`.
pub fn elements_outside(room: &Room, elements: &[ElementPose]) -> Vec<usize> {
    elements
        .iter()
        .enumerate()
        .filter(|(_, e)| !room.contains(&e.position))
        .map(|(i, _)| i)
        .collect()
}
