//! Optical DC channel gains: Lambertian line of sight plus diffuse reflections.

mod mesh;
mod radiosity;

pub use mesh::{build_environment_mesh, Face, SurfaceElement, SurfaceMesh};
pub use radiosity::{spectral_radius, transfer_matrix, Radiosity, RadiositySolver};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::blockage::{segment_blocked, Blocker};
use crate::geometry::{ElementPose, Vec3};
use crate::{Error, Result};

/// Lambertian order `k = -ln 2 / ln cos(half_power)`, snapped to an integer when within 1e-9.
pub fn lambertian_order(half_power_deg: f64) -> Result<f64> {
    let c = half_power_deg.to_radians().cos();
    if !(half_power_deg > 0.0 && half_power_deg < 90.0) {
        return Err(Error::invalid(format!(
            "half-power semiangle must lie in (0, 90) degrees, got {half_power_deg}"
        )));
    }
    let k = -std::f64::consts::LN_2 / c.ln();
    Ok(if (k - k.round()).abs() < 1e-9 { k.round() } else { k })
}

/// Emitter radiation pattern together with the receiving aperture of one link type.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LambertianSource {
    half_power_deg: f64,
    order: f64,
    area: f64,
    fov_deg: f64,
    cos_fov: f64,
}

impl LambertianSource {
    pub fn new(half_power_deg: f64, area: f64, fov_deg: f64) -> Result<Self> {
        if !(area > 0.0) {
            return Err(Error::invalid("receiver area must be > 0"));
        }
        if !(fov_deg > 0.0 && fov_deg <= 90.0) {
            return Err(Error::invalid(format!("FOV must lie in (0, 90] degrees, got {fov_deg}")));
        }
        Ok(Self {
            half_power_deg,
            order: lambertian_order(half_power_deg)?,
            area,
            fov_deg,
            cos_fov: fov_deg.to_radians().cos(),
        })
    }

    /// A first-order emitter received by an aperture of `area` with a 90 degree field of view,
    /// as used for reflecting surface elements.
    pub fn diffuse(area: f64) -> Self {
        Self::with_order(1.0, area)
    }

    fn with_order(order: f64, area: f64) -> Self {
        Self {
            half_power_deg: 60.0,
            order,
            area,
            fov_deg: 90.0,
            cos_fov: 0.0,
        }
    }

    pub fn half_power_deg(&self) -> f64 {
        self.half_power_deg
    }

    pub fn order(&self) -> f64 {
        self.order
    }

    pub fn area(&self) -> f64 {
        self.area
    }

    pub fn fov_deg(&self) -> f64 {
        self.fov_deg
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkGeometry {
    pub distance: f64,
    /// Angle between the emitter normal and the link, radians.
    pub radiance: f64,
    /// Angle between the receiver normal and the reversed link, radians.
    pub incidence: f64,
}

pub fn link_geometry(tx_pos: &Vec3, tx_normal: &Vec3, rx_pos: &Vec3, rx_normal: &Vec3) -> LinkGeometry {
    let d = rx_pos - tx_pos;
    let distance = d.norm();
    let cos_out = (tx_normal.dot(&d) / distance).clamp(-1.0, 1.0);
    let cos_in = (-rx_normal.dot(&d) / distance).clamp(-1.0, 1.0);
    LinkGeometry {
        distance,
        radiance: cos_out.acos(),
        incidence: cos_in.acos(),
    }
}

/// Line-of-sight DC gain `(k+1)/(2 pi d^2) A cos^k(phi) cos(psi)` inside the receiver FOV,
/// zero outside it or when either element faces away.
pub fn los_gain(tx_pos: &Vec3, tx_normal: &Vec3, rx_pos: &Vec3, rx_normal: &Vec3, src: &LambertianSource) -> f64 {
    let d = rx_pos - tx_pos;
    let d2 = d.norm_squared();
    let dist = d2.sqrt();
    let cos_out = tx_normal.dot(&d) / dist;
    let cos_in = -rx_normal.dot(&d) / dist;
    if cos_out <= 0.0 || cos_in <= 0.0 || cos_in < src.cos_fov {
        return 0.0;
    }
    let pattern = if src.order == 1.0 {
        cos_out
    } else {
        cos_out.powf(src.order)
    };
    (src.order + 1.0) / (2.0 * std::f64::consts::PI * d2) * src.area * pattern * cos_in
}

/// Optical front-end parameters shared by the downlink and the uplink.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Optics {
    pub half_power_deg: f64,
    pub fov_deg: f64,
    /// Photodiode area in square metres.
    pub pd_area: f64,
    /// Photodiode responsivity in A/W; scales every gain.
    pub responsivity: f64,
}

impl Default for Optics {
    fn default() -> Self {
        Self {
            half_power_deg: 60.0,
            fov_deg: 60.0,
            pd_area: 0.25e-4,
            responsivity: 1.0,
        }
    }
}

impl Optics {
    pub fn source(&self) -> Result<LambertianSource> {
        if !(self.responsivity > 0.0) {
            return Err(Error::invalid("responsivity must be > 0"));
        }
        LambertianSource::new(self.half_power_deg, self.pd_area, self.fov_deg)
    }
}

/// `n_rx x n_tx` matrix of DC gains split into its direct and diffuse parts.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelMatrix {
    pub h: DMatrix<f64>,
    pub los: DMatrix<f64>,
    pub nlos: DMatrix<f64>,
}

impl ChannelMatrix {
    pub fn from_parts(los: DMatrix<f64>, nlos: DMatrix<f64>) -> Self {
        Self {
            h: &los + &nlos,
            los,
            nlos,
        }
    }

    pub fn n_rx(&self) -> usize {
        self.h.nrows()
    }

    pub fn n_tx(&self) -> usize {
        self.h.ncols()
    }
}

fn blocked(a: &Vec3, b: &Vec3, blockers: &[Blocker]) -> bool {
    blockers.iter().any(|blk| segment_blocked(a, b, blk))
}

/// LOS gains from every transmitter to every receiver; links occluded by a blocker are zero.
pub fn los_matrix(
    tx: &[ElementPose],
    rx: &[ElementPose],
    src: &LambertianSource,
    blockers: &[Blocker],
) -> DMatrix<f64> {
    DMatrix::from_fn(rx.len(), tx.len(), |i, j| {
        let g = los_gain(&tx[j].position, &tx[j].normal, &rx[i].position, &rx[i].normal, src);
        if g > 0.0 && blocked(&tx[j].position, &rx[i].position, blockers) {
            0.0
        } else {
            g
        }
    })
}

/// Diffuse channel model over a fixed room mesh.
#[derive(Debug)]
pub struct NlosModel {
    radiosity: Radiosity,
}

impl NlosModel {
    pub fn new(mesh: SurfaceMesh, solver: RadiositySolver) -> Result<Self> {
        Ok(Self {
            radiosity: Radiosity::new(mesh, solver)?,
        })
    }

    pub fn radiosity(&self) -> &Radiosity {
        &self.radiosity
    }

    pub fn mesh(&self) -> &SurfaceMesh {
        self.radiosity.mesh()
    }

    /// Gains from each transmitter onto every surface element (`n_elements x n_tx`).
    pub fn incident(&self, tx: &[ElementPose], src: &LambertianSource, blockers: &[Blocker]) -> DMatrix<f64> {
        let el = &self.mesh().elements;
        DMatrix::from_fn(el.len(), tx.len(), |i, j| {
            let recv = LambertianSource::with_order(src.order, el[i].area);
            let g = los_gain(&tx[j].position, &tx[j].normal, &el[i].center, &el[i].normal, &recv);
            if g > 0.0 && blocked(&tx[j].position, &el[i].center, blockers) {
                0.0
            } else {
                g
            }
        })
    }

    /// Gains from every surface element to each receiver (`n_elements x n_rx`).
    pub fn outgoing(&self, rx: &[ElementPose], src: &LambertianSource, blockers: &[Blocker]) -> DMatrix<f64> {
        let el = &self.mesh().elements;
        let emit = LambertianSource {
            order: 1.0,
            half_power_deg: 60.0,
            ..*src
        };
        DMatrix::from_fn(el.len(), rx.len(), |i, p| {
            let g = los_gain(&el[i].center, &el[i].normal, &rx[p].position, &rx[p].normal, &emit);
            if g > 0.0 && blocked(&el[i].center, &rx[p].position, blockers) {
                0.0
            } else {
                g
            }
        })
    }

    /// Diffuse gains with infinitely many reflections (`n_rx x n_tx`).
    pub fn gains(
        &self,
        tx: &[ElementPose],
        rx: &[ElementPose],
        src: &LambertianSource,
        blockers: &[Blocker],
    ) -> Result<DMatrix<f64>> {
        let t = self.incident(tx, src, blockers);
        let r = self.outgoing(rx, src, blockers);
        self.radiosity.gains(&t, &r)
    }
}

/// Diffuse gain of a single link.
pub fn nlos_gain(
    tx: &ElementPose,
    rx: &ElementPose,
    model: &NlosModel,
    src: &LambertianSource,
    blockers: &[Blocker],
) -> Result<f64> {
    Ok(model.gains(std::slice::from_ref(tx), std::slice::from_ref(rx), src, blockers)?[(0, 0)])
}

/// Full channel matrix for the given transmitters and receivers. The diffuse part is computed
/// only when `nlos` is supplied; every gain is scaled by the photodiode responsivity.
pub fn channel_matrix(
    tx: &[ElementPose],
    rx: &[ElementPose],
    optics: &Optics,
    nlos: Option<&NlosModel>,
    blockers: &[Blocker],
) -> Result<ChannelMatrix> {
    let src = optics.source()?;
    let mut los = los_matrix(tx, rx, &src, blockers);
    let mut diffuse = match nlos {
        Some(model) => model.gains(tx, rx, &src, blockers)?,
        None => DMatrix::zeros(rx.len(), tx.len()),
    };
    if optics.responsivity != 1.0 {
        los *= optics.responsivity;
        diffuse *= optics.responsivity;
    }
    Ok(ChannelMatrix::from_parts(los, diffuse))
}
