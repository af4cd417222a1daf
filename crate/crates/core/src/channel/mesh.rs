use crate::geometry::{Room, Vec3};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Face {
    Floor,
    Ceiling,
    WallWest,
    WallEast,
    WallSouth,
    WallNorth,
}

/// One diffusely reflecting patch of the room boundary.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SurfaceElement {
    pub center: Vec3,
    /// Unit normal pointing into the room.
    pub normal: Vec3,
    pub area: f64,
    pub reflectivity: f64,
    pub face: Face,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SurfaceMesh {
    pub elements: Vec<SurfaceElement>,
}

impl SurfaceMesh {
    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    pub fn total_area(&self) -> f64 {
        self.elements.iter().map(|e| e.area).sum()
    }
}

fn cells(extent: f64, resolution: f64) -> usize {
    ((extent / resolution).round() as usize).max(1)
}

/// Tile the six room faces with a uniform grid of roughly `resolution`-sized cells.
///
/// Each face dimension is split into `max(1, round(extent / resolution))` equal cells, so the
/// faces are tiled exactly even when `resolution` does not divide them.
pub fn build_environment_mesh(room: &Room, resolution: f64) -> Result<SurfaceMesh> {
    room.validate()?;
    if !(resolution > 0.0 && resolution.is_finite()) {
        return Err(Error::invalid(format!("mesh resolution must be > 0, got {resolution}")));
    }
    let (w, d, h) = (room.width, room.depth, room.height);
    let mut elements = Vec::new();
    let mut push_face = |face: Face,
                         origin: Vec3,
                         u: Vec3,
                         v: Vec3,
                         u_len: f64,
                         v_len: f64,
                         normal: Vec3,
                         rho: f64| {
        let nu = cells(u_len, resolution);
        let nv = cells(v_len, resolution);
        let (du, dv) = (u_len / nu as f64, v_len / nv as f64);
        for iv in 0..nv {
            for iu in 0..nu {
                let center = origin + u * ((iu as f64 + 0.5) * du) + v * ((iv as f64 + 0.5) * dv);
                elements.push(SurfaceElement {
                    center,
                    normal,
                    area: du * dv,
                    reflectivity: rho,
                    face,
                });
            }
        }
    };
    let (ex, ey, ez) = (Vec3::x(), Vec3::y(), Vec3::z());
    let o = Vec3::zeros();
    push_face(Face::Floor, o, ex, ey, w, d, ez, room.rho_floor);
    push_face(Face::Ceiling, Vec3::new(0.0, 0.0, h), ex, ey, w, d, -ez, room.rho_ceiling);
    push_face(Face::WallWest, o, ey, ez, d, h, ex, room.rho_wall);
    push_face(Face::WallEast, Vec3::new(w, 0.0, 0.0), ey, ez, d, h, -ex, room.rho_wall);
    push_face(Face::WallSouth, o, ex, ez, w, h, ey, room.rho_wall);
    push_face(Face::WallNorth, Vec3::new(0.0, d, 0.0), ex, ez, w, h, -ey, room.rho_wall);
    Ok(SurfaceMesh { elements })
}
