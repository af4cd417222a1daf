use std::sync::OnceLock;

use nalgebra::{DMatrix, DVector, Dyn, LU};
use serde::{Deserialize, Serialize};

use super::mesh::SurfaceMesh;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RadiositySolver {
    /// Dense LU factorisation, computed once and reused for every right-hand side.
    #[default]
    Lu,
    /// Fixed-point iteration `x <- t + E G x`, i.e. the Neumann series summed to convergence.
    Iterative,
}

/// Element-to-element transfer matrix `E` with `E[(i, j)]` the gain from element `j` (a first
/// order Lambertian emitter) to element `i` (a receiver of its own area with a 90 degree field of
/// view).
pub fn transfer_matrix(mesh: &SurfaceMesh) -> DMatrix<f64> {
    let n = mesh.len();
    let el = &mesh.elements;
    let mut e = DMatrix::zeros(n, n);
    for j in 0..n {
        for i in (j + 1)..n {
            let d = el[i].center - el[j].center;
            let d2 = d.norm_squared();
            let dist = d2.sqrt();
            let cos_out = el[j].normal.dot(&d) / dist;
            let cos_in = -el[i].normal.dot(&d) / dist;
            if cos_out <= 0.0 || cos_in <= 0.0 {
                continue;
            }
            let g = cos_out * cos_in / (std::f64::consts::PI * d2);
            e[(i, j)] = g * el[i].area;
            e[(j, i)] = g * el[j].area;
        }
    }
    e
}

/// `E` with column `j` scaled by the reflectivity of element `j`.
fn reflect_columns(mut e: DMatrix<f64>, mesh: &SurfaceMesh) -> DMatrix<f64> {
    for (j, el) in mesh.elements.iter().enumerate() {
        e.column_mut(j).scale_mut(el.reflectivity);
    }
    e
}

/// Spectral radius of a nonnegative square matrix.
///
/// The maximum column sum bounds the radius from above and is returned directly when it is
/// already below one; otherwise power iteration refines the estimate.
pub fn spectral_radius(m: &DMatrix<f64>) -> f64 {
    let n = m.ncols();
    if n == 0 {
        return 0.0;
    }
    let col_bound = (0..n).map(|j| m.column(j).sum()).fold(0.0, f64::max);
    if col_bound < 1.0 {
        return col_bound;
    }
    // iterate on M + I: same Perron vector, radius shifted by one, and no periodic oscillation
    let mut x = DVector::from_element(n, 1.0 / (n as f64).sqrt());
    let mut estimate = col_bound;
    for _ in 0..10_000 {
        let y = m * &x + &x;
        let norm = y.norm();
        let next = norm - 1.0;
        x = y / norm;
        if (next - estimate).abs() <= 1e-13 * (1.0 + next) {
            return next.max(0.0);
        }
        estimate = next;
    }
    estimate.max(0.0)
}

struct LuPair {
    /// `I - E G`; each factorisation is computed on first use.
    system: DMatrix<f64>,
    forward: OnceLock<LU<f64, Dyn, Dyn>>,
    adjoint: OnceLock<LU<f64, Dyn, Dyn>>,
}

enum Backend {
    Lu(LuPair),
    Iterative(DMatrix<f64>),
}

/// Solver for `(I - E G) x = t` on a fixed mesh.
pub struct Radiosity {
    mesh: SurfaceMesh,
    reflectivity: DVector<f64>,
    spectral_radius: f64,
    backend: Backend,
}

impl std::fmt::Debug for Radiosity {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Radiosity")
            .field("elements", &self.mesh.len())
            .field("spectral_radius", &self.spectral_radius)
            .finish()
    }
}

const ITERATIVE_TOL: f64 = 1e-13;
const ITERATIVE_MAX: usize = 100_000;

impl Radiosity {
    pub fn new(mesh: SurfaceMesh, solver: RadiositySolver) -> Result<Self> {
        let eg = reflect_columns(transfer_matrix(&mesh), &mesh);
        let rho = spectral_radius(&eg);
        if rho >= 1.0 {
            return Err(Error::NonConvergentRadiosity(rho));
        }
        let reflectivity = DVector::from_iterator(
            mesh.len(),
            mesh.elements.iter().map(|e| e.reflectivity),
        );
        let backend = match solver {
            RadiositySolver::Lu => {
                let n = mesh.len();
                Backend::Lu(LuPair {
                    system: DMatrix::identity(n, n) - eg,
                    forward: OnceLock::new(),
                    adjoint: OnceLock::new(),
                })
            }
            RadiositySolver::Iterative => Backend::Iterative(eg),
        };
        Ok(Self {
            mesh,
            reflectivity,
            spectral_radius: rho,
            backend,
        })
    }

    pub fn mesh(&self) -> &SurfaceMesh {
        &self.mesh
    }

    /// Spectral radius of `E G`, or the maximum column sum when that upper bound is already
    /// below one.
    pub fn spectral_radius(&self) -> f64 {
        self.spectral_radius
    }

    pub fn reflectivity(&self) -> &DVector<f64> {
        &self.reflectivity
    }

    /// Solve `(I - E G) X = T` column by column.
    pub fn solve(&self, t: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        self.solve_with(t, false)
    }

    /// Solve `(I - E G)^T W = B`.
    pub fn solve_adjoint(&self, b: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        self.solve_with(b, true)
    }

    fn solve_with(&self, rhs: &DMatrix<f64>, transposed: bool) -> Result<DMatrix<f64>> {
        match &self.backend {
            Backend::Lu(pair) => {
                let lu = if transposed {
                    pair.adjoint.get_or_init(|| pair.system.transpose().lu())
                } else {
                    pair.forward.get_or_init(|| pair.system.clone().lu())
                };
                lu.solve(rhs)
                    .ok_or_else(|| Error::Numerical("singular radiosity system".into()))
            }
            Backend::Iterative(eg) => {
                let mut x = rhs.clone();
                let scale = rhs.norm().max(f64::MIN_POSITIVE);
                for _ in 0..ITERATIVE_MAX {
                    let next = if transposed {
                        rhs + eg.tr_mul(&x)
                    } else {
                        rhs + eg * &x
                    };
                    let step = (&next - &x).norm();
                    x = next;
                    if step <= ITERATIVE_TOL * scale {
                        return Ok(x);
                    }
                }
                Err(Error::Numerical("radiosity iteration did not converge".into()))
            }
        }
    }

    /// Diffuse gains `R^T G (I - E G)^{-1} T`, where column `j` of `t` holds the gains from
    /// transmitter `j` onto every element and column `p` of `r` the gains from every element to
    /// receiver `p`. Returns an `n_rx x n_tx` matrix.
    ///
    /// Whichever side has fewer columns is pushed through the solver: `(R^T G) A^{-1} T` equals
    /// `(A^{-T} G R)^T T`.
    pub fn gains(&self, t: &DMatrix<f64>, r: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        let mut gr = r.clone();
        for (mut row, rho) in gr.row_iter_mut().zip(self.reflectivity.iter()) {
            row *= *rho;
        }
        if gr.ncols() < t.ncols() {
            let w = self.solve_adjoint(&gr)?;
            Ok(w.tr_mul(t))
        } else {
            let x = self.solve(t)?;
            Ok(gr.tr_mul(&x))
        }
    }
}
