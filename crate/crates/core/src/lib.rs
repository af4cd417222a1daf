//! Link-level simulation of indoor bidirectional optical spatial modulation.
//!
//! The crate is organised bottom-up:
//!
//! - [`geometry`]: coordinate frames, rotations, room/AP lattice and device element layouts.
//! - [`orientation`]: random device orientation (static draws and AR(1) trajectories) and
//!   the orientation-based random waypoint mobility model.
//! - [`blockage`]: rectangular-prism blockers and per-link occlusion tests.
//! - [`channel`]: Lambertian LOS gains, the radiosity-based diffuse (NLOS) solver and
//!   channel-matrix assembly for downlink and uplink.
//! - [`sm`]: spatial-modulation constellations, ML detection, union-bound and Monte-Carlo BER,
//!   and the spatial-multiplexing benchmark.
//! - [`adaptive`]: required-SNR search, adaptive AP selection and uplink LED selection.
//! - [`uplink`]: achievable-rate lower bounds, energy efficiency and a Monte-Carlo
//!   mutual-information estimator.
//! - [`scenario`] and [`harness`]: configuration files and seeded experiment orchestration.

pub mod adaptive;
pub mod blockage;
pub mod channel;
pub mod error;
pub mod geometry;
pub mod harness;
pub mod math;
pub mod orientation;
pub mod scenario;
pub mod sm;
pub mod uplink;

pub use error::{Error, Result};
