//! Scenario files and the prepared simulator they describe.
//!
//! A scenario is a TOML document. Every key is optional and falls back to the defaults below;
//! unknown keys are rejected.

use nalgebra::DMatrix;
use rand::Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::adaptive::SelectionTargets;
use crate::blockage::{place_blockers, BlockageConfig, Blocker};
use crate::channel::{
    build_environment_mesh, channel_matrix, ChannelMatrix, NlosModel, Optics, RadiositySolver,
};
use crate::geometry::{
    ap_positions, element_world_pose, DeviceLayout, DevicePose, DeviceVariant, ElementPose,
    ElementRole, Room, RotationAngles, Vec2, Vec3,
};
use crate::math::is_power_of_two;
use crate::orientation::{sample_static_orientation, OrientationStats};
use crate::uplink::L1Exponent;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    /// APs transmit, device photodiodes receive.
    #[default]
    Downlink,
    /// Device LEDs transmit, AP photodiodes receive.
    Uplink,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activity {
    #[default]
    Sitting,
    Walking,
}

impl Activity {
    pub fn name(&self) -> &'static str {
        match self {
            Activity::Sitting => "sitting",
            Activity::Walking => "walking",
        }
    }

    pub fn default_height(&self) -> f64 {
        match self {
            Activity::Sitting => 0.8,
            Activity::Walking => 1.4,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ApConfig {
    pub per_side: usize,
    pub height: f64,
}

impl Default for ApConfig {
    fn default() -> Self {
        Self {
            per_side: 4,
            height: 2.95,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NoiseConfig {
    /// Noise power spectral density `N_0`; the transmit SNR is `E_s / N_0`.
    pub n0: f64,
    /// Symbol rate `R_s` in symbols per second.
    pub symbol_rate: f64,
}

impl Default for NoiseConfig {
    fn default() -> Self {
        Self {
            n0: 1e-16,
            symbol_rate: 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NlosConfig {
    /// Ignored on the uplink, which is LOS only.
    pub enabled: bool,
    /// Target edge length of the surface elements in metres.
    pub resolution: f64,
    pub solver: RadiositySolver,
}

impl Default for NlosConfig {
    fn default() -> Self {
        Self {
            enabled: true,
            resolution: 0.5,
            solver: RadiositySolver::Lu,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SchemeConfig {
    /// Candidate numbers of active transmitters for adaptive SM.
    pub candidates: Vec<usize>,
    /// Streams of the spatial-multiplexing benchmark; 0 disables it.
    pub mimo_streams: usize,
}

impl Default for SchemeConfig {
    fn default() -> Self {
        Self {
            candidates: vec![1, 2, 4, 8, 16],
            mimo_streams: 4,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OrientationConfig {
    /// Built-in dataset (`sitting` or `walking`); defaults to the activity.
    pub dataset: Option<String>,
    /// Explicit statistics, overriding `dataset`.
    pub stats: Option<OrientationStats>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CdfConfig {
    /// Spacing of the interior position grid in metres.
    pub grid_step: f64,
    /// Number of user directions, evenly spaced from 0 degrees.
    pub directions: usize,
    pub orientations_per_point: usize,
}

impl Default for CdfConfig {
    fn default() -> Self {
        Self {
            grid_step: 0.25,
            directions: 24,
            orientations_per_point: 500,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OrwpSection {
    pub waypoints: usize,
    pub speed: f64,
    /// Defaults to the shortest coherence time of the orientation statistics.
    pub sample_time: Option<f64>,
    /// Evaluate only the first samples of the trajectory.
    pub max_samples: Option<usize>,
}

impl Default for OrwpSection {
    fn default() -> Self {
        Self {
            waypoints: 500,
            speed: 1.0,
            sample_time: None,
            max_samples: None,
        }
    }
}

/// One curve family of the BER sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BerVariant {
    pub label: String,
    pub nlos: bool,
    pub kappa_b: f64,
    /// Draw the orientation at random instead of using the mean orientation.
    pub random_orientation: bool,
    /// Channel draws averaged per SNR point when anything is random.
    pub draws: usize,
}

impl Default for BerVariant {
    fn default() -> Self {
        Self {
            label: "nlos".into(),
            nlos: true,
            kappa_b: 0.0,
            random_orientation: false,
            draws: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BerSweepConfig {
    /// `L1`, `L2` or `L3`; ignored when `position` is set.
    pub location: String,
    pub position: Option<[f64; 2]>,
    pub facing_deg: f64,
    /// Received SNR grid in dB.
    pub snr_db: Vec<f64>,
    /// Monte-Carlo symbols per SNR point; 0 keeps only the union bound.
    pub mc_symbols: u64,
    pub n_a: usize,
    pub variants: Vec<BerVariant>,
}

impl Default for BerSweepConfig {
    fn default() -> Self {
        Self {
            location: "L1".into(),
            position: None,
            facing_deg: 90.0,
            snr_db: (0..=30).map(|i| 2.0 * i as f64).collect(),
            mc_symbols: 1_000_000,
            n_a: 4,
            variants: vec![
                BerVariant::default(),
                BerVariant {
                    label: "los".into(),
                    nlos: false,
                    ..BerVariant::default()
                },
            ],
        }
    }
}

impl BerSweepConfig {
    /// Position of the sweep in the floor plane.
    pub fn resolve_position(&self) -> Result<Vec2> {
        if let Some([x, y]) = self.position {
            return Ok(Vec2::new(x, y));
        }
        location_preset(&self.location)
            .ok_or_else(|| Error::Config(format!("unknown location preset {:?}", self.location)))
    }
}

/// Labelled test locations for a 5 m x 5 m room: centre, left of centre, and near the south wall.
pub fn location_preset(name: &str) -> Option<Vec2> {
    match name.to_ascii_uppercase().as_str() {
        "L1" => Some(Vec2::new(2.5, 2.5)),
        "L2" => Some(Vec2::new(1.25, 2.5)),
        "L3" => Some(Vec2::new(2.5, 0.5)),
        _ => None,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct UplinkConfig {
    /// PAM bits per LED; the PAM order is `2^eta_tse`.
    pub eta_tse: u32,
    /// Symbol energy grid in dB (relative to one joule).
    pub e_s_db: Vec<f64>,
    pub reduce_to_rank: bool,
    pub l1_exponent: L1Exponent,
    /// Monte-Carlo mutual-information samples per realisation and energy; 0 skips the estimate.
    pub mi_samples: u64,
}

impl Default for UplinkConfig {
    fn default() -> Self {
        Self {
            eta_tse: 2,
            e_s_db: (0..=20).map(|i| -50.0 + 2.5 * i as f64).collect(),
            reduce_to_rank: true,
            l1_exponent: L1Exponent::Quarter,
            mi_samples: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Scenario {
    pub seed: u64,
    pub direction: Direction,
    pub activity: Activity,
    pub device: DeviceVariant,
    /// Height of the device reference point; defaults to 0.8 m sitting and 1.4 m walking.
    pub device_height: Option<f64>,
    pub room: Room,
    pub aps: ApConfig,
    pub optics: Optics,
    pub blockage: BlockageConfig,
    pub noise: NoiseConfig,
    pub nlos: NlosConfig,
    pub targets: SelectionTargets,
    pub schemes: SchemeConfig,
    pub orientation: OrientationConfig,
    pub cdf: CdfConfig,
    pub orwp: OrwpSection,
    pub ber_sweep: BerSweepConfig,
    pub uplink: UplinkConfig,
}

impl Default for Scenario {
    fn default() -> Self {
        Self {
            seed: 1,
            direction: Direction::Downlink,
            activity: Activity::Sitting,
            device: DeviceVariant::Mdr,
            device_height: None,
            room: Room::default(),
            aps: ApConfig::default(),
            optics: Optics::default(),
            blockage: BlockageConfig::default(),
            noise: NoiseConfig::default(),
            nlos: NlosConfig::default(),
            targets: SelectionTargets::default(),
            schemes: SchemeConfig::default(),
            orientation: OrientationConfig::default(),
            cdf: CdfConfig::default(),
            orwp: OrwpSection::default(),
            ber_sweep: BerSweepConfig::default(),
            uplink: UplinkConfig::default(),
        }
    }
}

fn config_err(e: Error) -> Error {
    match e {
        Error::InvalidParameter(m) => Error::Config(m),
        other => other,
    }
}

impl Scenario {
    pub fn from_toml(text: &str) -> Result<Self> {
        let s: Scenario = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        s.validate()?;
        Ok(s)
    }

    pub fn load(path: impl AsRef<std::path::Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("scenario serialises to TOML")
    }

    /// SHA-256 of the canonical TOML serialisation, hex encoded.
    pub fn hash(&self) -> String {
        hex::encode(Sha256::digest(self.to_toml().as_bytes()))
    }

    pub fn device_height(&self) -> f64 {
        self.device_height
            .unwrap_or_else(|| self.activity.default_height())
    }

    /// Orientation statistics in effect.
    pub fn orientation_stats(&self) -> Result<OrientationStats> {
        if let Some(s) = self.orientation.stats {
            return Ok(s);
        }
        let name = self
            .orientation
            .dataset
            .as_deref()
            .unwrap_or(self.activity.name());
        OrientationStats::builtin(name)
            .ok_or_else(|| Error::Config(format!("unknown orientation dataset {name:?}")))
    }

    /// Role of the device elements: photodiodes on the downlink, LEDs on the uplink.
    pub fn element_role(&self) -> ElementRole {
        match self.direction {
            Direction::Downlink => ElementRole::Photodiode,
            Direction::Uplink => ElementRole::Led,
        }
    }

    pub fn n_aps(&self) -> usize {
        self.aps.per_side * self.aps.per_side
    }

    /// Reject configurations that cannot be simulated. Every failure is a configuration error.
    pub fn validate(&self) -> Result<()> {
        self.room.validate().map_err(config_err)?;
        self.blockage.validate().map_err(config_err)?;
        self.targets.validate().map_err(config_err)?;
        self.optics.source().map_err(config_err)?;
        self.orientation_stats()?.validate().map_err(config_err)?;
        let fail = |m: String| Err(Error::Config(m));
        if self.aps.per_side == 0 {
            return fail("aps.per_side must be >= 1".into());
        }
        if !(self.aps.height > 0.0 && self.aps.height <= self.room.height) {
            return fail("aps.height must lie inside the room".into());
        }
        let h = self.device_height();
        if !(h > 0.0 && h < self.aps.height) {
            return fail(format!("device height {h} must lie between the floor and the APs"));
        }
        if !(self.noise.n0 > 0.0 && self.noise.symbol_rate > 0.0) {
            return fail("noise.n0 and noise.symbol_rate must be > 0".into());
        }
        if !(self.nlos.resolution > 0.0) {
            return fail("nlos.resolution must be > 0".into());
        }
        if self.schemes.candidates.is_empty() {
            return fail("schemes.candidates must not be empty".into());
        }
        for &n in &self.schemes.candidates {
            if !is_power_of_two(n) || n > self.n_aps() {
                return fail(format!(
                    "candidate {n} must be a power of two no larger than the {} APs",
                    self.n_aps()
                ));
            }
        }
        if self.schemes.mimo_streams > self.n_aps() {
            return fail("schemes.mimo_streams exceeds the number of APs".into());
        }
        if !(self.cdf.grid_step > 0.0) || self.cdf.directions == 0 || self.cdf.orientations_per_point == 0 {
            return fail("cdf needs a positive grid step, directions and orientation draws".into());
        }
        if self.orwp.waypoints == 0 || !(self.orwp.speed > 0.0) {
            return fail("orwp needs at least one waypoint and a positive speed".into());
        }
        let b = &self.ber_sweep;
        b.resolve_position()?;
        if b.snr_db.is_empty() || b.variants.is_empty() {
            return fail("ber_sweep needs an SNR grid and at least one variant".into());
        }
        if !is_power_of_two(b.n_a) || b.n_a > self.n_aps() {
            return fail(format!("ber_sweep.n_a = {} is not an admissible AP count", b.n_a));
        }
        if crate::adaptive::pam_order_for(self.targets.spectral_efficiency, b.n_a).is_none() {
            return fail(format!(
                "ber_sweep.n_a = {} leaves fewer than one PAM bit at {} bits per symbol",
                b.n_a, self.targets.spectral_efficiency
            ));
        }
        for v in &b.variants {
            if v.draws == 0 || !(v.kappa_b >= 0.0) {
                return fail(format!("variant {:?} needs draws >= 1 and kappa_b >= 0", v.label));
            }
        }
        let u = &self.uplink;
        if u.eta_tse == 0 || u.eta_tse > 8 || u.e_s_db.is_empty() {
            return fail("uplink needs 1 <= eta_tse <= 8 and a non-empty energy grid".into());
        }
        if u.mi_samples != 0 && u.mi_samples < 1000 {
            return fail("uplink.mi_samples must be 0 or at least 1000".into());
        }
        Ok(())
    }
}

/// Scenario with its geometry and diffuse-channel model prepared, shared read-only between
/// realisations.
#[derive(Debug)]
pub struct Simulator {
    scenario: Scenario,
    stats: OrientationStats,
    aps: Vec<ElementPose>,
    layout: DeviceLayout,
    nlos: Option<NlosModel>,
}

impl Simulator {
    /// Validate the scenario and prepare it. The radiosity system is assembled only for the
    /// downlink with NLOS enabled.
    pub fn new(scenario: &Scenario) -> Result<Self> {
        scenario.validate()?;
        let layout = ap_positions(&scenario.room, scenario.aps.per_side, scenario.aps.height)?;
        let aps = layout
            .positions
            .iter()
            .zip(&layout.normals)
            .map(|(p, n)| ElementPose {
                position: *p,
                normal: *n,
            })
            .collect();
        let nlos = if scenario.direction == Direction::Downlink && scenario.nlos.enabled {
            let mesh = build_environment_mesh(&scenario.room, scenario.nlos.resolution)?;
            Some(NlosModel::new(mesh, scenario.nlos.solver)?)
        } else {
            None
        };
        Ok(Self {
            scenario: scenario.clone(),
            stats: scenario.orientation_stats()?,
            aps,
            layout: DeviceLayout::new(scenario.device, scenario.element_role()),
            nlos,
        })
    }

    pub fn scenario(&self) -> &Scenario {
        &self.scenario
    }

    pub fn stats(&self) -> &OrientationStats {
        &self.stats
    }

    pub fn has_nlos(&self) -> bool {
        self.nlos.is_some()
    }

    pub fn nlos_model(&self) -> Option<&NlosModel> {
        self.nlos.as_ref()
    }

    /// Ceiling access points, facing down.
    pub fn ap_poses(&self) -> &[ElementPose] {
        &self.aps
    }

    /// World poses of the device elements.
    pub fn device_elements(&self, pose: &DevicePose) -> Vec<ElementPose> {
        element_world_pose(pose, &self.layout)
    }

    /// Pose at the configured device height.
    pub fn pose(&self, xy: Vec2, facing_deg: f64, angles: RotationAngles) -> DevicePose {
        DevicePose {
            position: Vec3::new(xy.x, xy.y, self.scenario.device_height()),
            facing_deg,
            angles,
        }
    }

    /// Pose with the mean orientation of the configured statistics.
    pub fn mean_pose(&self, xy: Vec2, facing_deg: f64) -> DevicePose {
        self.pose(xy, facing_deg, self.stats.mean_angles(facing_deg))
    }

    /// Pose with an independent random orientation.
    pub fn random_pose<R: Rng + ?Sized>(&self, xy: Vec2, facing_deg: f64, rng: &mut R) -> DevicePose {
        let angles = sample_static_orientation(&self.stats, facing_deg, rng);
        self.pose(xy, facing_deg, angles)
    }

    /// Self-blocker plus random non-user blockers at the given density.
    pub fn blockers<R: Rng + ?Sized>(&self, pose: &DevicePose, kappa_b: f64, rng: &mut R) -> Vec<Blocker> {
        let cfg = BlockageConfig {
            kappa_b,
            ..self.scenario.blockage
        };
        place_blockers(&cfg, &self.scenario.room, pose, rng)
    }

    /// Channel for one device pose, including the diffuse part when the scenario has one.
    pub fn channel(&self, pose: &DevicePose, blockers: &[Blocker]) -> Result<ChannelMatrix> {
        self.channel_with(pose, blockers, true)
    }

    /// Channel with the diffuse part optionally left out. Rows are receivers and columns
    /// transmitters: device photodiodes x APs on the downlink, AP photodiodes x device LEDs on
    /// the uplink.
    pub fn channel_with(&self, pose: &DevicePose, blockers: &[Blocker], nlos: bool) -> Result<ChannelMatrix> {
        let device = element_world_pose(pose, &self.layout);
        let model = if nlos { self.nlos.as_ref() } else { None };
        match self.scenario.direction {
            Direction::Downlink => channel_matrix(&self.aps, &device, &self.scenario.optics, model, blockers),
            Direction::Uplink => channel_matrix(&device, &self.aps, &self.scenario.optics, None, blockers),
        }
    }

    /// Convenience wrapper returning only the total gain matrix.
    pub fn gains(&self, pose: &DevicePose, blockers: &[Blocker]) -> Result<DMatrix<f64>> {
        Ok(self.channel(pose, blockers)?.h)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_document_gives_defaults() {
        let s = Scenario::from_toml("").unwrap();
        assert_eq!(s, Scenario::default());
        assert_eq!(s.device_height(), 0.8);
        assert_eq!(s.n_aps(), 16);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let e = Scenario::from_toml("bogus = 1").unwrap_err();
        assert!(e.is_config());
        let e = Scenario::from_toml("[room]\nwidht = 4.0").unwrap_err();
        assert!(e.is_config());
    }

    #[test]
    fn partial_sections_keep_other_defaults() {
        let s = Scenario::from_toml("activity = \"walking\"\n[room]\nwidth = 6.0").unwrap();
        assert_eq!(s.room.width, 6.0);
        assert_eq!(s.room.depth, 5.0);
        assert_eq!(s.device_height(), 1.4);
        assert_eq!(s.orientation_stats().unwrap(), OrientationStats::walking());
    }

    #[test]
    fn round_trip_and_hash() {
        let mut s = Scenario::default();
        s.seed = 42;
        s.device = DeviceVariant::Sr;
        let back = Scenario::from_toml(&s.to_toml()).unwrap();
        assert_eq!(back, s);
        assert_eq!(back.hash(), s.hash());
        assert_eq!(s.hash().len(), 64);
        assert_ne!(Scenario::default().hash(), s.hash());
    }

    #[test]
    fn inconsistent_values_are_config_errors() {
        for doc in [
            "[schemes]\ncandidates = [3]",
            "[schemes]\ncandidates = [32]",
            "device_height = 3.5",
            "[ber_sweep]\nlocation = \"L9\"",
            "[ber_sweep]\nn_a = 32",
            "[targets]\ntarget_ber = 0.7",
            "[orientation]\ndataset = \"running\"",
            "[uplink]\nmi_samples = 10",
        ] {
            let e = Scenario::from_toml(doc).unwrap_err();
            assert!(e.is_config(), "{doc}: {e}");
        }
    }

    #[test]
    fn channel_shapes_follow_direction() {
        let mut s = Scenario::default();
        s.nlos.enabled = false;
        let sim = Simulator::new(&s).unwrap();
        let pose = sim.mean_pose(Vec2::new(2.5, 2.5), 90.0);
        let h = sim.gains(&pose, &[]).unwrap();
        assert_eq!((h.nrows(), h.ncols()), (4, 16));

        s.direction = Direction::Uplink;
        s.nlos.enabled = true;
        let sim = Simulator::new(&s).unwrap();
        assert!(!sim.has_nlos());
        let ch = sim.channel(&pose, &[]).unwrap();
        assert_eq!((ch.n_rx(), ch.n_tx()), (16, 4));
        assert_eq!(ch.nlos.sum(), 0.0);
    }

    #[test]
    fn uplink_is_transpose_of_downlink_los() {
        // first-order emitters and a 90 degree field of view make LOS gains reciprocal
        let mut s = Scenario::default();
        s.nlos.enabled = false;
        s.optics.fov_deg = 90.0;
        let down = Simulator::new(&s).unwrap();
        s.direction = Direction::Uplink;
        let up = Simulator::new(&s).unwrap();
        let pose = down.mean_pose(Vec2::new(1.7, 3.1), 30.0);
        let hd = down.gains(&pose, &[]).unwrap();
        let hu = up.gains(&pose, &[]).unwrap();
        assert!((hd.transpose() - hu).abs().max() < 1e-18);
    }

    #[test]
    fn presets() {
        assert_eq!(location_preset("l1"), Some(Vec2::new(2.5, 2.5)));
        assert_eq!(location_preset("L3"), Some(Vec2::new(2.5, 0.5)));
        assert_eq!(location_preset("L4"), None);
    }
}
