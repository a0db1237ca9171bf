//! Run configuration: TOML tables mirroring the library's own config types,
//! every one with defaults and unknown keys rejected.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use darkdepth::calibration::DepthPlanes;
use darkdepth::datagen::{BenchtopSpec, SceneLimits};
use darkdepth::estimation::{FeatureSpec, GridSpec, TrainConfig};
use darkdepth::navigation::NavConfig;
use darkdepth::optics::{ApertureMask, OpticalConfig, PatternSpec};
use darkdepth::simworld::{Aabb, ObstacleMix, SensorSpec, SimConfig, Vec3};

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ApertureKind {
    Coded,
    /// Fully open disk at the configured f-number.
    Open,
    /// Open disk stopped down to f/8.
    Pinhole,
}

impl ApertureKind {
    pub const ALL: [ApertureKind; 3] = [ApertureKind::Coded, ApertureKind::Open, ApertureKind::Pinhole];

    pub fn name(&self) -> &'static str {
        match self {
            ApertureKind::Coded => "coded",
            ApertureKind::Open => "open",
            ApertureKind::Pinhole => "pinhole",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ApertureConfig {
    pub kind: ApertureKind,
    /// Coded mask file replacing the built-in code.
    pub mask_file: Option<PathBuf>,
}

impl Default for ApertureConfig {
    fn default() -> Self {
        Self {
            kind: ApertureKind::Coded,
            mask_file: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PatternConfig {
    pub seed: u64,
    pub spec: PatternSpec,
}

impl Default for PatternConfig {
    fn default() -> Self {
        Self {
            seed: 7,
            spec: PatternSpec::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DatagenConfig {
    pub count: usize,
    /// Directory of PGM reference images; procedural backgrounds otherwise.
    pub backgrounds: Option<PathBuf>,
    pub limits: SceneLimits,
}

/// Synthetic-data ranges matched to the simulated sensor: noise and
/// ambient levels of the dark benchtop rather than the wider library
/// defaults.
pub fn sensor_matched_limits() -> SceneLimits {
    SceneLimits {
        sigma_min: 0.0005,
        sigma_max: 0.002,
        w_ref_max: 0.02,
        ..SceneLimits::default()
    }
}

impl Default for DatagenConfig {
    fn default() -> Self {
        Self {
            count: 2000,
            backgrounds: None,
            limits: sensor_matched_limits(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainingConfig {
    pub optimizer: TrainConfig,
    pub features: FeatureSpec,
}

impl Default for TrainingConfig {
    fn default() -> Self {
        Self {
            optimizer: TrainConfig {
                samples_per_pair: 16,
                ..TrainConfig::default()
            },
            features: FeatureSpec::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DogConfig {
    pub threshold: f64,
}

impl Default for DogConfig {
    fn default() -> Self {
        Self { threshold: 0.02 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BenchmarkConfig {
    /// Focus distances swept by the aperture benchmark.
    pub focus: Vec<f64>,
    pub z_background: Vec<f64>,
    pub seeds: u64,
    pub apertures: Vec<ApertureKind>,
    /// Estimator used by the aperture benchmark.
    pub estimator: String,
    pub estimators: Vec<String>,
    /// Trained patch model; one is trained from the config when absent.
    pub model: Option<PathBuf>,
    /// Scene template; its depths, seed and offset are set per grid cell.
    pub scene: BenchtopSpec,
}

impl Default for BenchmarkConfig {
    fn default() -> Self {
        Self {
            focus: vec![0.5, 0.75, 1.0],
            z_background: vec![1.0, 1.5, 2.0, 2.5],
            seeds: 10,
            apertures: ApertureKind::ALL.to_vec(),
            estimator: "tm".into(),
            estimators: vec!["dog".into(), "tm".into(), "patch".into()],
            model: None,
            scene: BenchtopSpec::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExtrinsicConfig {
    pub offsets_cm: Vec<f64>,
    /// Offset direction in the camera frame: "x" (right) or "y" (down).
    pub axis: String,
}

impl Default for ExtrinsicConfig {
    fn default() -> Self {
        Self {
            offsets_cm: vec![0.0, 1.0, 2.0, 4.0],
            axis: "x".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ForestConfig {
    /// Obstacles per square meter of floor.
    pub density: f64,
    pub mix: ObstacleMix,
    pub trials: usize,
    pub bounds_min: [f64; 3],
    pub bounds_max: [f64; 3],
}

impl Default for ForestConfig {
    fn default() -> Self {
        Self {
            density: 0.2,
            mix: ObstacleMix::Forest,
            trials: 20,
            bounds_min: [0.0, -4.0, -3.0],
            bounds_max: [12.0, 4.0, 0.0],
        }
    }
}

impl ForestConfig {
    pub fn bounds(&self) -> darkdepth::Result<Aabb> {
        let [a, b, c] = self.bounds_min;
        let [d, e, f] = self.bounds_max;
        Aabb::new(Vec3::new(a, b, c), Vec3::new(d, e, f))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub planes: Vec<f64>,
    pub optics: OpticalConfig,
    pub aperture: ApertureConfig,
    pub pattern: PatternConfig,
    pub grid: GridSpec,
    pub dog: DogConfig,
    pub datagen: DatagenConfig,
    pub train: TrainingConfig,
    pub benchmark: BenchmarkConfig,
    pub extrinsic: ExtrinsicConfig,
    pub nav: NavConfig,
    pub sim: SimConfig,
    pub sensor: SensorSpec,
    pub forest: ForestConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            planes: DepthPlanes::canonical().planes().to_vec(),
            optics: OpticalConfig::default(),
            aperture: ApertureConfig::default(),
            pattern: PatternConfig::default(),
            grid: GridSpec::default(),
            dog: DogConfig::default(),
            datagen: DatagenConfig::default(),
            train: TrainingConfig::default(),
            benchmark: BenchmarkConfig::default(),
            extrinsic: ExtrinsicConfig::default(),
            nav: NavConfig::default(),
            sim: SimConfig::default(),
            sensor: SensorSpec::default(),
            forest: ForestConfig::default(),
        }
    }
}

pub const ESTIMATORS: [&str; 3] = ["dog", "tm", "patch"];

pub fn check_estimator(name: &str) -> Result<(), CliError> {
    if ESTIMATORS.contains(&name) {
        Ok(())
    } else {
        Err(CliError::Config(format!("unknown estimator {name:?}; valid names: {}", ESTIMATORS.join(", "))))
    }
}

fn config_err(e: darkdepth::Error) -> CliError {
    CliError::Config(e.to_string())
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text =
            fs::read_to_string(path).map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text).map_err(|e| match e {
            CliError::Config(m) => CliError::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("run config serializes")
    }

    /// Checks every section against the library invariants.
    pub fn validate(&self) -> Result<(), CliError> {
        self.depth_planes()?;
        self.optics.validate().map_err(config_err)?;
        self.pattern.spec.validate().map_err(config_err)?;
        self.datagen.limits.validate().map_err(config_err)?;
        self.train.optimizer.validate().map_err(config_err)?;
        self.train.features.validate().map_err(config_err)?;
        self.nav.validate().map_err(config_err)?;
        self.sim.validate().map_err(config_err)?;
        self.sensor.validate().map_err(config_err)?;
        self.forest.bounds().map_err(config_err)?;
        if self.datagen.count == 0 {
            return Err(CliError::Config("datagen.count must be >= 1".into()));
        }
        let g = self.grid;
        if !g.cell_px.is_power_of_two() || !(g.min_peak >= 0.0) || !(g.band >= 0.0 && g.band < 1.0) || !(g.null_sigmas >= 0.0) {
            return Err(CliError::Config("grid needs a power-of-two cell, min_peak >= 0, band in [0, 1) and null_sigmas >= 0".into()));
        }
        if !(self.dog.threshold.is_finite() && self.dog.threshold > 0.0) {
            return Err(CliError::Config("dog.threshold must be > 0".into()));
        }
        if !(self.forest.density >= 0.0 && self.forest.density.is_finite()) || self.forest.trials == 0 {
            return Err(CliError::Config("forest needs density >= 0 and trials >= 1".into()));
        }
        let b = &self.benchmark;
        check_estimator(&b.estimator)?;
        for e in &b.estimators {
            check_estimator(e)?;
        }
        if b.seeds == 0 {
            return Err(CliError::Config("benchmark.seeds must be >= 1".into()));
        }
        if b.focus.iter().chain(&b.z_background).any(|z| !(z.is_finite() && *z > 0.0)) {
            return Err(CliError::Config("benchmark distances must be > 0".into()));
        }
        if !matches!(self.extrinsic.axis.as_str(), "x" | "y") {
            return Err(CliError::Config(format!("extrinsic.axis must be \"x\" or \"y\", got {:?}", self.extrinsic.axis)));
        }
        if self.extrinsic.offsets_cm.iter().any(|o| !o.is_finite()) {
            return Err(CliError::Config("extrinsic offsets must be finite".into()));
        }
        Ok(())
    }

    pub fn depth_planes(&self) -> Result<DepthPlanes, CliError> {
        DepthPlanes::new(self.planes.clone()).map_err(config_err)
    }

    /// Optics and mask of an aperture; the pinhole stops down to f/8.
    pub fn aperture_setup(&self, kind: ApertureKind) -> Result<(OpticalConfig, ApertureMask), CliError> {
        Ok(match kind {
            ApertureKind::Coded => {
                let mask = match &self.aperture.mask_file {
                    Some(p) => ApertureMask::load(p).map_err(config_err)?,
                    None => ApertureMask::default_coded(),
                };
                (self.optics, mask)
            }
            ApertureKind::Open => (self.optics, open_disk()),
            ApertureKind::Pinhole => (self.optics.with_f_number(OpticalConfig::PINHOLE_F_NUMBER), open_disk()),
        })
    }
}

/// Fully open circular aperture.
pub fn open_disk() -> ApertureMask {
    ApertureMask::disk(31, 6.0).expect("valid disk")
}
