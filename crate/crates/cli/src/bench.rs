//! Benchtop sweeps, training and flight batches built from a [`RunConfig`].
//! The command-line front end and the acceptance suite share these.

use std::fmt::Write as _;
use std::io::Write;
use std::path::Path;

use rayon::prelude::*;

use darkdepth::calibration::{build_calibration_set, build_psf_bank, CalibrationSet};
use darkdepth::datagen::{load_pair, make_pair, render_benchtop, BackgroundSource, BenchtopSpec, DatasetManifest};
use darkdepth::estimation::{
    build_samples, samples_from_image, DepthEstimate, DepthEstimator, DogEstimator, FeatureExtractor, PatchEstimator,
    PatchModel, Sample, TemplateMatcher, TrainReport, train_patch_model,
};
use darkdepth::imagery::{l1_error, BinaryMask, GrayImage};
use darkdepth::optics::{ApertureMask, DotPattern, OpticalConfig};
use darkdepth::seed::derive_seed;
use darkdepth::simworld::{run_batch, sample_forest, traversability, BatchResult, SensorModel, TraversabilitySpec, WorldScene};

use crate::config::{check_estimator, ApertureKind, RunConfig};
use crate::{CliError, CliResult};

/// Seed streams derived from the run seed.
const STREAM_BENCHTOP: u64 = 1;
const STREAM_DATA: u64 = 2;
const STREAM_SAMPLES: u64 = 3;
const STREAM_FOREST: u64 = 4;
const STREAM_AMBIENT: u64 = 5;
const STREAM_TRAVERSE: u64 = 6;

/// Optics, aperture and the matching calibration set.
#[derive(Debug, Clone)]
pub struct Rig {
    pub kind: ApertureKind,
    pub optics: OpticalConfig,
    pub mask: ApertureMask,
    pub calib: CalibrationSet,
}

pub fn pattern(cfg: &RunConfig) -> CliResult<DotPattern> {
    Ok(DotPattern::generate(cfg.pattern.seed, &cfg.pattern.spec, cfg.optics.width, cfg.optics.height)?)
}

/// Builds the rig of an aperture focused at `focus` meters.
pub fn rig(cfg: &RunConfig, kind: ApertureKind, focus: f64, pattern: &DotPattern) -> CliResult<Rig> {
    let (optics, mask) = cfg.aperture_setup(kind)?;
    let optics = optics.with_focus(focus);
    optics.validate().map_err(|e| CliError::Config(e.to_string()))?;
    let calib = build_calibration_set(&optics, &mask, pattern, &cfg.depth_planes()?)?;
    Ok(Rig {
        kind,
        optics,
        mask,
        calib,
    })
}

/// Rig of the configured aperture at the configured focus.
pub fn default_rig(cfg: &RunConfig) -> CliResult<Rig> {
    let p = pattern(cfg)?;
    rig(cfg, cfg.aperture.kind, cfg.optics.focus_distance_m, &p)
}

/// Estimator chosen by name for one benchtop cell. DoG is told the cell's
/// two depths, as it only separates near from far.
enum Pick<'a> {
    Dog(DogEstimator),
    Shared(&'a dyn DepthEstimator),
}

impl DepthEstimator for Pick<'_> {
    fn name(&self) -> &str {
        match self {
            Pick::Dog(d) => d.name(),
            Pick::Shared(e) => e.name(),
        }
    }

    fn estimate(&self, image: &GrayImage) -> darkdepth::Result<DepthEstimate> {
        match self {
            Pick::Dog(d) => d.estimate(image),
            Pick::Shared(e) => e.estimate(image),
        }
    }
}

/// Estimators available on one rig.
pub struct EstimatorSet {
    pub tm: TemplateMatcher,
    pub patch: Option<PatchEstimator>,
    pub dog_threshold: f64,
    pub dot_radius_px: f64,
    pub optics: OpticalConfig,
}

impl EstimatorSet {
    pub fn new(cfg: &RunConfig, rig: &Rig, model: Option<PatchModel>) -> CliResult<Self> {
        let patch = match model {
            Some(m) => {
                let bank = build_psf_bank(&rig.optics, &rig.mask, &rig.calib.planes)?;
                Some(PatchEstimator::new(m, &bank)?)
            }
            None => None,
        };
        Ok(Self {
            tm: TemplateMatcher::new(&rig.calib, cfg.grid)?,
            patch,
            dog_threshold: cfg.dog.threshold,
            dot_radius_px: rig.calib.pattern.dot_radius_px(),
            optics: rig.optics,
        })
    }

    fn pick(&self, name: &str, z_near: f64, z_far: f64) -> CliResult<Pick<'_>> {
        check_estimator(name)?;
        Ok(match name {
            "dog" => Pick::Dog(DogEstimator {
                cfg: self.optics,
                z_target: z_near,
                dot_radius_px: self.dot_radius_px,
                threshold: self.dog_threshold,
                foreground_depth: z_near,
                background_depth: z_far,
            }),
            "tm" => Pick::Shared(&self.tm),
            _ => match &self.patch {
                Some(p) => Pick::Shared(p),
                None => return Err(CliError::Config("the patch estimator needs a trained model".into())),
            },
        })
    }
}

/// Mean l1 error over seeds of one benchtop cell.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CellError {
    /// Meters.
    pub absolute: f64,
    /// Mean of |error| / true depth, as a ratio.
    pub relative: f64,
}

/// Renders `seeds` benchtop frames of `template` at `z_background` and
/// averages the full-frame l1 error of the named estimator.
pub fn benchtop_cell(
    cfg: &RunConfig,
    rig: &Rig,
    est: &EstimatorSet,
    name: &str,
    z_background: f64,
    projector_offset: (f64, f64),
) -> CliResult<CellError> {
    let template = &cfg.benchmark.scene;
    let planes = cfg.depth_planes()?;
    let estimator = est.pick(name, template.z_foreground, z_background)?;
    let n = cfg.benchmark.seeds;
    let (mut abs, mut rel) = (0.0, 0.0);
    for s in 0..n {
        let spec = BenchtopSpec {
            z_background,
            projector_offset,
            seed: derive_seed(derive_seed(cfg.seed, STREAM_BENCHTOP), s),
            ..template.clone()
        };
        spec.validate(&planes).map_err(|e| CliError::Config(e.to_string()))?;
        let scene = render_benchtop(&spec, &rig.optics, &rig.mask, &rig.calib.pattern, &planes)?;
        let d = estimator.estimate(&scene.image)?;
        let (w, h) = scene.depth.dims();
        let e = l1_error(&d.depth, &scene.depth, &BinaryMask::filled(w, h, true))?;
        abs += e.absolute;
        rel += e.percent;
    }
    Ok(CellError {
        absolute: abs / n as f64,
        relative: rel / n as f64,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchRow {
    pub aperture: ApertureKind,
    pub f_number: f64,
    pub focus_m: f64,
    pub z_foreground_m: f64,
    pub z_background_m: f64,
    pub estimator: String,
    pub seeds: u64,
    pub error: CellError,
}

pub const BENCH_HEADER: &str = "aperture,f_number,focus_m,z_foreground_m,z_background_m,estimator,seeds,l1_m,l1_pct";

pub fn bench_csv(rows: &[BenchRow]) -> String {
    let mut s = format!("{BENCH_HEADER}\n");
    for r in rows {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{},{:.6},{:.4}",
            r.aperture.name(),
            r.f_number,
            r.focus_m,
            r.z_foreground_m,
            r.z_background_m,
            r.estimator,
            r.seeds,
            r.error.absolute,
            100.0 * r.error.relative
        );
    }
    s
}

fn nonempty(name: &str, len: usize) -> CliResult<()> {
    if len == 0 {
        Err(CliError::Config(format!("benchmark grid is empty: no {name} values")))
    } else {
        Ok(())
    }
}

/// One row per aperture, focus and background depth.
pub fn benchmark_apertures(cfg: &RunConfig) -> CliResult<Vec<BenchRow>> {
    let b = &cfg.benchmark;
    nonempty("aperture", b.apertures.len())?;
    nonempty("focus", b.focus.len())?;
    nonempty("z_background", b.z_background.len())?;
    if b.estimator == "patch" {
        return Err(CliError::Config(
            "the aperture benchmark runs dog or tm; a patch model is tied to one aperture".into(),
        ));
    }
    check_estimator(&b.estimator)?;
    let p = pattern(cfg)?;
    let mut rows = Vec::new();
    for kind in &b.apertures {
        for focus in &b.focus {
            let r = rig(cfg, *kind, *focus, &p)?;
            let est = EstimatorSet::new(cfg, &r, None)?;
            for zb in &b.z_background {
                rows.push(BenchRow {
                    aperture: *kind,
                    f_number: r.optics.f_number,
                    focus_m: *focus,
                    z_foreground_m: b.scene.z_foreground,
                    z_background_m: *zb,
                    estimator: b.estimator.clone(),
                    seeds: b.seeds,
                    error: benchtop_cell(cfg, &r, &est, &b.estimator, *zb, (0.0, 0.0))?,
                });
            }
        }
    }
    Ok(rows)
}

/// One row per estimator and background depth on the configured rig.
pub fn benchmark_estimators(cfg: &RunConfig, names: &[String], model: Option<PatchModel>) -> CliResult<Vec<BenchRow>> {
    let b = &cfg.benchmark;
    nonempty("estimator", names.len())?;
    nonempty("z_background", b.z_background.len())?;
    for n in names {
        check_estimator(n)?;
    }
    let r = default_rig(cfg)?;
    let est = EstimatorSet::new(cfg, &r, model)?;
    let mut rows = Vec::new();
    for name in names {
        for zb in &b.z_background {
            rows.push(BenchRow {
                aperture: r.kind,
                f_number: r.optics.f_number,
                focus_m: r.optics.focus_distance_m,
                z_foreground_m: b.scene.z_foreground,
                z_background_m: *zb,
                estimator: name.clone(),
                seeds: b.seeds,
                error: benchtop_cell(cfg, &r, &est, name, *zb, (0.0, 0.0))?,
            });
        }
    }
    Ok(rows)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExtrinsicRow {
    pub offset_cm: f64,
    /// Mean over the background sweep.
    pub error: CellError,
    /// Relative change of the mean l1 against the zero-offset baseline.
    pub change: f64,
}

pub const EXTRINSIC_HEADER: &str = "offset_cm,axis,l1_m,l1_pct,change_vs_zero";

pub fn extrinsic_csv(axis: &str, rows: &[ExtrinsicRow]) -> String {
    let mut s = format!("{EXTRINSIC_HEADER}\n");
    for r in rows {
        let _ = writeln!(
            s,
            "{},{axis},{:.6},{:.4},{:.4}",
            r.offset_cm,
            r.error.absolute,
            100.0 * r.error.relative,
            r.change
        );
    }
    s
}

/// TM error against projector offset along the configured camera axis.
pub fn extrinsic_sweep(cfg: &RunConfig) -> CliResult<Vec<ExtrinsicRow>> {
    let b = &cfg.benchmark;
    nonempty("offset", cfg.extrinsic.offsets_cm.len())?;
    nonempty("z_background", b.z_background.len())?;
    let r = default_rig(cfg)?;
    let est = EstimatorSet::new(cfg, &r, None)?;
    let mean_at = |offset_cm: f64| -> CliResult<CellError> {
        let m = offset_cm / 100.0;
        let offset = if cfg.extrinsic.axis == "y" { (0.0, m) } else { (m, 0.0) };
        let (mut abs, mut rel) = (0.0, 0.0);
        for zb in &b.z_background {
            let e = benchtop_cell(cfg, &r, &est, "tm", *zb, offset)?;
            abs += e.absolute;
            rel += e.relative;
        }
        let n = b.z_background.len() as f64;
        Ok(CellError {
            absolute: abs / n,
            relative: rel / n,
        })
    };
    let base = mean_at(0.0)?;
    cfg.extrinsic
        .offsets_cm
        .iter()
        .map(|o| {
            let error = if *o == 0.0 { base } else { mean_at(*o)? };
            Ok(ExtrinsicRow {
                offset_cm: *o,
                error,
                change: (error.relative - base.relative) / base.relative.max(1e-12),
            })
        })
        .collect()
}

/// Feature samples for training: from a saved dataset when `data` is given,
/// otherwise synthesized on the fly from the configured rig.
pub fn training_samples(cfg: &RunConfig, rig: &Rig, data: Option<&Path>) -> CliResult<Vec<Sample>> {
    let bank = build_psf_bank(&rig.optics, &rig.mask, &rig.calib.planes)?;
    let fx = FeatureExtractor::new(&bank, cfg.train.features)?;
    let per_pair = cfg.train.optimizer.samples_per_pair;
    let sample_seed = derive_seed(cfg.seed, STREAM_SAMPLES);
    let pattern = &rig.calib.pattern;
    match data {
        None => {
            let source = match &cfg.datagen.backgrounds {
                Some(d) => BackgroundSource::from_dir(d)?,
                None => BackgroundSource::Procedural,
            };
            let master = derive_seed(cfg.seed, STREAM_DATA);
            let limits = cfg.datagen.limits;
            Ok(build_samples(
                cfg.datagen.count,
                |i| make_pair(i, master, &rig.calib, &source, &limits),
                pattern,
                &fx,
                per_pair,
                sample_seed,
            )?)
        }
        Some(dir) => {
            let manifest = DatasetManifest::load(dir)?;
            if manifest.partial {
                return Err(CliError::Runtime(anyhow::anyhow!("dataset {} is marked partial", dir.display())));
            }
            let planes_id = rig.calib.planes.id();
            if let Some(e) = manifest.entries.iter().find(|e| e.planes_id != planes_id) {
                return Err(CliError::Config(format!(
                    "dataset pair {} was made for planes {}, the config has {planes_id}",
                    e.index, e.planes_id
                )));
            }
            let parts = manifest
                .entries
                .par_iter()
                .map(|e| {
                    let (img, depth) = load_pair(dir, e)?;
                    Ok(samples_from_image(&img, &depth, e.index, pattern, &fx, per_pair, sample_seed))
                })
                .collect::<darkdepth::Result<Vec<_>>>()?;
            Ok(parts.into_iter().flatten().collect())
        }
    }
}

/// Trains a patch model on the configured rig. The loss trace is streamed
/// to `trace` as CSV while training runs.
pub fn train_model(cfg: &RunConfig, data: Option<&Path>, trace: Option<&mut dyn Write>) -> CliResult<TrainReport> {
    let rig = default_rig(cfg)?;
    let samples = training_samples(cfg, &rig, data)?;
    let model = PatchModel::new(rig.calib.planes.clone(), cfg.train.features)?;
    Ok(train_patch_model(model, &samples, &cfg.train.optimizer, trace)?)
}

/// Scenes of a flight batch with their traversability scores.
pub fn forest_scenes(cfg: &RunConfig) -> CliResult<Vec<(WorldScene, f64)>> {
    let f = &cfg.forest;
    let bounds = f.bounds().map_err(|e| CliError::Config(e.to_string()))?;
    let spec = TraversabilitySpec {
        seed: derive_seed(cfg.seed, STREAM_TRAVERSE),
        ..TraversabilitySpec::default()
    };
    (0..f.trials as u64)
        .into_par_iter()
        .map(|i| {
            let scene = sample_forest(derive_seed(derive_seed(cfg.seed, STREAM_FOREST), i), bounds, f.density, f.mix)?;
            let t = traversability(&scene, &spec)?;
            Ok((scene, t))
        })
        .collect::<darkdepth::Result<Vec<_>>>()
        .map_err(CliError::from)
}

/// Simulated sensor of the configured rig.
pub fn sensor_model(cfg: &RunConfig, rig: &Rig) -> CliResult<SensorModel> {
    Ok(SensorModel::new(
        rig.optics,
        &rig.mask,
        rig.calib.pattern.clone(),
        rig.calib.planes.clone(),
        cfg.sensor,
        derive_seed(cfg.seed, STREAM_AMBIENT),
    )?)
}

/// Flies one TM-guided trial per scene.
pub fn fly(cfg: &RunConfig, scenes: &[WorldScene]) -> CliResult<BatchResult> {
    let rig = default_rig(cfg)?;
    let sensor = sensor_model(cfg, &rig)?;
    let tm = TemplateMatcher::new(&rig.calib, cfg.grid)?;
    Ok(run_batch(scenes, &sensor, &tm, &cfg.nav, &cfg.sim)?)
}

