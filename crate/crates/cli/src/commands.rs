//! One function per subcommand. Each writes its artifacts into an output
//! directory, then `run.meta`, and returns a one-line summary.

use std::fmt::Write as _;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use darkdepth::calibration::{load_calibration, save_calibration};
use darkdepth::datagen::{generate_dataset, BackgroundSource};
use darkdepth::estimation::{DepthEstimator, PatchModel, TemplateMatcher};
use darkdepth::imagery::{default_depth_scale, read_pgm, write_depth_pgm, write_pgm, GrayImage};

use crate::bench::{self, EstimatorSet};
use crate::config::{check_estimator, RunConfig};
use crate::meta::{files_under, write_meta};
use crate::{CliError, CliResult};

fn prepare(out: &Path) -> CliResult<()> {
    fs::create_dir_all(out).map_err(|e| CliError::Runtime(anyhow::anyhow!("cannot create {}: {e}", out.display())))
}

fn write_text(path: PathBuf, text: &str) -> CliResult<PathBuf> {
    fs::write(&path, text).map_err(|e| CliError::Runtime(anyhow::anyhow!("cannot write {}: {e}", path.display())))?;
    Ok(path)
}

fn finish(out: &Path, command: &str, cfg: &RunConfig, artifacts: &[PathBuf]) -> CliResult<()> {
    write_meta(out, command, cfg, artifacts)?;
    Ok(())
}

pub fn calibrate(cfg: &RunConfig, out: &Path) -> CliResult<String> {
    prepare(out)?;
    let rig = bench::default_rig(cfg)?;
    save_calibration(&rig.calib, out)?;
    let mut artifacts = files_under(out)?;
    artifacts.push(write_text(out.join("mask.txt"), &rig.mask.to_text())?);
    artifacts.sort();
    finish(out, "calibrate", cfg, &artifacts)?;
    Ok(format!(
        "calibration set of {} planes ({} aperture) written to {}",
        rig.calib.planes.len(),
        rig.kind.name(),
        out.display()
    ))
}

pub fn generate(cfg: &RunConfig, out: &Path) -> CliResult<String> {
    prepare(out)?;
    let rig = bench::default_rig(cfg)?;
    let source = match &cfg.datagen.backgrounds {
        Some(d) => BackgroundSource::from_dir(d).map_err(|e| CliError::Config(e.to_string()))?,
        None => BackgroundSource::Procedural,
    };
    let m = generate_dataset(cfg.datagen.count, cfg.seed, &rig.calib, &source, &cfg.datagen.limits, out)?;
    finish(out, "generate", cfg, &files_under(out)?)?;
    Ok(format!("{} training pairs written to {}", m.entries.len(), out.display()))
}

pub const MODEL_FILE: &str = "model.bin";
pub const TRACE_FILE: &str = "loss_trace.csv";

pub fn train(cfg: &RunConfig, out: &Path, data: Option<&Path>) -> CliResult<String> {
    prepare(out)?;
    let trace_path = out.join(TRACE_FILE);
    let file = fs::File::create(&trace_path)?;
    let mut trace = BufWriter::new(file);
    let report = bench::train_model(cfg, data, Some(&mut trace))?;
    trace.flush()?;
    drop(trace);
    let model_path = out.join(MODEL_FILE);
    report.model.save(&model_path)?;
    let mut epochs = String::from("epoch,loss,lr\n");
    for (e, l) in report.epoch_losses.iter().enumerate() {
        let _ = writeln!(epochs, "{e},{l},{}", cfg.train.optimizer.lr_at(e));
    }
    let epochs_path = write_text(out.join("epochs.csv"), &epochs)?;
    finish(out, "train", cfg, &[trace_path, model_path, epochs_path])?;
    Ok(format!(
        "trained {} steps: loss {:.4} -> {:.4}",
        report.trace.len(),
        report.initial_loss,
        report.final_loss
    ))
}

/// Options of the `estimate` command.
#[derive(Debug, Clone, Default)]
pub struct EstimateArgs {
    pub image: PathBuf,
    pub estimator: String,
    /// Saved calibration set for TM; built from the config when absent.
    pub calibration: Option<PathBuf>,
    /// Patch model file; falls back to `benchmark.model`.
    pub model: Option<PathBuf>,
}

/// Per-pixel confidence `1 / (1 + variance)` from a log-variance.
pub fn confidence(log_variance: f64) -> f64 {
    1.0 / (1.0 + log_variance.exp())
}

pub fn estimate(cfg: &RunConfig, out: &Path, args: &EstimateArgs) -> CliResult<String> {
    check_estimator(&args.estimator)?;
    let image = read_pgm(&args.image)?;
    let (w, h) = image.dims();
    if (w, h) != (cfg.optics.width, cfg.optics.height) {
        return Err(CliError::Config(format!(
            "image is {w}x{h} but the optics are {}x{}",
            cfg.optics.width, cfg.optics.height
        )));
    }
    let rig = bench::default_rig(cfg)?;
    let est = match args.estimator.as_str() {
        "tm" => match &args.calibration {
            Some(dir) => {
                let calib = load_calibration(dir)?;
                Box::new(TemplateMatcher::new(&calib, cfg.grid)?) as Box<dyn DepthEstimator>
            }
            None => Box::new(TemplateMatcher::new(&rig.calib, cfg.grid)?),
        },
        "patch" => {
            let path = args
                .model
                .as_ref()
                .or(cfg.benchmark.model.as_ref())
                .ok_or_else(|| CliError::Config("the patch estimator needs --model or benchmark.model".into()))?;
            let model = PatchModel::load(path)?;
            let set = EstimatorSet::new(cfg, &rig, Some(model))?;
            Box::new(set.patch.expect("model given"))
        }
        _ => {
            let z_near = cfg.benchmark.scene.z_foreground;
            Box::new(darkdepth::estimation::DogEstimator {
                cfg: rig.optics,
                z_target: z_near,
                dot_radius_px: rig.calib.pattern.dot_radius_px(),
                threshold: cfg.dog.threshold,
                foreground_depth: z_near,
                background_depth: rig.calib.planes.last(),
            })
        }
    };
    let result = est.estimate(&image)?;
    prepare(out)?;
    let depth_path = out.join("depth.pgm");
    write_depth_pgm(&result.depth, &depth_path, default_depth_scale(&result.depth))?;
    let conf = GrayImage::from_fn(w, h, |x, y| confidence(result.log_variance_at(x, y)));
    let conf_path = out.join("confidence.pgm");
    write_pgm(&conf, &conf_path)?;
    let mut artifacts = vec![depth_path.clone(), conf_path];
    let mut scale = depth_path.into_os_string();
    scale.push(".scale");
    artifacts.push(PathBuf::from(scale));
    finish(out, "estimate", cfg, &artifacts)?;
    let mean = result.depth.data().iter().sum::<f64>() / (w * h) as f64;
    Ok(format!("{} depth written to {} (mean {mean:.3} m)", est.name(), out.display()))
}

pub fn benchmark_apertures(cfg: &RunConfig, out: &Path) -> CliResult<String> {
    let rows = bench::benchmark_apertures(cfg)?;
    prepare(out)?;
    let p = write_text(out.join("apertures.csv"), &bench::bench_csv(&rows))?;
    finish(out, "benchmark apertures", cfg, std::slice::from_ref(&p))?;
    Ok(format!("{} rows written to {}", rows.len(), p.display()))
}

pub fn benchmark_estimators(cfg: &RunConfig, out: &Path) -> CliResult<String> {
    let names = &cfg.benchmark.estimators;
    for n in names {
        check_estimator(n)?;
    }
    prepare(out)?;
    let mut artifacts = Vec::new();
    let model = if names.iter().any(|n| n == "patch") {
        match &cfg.benchmark.model {
            Some(p) => Some(PatchModel::load(p)?),
            None => {
                let trace_path = out.join(TRACE_FILE);
                let mut trace = BufWriter::new(fs::File::create(&trace_path)?);
                let report = bench::train_model(cfg, None, Some(&mut trace))?;
                trace.flush()?;
                let model_path = out.join(MODEL_FILE);
                report.model.save(&model_path)?;
                artifacts.extend([trace_path, model_path]);
                Some(report.model)
            }
        }
    } else {
        None
    };
    let rows = bench::benchmark_estimators(cfg, names, model)?;
    let p = write_text(out.join("estimators.csv"), &bench::bench_csv(&rows))?;
    artifacts.push(p.clone());
    finish(out, "benchmark estimators", cfg, &artifacts)?;
    Ok(format!("{} rows written to {}", rows.len(), p.display()))
}

pub fn extrinsic_sweep(cfg: &RunConfig, out: &Path) -> CliResult<String> {
    let rows = bench::extrinsic_sweep(cfg)?;
    prepare(out)?;
    let p = write_text(out.join("extrinsic.csv"), &bench::extrinsic_csv(&cfg.extrinsic.axis, &rows))?;
    finish(out, "extrinsic-sweep", cfg, std::slice::from_ref(&p))?;
    Ok(format!("{} rows written to {}", rows.len(), p.display()))
}

/// Writes the batch scenes, and unless `dry_run`, flies them and writes
/// per-trial logs plus `summary.csv`.
pub fn fly(cfg: &RunConfig, out: &Path, dry_run: bool) -> CliResult<String> {
    let scenes = bench::forest_scenes(cfg)?;
    let scene_dir = out.join("scenes");
    fs::create_dir_all(&scene_dir)?;
    let mut artifacts = Vec::new();
    let mut index = String::from("trial,obstacles,traversability,file\n");
    for (i, (s, t)) in scenes.iter().enumerate() {
        let name = format!("scene_{i:03}.txt");
        let p = scene_dir.join(&name);
        s.save(&p)?;
        artifacts.push(p);
        let _ = writeln!(index, "{i},{},{t:.4},scenes/{name}", s.obstacles.len());
    }
    artifacts.push(write_text(out.join("scenes.csv"), &index)?);
    let mean_t = scenes.iter().map(|(_, t)| t).sum::<f64>() / scenes.len() as f64;
    if dry_run {
        finish(out, "fly", cfg, &artifacts)?;
        return Ok(format!(
            "{} scenes written (density {}, mean traversability {mean_t:.2}); no trials flown",
            scenes.len(),
            cfg.forest.density
        ));
    }
    let worlds: Vec<_> = scenes.into_iter().map(|(s, _)| s).collect();
    let batch = bench::fly(cfg, &worlds)?;
    let trial_dir = out.join("trials");
    fs::create_dir_all(&trial_dir)?;
    for (i, r) in batch.per_trial.iter().enumerate() {
        artifacts.push(write_text(trial_dir.join(format!("trial_{i:03}_path.csv")), &r.path_csv())?);
        artifacts.push(write_text(trial_dir.join(format!("trial_{i:03}_commands.csv")), &r.commands_csv())?);
    }
    artifacts.push(write_text(out.join("summary.csv"), &batch.summary_csv())?);
    finish(out, "fly", cfg, &artifacts)?;
    let wins = batch.per_trial.iter().filter(|r| r.success).count();
    Ok(format!(
        "success rate {:.3} ({wins}/{}) at density {} (mean traversability {mean_t:.2})",
        batch.success_rate,
        worlds.len(),
        cfg.forest.density
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn confidence_is_a_unit_interval_map() {
        assert_eq!(confidence(0.0), 0.5);
        assert!(confidence(-30.0) > 0.999);
        assert!(confidence(30.0) < 1e-9);
    }
}
