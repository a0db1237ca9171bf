//! Mini-batch training of the patch model with ADAM and a step-decay
//! learning-rate schedule.

use std::io::Write;

use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::adam::Adam;
use super::features::FeatureExtractor;
use super::loss::{huber, huber_grad};
use super::patch_model::PatchModel;
use crate::datagen::TrainingPair;
use crate::error::{Error, Result};
use crate::imagery::{DepthMap, GrayImage};
use crate::optics::DotPattern;
use crate::seed;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub decay_factor: f64,
    pub decay_every: usize,
    pub huber_delta: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub seed: u64,
    /// Dots sampled per training pair (all of them when fewer exist).
    pub samples_per_pair: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-3,
            batch_size: 32,
            epochs: 50,
            decay_factor: 0.5,
            decay_every: 10,
            huber_delta: 0.25,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            seed: 0,
            samples_per_pair: 32,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let pos = |v: f64| v > 0.0 && v.is_finite();
        if self.epochs == 0 {
            return Err(Error::invalid("epochs must be >= 1"));
        }
        if self.batch_size == 0 || self.decay_every == 0 || self.samples_per_pair == 0 {
            return Err(Error::invalid("batch size, decay interval and samples per pair must be >= 1"));
        }
        if !(pos(self.learning_rate) && pos(self.decay_factor) && pos(self.huber_delta) && pos(self.epsilon)) {
            return Err(Error::invalid("learning rate, decay factor, huber delta and epsilon must be positive"));
        }
        if !(pos(self.beta1) && self.beta1 < 1.0 && pos(self.beta2) && self.beta2 < 1.0) {
            return Err(Error::invalid("ADAM betas must lie in (0, 1)"));
        }
        Ok(())
    }

    /// Learning rate in effect during `epoch` (0-based).
    pub fn lr_at(&self, epoch: usize) -> f64 {
        self.learning_rate * self.decay_factor.powi((epoch / self.decay_every) as i32)
    }
}

/// A feature vector with its ground-truth depth.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub features: Vec<f64>,
    pub depth: f64,
}

/// Features at the known pattern dots of one pair, subsampled with a
/// shuffle seeded by `(sample_seed, index)`.
pub fn samples_from_pair(
    pair: &TrainingPair,
    index: u64,
    pattern: &DotPattern,
    extractor: &FeatureExtractor,
    samples_per_pair: usize,
    sample_seed: u64,
) -> Vec<Sample> {
    samples_from_image(&pair.image, &pair.depth, index, pattern, extractor, samples_per_pair, sample_seed)
}

/// Same as [`samples_from_pair`] for an image and depth map loaded from disk.
pub fn samples_from_image(
    image: &GrayImage,
    depth: &DepthMap,
    index: u64,
    pattern: &DotPattern,
    extractor: &FeatureExtractor,
    samples_per_pair: usize,
    sample_seed: u64,
) -> Vec<Sample> {
    let (w, h) = image.dims();
    let mut sites: Vec<(usize, usize)> = pattern
        .pixel_positions(w, h)
        .into_iter()
        .filter(|(x, y)| *x >= 0.0 && *y >= 0.0 && (*x as usize) < w && (*y as usize) < h)
        .map(|(x, y)| (x as usize, y as usize))
        .collect();
    let mut rng = seed::rng(seed::derive_seed(sample_seed, index));
    sites.shuffle(&mut rng);
    sites.truncate(samples_per_pair);
    sites
        .into_iter()
        .map(|(x, y)| Sample {
            features: extractor.extract(image, x, y),
            depth: depth.get(x, y),
        })
        .collect()
}

/// Samples from pairs `0..count` produced by `make`, generated in parallel
/// chunks so only a few pairs are alive at once. Output order follows the
/// pair index.
pub fn build_samples<F>(
    count: usize,
    make: F,
    pattern: &DotPattern,
    extractor: &FeatureExtractor,
    samples_per_pair: usize,
    sample_seed: u64,
) -> Result<Vec<Sample>>
where
    F: Fn(u64) -> Result<TrainingPair> + Sync,
{
    let mut out = Vec::new();
    let chunk = 4 * rayon::current_num_threads().max(1);
    for start in (0..count).step_by(chunk) {
        let end = (start + chunk).min(count);
        let parts: Vec<Vec<Sample>> = (start..end)
            .into_par_iter()
            .map(|i| {
                let pair = make(i as u64)?;
                Ok(samples_from_pair(&pair, i as u64, pattern, extractor, samples_per_pair, sample_seed))
            })
            .collect::<Result<_>>()?;
        out.extend(parts.into_iter().flatten());
    }
    Ok(out)
}

/// One optimizer step in the loss trace.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceRow {
    pub epoch: usize,
    pub step: usize,
    pub loss: f64,
    pub lr: f64,
}

pub const TRACE_HEADER: &str = "epoch,step,loss,lr";

impl TraceRow {
    pub fn to_csv(&self) -> String {
        format!("{},{},{:.9e},{:.9e}", self.epoch, self.step, self.loss, self.lr)
    }
}

#[derive(Debug, Clone)]
pub struct TrainReport {
    pub model: PatchModel,
    /// Mean loss over the full sample set before training.
    pub initial_loss: f64,
    /// Mean batch loss per epoch.
    pub epoch_losses: Vec<f64>,
    /// Mean loss over the full sample set after training.
    pub final_loss: f64,
    pub trace: Vec<TraceRow>,
}

/// Mean heteroscedastic loss of `model` over `samples`.
pub fn mean_loss(model: &PatchModel, samples: &[Sample], delta: f64) -> f64 {
    let sum: f64 = samples
        .iter()
        .map(|s| {
            let p = model.predict(&s.features);
            huber(p.depth - s.depth, delta) * (-p.log_variance).exp() + 0.5 * p.log_variance
        })
        .sum();
    sum / samples.len().max(1) as f64
}

/// Trains `model` on `samples`. Every step is appended to
/// the returned trace and, when given, written to `trace_out` as CSV as it
/// happens, so a diverged run leaves its diagnostic trace behind.
pub fn train_patch_model(
    mut model: PatchModel,
    samples: &[Sample],
    cfg: &TrainConfig,
    mut trace_out: Option<&mut dyn Write>,
) -> Result<TrainReport> {
    cfg.validate()?;
    if samples.is_empty() {
        return Err(Error::invalid("training set is empty"));
    }
    let n_feat = model.n_planes();
    if samples.iter().any(|s| s.features.len() != n_feat) {
        return Err(Error::invalid("sample feature length does not match the model"));
    }
    let trace_err = |e: std::io::Error| Error::io("<loss trace>", e);
    if let Some(out) = trace_out.as_mut() {
        writeln!(out, "{TRACE_HEADER}").map_err(trace_err)?;
    }
    let initial_loss = mean_loss(&model, samples, cfg.huber_delta);
    let mut adam = Adam::new(model.n_params(), cfg.beta1, cfg.beta2, cfg.epsilon);
    let mut params = model.params();
    let mut order: Vec<usize> = (0..samples.len()).collect();
    let mut rng = seed::rng(cfg.seed);
    let mut trace = Vec::new();
    let mut epoch_losses = Vec::with_capacity(cfg.epochs);
    let mut step = 0;
    for epoch in 0..cfg.epochs {
        let lr = cfg.lr_at(epoch);
        order.shuffle(&mut rng);
        let mut epoch_sum = 0.0;
        let mut batches = 0;
        for batch in order.chunks(cfg.batch_size) {
            let bs = batch.len() as f64;
            let mut grad = vec![0.0; params.len()];
            let mut loss = 0.0;
            // Fixed-order summation keeps runs bit-reproducible.
            for &i in batch {
                let s = &samples[i];
                let p = model.predict(&s.features);
                let r = p.depth - s.depth;
                let e = (-p.log_variance).exp();
                let h = huber(r, cfg.huber_delta);
                loss += (h * e + 0.5 * p.log_variance) / bs;
                let g_depth = huber_grad(r, cfg.huber_delta) * e / bs;
                let g_logvar = (0.5 - h * e) / bs;
                model.accumulate_grad(&s.features, &p, g_depth, g_logvar, &mut grad);
            }
            if !loss.is_finite() || grad.iter().any(|g| !g.is_finite()) {
                return Err(Error::Diverged { epoch, step, loss });
            }
            adam.step(&mut params, &grad, lr);
            model.set_params(&params);
            let row = TraceRow { epoch, step, loss, lr };
            if let Some(out) = trace_out.as_mut() {
                writeln!(out, "{}", row.to_csv()).map_err(trace_err)?;
            }
            trace.push(row);
            epoch_sum += loss;
            batches += 1;
            step += 1;
        }
        epoch_losses.push(epoch_sum / batches as f64);
    }
    let final_loss = mean_loss(&model, samples, cfg.huber_delta);
    if !final_loss.is_finite() {
        return Err(Error::Diverged {
            epoch: cfg.epochs,
            step,
            loss: final_loss,
        });
    }
    Ok(TrainReport {
        model,
        initial_loss,
        epoch_losses,
        final_loss,
        trace,
    })
}

/// Splits samples into train/held-out parts with a seeded permutation.
pub fn split_samples(samples: Vec<Sample>, holdout_fraction: f64, split_seed: u64) -> (Vec<Sample>, Vec<Sample>) {
    let mut rng = seed::rng(split_seed);
    let mut tagged: Vec<(f64, Sample)> = samples.into_iter().map(|s| (rng.random::<f64>(), s)).collect();
    tagged.sort_by(|a, b| a.0.total_cmp(&b.0));
    let k = ((tagged.len() as f64) * holdout_fraction).round() as usize;
    let held: Vec<Sample> = tagged.drain(..k).map(|t| t.1).collect();
    (tagged.into_iter().map(|t| t.1).collect(), held)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::calibration::DepthPlanes;
    use crate::estimation::features::FeatureSpec;

    fn toy_samples(n: usize, seed_: u64) -> Vec<Sample> {
        let planes = DepthPlanes::canonical();
        let mut rng = seed::rng(seed_);
        (0..n)
            .map(|_| {
                let k = rng.random_range(0..planes.len());
                let features = (0..planes.len())
                    .map(|j| if j == k { 0.9 } else { 0.5 } + rng.random_range(-0.05..0.05))
                    .collect();
                Sample {
                    features,
                    depth: planes.get(k),
                }
            })
            .collect()
    }

    fn model() -> PatchModel {
        PatchModel::new(DepthPlanes::canonical(), FeatureSpec::default()).unwrap()
    }

    #[test]
    fn schedule_halves_every_ten_epochs() {
        let c = TrainConfig::default();
        assert_eq!(c.lr_at(0), 1e-3);
        assert_eq!(c.lr_at(9), 1e-3);
        assert_eq!(c.lr_at(10), 5e-4);
        assert_eq!(c.lr_at(20), 2.5e-4);
        assert_eq!(c.lr_at(49), 1e-3 / 16.0);
    }

    #[test]
    fn zero_epochs_rejected() {
        let c = TrainConfig {
            epochs: 0,
            ..TrainConfig::default()
        };
        assert!(matches!(
            train_patch_model(model(), &toy_samples(10, 1), &c, None),
            Err(Error::InvalidArgument(_))
        ));
    }

    #[test]
    fn loss_decreases_and_is_reproducible() {
        let s = toy_samples(256, 2);
        let c = TrainConfig {
            epochs: 3,
            ..TrainConfig::default()
        };
        let a = train_patch_model(model(), &s, &c, None).unwrap();
        let b = train_patch_model(model(), &s, &c, None).unwrap();
        assert!(a.final_loss < a.initial_loss);
        assert_eq!(a.model, b.model);
        assert_eq!(a.trace.len(), 3 * 8);
    }

    #[test]
    fn divergence_reported() {
        let mut s = toy_samples(8, 3);
        s[0].features[0] = f64::NAN;
        let c = TrainConfig {
            epochs: 1,
            ..TrainConfig::default()
        };
        let mut buf = Vec::new();
        let err = train_patch_model(model(), &s, &c, Some(&mut buf)).unwrap_err();
        assert!(matches!(err, Error::Diverged { epoch: 0, .. }));
        assert!(String::from_utf8(buf).unwrap().starts_with(TRACE_HEADER));
    }
}
