//! A small per-dot depth classifier: linear scores over the NCC features,
//! softmax over planes, expected plane depth, and a linear log-variance head.

use std::fs;
use std::path::Path;

use rayon::prelude::*;

use super::dots::{nearest_site_labels, DotDetector};
use super::estimate::{DepthEstimate, DepthEstimator};
use super::features::{FeatureExtractor, FeatureSpec};
use crate::calibration::{DepthPlanes, PsfBank};
use crate::error::{Error, Result};
use crate::imagery::{DepthMap, GrayImage};

const MAGIC: &[u8; 5] = b"DDPM1";

/// Diagonal of the initial score matrix.
pub const INIT_GAIN: f64 = 50.0;

#[derive(Debug, Clone, PartialEq)]
pub struct PatchModel {
    pub planes: DepthPlanes,
    pub feature_spec: FeatureSpec,
    /// Row-major `n x n`: score_i = sum_j w[i n + j] f_j + b_i.
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
    /// log-variance = var_weights . f + var_bias.
    pub var_weights: Vec<f64>,
    pub var_bias: f64,
}

/// Output for one feature vector.
#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub depth: f64,
    pub log_variance: f64,
    pub probs: Vec<f64>,
}

impl PatchModel {
    pub fn new(planes: DepthPlanes, feature_spec: FeatureSpec) -> Result<Self> {
        feature_spec.validate()?;
        let n = planes.len();
        let mut weights = vec![0.0; n * n];
        for i in 0..n {
            weights[i * n + i] = INIT_GAIN;
        }
        Ok(Self {
            planes,
            feature_spec,
            weights,
            bias: vec![0.0; n],
            var_weights: vec![0.0; n],
            var_bias: 0.0,
        })
    }

    pub fn n_planes(&self) -> usize {
        self.planes.len()
    }

    pub fn n_params(&self) -> usize {
        let n = self.n_planes();
        n * n + 2 * n + 1
    }

    fn check(&self) -> Result<()> {
        let n = self.n_planes();
        if self.weights.len() != n * n || self.bias.len() != n || self.var_weights.len() != n {
            return Err(Error::Invariant(format!("patch model shapes do not match {n} planes")));
        }
        self.feature_spec.validate()
    }

    /// Parameters in the order weights, bias, var_weights, var_bias.
    pub fn params(&self) -> Vec<f64> {
        let mut p = Vec::with_capacity(self.n_params());
        p.extend_from_slice(&self.weights);
        p.extend_from_slice(&self.bias);
        p.extend_from_slice(&self.var_weights);
        p.push(self.var_bias);
        p
    }

    pub fn set_params(&mut self, p: &[f64]) {
        let n = self.n_planes();
        assert_eq!(p.len(), self.n_params());
        self.weights.copy_from_slice(&p[..n * n]);
        self.bias.copy_from_slice(&p[n * n..n * n + n]);
        self.var_weights.copy_from_slice(&p[n * n + n..n * n + 2 * n]);
        self.var_bias = p[n * n + 2 * n];
    }

    pub fn predict(&self, f: &[f64]) -> Prediction {
        let n = self.n_planes();
        let scores: Vec<f64> = (0..n)
            .map(|i| self.bias[i] + self.weights[i * n..(i + 1) * n].iter().zip(f).map(|(w, x)| w * x).sum::<f64>())
            .collect();
        let m = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut probs: Vec<f64> = scores.iter().map(|s| (s - m).exp()).collect();
        let z: f64 = probs.iter().sum();
        for p in probs.iter_mut() {
            *p /= z;
        }
        let depth = probs.iter().zip(self.planes.planes()).map(|(p, d)| p * d).sum();
        let log_variance = self.var_bias + self.var_weights.iter().zip(f).map(|(w, x)| w * x).sum::<f64>();
        Prediction {
            depth,
            log_variance,
            probs,
        }
    }

    /// Adds to `grad` (laid out like [`Self::params`]) the parameter
    /// gradient given the loss gradients w.r.t. depth and log-variance.
    pub fn accumulate_grad(&self, f: &[f64], pred: &Prediction, g_depth: f64, g_logvar: f64, grad: &mut [f64]) {
        let n = self.n_planes();
        let planes = self.planes.planes();
        for i in 0..n {
            let gs = g_depth * pred.probs[i] * (planes[i] - pred.depth);
            for j in 0..n {
                grad[i * n + j] += gs * f[j];
            }
            grad[n * n + i] += gs;
        }
        for j in 0..n {
            grad[n * n + n + j] += g_logvar * f[j];
        }
        grad[n * n + 2 * n] += g_logvar;
    }

    /// Little-endian: magic, plane count, patch size, search radius, spot
    /// sigma, planes, then [`Self::params`]; reals are stored as `f32`.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&(self.n_planes() as u32).to_le_bytes());
        out.extend_from_slice(&(self.feature_spec.patch_size as u32).to_le_bytes());
        out.extend_from_slice(&(self.feature_spec.search_radius as u32).to_le_bytes());
        out.extend_from_slice(&(self.feature_spec.spot_sigma as f32).to_le_bytes());
        for v in self.planes.planes().iter().chain(&self.params()) {
            out.extend_from_slice(&(*v as f32).to_le_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let bad = |offset: usize, message: &str| Error::Parse {
            offset,
            message: message.to_string(),
        };
        if bytes.len() < MAGIC.len() || &bytes[..MAGIC.len()] != MAGIC {
            return Err(bad(0, "not a patch model file"));
        }
        let mut pos = MAGIC.len();
        let mut take = |len: usize| -> Result<&[u8]> {
            let s = bytes.get(pos..pos + len).ok_or_else(|| bad(pos, "truncated patch model"))?;
            pos += len;
            Ok(s)
        };
        let u32_at = |b: &[u8]| u32::from_le_bytes(b.try_into().expect("4 bytes")) as usize;
        let f32_at = |b: &[u8]| f32::from_le_bytes(b.try_into().expect("4 bytes")) as f64;
        let n = u32_at(take(4)?);
        let patch_size = u32_at(take(4)?);
        let search_radius = u32_at(take(4)?);
        let spot_sigma = f32_at(take(4)?);
        if n == 0 || n > 4096 {
            return Err(bad(MAGIC.len(), "implausible plane count"));
        }
        let planes = (0..n).map(|_| take(4).map(f32_at)).collect::<Result<Vec<_>>>()?;
        let n_params = n * n + 2 * n + 1;
        let params = (0..n_params).map(|_| take(4).map(f32_at)).collect::<Result<Vec<_>>>()?;
        if pos != bytes.len() {
            return Err(bad(pos, "trailing bytes after patch model"));
        }
        let mut m = Self::new(
            DepthPlanes::new(planes)?,
            FeatureSpec {
                patch_size,
                spot_sigma,
                search_radius,
            },
        )?;
        m.set_params(&params);
        m.check()?;
        Ok(m)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_bytes()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        Self::from_bytes(&fs::read(path).map_err(|e| Error::io(path, e))?)
    }
}

/// Per-dot predictions filled densely by nearest-dot assignment.
pub fn infer_patch_model(
    model: &PatchModel,
    extractor: &FeatureExtractor,
    image: &GrayImage,
    dots: &[(usize, usize)],
) -> Result<DepthEstimate> {
    if dots.is_empty() {
        return Err(Error::NoStructuredLight);
    }
    if extractor.len() != model.n_planes() {
        return Err(Error::invalid("feature extractor and model disagree on plane count"));
    }
    let preds: Vec<Prediction> = dots
        .par_iter()
        .map(|&(x, y)| model.predict(&extractor.extract(image, x, y)))
        .collect();
    let (w, h) = image.dims();
    let labels = nearest_site_labels(dots, w, h)?;
    let depth = labels.iter().map(|&i| preds[i].depth).collect();
    let logvar = labels.iter().map(|&i| preds[i].log_variance).collect();
    DepthEstimate::new(DepthMap::from_vec(w, h, depth)?, logvar)
}

/// Patch model bundled with its feature extractor and dot detector.
#[derive(Debug, Clone)]
pub struct PatchEstimator {
    pub model: PatchModel,
    pub extractor: FeatureExtractor,
    pub detector: DotDetector,
}

impl PatchEstimator {
    pub fn new(model: PatchModel, bank: &PsfBank) -> Result<Self> {
        if bank.planes != model.planes {
            return Err(Error::invalid("PSF bank planes differ from the model's planes"));
        }
        let extractor = FeatureExtractor::new(bank, model.feature_spec)?;
        Ok(Self {
            model,
            extractor,
            detector: DotDetector::default(),
        })
    }
}

impl DepthEstimator for PatchEstimator {
    fn name(&self) -> &str {
        "patch"
    }

    fn estimate(&self, image: &GrayImage) -> Result<DepthEstimate> {
        let dots: Vec<(usize, usize)> = self.detector.detect(image).iter().map(|d| (d.x, d.y)).collect();
        infer_patch_model(&self.model, &self.extractor, image, &dots)
    }
}
