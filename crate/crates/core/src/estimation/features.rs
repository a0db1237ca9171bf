//! Normalized cross-correlation of image patches against the per-plane
//! blur kernels.

use serde::{Deserialize, Serialize};

use crate::calibration::PsfBank;
use crate::error::{Error, Result};
use crate::imagery::{gaussian_blur, GrayImage};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FeatureSpec {
    /// Odd patch side in pixels.
    pub patch_size: usize,
    /// Gaussian spot width convolved into each template (0 uses the bare
    /// kernel).
    pub spot_sigma: f64,
    /// Each feature is the best score over patch centers within this many
    /// pixels of the dot.
    pub search_radius: usize,
}

impl Default for FeatureSpec {
    fn default() -> Self {
        Self {
            patch_size: 31,
            spot_sigma: 1.5,
            search_radius: 1,
        }
    }
}

impl FeatureSpec {
    pub fn validate(&self) -> Result<()> {
        if self.patch_size == 0 || self.patch_size % 2 == 0 {
            return Err(Error::invalid(format!("patch size {} must be odd", self.patch_size)));
        }
        if !(self.spot_sigma >= 0.0 && self.spot_sigma.is_finite()) {
            return Err(Error::invalid("spot sigma must be finite and >= 0"));
        }
        Ok(())
    }
}

/// Zero-mean, unit-norm templates, one per plane.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureExtractor {
    spec: FeatureSpec,
    templates: Vec<Vec<f64>>,
}

/// Centers `kernel` on a `size x size` canvas, cropping if it is larger.
fn pad_centered(kernel: &GrayImage, size: usize) -> GrayImage {
    let (kw, kh) = kernel.dims();
    let ox = size as isize / 2 - kw as isize / 2;
    let oy = size as isize / 2 - kh as isize / 2;
    GrayImage::from_fn(size, size, |x, y| {
        let kx = x as isize - ox;
        let ky = y as isize - oy;
        if kx >= 0 && ky >= 0 && (kx as usize) < kw && (ky as usize) < kh {
            kernel.get(kx as usize, ky as usize)
        } else {
            0.0
        }
    })
}

/// Subtracts the mean and scales to unit norm; a constant input becomes zeros.
fn standardize(v: &mut [f64]) {
    let mean = v.iter().sum::<f64>() / v.len() as f64;
    let mut ss = 0.0;
    for x in v.iter_mut() {
        *x -= mean;
        ss += *x * *x;
    }
    let norm = ss.sqrt();
    if norm > 1e-12 {
        for x in v.iter_mut() {
            *x /= norm;
        }
    } else {
        v.fill(0.0);
    }
}

impl FeatureExtractor {
    pub fn new(bank: &PsfBank, spec: FeatureSpec) -> Result<Self> {
        spec.validate()?;
        let templates = bank
            .kernels
            .iter()
            .map(|k| {
                let mut t = pad_centered(k, spec.patch_size);
                if spec.spot_sigma > 0.0 {
                    t = gaussian_blur(&t, spec.spot_sigma);
                }
                let mut v = t.into_vec();
                standardize(&mut v);
                v
            })
            .collect();
        Ok(Self { spec, templates })
    }

    pub fn spec(&self) -> FeatureSpec {
        self.spec
    }

    pub fn len(&self) -> usize {
        self.templates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.templates.is_empty()
    }

    /// Patch centered on `(cx, cy)`, replicating edge pixels outside the frame.
    pub fn patch(&self, image: &GrayImage, cx: usize, cy: usize) -> Vec<f64> {
        let p = self.spec.patch_size as isize;
        let r = p / 2;
        let mut v = Vec::with_capacity((p * p) as usize);
        for dy in -r..=r {
            for dx in -r..=r {
                v.push(image.get_clamped(cx as isize + dx, cy as isize + dy));
            }
        }
        v
    }

    pub fn extract(&self, image: &GrayImage, cx: usize, cy: usize) -> Vec<f64> {
        let r = self.spec.search_radius as isize;
        let mut best = vec![f64::NEG_INFINITY; self.templates.len()];
        for sy in -r..=r {
            for sx in -r..=r {
                let x = (cx as isize + sx).clamp(0, image.width() as isize - 1) as usize;
                let y = (cy as isize + sy).clamp(0, image.height() as isize - 1) as usize;
                let mut p = self.patch(image, x, y);
                standardize(&mut p);
                for (b, t) in best.iter_mut().zip(&self.templates) {
                    let v: f64 = t.iter().zip(&p).map(|(a, b)| a * b).sum();
                    if v > *b {
                        *b = v;
                    }
                }
            }
        }
        best
    }
}

/// NCC of the patch at `center` against each plane's bare kernel.
pub fn extract_features(image: &GrayImage, bank: &PsfBank, center: (usize, usize), patch_size: usize) -> Result<Vec<f64>> {
    let fx = FeatureExtractor::new(
        bank,
        FeatureSpec {
            patch_size,
            spot_sigma: 0.0,
            search_radius: 0,
        },
    )?;
    Ok(fx.extract(image, center.0, center.1))
}

pub fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for i in 1..v.len() {
        if v[i] > v[best] {
            best = i;
        }
    }
    best
}
