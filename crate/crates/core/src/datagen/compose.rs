use std::path::{Path, PathBuf};

use rand::Rng;
use rand_distr::{Distribution, Normal};

use super::scene::{rasterize_masks, SceneMasks, SceneSpec};
use crate::calibration::CalibrationSet;
use crate::error::{Error, Result};
use crate::imagery::{read_pgm, DepthMap, GrayImage};
use crate::seed;

/// Upper end of background intensities (low-light scene).
pub const BACKGROUND_MAX: f64 = 0.1;

#[derive(Debug, Clone, PartialEq)]
pub struct TrainingPair {
    pub image: GrayImage,
    pub depth: DepthMap,
    pub spec: SceneSpec,
    pub masks: SceneMasks,
}

/// Composite before clamping: `w_ref I_ref + sum_i a_i M_i I_i + a_0 M_0 I_0
/// + noise`, together with the ground-truth depth.
pub fn compose_unclamped(
    spec: &SceneSpec,
    calib: &CalibrationSet,
    background: &GrayImage,
) -> Result<(GrayImage, DepthMap, SceneMasks)> {
    spec.validate(&calib.planes)?;
    let dims = calib.dims();
    if background.dims() != dims || (spec.width, spec.height) != dims {
        return Err(Error::invalid(format!(
            "compose: background {:?}, scene {:?} and calibration {:?} must match",
            background.dims(),
            (spec.width, spec.height),
            dims
        )));
    }
    let masks = rasterize_masks(spec, calib.planes.len());
    let bg = spec.background_plane_index;
    let mut rng = seed::rng(seed::derive_seed(spec.seed, 1));
    let normal = if spec.noise_sigma > 0.0 {
        Some(Normal::new(0.0, spec.noise_sigma).map_err(|e| Error::invalid(e.to_string()))?)
    } else {
        None
    };
    let n = dims.0 * dims.1;
    let mut img = Vec::with_capacity(n);
    let mut depth = Vec::with_capacity(n);
    for (p, owner) in masks.owner.iter().enumerate() {
        let (plane, alpha) = match owner {
            Some(i) => (*i, spec.alpha_planes[*i]),
            None => (bg, spec.alpha_background),
        };
        let mut v = spec.w_ref * background.data()[p] + alpha * calib.images[plane].data()[p];
        if let Some(nd) = &normal {
            v += nd.sample(&mut rng);
        }
        img.push(v);
        depth.push(calib.planes.get(plane));
    }
    Ok((
        GrayImage::from_vec(dims.0, dims.1, img)?,
        DepthMap::from_vec(dims.0, dims.1, depth)?,
        masks,
    ))
}

pub fn compose_pair(spec: &SceneSpec, calib: &CalibrationSet, background: &GrayImage) -> Result<TrainingPair> {
    let (image, depth, masks) = compose_unclamped(spec, calib, background)?;
    Ok(TrainingPair {
        image: image.clamped(),
        depth,
        spec: spec.clone(),
        masks,
    })
}

/// Where reference (ambient) images come from.
#[derive(Debug, Clone, PartialEq)]
pub enum BackgroundSource {
    /// Value noise plus a random gradient.
    Procedural,
    /// PGM files; each is cropped or tiled to the frame size.
    Corpus(Vec<PathBuf>),
}

impl BackgroundSource {
    /// All `.pgm` files of a directory in sorted order.
    pub fn from_dir(dir: impl AsRef<Path>) -> Result<Self> {
        let dir = dir.as_ref();
        let mut files: Vec<PathBuf> = std::fs::read_dir(dir)
            .map_err(|e| Error::io(dir, e))?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|x| x.eq_ignore_ascii_case("pgm")))
            .collect();
        files.sort();
        if files.is_empty() {
            return Err(Error::invalid(format!("no .pgm files in {}", dir.display())));
        }
        Ok(Self::Corpus(files))
    }

    /// Background for a given pair seed, scaled into `[0, BACKGROUND_MAX]`.
    pub fn background(&self, seed: u64, width: usize, height: usize) -> Result<GrayImage> {
        match self {
            Self::Procedural => Ok(procedural_background(seed, width, height)),
            Self::Corpus(files) => {
                let src = read_pgm(&files[(seed % files.len() as u64) as usize])?;
                Ok(GrayImage::from_fn(width, height, |x, y| {
                    src.get(x % src.width(), y % src.height()) * BACKGROUND_MAX
                }))
            }
        }
    }
}

/// Multi-octave bilinear value noise blended with a linear gradient,
/// normalized into `[0, BACKGROUND_MAX]`.
pub fn procedural_background(seed: u64, width: usize, height: usize) -> GrayImage {
    let mut rng = seed::rng(seed);
    let mut acc = vec![0.0; width * height];
    let mut amp = 1.0;
    let mut cell = (width.max(height) as f64 / 4.0).max(2.0);
    for _ in 0..4 {
        let gw = (width as f64 / cell).ceil() as usize + 2;
        let gh = (height as f64 / cell).ceil() as usize + 2;
        let grid: Vec<f64> = (0..gw * gh).map(|_| rng.random::<f64>()).collect();
        for y in 0..height {
            let fy = y as f64 / cell;
            let iy = fy.floor() as usize;
            let ty = fy - iy as f64;
            for x in 0..width {
                let fx = x as f64 / cell;
                let ix = fx.floor() as usize;
                let tx = fx - ix as f64;
                let g = |a: usize, b: usize| grid[b * gw + a];
                let top = g(ix, iy) * (1.0 - tx) + g(ix + 1, iy) * tx;
                let bot = g(ix, iy + 1) * (1.0 - tx) + g(ix + 1, iy + 1) * tx;
                acc[y * width + x] += amp * (top * (1.0 - ty) + bot * ty);
            }
        }
        amp *= 0.5;
        cell = (cell / 2.0).max(1.0);
    }
    let angle = rng.random_range(0.0..std::f64::consts::TAU);
    let strength = rng.random_range(0.0..1.0);
    let (c, s) = (angle.cos(), angle.sin());
    let span = (width + height) as f64;
    for y in 0..height {
        for x in 0..width {
            acc[y * width + x] += strength * (c * x as f64 + s * y as f64) / span;
        }
    }
    let lo = acc.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = acc.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let range = if hi > lo { hi - lo } else { 1.0 };
    let data = acc.iter().map(|v| (v - lo) / range * BACKGROUND_MAX).collect();
    GrayImage::from_vec(width, height, data).expect("dims")
}
