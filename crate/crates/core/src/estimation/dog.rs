//! Difference-of-Gaussians foreground detection tuned to the dot footprint
//! expected at a target depth.

use super::estimate::{DepthEstimate, DepthEstimator};
use crate::error::{Error, Result};
use crate::imagery::{close, gaussian_blur, open, BinaryMask, DepthMap, GrayImage};
use crate::optics::{blur_diameter_px, OpticalConfig};

/// Ratio between the two Gaussian scales.
pub const DOG_RATIO: f64 = 1.6;

#[derive(Debug, Clone, PartialEq)]
pub struct DogSegmentation {
    pub response: GrayImage,
    pub mask: BinaryMask,
    pub sigmas: (f64, f64),
}

/// Scale pair for dots of radius `dot_radius_px` seen at `z_target`.
pub fn dog_sigmas(cfg: &OpticalConfig, z_target: f64, dot_radius_px: f64) -> Result<(f64, f64)> {
    let footprint = blur_diameter_px(cfg, z_target)? + 2.0 * dot_radius_px;
    let s1 = 0.5 * footprint;
    Ok((s1, DOG_RATIO * s1))
}

/// Radius of the closing that merges neighbouring dot responses into one
/// region, and of the opening that then drops isolated specks.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Cleanup {
    pub close_radius: f64,
    pub open_radius: f64,
}

impl Default for Cleanup {
    fn default() -> Self {
        Self {
            close_radius: 20.0,
            open_radius: 12.0,
        }
    }
}

pub fn dog_segment(
    image: &GrayImage,
    cfg: &OpticalConfig,
    z_target: f64,
    dot_radius_px: f64,
    threshold: f64,
) -> Result<DogSegmentation> {
    dog_segment_with(image, cfg, z_target, dot_radius_px, threshold, Cleanup::default())
}

pub fn dog_segment_with(
    image: &GrayImage,
    cfg: &OpticalConfig,
    z_target: f64,
    dot_radius_px: f64,
    threshold: f64,
    cleanup: Cleanup,
) -> Result<DogSegmentation> {
    if !(threshold.is_finite() && dot_radius_px > 0.0) {
        return Err(Error::invalid("dog_segment: threshold must be finite and dot radius positive"));
    }
    let (s1, s2) = dog_sigmas(cfg, z_target, dot_radius_px)?;
    let a = gaussian_blur(image, s1);
    let b = gaussian_blur(image, s2);
    let (w, h) = image.dims();
    let response: Vec<f64> = a.data().iter().zip(b.data()).map(|(p, q)| p - q).collect();
    let raw = BinaryMask::from_vec(w, h, response.iter().map(|r| *r > threshold).collect())?;
    let mut mask = raw;
    if cleanup.close_radius > 0.0 {
        mask = close(&mask, cleanup.close_radius);
    }
    if cleanup.open_radius > 0.0 {
        mask = open(&mask, cleanup.open_radius);
    }
    Ok(DogSegmentation {
        response: GrayImage::from_vec(w, h, response)?,
        mask,
        sigmas: (s1, s2),
    })
}

/// Foreground/background depth from a DoG mask: detected pixels take the
/// foreground depth, the rest the background depth.
#[derive(Debug, Clone, PartialEq)]
pub struct DogEstimator {
    pub cfg: OpticalConfig,
    pub z_target: f64,
    pub dot_radius_px: f64,
    pub threshold: f64,
    pub foreground_depth: f64,
    pub background_depth: f64,
}

impl DepthEstimator for DogEstimator {
    fn name(&self) -> &str {
        "dog"
    }

    fn estimate(&self, image: &GrayImage) -> Result<DepthEstimate> {
        let seg = dog_segment(image, &self.cfg, self.z_target, self.dot_radius_px, self.threshold)?;
        let (w, h) = image.dims();
        let depth = seg
            .mask
            .data()
            .iter()
            .map(|m| if *m { self.foreground_depth } else { self.background_depth })
            .collect();
        DepthEstimate::new(DepthMap::from_vec(w, h, depth)?, vec![0.0; w * h])
    }
}
