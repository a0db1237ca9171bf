//! Two-plane benchtop scenes: a textured foreground board covering the left
//! half of the frame in front of a textured background wall, lit only by the
//! dot projector.

use serde::{Deserialize, Serialize};

use super::compose::procedural_background;
use crate::calibration::DepthPlanes;
use crate::error::{Error, Result};
use crate::imagery::{add_gaussian_noise, BinaryMask, DepthMap, GrayImage};
use crate::optics::{falloff, plane_kernels, render_layers, stamp_spots, ApertureMask, DotPattern, OpticalConfig, Spot};
use crate::seed;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BenchtopSpec {
    pub z_foreground: f64,
    pub z_background: f64,
    /// Fraction of image columns covered by the foreground, from the left.
    pub foreground_fraction: f64,
    /// Surface reflectivity range of the procedural texture.
    pub reflectivity_min: f64,
    pub reflectivity_max: f64,
    /// Peak ambient light (the dark floor).
    pub ambient_max: f64,
    pub noise_sigma: f64,
    /// Projector position relative to the camera, meters (x right, y down).
    pub projector_offset: (f64, f64),
    pub seed: u64,
}

impl Default for BenchtopSpec {
    fn default() -> Self {
        Self {
            z_foreground: 0.5,
            z_background: 2.0,
            foreground_fraction: 0.5,
            reflectivity_min: 0.4,
            reflectivity_max: 1.0,
            ambient_max: 0.002,
            noise_sigma: 0.001,
            projector_offset: (0.0, 0.0),
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchtopScene {
    pub image: GrayImage,
    pub depth: DepthMap,
    pub foreground: BinaryMask,
}

impl BenchtopSpec {
    pub fn validate(&self, planes: &DepthPlanes) -> Result<()> {
        for z in [self.z_foreground, self.z_background] {
            if planes.index_of(z).is_none() {
                return Err(Error::invalid(format!("benchtop depth {z} m is not one of the planes")));
            }
        }
        if self.z_foreground >= self.z_background {
            return Err(Error::invalid("benchtop foreground must be nearer than the background"));
        }
        if !(0.0..=1.0).contains(&self.foreground_fraction) {
            return Err(Error::invalid("foreground fraction must lie in [0, 1]"));
        }
        if !(0.0 < self.reflectivity_min && self.reflectivity_min <= self.reflectivity_max && self.reflectivity_max <= 1.0) {
            return Err(Error::invalid("reflectivity range must satisfy 0 < min <= max <= 1"));
        }
        if !(self.ambient_max >= 0.0 && self.noise_sigma >= 0.0) {
            return Err(Error::invalid("ambient and noise levels must be >= 0"));
        }
        Ok(())
    }
}

/// Renders one benchtop frame with the given optics (focus included).
pub fn render_benchtop(
    spec: &BenchtopSpec,
    cfg: &OpticalConfig,
    mask: &ApertureMask,
    pattern: &DotPattern,
    planes: &DepthPlanes,
) -> Result<BenchtopScene> {
    cfg.validate()?;
    spec.validate(planes)?;
    let (w, h) = (cfg.width, cfg.height);
    let split = (spec.foreground_fraction * w as f64).round() as usize;
    let fg_plane = planes.index_of(spec.z_foreground).expect("validated");
    let bg_plane = planes.index_of(spec.z_background).expect("validated");
    let texture = procedural_background(seed::derive_seed(spec.seed, 2), w, h);
    let tex_max = texture.max().max(1e-12);
    let refl_at = |x: f64, y: f64| {
        let px = (x.floor().max(0.0) as usize).min(w - 1);
        let py = (y.floor().max(0.0) as usize).min(h - 1);
        spec.reflectivity_min + (spec.reflectivity_max - spec.reflectivity_min) * texture.get(px, py) / tex_max
    };

    let f_px = cfg.focal_length_px();
    let (bx, by) = spec.projector_offset;
    let mut spots = Vec::new();
    for (u, v) in pattern.pixel_positions(w, h) {
        // Parallax of an offset projector at each candidate surface.
        let (xf, yf) = (u + f_px * bx / spec.z_foreground, v + f_px * by / spec.z_foreground);
        let (x, y, z) = if xf < split as f64 {
            (xf, yf, spec.z_foreground)
        } else {
            let (xb, yb) = (u + f_px * bx / spec.z_background, v + f_px * by / spec.z_background);
            if xb < split as f64 {
                continue;
            }
            (xb, yb, spec.z_background)
        };
        if x < -10.0 || y < -10.0 || x > w as f64 + 10.0 || y > h as f64 + 10.0 {
            continue;
        }
        spots.push(Spot {
            x,
            y,
            amplitude: pattern.intensity() * falloff(z) * refl_at(x, y),
        });
    }
    let mut aif = GrayImage::new(w, h);
    stamp_spots(&mut aif, &spots, pattern.dot_radius_px());
    let labels: Vec<usize> = (0..w * h).map(|p| if p % w < split { fg_plane } else { bg_plane }).collect();
    let kernels = plane_kernels(cfg, mask, planes)?;
    let mut img = render_layers(&aif, &labels, &kernels)?;
    let ambient = spec.ambient_max / super::compose::BACKGROUND_MAX;
    img.add_scaled(&procedural_background(seed::derive_seed(spec.seed, 3), w, h), ambient)?;
    if spec.noise_sigma > 0.0 {
        let mut rng = seed::rng(seed::derive_seed(spec.seed, 1));
        img = add_gaussian_noise(&img, spec.noise_sigma, &mut rng);
    }
    let depth = DepthMap::from_fn(w, h, |x, _| if x < split { spec.z_foreground } else { spec.z_background })?;
    Ok(BenchtopScene {
        image: img.clamped(),
        depth,
        foreground: BinaryMask::from_fn(w, h, |x, _| x < split),
    })
}
