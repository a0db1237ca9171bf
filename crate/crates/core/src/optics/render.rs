use rayon::prelude::*;

use super::aperture::ApertureMask;
use super::config::{blur_diameter_px, OpticalConfig};
use super::pattern::DotPattern;
use super::psf::rasterize_psf;
use crate::calibration::DepthPlanes;
use crate::error::{Error, Result};
use crate::imagery::{convolve2d, DepthMap, GrayImage};

/// Reference distance of the inverse-square falloff.
pub const FALLOFF_REF_M: f64 = 0.5;

/// Relative irradiance of a surface at `z` meters.
pub fn falloff(z: f64) -> f64 {
    (FALLOFF_REF_M / z).powi(2)
}

/// A source spot in continuous pixel coordinates with peak amplitude.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Spot {
    pub x: f64,
    pub y: f64,
    pub amplitude: f64,
}

/// Adds Gaussian spots of `sigma = radius / 2` (truncated at 3 sigma),
/// evaluated at pixel centers.
pub fn stamp_spots(image: &mut GrayImage, spots: &[Spot], radius_px: f64) {
    let sigma = radius_px / 2.0;
    let reach = (3.0 * sigma).ceil() as isize;
    let inv = 1.0 / (2.0 * sigma * sigma);
    let (w, h) = (image.width() as isize, image.height() as isize);
    for s in spots {
        if s.amplitude == 0.0 {
            continue;
        }
        let cx = s.x.floor() as isize;
        let cy = s.y.floor() as isize;
        for y in (cy - reach).max(0)..=(cy + reach).min(h - 1) {
            let dy = y as f64 + 0.5 - s.y;
            for x in (cx - reach).max(0)..=(cx + reach).min(w - 1) {
                let dx = x as f64 + 0.5 - s.x;
                let v = s.amplitude * (-(dx * dx + dy * dy) * inv).exp();
                image.add(x as usize, y as usize, v);
            }
        }
    }
}

/// Convolves each labeled layer with its kernel and composites the layers,
/// masking every layer to its own pixels before and after blurring. Pixels
/// whose label is `>= kernels.len()` receive no light. The result is not
/// clamped.
pub fn render_layers(aif: &GrayImage, labels: &[usize], kernels: &[GrayImage]) -> Result<GrayImage> {
    if labels.len() != aif.len() {
        return Err(Error::invalid("label map does not match image size"));
    }
    let (w, h) = aif.dims();
    let layers: Vec<Option<GrayImage>> = (0..kernels.len())
        .into_par_iter()
        .map(|i| -> Result<Option<GrayImage>> {
            if !labels.contains(&i) {
                return Ok(None);
            }
            let data = aif
                .data()
                .iter()
                .zip(labels)
                .map(|(v, l)| if *l == i { *v } else { 0.0 })
                .collect();
            let layer = GrayImage::from_vec(w, h, data)?;
            Ok(Some(convolve2d(&layer, &kernels[i])?))
        })
        .collect::<Result<_>>()?;
    let mut out = vec![0.0; w * h];
    for (i, layer) in layers.iter().enumerate() {
        if let Some(layer) = layer {
            for ((o, v), l) in out.iter_mut().zip(layer.data()).zip(labels) {
                if *l == i {
                    *o += v;
                }
            }
        }
    }
    GrayImage::from_vec(w, h, out)
}

/// Blur kernel for each plane.
pub fn plane_kernels(cfg: &OpticalConfig, mask: &ApertureMask, planes: &DepthPlanes) -> Result<Vec<GrayImage>> {
    planes
        .planes()
        .iter()
        .map(|z| rasterize_psf(mask, blur_diameter_px(cfg, *z)?))
        .collect()
}

/// Depth-dependent defocus of an all-in-focus image whose depth map takes
/// values on the given planes; output clamped to `[0, 1]`.
pub fn render_depth_scene(
    aif: &GrayImage,
    depth: &DepthMap,
    cfg: &OpticalConfig,
    mask: &ApertureMask,
    planes: &DepthPlanes,
) -> Result<GrayImage> {
    cfg.validate()?;
    if aif.dims() != depth.dims() {
        return Err(Error::invalid(format!(
            "image {:?} and depth {:?} differ in size",
            aif.dims(),
            depth.dims()
        )));
    }
    let labels = depth
        .data()
        .iter()
        .map(|z| {
            planes
                .index_of(*z)
                .ok_or_else(|| Error::invalid(format!("depth {z} m is not one of the planes {:?}", planes.planes())))
        })
        .collect::<Result<Vec<_>>>()?;
    let kernels = plane_kernels(cfg, mask, planes)?;
    Ok(render_layers(aif, &labels, &kernels)?.clamped())
}

/// Spots of a co-located projector hitting a fronto-parallel wall at `z`.
pub fn wall_spots(pattern: &DotPattern, cfg: &OpticalConfig, z: f64) -> Vec<Spot> {
    let a = pattern.intensity() * falloff(z);
    pattern
        .pixel_positions(cfg.width, cfg.height)
        .into_iter()
        .map(|(x, y)| Spot { x, y, amplitude: a })
        .collect()
}

/// Image of the dot pattern projected onto a fronto-parallel wall at `z`.
pub fn render_dot_wall(pattern: &DotPattern, cfg: &OpticalConfig, mask: &ApertureMask, z: f64) -> Result<GrayImage> {
    cfg.validate()?;
    let kernel = rasterize_psf(mask, blur_diameter_px(cfg, z)?)?;
    let mut aif = GrayImage::new(cfg.width, cfg.height);
    stamp_spots(&mut aif, &wall_spots(pattern, cfg, z), pattern.dot_radius_px());
    Ok(convolve2d(&aif, &kernel)?.clamped())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::optics::PatternSpec;

    fn small_cfg() -> OpticalConfig {
        OpticalConfig {
            width: 96,
            height: 64,
            ..OpticalConfig::default()
        }
    }

    #[test]
    fn uniform_focus_plane_is_identity() {
        let cfg = small_cfg();
        let planes = DepthPlanes::canonical();
        let aif = GrayImage::from_fn(96, 64, |x, y| ((x * 13 + y * 7) % 17) as f64 / 17.0);
        let depth = DepthMap::filled(96, 64, 0.5).unwrap();
        let out = render_depth_scene(&aif, &depth, &cfg, &ApertureMask::default_coded(), &planes).unwrap();
        assert_eq!(out, aif);
    }

    #[test]
    fn black_stays_black() {
        let cfg = small_cfg();
        let depth = DepthMap::from_fn(96, 64, |x, _| if x < 40 { 1.0 } else { 2.5 }).unwrap();
        let out = render_depth_scene(
            &GrayImage::new(96, 64),
            &depth,
            &cfg,
            &ApertureMask::default_coded(),
            &DepthPlanes::canonical(),
        )
        .unwrap();
        assert_eq!(out.max(), 0.0);
    }

    #[test]
    fn off_plane_depth_rejected() {
        let cfg = small_cfg();
        let depth = DepthMap::filled(96, 64, 1.1).unwrap();
        let err = render_depth_scene(
            &GrayImage::new(96, 64),
            &depth,
            &cfg,
            &ApertureMask::default_coded(),
            &DepthPlanes::canonical(),
        );
        assert!(err.is_err());
    }

    #[test]
    fn dot_wall_peak_drops_with_distance() {
        let cfg = OpticalConfig::default();
        let pattern = DotPattern::generate(5, &PatternSpec::default(), cfg.width, cfg.height).unwrap();
        let mask = ApertureMask::default_coded();
        let near = render_dot_wall(&pattern, &cfg, &mask, 0.5).unwrap();
        let far = render_dot_wall(&pattern, &cfg, &mask, 2.5).unwrap();
        assert!(far.max() < near.max());
        assert!(far.count_nonzero() > near.count_nonzero());
    }

    #[test]
    fn empty_pattern_renders_black() {
        let cfg = small_cfg();
        let p = DotPattern::empty(&PatternSpec::default());
        let img = render_dot_wall(&p, &cfg, &ApertureMask::default_coded(), 1.5).unwrap();
        assert_eq!(img.max(), 0.0);
    }
}
