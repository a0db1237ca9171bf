use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::calibration::DepthPlanes;
use crate::error::{Error, Result};
use crate::imagery::BinaryMask;
use crate::seed;

/// Randomization ranges for synthetic scenes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SceneLimits {
    pub max_polygons: usize,
    pub min_vertices: usize,
    pub max_vertices: usize,
    /// Polygon radius range in pixels.
    pub min_radius_px: f64,
    pub max_radius_px: f64,
    pub alpha_min: f64,
    pub alpha_max: f64,
    pub w_ref_min: f64,
    pub w_ref_max: f64,
    pub sigma_min: f64,
    pub sigma_max: f64,
}

impl Default for SceneLimits {
    fn default() -> Self {
        Self {
            max_polygons: 6,
            min_vertices: 3,
            max_vertices: 10,
            min_radius_px: 24.0,
            max_radius_px: 200.0,
            alpha_min: 0.4,
            alpha_max: 1.0,
            w_ref_min: 0.0,
            w_ref_max: 0.15,
            sigma_min: 0.005,
            sigma_max: 0.03,
        }
    }
}

impl SceneLimits {
    pub fn validate(&self) -> Result<()> {
        let ok = self.min_vertices >= 3
            && self.max_vertices >= self.min_vertices
            && self.min_radius_px > 0.0
            && self.max_radius_px >= self.min_radius_px
            && self.alpha_min > 0.0
            && self.alpha_max >= self.alpha_min
            && self.w_ref_min >= 0.0
            && self.w_ref_max >= self.w_ref_min
            && self.w_ref_max <= 1.0
            && self.sigma_min >= 0.0
            && self.sigma_max >= self.sigma_min;
        if ok {
            Ok(())
        } else {
            Err(Error::invalid(format!("inconsistent scene limits {self:?}")))
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Polygon {
    pub vertices: Vec<(f64, f64)>,
    pub plane_index: usize,
}

impl Polygon {
    /// Signed shoelace area in square pixels.
    pub fn area(&self) -> f64 {
        let v = &self.vertices;
        let mut a = 0.0;
        for i in 0..v.len() {
            let (x0, y0) = v[i];
            let (x1, y1) = v[(i + 1) % v.len()];
            a += x0 * y1 - x1 * y0;
        }
        a / 2.0
    }

    /// Even-odd crossing test at `(px, py)`.
    pub fn contains(&self, px: f64, py: f64) -> bool {
        let v = &self.vertices;
        let mut inside = false;
        let mut j = v.len() - 1;
        for i in 0..v.len() {
            let (xi, yi) = v[i];
            let (xj, yj) = v[j];
            if (yi > py) != (yj > py) && px < (xj - xi) * (py - yi) / (yj - yi) + xi {
                inside = !inside;
            }
            j = i;
        }
        inside
    }
}

/// One synthetic layout: obstacle polygons over a background plane plus the
/// photometric mixing weights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneSpec {
    pub width: usize,
    pub height: usize,
    pub polygons: Vec<Polygon>,
    pub background_plane_index: usize,
    /// Reflectivity of the background layer.
    pub alpha_background: f64,
    /// Reflectivity of each plane's obstacle layer.
    pub alpha_planes: Vec<f64>,
    pub w_ref: f64,
    pub noise_sigma: f64,
    pub seed: u64,
}

pub fn random_scene(seed: u64, planes: &DepthPlanes, limits: &SceneLimits, width: usize, height: usize) -> Result<SceneSpec> {
    limits.validate()?;
    if width == 0 || height == 0 {
        return Err(Error::invalid("scene size has a zero side"));
    }
    let mut rng = seed::rng(seed);
    let n = planes.len();
    let count = rng.random_range(0..=limits.max_polygons);
    let (w, h) = (width as f64, height as f64);
    let mut polygons = Vec::with_capacity(count);
    for _ in 0..count {
        let plane_index = rng.random_range(0..n);
        let nv = rng.random_range(limits.min_vertices..=limits.max_vertices);
        let cx = rng.random_range(0.0..w);
        let cy = rng.random_range(0.0..h);
        let r = rng.random_range(limits.min_radius_px..=limits.max_radius_px);
        let mut angles: Vec<f64> = (0..nv).map(|_| rng.random_range(0.0..std::f64::consts::TAU)).collect();
        angles.sort_by(f64::total_cmp);
        let vertices = angles
            .iter()
            .map(|a| {
                let rr = r * rng.random_range(0.5..=1.0);
                ((cx + rr * a.cos()).clamp(0.0, w), (cy + rr * a.sin()).clamp(0.0, h))
            })
            .collect();
        polygons.push(Polygon { vertices, plane_index });
    }
    let background_plane_index = rng.random_range(0..n);
    let mut alpha = || rng.random_range(limits.alpha_min..=limits.alpha_max);
    let alpha_background = alpha();
    let alpha_planes = (0..n).map(|_| alpha()).collect();
    let w_ref = rng.random_range(limits.w_ref_min..=limits.w_ref_max);
    let noise_sigma = rng.random_range(limits.sigma_min..=limits.sigma_max);
    Ok(SceneSpec {
        width,
        height,
        polygons,
        background_plane_index,
        alpha_background,
        alpha_planes,
        w_ref,
        noise_sigma,
        seed,
    })
}

impl SceneSpec {
    pub fn validate(&self, planes: &DepthPlanes) -> Result<()> {
        let n = planes.len();
        if self.background_plane_index >= n || self.alpha_planes.len() != n {
            return Err(Error::invalid("scene plane indices do not match the plane set"));
        }
        for p in &self.polygons {
            if p.plane_index >= n {
                return Err(Error::invalid(format!("polygon plane index {} out of range", p.plane_index)));
            }
            if p.vertices.len() < 3 {
                return Err(Error::invalid("polygon needs at least 3 vertices"));
            }
            let (w, h) = (self.width as f64, self.height as f64);
            if p.vertices.iter().any(|(x, y)| !(0.0..=w).contains(x) || !(0.0..=h).contains(y)) {
                return Err(Error::invalid("polygon vertex out of bounds"));
            }
        }
        Ok(())
    }
}

/// Per-plane obstacle masks plus the background mask; together they
/// partition the frame.
#[derive(Debug, Clone, PartialEq)]
pub struct SceneMasks {
    pub planes: Vec<BinaryMask>,
    pub background: BinaryMask,
    /// Plane index per pixel, `None` for background.
    pub owner: Vec<Option<usize>>,
    pub warnings: Vec<String>,
}

/// Fills polygons at pixel centers with the even-odd rule. Where polygons
/// overlap the nearest plane (lowest index) wins.
pub fn rasterize_masks(spec: &SceneSpec, n_planes: usize) -> SceneMasks {
    let (w, h) = (spec.width, spec.height);
    let mut owner: Vec<Option<usize>> = vec![None; w * h];
    let mut warnings = Vec::new();
    let mut xs: Vec<f64> = Vec::new();
    for (k, poly) in spec.polygons.iter().enumerate() {
        if poly.vertices.len() < 3 || poly.area().abs() < 1e-9 {
            warnings.push(format!("polygon {k} is degenerate (zero area); skipped"));
            continue;
        }
        let v = &poly.vertices;
        let ymin = v.iter().map(|p| p.1).fold(f64::INFINITY, f64::min);
        let ymax = v.iter().map(|p| p.1).fold(f64::NEG_INFINITY, f64::max);
        let y0 = ((ymin - 0.5).floor().max(0.0)) as usize;
        let y1 = ((ymax - 0.5).ceil().max(0.0) as usize).min(h.saturating_sub(1));
        for y in y0..=y1 {
            let py = y as f64 + 0.5;
            xs.clear();
            let mut j = v.len() - 1;
            for i in 0..v.len() {
                let (xi, yi) = v[i];
                let (xj, yj) = v[j];
                if (yi > py) != (yj > py) {
                    xs.push((xj - xi) * (py - yi) / (yj - yi) + xi);
                }
                j = i;
            }
            xs.sort_by(f64::total_cmp);
            for pair in xs.chunks_exact(2) {
                // Pixel centers with xa <= px < xb.
                let lo = (pair[0] - 0.5).ceil().max(0.0) as usize;
                let hi_f = (pair[1] - 0.5).ceil();
                if hi_f <= 0.0 {
                    continue;
                }
                let hi = (hi_f as usize).min(w);
                for x in lo..hi {
                    let o = &mut owner[y * w + x];
                    *o = Some(o.map_or(poly.plane_index, |c| c.min(poly.plane_index)));
                }
            }
        }
    }
    let planes = (0..n_planes)
        .map(|i| BinaryMask::from_vec(w, h, owner.iter().map(|o| *o == Some(i)).collect()).expect("dims"))
        .collect();
    let background = BinaryMask::from_vec(w, h, owner.iter().map(Option::is_none).collect()).expect("dims");
    SceneMasks {
        planes,
        background,
        owner,
        warnings,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn square(x0: f64, y0: f64, x1: f64, y1: f64, plane: usize) -> Polygon {
        Polygon {
            vertices: vec![(x0, y0), (x1, y0), (x1, y1), (x0, y1)],
            plane_index: plane,
        }
    }

    fn blank(w: usize, h: usize, polygons: Vec<Polygon>) -> SceneSpec {
        SceneSpec {
            width: w,
            height: h,
            polygons,
            background_plane_index: 8,
            alpha_background: 1.0,
            alpha_planes: vec![1.0; 9],
            w_ref: 0.0,
            noise_sigma: 0.0,
            seed: 0,
        }
    }

    #[test]
    fn zero_polygon_limit_gives_all_background() {
        let limits = SceneLimits {
            max_polygons: 0,
            ..SceneLimits::default()
        };
        let spec = random_scene(3, &DepthPlanes::canonical(), &limits, 64, 48).unwrap();
        assert!(spec.polygons.is_empty());
        let m = rasterize_masks(&spec, 9);
        assert_eq!(m.background.count(), 64 * 48);
    }

    #[test]
    fn full_frame_polygon() {
        let spec = blank(40, 30, vec![square(0.0, 0.0, 40.0, 30.0, 2)]);
        let m = rasterize_masks(&spec, 9);
        assert_eq!(m.planes[2].count(), 1200);
        assert_eq!(m.background.count(), 0);
    }

    #[test]
    fn overlap_goes_to_nearer_plane_and_matches_crossing_oracle() {
        let a = Polygon {
            vertices: vec![(3.2, 4.1), (30.7, 8.9), (22.5, 27.3), (6.1, 20.0)],
            plane_index: 3,
        };
        let b = Polygon {
            vertices: vec![(12.0, 2.5), (38.0, 15.5), (15.2, 29.0)],
            plane_index: 1,
        };
        let spec = blank(40, 30, vec![a.clone(), b.clone()]);
        let m = rasterize_masks(&spec, 9);
        for y in 0..30 {
            for x in 0..40 {
                let (px, py) = (x as f64 + 0.5, y as f64 + 0.5);
                let expect = if b.contains(px, py) {
                    Some(1)
                } else if a.contains(px, py) {
                    Some(3)
                } else {
                    None
                };
                assert_eq!(m.owner[y * 40 + x], expect, "pixel ({x},{y})");
            }
        }
    }

    #[test]
    fn degenerate_polygon_skipped_with_warning() {
        let flat = Polygon {
            vertices: vec![(1.0, 1.0), (5.0, 5.0), (9.0, 9.0)],
            plane_index: 0,
        };
        let m = rasterize_masks(&blank(10, 10, vec![flat]), 9);
        assert_eq!(m.warnings.len(), 1);
        assert_eq!(m.background.count(), 100);
    }

    #[test]
    fn random_scene_is_deterministic_and_valid() {
        let planes = DepthPlanes::canonical();
        let a = random_scene(99, &planes, &SceneLimits::default(), 640, 480).unwrap();
        let b = random_scene(99, &planes, &SceneLimits::default(), 640, 480).unwrap();
        assert_eq!(a, b);
        a.validate(&planes).unwrap();
    }
}
