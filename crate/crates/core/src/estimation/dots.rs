//! Dot localization on a coarse difference-of-Gaussians pyramid and
//! nearest-dot (Voronoi) fill of sparse per-dot values.

use crate::error::{Error, Result};
use crate::imagery::{gaussian_blur, gaussian_taps, GrayImage};

/// Settings of the dot detector.
#[derive(Debug, Clone, PartialEq)]
pub struct DotDetector {
    /// Inner scales of the pyramid; each level uses `(s, ratio * s)`.
    pub scales: Vec<f64>,
    pub ratio: f64,
    /// Minimum spacing between reported maxima in pixels.
    pub nms_radius: usize,
    /// Detection threshold in units of the response's noise level.
    pub k_sigma: f64,
}

impl Default for DotDetector {
    fn default() -> Self {
        Self {
            scales: vec![1.5, 3.0, 6.0],
            ratio: 1.6,
            nms_radius: 8,
            k_sigma: 8.0,
        }
    }
}

/// A detected dot at pixel `(x, y)` with its response in noise units.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Dot {
    pub x: usize,
    pub y: usize,
    pub response: f64,
}

impl DotDetector {
    /// Per-pixel maximum over scales of the DoG response divided by the
    /// response's standard deviation under white sensor noise.
    pub fn response(&self, image: &GrayImage) -> GrayImage {
        let (w, h) = image.dims();
        let noise = estimate_noise(image).max(1e-6);
        let mut best = vec![f64::NEG_INFINITY; w * h];
        for &s in &self.scales {
            let a = gaussian_blur(image, s);
            let b = gaussian_blur(image, s * self.ratio);
            let inv = 1.0 / (noise * dog_noise_gain(s, s * self.ratio));
            for ((o, p), q) in best.iter_mut().zip(a.data()).zip(b.data()) {
                let r = (p - q) * inv;
                if r > *o {
                    *o = r;
                }
            }
        }
        GrayImage::from_vec(w, h, best).expect("dims")
    }

    pub fn detect(&self, image: &GrayImage) -> Vec<Dot> {
        let resp = self.response(image);
        let (w, h) = resp.dims();
        let r = self.nms_radius as isize;
        let d = resp.data();
        let mut dots = Vec::new();
        for y in 0..h {
            for x in 0..w {
                let v = d[y * w + x];
                if v <= self.k_sigma {
                    continue;
                }
                let mut is_max = true;
                'win: for yy in (y as isize - r).max(0)..=(y as isize + r).min(h as isize - 1) {
                    for xx in (x as isize - r).max(0)..=(x as isize + r).min(w as isize - 1) {
                        let u = d[yy as usize * w + xx as usize];
                        // Ties go to the first pixel in raster order.
                        let earlier = (yy, xx) < (y as isize, x as isize);
                        if u > v || (u == v && earlier) {
                            is_max = false;
                            break 'win;
                        }
                    }
                }
                if is_max {
                    dots.push(Dot { x, y, response: v });
                }
            }
        }
        dots
    }
}

/// Sensor noise level from the median absolute horizontal pixel difference.
pub fn estimate_noise(image: &GrayImage) -> f64 {
    let (w, h) = image.dims();
    if w < 2 {
        return 0.0;
    }
    let mut diffs = Vec::with_capacity((w - 1) * h);
    for y in 0..h {
        for x in 1..w {
            diffs.push((image.get(x, y) - image.get(x - 1, y)).abs());
        }
    }
    let mid = diffs.len() / 2;
    let med = *diffs.select_nth_unstable_by(mid, f64::total_cmp).1;
    // Median of |a - b| for two independent normals is 0.6745 * sqrt(2) sigma.
    med / (0.674_489_75 * std::f64::consts::SQRT_2)
}

/// L2 norm of the 2-D kernel `G(s1) - G(s2)` built from the blur taps.
fn dog_noise_gain(s1: f64, s2: f64) -> f64 {
    let a = gaussian_taps(s1);
    let b = gaussian_taps(s2);
    let (ra, rb) = (a.len() as isize / 2, b.len() as isize / 2);
    let tap = |t: &[f64], r: isize, i: isize| t.get((i + r) as usize).copied().filter(|_| i + r >= 0).unwrap_or(0.0);
    let reach = ra.max(rb);
    let (mut aa, mut bb, mut ab) = (0.0, 0.0, 0.0);
    for i in -reach..=reach {
        let (x, y) = (tap(&a, ra, i), tap(&b, rb, i));
        aa += x * x;
        bb += y * y;
        ab += x * y;
    }
    (aa * aa + bb * bb - 2.0 * ab * ab).max(0.0).sqrt()
}

pub fn detect_dots(image: &GrayImage) -> Vec<Dot> {
    DotDetector::default().detect(image)
}

/// Index of the nearest site for every pixel of a `width x height` grid
/// (ties go to the lower index).
pub fn nearest_site_labels(sites: &[(usize, usize)], width: usize, height: usize) -> Result<Vec<usize>> {
    if sites.is_empty() {
        return Err(Error::invalid("nearest-site fill needs at least one site"));
    }
    const B: usize = 64;
    let bw = width.div_ceil(B);
    let bh = height.div_ceil(B);
    let mut buckets = vec![Vec::new(); bw * bh];
    for (i, &(x, y)) in sites.iter().enumerate() {
        buckets[(y / B).min(bh - 1) * bw + (x / B).min(bw - 1)].push(i);
    }
    let d2 = |i: usize, x: usize, y: usize| {
        let dx = sites[i].0 as f64 - x as f64;
        let dy = sites[i].1 as f64 - y as f64;
        dx * dx + dy * dy
    };
    let better = |cand: (f64, usize), best: (f64, usize)| cand.0 < best.0 || (cand.0 == best.0 && cand.1 < best.1);
    let mut labels = vec![0; width * height];
    for y in 0..height {
        let by = y / B;
        for x in 0..width {
            let bx = x / B;
            let mut best = (f64::INFINITY, usize::MAX);
            for j in by.saturating_sub(1)..=(by + 1).min(bh - 1) {
                for i in bx.saturating_sub(1)..=(bx + 1).min(bw - 1) {
                    for &s in &buckets[j * bw + i] {
                        let c = (d2(s, x, y), s);
                        if better(c, best) {
                            best = c;
                        }
                    }
                }
            }
            // Anything outside the 3x3 block is at least B away.
            if best.0 > (B * B) as f64 {
                for s in 0..sites.len() {
                    let c = (d2(s, x, y), s);
                    if better(c, best) {
                        best = c;
                    }
                }
            }
            labels[y * width + x] = best.1;
        }
    }
    Ok(labels)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::optics::{stamp_spots, Spot};

    #[test]
    fn finds_isolated_spots() {
        let mut img = GrayImage::new(128, 96);
        let truth = [(20usize, 20usize), (90, 30), (50, 70)];
        let spots: Vec<Spot> = truth
            .iter()
            .map(|&(x, y)| Spot {
                x: x as f64 + 0.5,
                y: y as f64 + 0.5,
                amplitude: 0.5,
            })
            .collect();
        stamp_spots(&mut img, &spots, 3.0);
        let mut found: Vec<(usize, usize)> = detect_dots(&img).iter().map(|d| (d.x, d.y)).collect();
        found.sort();
        let mut want = truth.to_vec();
        want.sort();
        assert_eq!(found, want);
    }

    #[test]
    fn black_image_has_no_dots() {
        assert!(detect_dots(&GrayImage::new(64, 64)).is_empty());
    }

    #[test]
    fn nearest_labels_match_brute_force() {
        let sites = [(3, 4), (200, 10), (100, 150), (10, 190), (199, 199)];
        let (w, h) = (210, 205);
        let labels = nearest_site_labels(&sites, w, h).unwrap();
        for y in 0..h {
            for x in 0..w {
                let mut best = (i64::MAX, 0);
                for (i, &(sx, sy)) in sites.iter().enumerate() {
                    let d = (sx as i64 - x as i64).pow(2) + (sy as i64 - y as i64).pow(2);
                    if d < best.0 {
                        best = (d, i);
                    }
                }
                assert_eq!(labels[y * w + x], best.1, "pixel ({x},{y})");
            }
        }
    }
}
