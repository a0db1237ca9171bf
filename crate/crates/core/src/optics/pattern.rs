use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seed;

/// Parameters of the projected random dot pattern.
///
/// Dots are drawn once inside a square tile (toroidal Poisson-disk sampling)
/// and the tile is repeated across the projector field, the way a
/// diffractive dot projector replicates its base pattern. The projector
/// field is `overscan` times wider than the camera field so that the camera
/// never sees an unlit border.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PatternSpec {
    pub tile_px: usize,
    pub dots_per_tile: usize,
    pub min_separation_px: f64,
    pub dot_radius_px: f64,
    pub intensity: f64,
    pub overscan: f64,
}

impl Default for PatternSpec {
    fn default() -> Self {
        Self {
            tile_px: 64,
            dots_per_tile: 5,
            min_separation_px: 24.0,
            dot_radius_px: 3.0,
            intensity: 1.0,
            overscan: 1.5,
        }
    }
}

impl PatternSpec {
    pub fn validate(&self) -> Result<()> {
        if self.tile_px == 0 || self.dots_per_tile == 0 {
            return Err(Error::invalid("pattern tile size and dot count must be positive"));
        }
        if !(self.dot_radius_px > 0.0 && self.min_separation_px >= 2.0 * self.dot_radius_px) {
            return Err(Error::invalid(format!(
                "dot separation {} must be at least twice the radius {}",
                self.min_separation_px, self.dot_radius_px
            )));
        }
        if !(self.intensity > 0.0 && self.intensity <= 1.0) {
            return Err(Error::invalid(format!("dot intensity {} outside (0, 1]", self.intensity)));
        }
        if !(self.overscan >= 1.0) {
            return Err(Error::invalid(format!("overscan {} must be >= 1", self.overscan)));
        }
        Ok(())
    }
}

/// Dot positions in normalized projector coordinates `[0, 1]^2`.
#[derive(Debug, Clone, PartialEq)]
pub struct DotPattern {
    dots: Vec<(f64, f64)>,
    dot_radius_px: f64,
    intensity: f64,
    seed: u64,
    overscan: f64,
}

impl DotPattern {
    pub fn new(dots: Vec<(f64, f64)>, dot_radius_px: f64, intensity: f64, seed: u64, overscan: f64) -> Result<Self> {
        if let Some((u, v)) = dots.iter().find(|(u, v)| !((0.0..=1.0).contains(u) && (0.0..=1.0).contains(v))) {
            return Err(Error::invalid(format!("dot ({u}, {v}) outside [0, 1]^2")));
        }
        if !(dot_radius_px > 0.0 && intensity > 0.0 && intensity <= 1.0 && overscan >= 1.0) {
            return Err(Error::invalid("dot radius, intensity or overscan out of range"));
        }
        Ok(Self {
            dots,
            dot_radius_px,
            intensity,
            seed,
            overscan,
        })
    }

    pub fn empty(spec: &PatternSpec) -> Self {
        Self {
            dots: Vec::new(),
            dot_radius_px: spec.dot_radius_px,
            intensity: spec.intensity,
            seed: 0,
            overscan: spec.overscan,
        }
    }

    /// Random tiled pattern for a `width x height` camera. Tile origins are
    /// aligned with camera pixel 0 and dots sit on pixel centers.
    pub fn generate(seed: u64, spec: &PatternSpec, width: usize, height: usize) -> Result<Self> {
        spec.validate()?;
        let tile = spec.tile_px as f64;
        let mut rng = seed::rng(seed);
        let mut base: Vec<(f64, f64)> = Vec::new();
        let sep2 = spec.min_separation_px * spec.min_separation_px;
        let mut attempts = 0;
        while base.len() < spec.dots_per_tile && attempts < 20_000 {
            attempts += 1;
            let p = (
                rng.random_range(0..spec.tile_px) as f64,
                rng.random_range(0..spec.tile_px) as f64,
            );
            let ok = base.iter().all(|q| {
                let dx = (p.0 - q.0).abs();
                let dy = (p.1 - q.1).abs();
                let dx = dx.min(tile - dx);
                let dy = dy.min(tile - dy);
                dx * dx + dy * dy >= sep2
            });
            if ok {
                base.push(p);
            }
        }

        let pat = Self {
            dots: Vec::new(),
            dot_radius_px: spec.dot_radius_px,
            intensity: spec.intensity,
            seed,
            overscan: spec.overscan,
        };
        let (w, h) = (width as f64, height as f64);
        let x_lo = w / 2.0 - w * spec.overscan / 2.0;
        let x_hi = w / 2.0 + w * spec.overscan / 2.0;
        let y_lo = h / 2.0 - h * spec.overscan / 2.0;
        let y_hi = h / 2.0 + h * spec.overscan / 2.0;
        let kx0 = (x_lo / tile).floor() as i64 - 1;
        let kx1 = (x_hi / tile).ceil() as i64 + 1;
        let ky0 = (y_lo / tile).floor() as i64 - 1;
        let ky1 = (y_hi / tile).ceil() as i64 + 1;
        let mut dots = Vec::new();
        for ky in ky0..=ky1 {
            for kx in kx0..=kx1 {
                for (bx, by) in &base {
                    let x = kx as f64 * tile + bx + 0.5;
                    let y = ky as f64 * tile + by + 0.5;
                    if x >= x_lo && x < x_hi && y >= y_lo && y < y_hi {
                        dots.push(pat.from_pixel(x, y, width, height));
                    }
                }
            }
        }
        Ok(Self { dots, ..pat })
    }

    /// Camera pixel coordinates (continuous) of a projector coordinate for a
    /// co-located projector.
    pub fn to_pixel(&self, u: f64, v: f64, width: usize, height: usize) -> (f64, f64) {
        let (w, h) = (width as f64, height as f64);
        ((u - 0.5) * w * self.overscan + w / 2.0, (v - 0.5) * h * self.overscan + h / 2.0)
    }

    pub fn from_pixel(&self, x: f64, y: f64, width: usize, height: usize) -> (f64, f64) {
        let (w, h) = (width as f64, height as f64);
        ((x - w / 2.0) / (w * self.overscan) + 0.5, (y - h / 2.0) / (h * self.overscan) + 0.5)
    }

    /// Dot centers in camera pixel coordinates for a co-located projector.
    pub fn pixel_positions(&self, width: usize, height: usize) -> Vec<(f64, f64)> {
        self.dots.iter().map(|(u, v)| self.to_pixel(*u, *v, width, height)).collect()
    }

    /// The same pattern moved by `(dx, dy)` camera pixels; dots leaving the
    /// projector field are dropped.
    pub fn shifted_px(&self, dx: f64, dy: f64, width: usize, height: usize) -> Self {
        let dots = self
            .dots
            .iter()
            .map(|(u, v)| {
                let (x, y) = self.to_pixel(*u, *v, width, height);
                self.from_pixel(x + dx, y + dy, width, height)
            })
            .filter(|(u, v)| (0.0..=1.0).contains(u) && (0.0..=1.0).contains(v))
            .collect();
        Self { dots, ..self.clone() }
    }

    pub fn dots(&self) -> &[(f64, f64)] {
        &self.dots
    }

    pub fn len(&self) -> usize {
        self.dots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dots.is_empty()
    }

    pub fn dot_radius_px(&self) -> f64 {
        self.dot_radius_px
    }

    pub fn intensity(&self) -> f64 {
        self.intensity
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn overscan(&self) -> f64 {
        self.overscan
    }

    /// Minimum pairwise separation in camera pixels (infinite below two dots).
    pub fn min_separation_px(&self, width: usize, height: usize) -> f64 {
        let p = self.pixel_positions(width, height);
        let mut best = f64::INFINITY;
        for i in 0..p.len() {
            for j in i + 1..p.len() {
                let d = ((p[i].0 - p[j].0).powi(2) + (p[i].1 - p[j].1).powi(2)).sqrt();
                best = best.min(d);
            }
        }
        best
    }

    pub fn to_text(&self) -> String {
        let mut s = format!(
            "seed={} radius_px={} intensity={} overscan={}\n",
            self.seed, self.dot_radius_px, self.intensity, self.overscan
        );
        for (u, v) in &self.dots {
            s.push_str(&format!("{u} {v}\n"));
        }
        s
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut lines = text.split_inclusive('\n');
        let header = lines.next().unwrap_or("");
        let mut seed = None;
        let mut radius = None;
        let mut intensity = 1.0;
        let mut overscan = 1.0;
        for field in header.split_whitespace() {
            let (k, v) = field.split_once('=').ok_or_else(|| Error::Parse {
                offset: 0,
                message: format!("bad header field {field:?}"),
            })?;
            let bad = || Error::Parse {
                offset: 0,
                message: format!("bad value for {k}: {v:?}"),
            };
            match k {
                "seed" => seed = Some(v.parse::<u64>().map_err(|_| bad())?),
                "radius_px" => radius = Some(v.parse::<f64>().map_err(|_| bad())?),
                "intensity" => intensity = v.parse::<f64>().map_err(|_| bad())?,
                "overscan" => overscan = v.parse::<f64>().map_err(|_| bad())?,
                _ => {
                    return Err(Error::Parse {
                        offset: 0,
                        message: format!("unknown header field {k:?}"),
                    })
                }
            }
        }
        let (seed, radius) = match (seed, radius) {
            (Some(s), Some(r)) => (s, r),
            _ => {
                return Err(Error::Parse {
                    offset: 0,
                    message: "pattern header needs seed= and radius_px=".into(),
                })
            }
        };
        let mut offset = header.len();
        let mut dots = Vec::new();
        for line in lines {
            let t = line.trim();
            if !t.is_empty() {
                let mut it = t.split_whitespace().map(str::parse::<f64>);
                match (it.next(), it.next(), it.next()) {
                    (Some(Ok(u)), Some(Ok(v)), None) => dots.push((u, v)),
                    _ => {
                        return Err(Error::Parse {
                            offset,
                            message: format!("bad dot line {t:?}"),
                        })
                    }
                }
            }
            offset += line.len();
        }
        Self::new(dots, radius, intensity, seed, overscan)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_text()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn generated_pattern_respects_separation_and_bounds() {
        let spec = PatternSpec::default();
        let p = DotPattern::generate(7, &spec, 640, 480).unwrap();
        assert!(p.len() > 300);
        assert!(p.min_separation_px(640, 480) >= spec.min_separation_px - 1e-6);
        assert!(p.min_separation_px(640, 480) >= 2.0 * spec.dot_radius_px);
    }

    #[test]
    fn pattern_is_tile_periodic_in_camera_pixels() {
        let p = DotPattern::generate(3, &PatternSpec::default(), 640, 480).unwrap();
        let px = p.pixel_positions(640, 480);
        let inside: Vec<_> = px.iter().filter(|(x, y)| *x < 576.0 && *y < 400.0 && *x >= 0.0 && *y >= 0.0).collect();
        for (x, y) in inside {
            let found = px.iter().any(|(a, b)| (a - (x + 64.0)).abs() < 1e-6 && (b - y).abs() < 1e-6);
            assert!(found, "no periodic copy of ({x}, {y})");
        }
    }

    #[test]
    fn text_round_trip_and_determinism() {
        let spec = PatternSpec::default();
        let a = DotPattern::generate(11, &spec, 640, 480).unwrap();
        let b = DotPattern::generate(11, &spec, 640, 480).unwrap();
        assert_eq!(a, b);
        assert_eq!(DotPattern::parse(&a.to_text()).unwrap(), a);
    }

    #[test]
    fn parse_rejects_out_of_range() {
        assert!(DotPattern::parse("seed=1 radius_px=2\n0.5 1.5\n").is_err());
        assert!(DotPattern::parse("radius_px=2\n0.5 0.5\n").is_err());
    }
}
