use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Thin-lens camera parameters.
///
/// The default pixel pitch is a resolution normalization: it makes the blur
/// circle at 2.5 m (focus 0.5 m, f/1.4) span about 21 px on a 640x480 frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OpticalConfig {
    pub focal_length_m: f64,
    pub f_number: f64,
    pub focus_distance_m: f64,
    pub pixel_pitch_m: f64,
    pub width: usize,
    pub height: usize,
}

impl Default for OpticalConfig {
    fn default() -> Self {
        Self {
            focal_length_m: 0.016,
            f_number: 1.4,
            focus_distance_m: 0.5,
            pixel_pitch_m: 1.44e-5,
            width: 640,
            height: 480,
        }
    }
}

impl OpticalConfig {
    pub const PINHOLE_F_NUMBER: f64 = 8.0;

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::invalid(m));
        if !(self.focal_length_m.is_finite() && self.focal_length_m > 0.0) {
            return bad(format!("focal length must be > 0, got {}", self.focal_length_m));
        }
        if !(self.f_number.is_finite() && self.f_number > 0.0) {
            return bad(format!("f-number must be > 0, got {}", self.f_number));
        }
        if !(self.focus_distance_m.is_finite() && self.focus_distance_m > self.focal_length_m) {
            return bad(format!(
                "focus distance {} must exceed focal length {}",
                self.focus_distance_m, self.focal_length_m
            ));
        }
        if !(self.pixel_pitch_m.is_finite() && self.pixel_pitch_m > 0.0) {
            return bad(format!("pixel pitch must be > 0, got {}", self.pixel_pitch_m));
        }
        if self.width == 0 || self.height == 0 {
            return bad(format!("sensor size {}x{} has a zero side", self.width, self.height));
        }
        Ok(())
    }

    pub fn with_f_number(mut self, n: f64) -> Self {
        self.f_number = n;
        self
    }

    pub fn with_focus(mut self, z: f64) -> Self {
        self.focus_distance_m = z;
        self
    }

    /// Focal length expressed in pixels.
    pub fn focal_length_px(&self) -> f64 {
        self.focal_length_m / self.pixel_pitch_m
    }

    /// Principal point in continuous pixel coordinates (pixel `i` spans `[i, i+1)`).
    pub fn principal_point(&self) -> (f64, f64) {
        (self.width as f64 / 2.0, self.height as f64 / 2.0)
    }
}

/// Blur circle diameter on the sensor, in meters:
/// `f^2 |Z - Z_f| / (N (Z_f - f) Z)`.
pub fn blur_diameter(cfg: &OpticalConfig, z: f64) -> Result<f64> {
    if !(z.is_finite() && z > 0.0) {
        return Err(Error::invalid(format!("depth must be > 0, got {z}")));
    }
    let f = cfg.focal_length_m;
    let zf = cfg.focus_distance_m;
    Ok(f * f * (z - zf).abs() / (cfg.f_number * (zf - f) * z))
}

/// Blur circle diameter in pixels.
pub fn blur_diameter_px(cfg: &OpticalConfig, z: f64) -> Result<f64> {
    Ok(blur_diameter(cfg, z)? / cfg.pixel_pitch_m)
}
