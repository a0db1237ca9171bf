//! Reactive obstacle dodging: threshold a depth estimate into a foreground
//! mask, then turn the mask into a velocity command with a single aggregate
//! repulsive force.
//!
//! Body axes are forward, right, down, so `v_lateral > 0` moves right and
//! `v_vertical > 0` moves down, matching image x and y.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimation::DepthEstimate;
use crate::imagery::BinaryMask;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NavConfig {
    /// Pixels nearer than this are foreground (meters).
    pub dodge_distance: f64,
    pub forward_speed: f64,
    pub repulse_gain: f64,
    pub max_lateral: f64,
    pub max_vertical: f64,
    /// Foreground fractions below this give a pure forward command.
    pub fg_area_deadband: f64,
    /// Pixels whose log-variance exceeds this count as foreground.
    pub logvar_cap: f64,
    /// Forward speed with the whole frame in the foreground, as a fraction
    /// of `forward_speed`.
    pub creep_fraction: f64,
}

impl Default for NavConfig {
    fn default() -> Self {
        Self {
            dodge_distance: 1.0,
            forward_speed: 1.0,
            repulse_gain: 4.0,
            max_lateral: 1.0,
            max_vertical: 0.5,
            fg_area_deadband: 0.01,
            logvar_cap: 10.0,
            creep_fraction: 0.1,
        }
    }
}

impl NavConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("dodge_distance", self.dodge_distance),
            ("forward_speed", self.forward_speed),
            ("repulse_gain", self.repulse_gain),
            ("max_lateral", self.max_lateral),
            ("max_vertical", self.max_vertical),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::invalid(format!("{name} must be finite and > 0, got {v}")));
            }
        }
        if !(0.0..1.0).contains(&self.fg_area_deadband) {
            return Err(Error::invalid("fg_area_deadband must lie in [0, 1)"));
        }
        if !(0.0..=1.0).contains(&self.creep_fraction) {
            return Err(Error::invalid("creep_fraction must lie in [0, 1]"));
        }
        if self.logvar_cap.is_nan() {
            return Err(Error::invalid("logvar_cap must not be NaN"));
        }
        Ok(())
    }
}

/// Body-frame velocity setpoint, m/s.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct NavCommand {
    pub v_forward: f64,
    pub v_lateral: f64,
    pub v_vertical: f64,
}

impl NavCommand {
    pub const CSV_HEADER: &'static str = "t,vx,vy,vz";

    pub fn csv_row(&self, t: f64) -> String {
        format!("{t},{},{},{}", self.v_forward, self.v_lateral, self.v_vertical)
    }
}

/// Foreground = nearer than `z_threshold` or less certain than `logvar_cap`.
pub fn segment_fg_bg(est: &DepthEstimate, z_threshold: f64, logvar_cap: f64) -> BinaryMask {
    let data = est
        .depth
        .data()
        .iter()
        .zip(&est.log_variance)
        .map(|(z, lv)| *z < z_threshold || *lv > logvar_cap)
        .collect();
    BinaryMask::from_vec(est.width(), est.height(), data).expect("estimate grids agree")
}

/// Potential-field command from a foreground mask.
///
/// The repulsive force has magnitude `repulse_gain * area` and points from
/// the foreground centroid toward the image center. A centroid exactly at
/// the center pushes right and up. Forward speed falls linearly with area
/// down to the creep speed at full coverage.
pub fn potential_field_cmd(fg: &BinaryMask, cfg: &NavConfig) -> NavCommand {
    let (w, h) = fg.dims();
    let mut count: i64 = 0;
    let (mut sx, mut sy) = (0i64, 0i64);
    for y in 0..h {
        for x in 0..w {
            if fg.get(x, y) {
                count += 1;
                sx += x as i64;
                sy += y as i64;
            }
        }
    }
    let area = count as f64 / (w * h).max(1) as f64;
    if count == 0 || area < cfg.fg_area_deadband {
        return NavCommand {
            v_forward: cfg.forward_speed,
            v_lateral: 0.0,
            v_vertical: 0.0,
        };
    }
    // Centroid offsets from the image center in units of the half-frame,
    // from exact integer numerators so mirrored masks give negated values.
    let u = (2 * sx - count * (w as i64 - 1)) as f64 / (count as f64 * w as f64);
    let v = (2 * sy - count * (h as i64 - 1)) as f64 / (count as f64 * h as f64);
    let (dx, dy) = if u == 0.0 && v == 0.0 {
        (std::f64::consts::FRAC_1_SQRT_2, -std::f64::consts::FRAC_1_SQRT_2)
    } else {
        let n = u.hypot(v);
        (-u / n, -v / n)
    };
    let force = cfg.repulse_gain * area;
    NavCommand {
        v_forward: cfg.forward_speed * (1.0 - (1.0 - cfg.creep_fraction) * area),
        v_lateral: (force * dx).clamp(-cfg.max_lateral, cfg.max_lateral),
        v_vertical: (force * dy).clamp(-cfg.max_vertical, cfg.max_vertical),
    }
}

/// Segments an estimate and turns it into a command.
pub fn navigate(est: &DepthEstimate, cfg: &NavConfig) -> NavCommand {
    potential_field_cmd(&segment_fg_bg(est, cfg.dodge_distance, cfg.logvar_cap), cfg)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::imagery::DepthMap;

    fn est(f: impl FnMut(usize, usize) -> f64) -> DepthEstimate {
        let d = DepthMap::from_fn(64, 48, f).unwrap();
        DepthEstimate::new(d, vec![0.0; 64 * 48]).unwrap()
    }

    #[test]
    fn thresholding_examples() {
        assert_eq!(segment_fg_bg(&est(|_, _| 2.0), 1.0, 10.0).count(), 0);
        assert_eq!(segment_fg_bg(&est(|_, _| 0.5), 1.0, 10.0).count(), 64 * 48);
        let m = segment_fg_bg(&est(|x, _| if x < 32 { 0.5 } else { 2.0 }), 1.0, 10.0);
        assert_eq!(m, BinaryMask::from_fn(64, 48, |x, _| x < 32));
    }

    #[test]
    fn uncertain_pixels_are_foreground() {
        let mut e = est(|_, _| 2.0);
        e.log_variance[5] = 11.0;
        let m = segment_fg_bg(&e, 1.0, 10.0);
        assert_eq!(m.count(), 1);
        assert!(m.get(5, 0));
    }

    #[test]
    fn empty_mask_goes_straight() {
        let cfg = NavConfig::default();
        let c = potential_field_cmd(&BinaryMask::new(64, 48), &cfg);
        assert_eq!(c, NavCommand { v_forward: 1.0, v_lateral: 0.0, v_vertical: 0.0 });
    }

    #[test]
    fn left_obstacle_pushes_right() {
        let c = potential_field_cmd(&BinaryMask::from_fn(64, 48, |x, _| x < 20), &NavConfig::default());
        assert!(c.v_lateral > 0.0);
        assert_eq!(c.v_vertical, 0.0);
    }

    #[test]
    fn full_frame_saturates_and_creeps() {
        let cfg = NavConfig::default();
        let c = potential_field_cmd(&BinaryMask::filled(64, 48, true), &cfg);
        // force 4 along (1, -1)/sqrt(2) exceeds both clamps; forward 1 - 0.9.
        assert_eq!(c.v_lateral, cfg.max_lateral);
        assert_eq!(c.v_vertical, -cfg.max_vertical);
        assert!((c.v_forward - 0.1).abs() < 1e-12);
    }

    #[test]
    fn csv_row_format() {
        let c = NavCommand { v_forward: 1.0, v_lateral: -0.5, v_vertical: 0.25 };
        assert_eq!(c.csv_row(0.05), "0.05,1,-0.5,0.25");
    }
}
