//! Body-mounted camera and dot projector: ray-cast depth and structured-light
//! images of a world scene.
//!
//! Camera axes are x right, y down, z forward (along the body forward axis).

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::geometry::{Vec3, WorldScene};
use super::robot::RobotState;
use crate::calibration::DepthPlanes;
use crate::datagen::{procedural_background, BACKGROUND_MAX};
use crate::error::{Error, Result};
use crate::imagery::{add_gaussian_noise, convolve2d, DepthMap, GrayImage};
use crate::optics::{falloff, plane_kernels, stamp_spots, ApertureMask, DotPattern, OpticalConfig, Spot};
use crate::seed;

/// Camera-frame vector in world coordinates.
pub fn camera_to_world(robot: &RobotState, v: Vec3) -> Vec3 {
    robot.body_to_world(Vec3::new(v.z, v.x, v.y))
}

/// World vector in camera coordinates.
pub fn world_to_camera(robot: &RobotState, v: Vec3) -> Vec3 {
    let (s, c) = robot.yaw.sin_cos();
    let fwd = c * v.x + s * v.y;
    let right = -s * v.x + c * v.y;
    Vec3::new(right, v.z, fwd)
}

/// Unnormalized camera-frame ray through continuous pixel `(x, y)`.
fn pixel_ray(cfg: &OpticalConfig, x: f64, y: f64) -> Vec3 {
    let f = cfg.focal_length_px();
    let (cx, cy) = cfg.principal_point();
    Vec3::new((x - cx) / f, (y - cy) / f, 1.0)
}

/// Depth along the optical axis through each pixel center; rays that hit
/// nothing, or hit beyond `far_cap`, read `far_cap`.
pub fn raycast_depth(scene: &WorldScene, robot: &RobotState, cfg: &OpticalConfig, far_cap: f64) -> Result<DepthMap> {
    cfg.validate()?;
    if !(far_cap > 0.0 && far_cap.is_finite()) {
        return Err(Error::invalid(format!("far cap must be > 0, got {far_cap}")));
    }
    let (w, h) = (cfg.width, cfg.height);
    let data: Vec<f64> = (0..w * h)
        .into_par_iter()
        .map(|i| {
            let r = pixel_ray(cfg, (i % w) as f64 + 0.5, (i / w) as f64 + 0.5);
            let n = r.norm();
            let dir = camera_to_world(robot, r * (1.0 / n));
            scene.raycast(robot.position, dir).map_or(far_cap, |hit| (hit.t / n).min(far_cap))
        })
        .collect();
    DepthMap::from_vec(w, h, data)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SensorSpec {
    /// Peak ambient light (the dark floor).
    pub ambient_max: f64,
    pub noise_sigma: f64,
    /// Projector position in the camera frame, meters.
    pub projector_offset: Vec3,
}

/// Dimmest allowed scene: ambient light never exceeds this.
pub const DARKNESS_FLOOR: f64 = 0.002;

impl Default for SensorSpec {
    fn default() -> Self {
        Self {
            ambient_max: DARKNESS_FLOOR,
            noise_sigma: 0.001,
            projector_offset: Vec3::ZERO,
        }
    }
}

impl SensorSpec {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=DARKNESS_FLOOR).contains(&self.ambient_max) {
            return Err(Error::invalid(format!("ambient {} must lie in [0, {DARKNESS_FLOOR}]", self.ambient_max)));
        }
        if !(self.noise_sigma >= 0.0 && self.noise_sigma.is_finite()) {
            return Err(Error::invalid("noise sigma must be finite and >= 0"));
        }
        if !self.projector_offset.is_finite() {
            return Err(Error::invalid("projector offset must be finite"));
        }
        Ok(())
    }
}

/// Camera optics, projector pattern and the per-plane blur kernels.
#[derive(Debug, Clone)]
pub struct SensorModel {
    pub cfg: OpticalConfig,
    pub planes: DepthPlanes,
    pub pattern: DotPattern,
    pub spec: SensorSpec,
    kernels: Vec<GrayImage>,
    ambient: GrayImage,
}

/// A dot after projection into the camera.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProjectedDot {
    pub x: f64,
    pub y: f64,
    /// Depth of the lit surface along the optical axis.
    pub z: f64,
    pub plane: usize,
    pub amplitude: f64,
}

impl SensorModel {
    pub fn new(
        cfg: OpticalConfig,
        mask: &ApertureMask,
        pattern: DotPattern,
        planes: DepthPlanes,
        spec: SensorSpec,
        ambient_seed: u64,
    ) -> Result<Self> {
        cfg.validate()?;
        spec.validate()?;
        let kernels = plane_kernels(&cfg, mask, &planes)?;
        let ambient = procedural_background(ambient_seed, cfg.width, cfg.height).scaled(spec.ambient_max / BACKGROUND_MAX);
        Ok(Self {
            cfg,
            planes,
            pattern,
            spec,
            kernels,
            ambient,
        })
    }

    /// Dots that land on a surface visible to the camera.
    pub fn project_dots(&self, scene: &WorldScene, robot: &RobotState) -> Vec<ProjectedDot> {
        let (w, h) = (self.cfg.width as f64, self.cfg.height as f64);
        let f = self.cfg.focal_length_px();
        let (cx, cy) = self.cfg.principal_point();
        let offset = self.spec.projector_offset;
        let origin = robot.position + camera_to_world(robot, offset);
        let shifted = offset != Vec3::ZERO;
        self.pattern
            .pixel_positions(self.cfg.width, self.cfg.height)
            .par_iter()
            .filter_map(|&(u, v)| {
                let dir = camera_to_world(robot, pixel_ray(&self.cfg, u, v).normalized());
                let hit = scene.raycast(origin, dir)?;
                let rel = origin + dir * hit.t - robot.position;
                let pc = world_to_camera(robot, rel);
                if pc.z <= 1e-9 {
                    return None;
                }
                let (x, y) = (f * pc.x / pc.z + cx, f * pc.y / pc.z + cy);
                if x < -10.0 || y < -10.0 || x > w + 10.0 || y > h + 10.0 {
                    return None;
                }
                if shifted {
                    let dist = rel.norm();
                    let seen = scene.raycast(robot.position, rel * (1.0 / dist))?;
                    if seen.t < dist - 1e-6 * dist.max(1.0) - 1e-9 {
                        return None;
                    }
                }
                let reflectivity = scene.obstacles[hit.obstacle].reflectivity;
                Some(ProjectedDot {
                    x,
                    y,
                    z: pc.z,
                    plane: self.planes.nearest_index(pc.z),
                    amplitude: self.pattern.intensity() * falloff(pc.z) * reflectivity,
                })
            })
            .collect()
    }

    /// Noise-free image of the given dots (each blurred by its plane's
    /// kernel) plus ambient light.
    pub fn render_dots(&self, dots: &[ProjectedDot]) -> Result<GrayImage> {
        let (w, h) = (self.cfg.width, self.cfg.height);
        let mut out = self.ambient.clone();
        for (p, kernel) in self.kernels.iter().enumerate() {
            let spots: Vec<Spot> = dots
                .iter()
                .filter(|d| d.plane == p)
                .map(|d| Spot {
                    x: d.x,
                    y: d.y,
                    amplitude: d.amplitude,
                })
                .collect();
            if spots.is_empty() {
                continue;
            }
            let mut aif = GrayImage::new(w, h);
            stamp_spots(&mut aif, &spots, self.pattern.dot_radius_px());
            out.add_scaled(&convolve2d(&aif, kernel)?, 1.0)?;
        }
        Ok(out)
    }

    /// Sensor frame: projected dots, defocus, ambient floor and noise drawn
    /// from `frame_seed`, clamped to `[0, 1]`.
    pub fn render(&self, scene: &WorldScene, robot: &RobotState, frame_seed: u64) -> Result<GrayImage> {
        let mut img = self.render_dots(&self.project_dots(scene, robot))?;
        if self.spec.noise_sigma > 0.0 {
            img = add_gaussian_noise(&img, self.spec.noise_sigma, &mut seed::rng(frame_seed));
        }
        Ok(img.clamped())
    }
}

/// One-shot render with a freshly built sensor model.
#[allow(clippy::too_many_arguments)]
pub fn render_sensor_image(
    scene: &WorldScene,
    robot: &RobotState,
    projector_offset: Vec3,
    cfg: &OpticalConfig,
    mask: &ApertureMask,
    pattern: &DotPattern,
    planes: &DepthPlanes,
    frame_seed: u64,
) -> Result<GrayImage> {
    let spec = SensorSpec {
        projector_offset,
        ..SensorSpec::default()
    };
    SensorModel::new(*cfg, mask, pattern.clone(), planes.clone(), spec, frame_seed)?.render(scene, robot, frame_seed)
}
