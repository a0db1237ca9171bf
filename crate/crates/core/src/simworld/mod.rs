//! Closed-loop dark-world simulator: obstacle scenes, ray-cast depth,
//! structured-light rendering, kinematic stepping and batch trials.

mod forest;
mod geometry;
mod robot;
mod sensor;
mod trial;

pub use forest::{corridor, sample_forest, traversability, ObstacleMix, TraversabilitySpec, CLEAR_RADIUS, MIN_SPACING, ROPE_RADIUS};
pub use geometry::{Aabb, Hit, Obstacle, Shape, Vec3, WorldScene};
pub use robot::{step, RobotState, SpeedLimits};
pub use sensor::{
    camera_to_world, raycast_depth, render_sensor_image, world_to_camera, ProjectedDot, SensorModel, SensorSpec,
    DARKNESS_FLOOR,
};
pub use trial::{run_batch, run_trial, BatchResult, FailureKind, PathPoint, SimConfig, TrialResult, SUMMARY_HEADER};
