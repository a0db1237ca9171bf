//! First-order kinematic vehicle.

use serde::{Deserialize, Serialize};

use super::geometry::Vec3;
use crate::error::{Error, Result};
use crate::navigation::NavCommand;

/// Yaw turns the body forward axis from world +x toward world +y (a right
/// turn seen from above, since z points down).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RobotState {
    pub position: Vec3,
    pub yaw: f64,
    /// World-frame velocity of the last step.
    pub velocity: Vec3,
    pub body_radius: f64,
}

impl RobotState {
    pub fn new(position: Vec3, yaw: f64, body_radius: f64) -> Result<Self> {
        if !(body_radius > 0.0 && body_radius.is_finite()) {
            return Err(Error::invalid(format!("body radius must be > 0, got {body_radius}")));
        }
        Ok(Self {
            position,
            yaw,
            velocity: Vec3::ZERO,
            body_radius,
        })
    }

    /// Body (forward, right, down) vector in world coordinates.
    pub fn body_to_world(&self, v: Vec3) -> Vec3 {
        let (s, c) = self.yaw.sin_cos();
        Vec3::new(c * v.x - s * v.y, s * v.x + c * v.y, v.z)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SpeedLimits {
    pub forward: f64,
    pub lateral: f64,
    pub vertical: f64,
}

impl Default for SpeedLimits {
    fn default() -> Self {
        Self {
            forward: 3.5,
            lateral: 2.0,
            vertical: 1.0,
        }
    }
}

/// Moves the robot by the body-frame command for `dt` seconds.
pub fn step(robot: &RobotState, cmd: &NavCommand, dt: f64, limits: &SpeedLimits) -> RobotState {
    let body = Vec3::new(
        cmd.v_forward.clamp(-limits.forward, limits.forward),
        cmd.v_lateral.clamp(-limits.lateral, limits.lateral),
        cmd.v_vertical.clamp(-limits.vertical, limits.vertical),
    );
    let velocity = robot.body_to_world(body);
    RobotState {
        position: robot.position + velocity * dt,
        velocity,
        ..*robot
    }
}
