//! Closed-loop trials: sense, estimate, segment, command, step.

use std::collections::VecDeque;
use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::forest::corridor;
use super::geometry::{Vec3, WorldScene};
use super::robot::{step, RobotState, SpeedLimits};
use super::sensor::SensorModel;
use crate::error::{Error, Result};
use crate::estimation::DepthEstimator;
use crate::imagery::BinaryMask;
use crate::navigation::{navigate, potential_field_cmd, NavCommand, NavConfig};
use crate::seed;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimConfig {
    /// Control and perception period, seconds.
    pub dt: f64,
    /// Frames between capture and the command that uses them.
    pub latency_frames: usize,
    pub timeout_s: f64,
    pub body_radius: f64,
    pub limits: SpeedLimits,
    /// Master seed for per-frame sensor noise.
    pub seed: u64,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            dt: 1.0 / 20.0,
            latency_frames: 1,
            timeout_s: 40.0,
            body_radius: 0.15,
            limits: SpeedLimits::default(),
            seed: 0,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::invalid("dt must be > 0"));
        }
        if !(self.timeout_s > 0.0 && self.timeout_s.is_finite()) {
            return Err(Error::invalid("timeout must be > 0"));
        }
        if !(self.body_radius > 0.0 && self.body_radius.is_finite()) {
            return Err(Error::invalid("body radius must be > 0"));
        }
        let l = self.limits;
        if !(l.forward > 0.0 && l.lateral > 0.0 && l.vertical > 0.0) {
            return Err(Error::invalid("speed limits must be > 0"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FailureKind {
    None,
    Collision,
    OutOfBounds,
    Timeout,
}

impl FailureKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            FailureKind::None => "none",
            FailureKind::Collision => "collision",
            FailureKind::OutOfBounds => "out_of_bounds",
            FailureKind::Timeout => "timeout",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PathPoint {
    pub t: f64,
    pub state: RobotState,
    /// Clearance between the body and the nearest obstacle surface.
    pub clearance: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrialResult {
    pub success: bool,
    pub failure_kind: FailureKind,
    pub path: Vec<PathPoint>,
    /// Command applied at each step, stamped with the step start time.
    pub commands: Vec<(f64, NavCommand)>,
    pub min_clearance: f64,
    pub steps: usize,
}

impl TrialResult {
    pub fn commands_csv(&self) -> String {
        let mut s = format!("{}\n", NavCommand::CSV_HEADER);
        for (t, c) in &self.commands {
            s.push_str(&c.csv_row(*t));
            s.push('\n');
        }
        s
    }

    pub fn path_csv(&self) -> String {
        let mut s = String::from("t,x,y,z,yaw,clearance\n");
        for p in &self.path {
            let q = p.state.position;
            let _ = writeln!(s, "{},{},{},{},{},{}", p.t, q.x, q.y, q.z, p.state.yaw, p.clearance);
        }
        s
    }
}

/// Substep length for continuous collision checks, meters.
const COLLISION_STEP: f64 = 0.01;

/// Flies one trial from the corridor start toward the goal plane.
pub fn run_trial(
    scene: &WorldScene,
    sensor: &SensorModel,
    estimator: &dyn DepthEstimator,
    nav: &NavConfig,
    sim: &SimConfig,
) -> Result<TrialResult> {
    nav.validate()?;
    sim.validate()?;
    let (start, goal) = corridor(&scene.bounds);
    let mut state = RobotState::new(start, 0.0, sim.body_radius)?;
    let clearance = |p: Vec3| scene.clearance(p) - sim.body_radius;
    let mut min_clearance = clearance(start);
    let mut path = vec![PathPoint {
        t: 0.0,
        state,
        clearance: min_clearance,
    }];
    let mut commands = Vec::new();
    let mut in_flight: VecDeque<NavCommand> = VecDeque::new();
    let mut current = NavCommand::default();
    let (w, h) = (sensor.cfg.width, sensor.cfg.height);
    let max_steps = (sim.timeout_s / sim.dt).ceil() as usize;
    let mut steps = 0;
    let failure = loop {
        if min_clearance < 0.0 {
            break FailureKind::Collision;
        }
        if !scene.bounds.contains(state.position) {
            break FailureKind::OutOfBounds;
        }
        if state.position.x >= goal.x {
            break FailureKind::None;
        }
        if steps >= max_steps {
            break FailureKind::Timeout;
        }
        let t = steps as f64 * sim.dt;
        let image = sensor.render(scene, &state, seed::derive_seed(sim.seed, steps as u64))?;
        let cmd = match estimator.estimate(&image) {
            Ok(est) => navigate(&est, nav),
            Err(Error::NoStructuredLight) => potential_field_cmd(&BinaryMask::new(w, h), nav),
            Err(e) => return Err(e),
        };
        in_flight.push_back(cmd);
        if in_flight.len() > sim.latency_frames {
            current = in_flight.pop_front().expect("non-empty queue");
        }
        commands.push((t, current));
        let next = step(&state, &current, sim.dt, &sim.limits);
        let delta = next.position - state.position;
        let subs = ((delta.norm() / COLLISION_STEP).ceil() as usize).max(1);
        let mut end = next;
        let mut end_clear = f64::INFINITY;
        for s in 1..=subs {
            let p = state.position + delta * (s as f64 / subs as f64);
            let c = clearance(p);
            end_clear = c;
            if c < 0.0 {
                end.position = p;
                break;
            }
        }
        min_clearance = min_clearance.min(end_clear);
        state = end;
        steps += 1;
        path.push(PathPoint {
            t: steps as f64 * sim.dt,
            state,
            clearance: end_clear,
        });
    };
    Ok(TrialResult {
        success: failure == FailureKind::None,
        failure_kind: failure,
        path,
        commands,
        min_clearance,
        steps,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct BatchResult {
    pub success_rate: f64,
    /// Noise seed used by each trial, in scene order.
    pub seeds: Vec<u64>,
    pub per_trial: Vec<TrialResult>,
}

pub const SUMMARY_HEADER: &str = "seed,success,failure_kind,min_clearance,steps";

impl BatchResult {
    pub fn summary_csv(&self) -> String {
        let mut s = format!("{SUMMARY_HEADER}\n");
        for (seed, r) in self.seeds.iter().zip(&self.per_trial) {
            let _ = writeln!(s, "{seed},{},{},{},{}", r.success, r.failure_kind.as_str(), r.min_clearance, r.steps);
        }
        s
    }
}

/// Runs one trial per scene; trial `i` draws its noise from
/// `derive_seed(sim.seed, i)`.
pub fn run_batch(
    scenes: &[WorldScene],
    sensor: &SensorModel,
    estimator: &dyn DepthEstimator,
    nav: &NavConfig,
    sim: &SimConfig,
) -> Result<BatchResult> {
    if scenes.is_empty() {
        return Err(Error::invalid("run_batch needs at least one scene"));
    }
    let seeds: Vec<u64> = (0..scenes.len() as u64).map(|i| seed::derive_seed(sim.seed, i)).collect();
    let per_trial = scenes
        .par_iter()
        .zip(&seeds)
        .map(|(scene, s)| {
            let cfg = SimConfig { seed: *s, ..*sim };
            run_trial(scene, sensor, estimator, nav, &cfg)
        })
        .collect::<Result<Vec<_>>>()?;
    let wins = per_trial.iter().filter(|r| r.success).count();
    Ok(BatchResult {
        success_rate: wins as f64 / scenes.len() as f64,
        seeds,
        per_trial,
    })
}
