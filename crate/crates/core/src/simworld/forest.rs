//! Random obstacle fields and a transect-based traversability score.

use std::f64::consts::TAU;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::geometry::{Aabb, Obstacle, Shape, Vec3, WorldScene};
use crate::error::{Error, Result};
use crate::seed;

/// Rope radius of the dark-objects inventory (6.35 mm diameter).
pub const ROPE_RADIUS: f64 = 0.003175;

/// Horizontal radius kept free around the corridor start and goal.
pub const CLEAR_RADIUS: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ObstacleMix {
    /// Vertical poles of varied girth.
    Forest,
    /// Cuboids standing on the ground.
    Boxes,
    /// Low-reflectivity poles and boxes plus thin horizontal ropes.
    DarkObjects,
}

impl std::str::FromStr for ObstacleMix {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "forest" => Ok(Self::Forest),
            "boxes" => Ok(Self::Boxes),
            "dark_objects" => Ok(Self::DarkObjects),
            other => Err(Error::invalid(format!("unknown obstacle mix {other:?}; expected forest, boxes or dark_objects"))),
        }
    }
}

/// Start point and goal point: half a meter inside the near and far x
/// faces, centered in y and z.
pub fn corridor(bounds: &Aabb) -> (Vec3, Vec3) {
    let c = bounds.center();
    (Vec3::new(bounds.min.x + 0.5, c.y, c.z), Vec3::new(bounds.max.x - 0.5, c.y, c.z))
}

/// Minimum horizontal spacing between obstacle centers, meters.
pub const MIN_SPACING: f64 = 0.9;

fn horizontal_gap(a: Vec3, b: Vec3) -> f64 {
    (a.x - b.x).hypot(a.y - b.y)
}

/// Dart-throwing Poisson-disk field of `density` obstacles per square meter
/// of floor. Placement stops early if the disk constraint leaves no room.
pub fn sample_forest(seed: u64, bounds: Aabb, density: f64, mix: ObstacleMix) -> Result<WorldScene> {
    if !(density >= 0.0 && density.is_finite()) {
        return Err(Error::invalid(format!("density must be finite and >= 0, got {density}")));
    }
    let bounds = Aabb::new(bounds.min, bounds.max)?;
    let (start, goal) = corridor(&bounds);
    let area = (bounds.max.x - bounds.min.x) * (bounds.max.y - bounds.min.y);
    let target = (density * area).round() as usize;
    let height = -bounds.min.z;
    if target > 0 && !(bounds.max.z >= 0.0 && height > 0.5) {
        return Err(Error::invalid("bounds must contain the ground plane z = 0 and at least 0.5 m above it"));
    }
    let mut rng = seed::rng(seed);
    let mut centers: Vec<Vec3> = Vec::new();
    let mut obstacles = Vec::new();
    let mut attempts = 0;
    while centers.len() < target && attempts < 50 * target {
        attempts += 1;
        let reach = 0.45;
        let c = Vec3::new(
            rng.random_range(bounds.min.x + reach..bounds.max.x - reach),
            rng.random_range(bounds.min.y + reach..bounds.max.y - reach),
            0.0,
        );
        if horizontal_gap(c, start) < CLEAR_RADIUS + reach || horizontal_gap(c, goal) < CLEAR_RADIUS + reach {
            continue;
        }
        if centers.iter().any(|o| horizontal_gap(*o, c) < MIN_SPACING) {
            continue;
        }
        let dark = mix == ObstacleMix::DarkObjects;
        let refl = if dark { rng.random_range(0.02..0.1) } else { rng.random_range(0.3..1.0) };
        let rope_turn = dark && centers.len() % 4 == 0;
        let shape = if rope_turn {
            // Rope strung across y at a height near the corridor.
            let half = rng.random_range(0.4..0.45);
            let z = (start.z + rng.random_range(-0.5..0.5)).clamp(bounds.min.z + 0.1, -0.1);
            Shape::Capsule {
                a: Vec3::new(c.x, c.y - half, z),
                b: Vec3::new(c.x, c.y + half, z),
                radius: ROPE_RADIUS,
            }
        } else if mix == ObstacleMix::Boxes || (dark && rng.random_bool(0.5)) {
            let sx = rng.random_range(0.3..0.6);
            let sy = rng.random_range(0.3..0.6);
            let sz = rng.random_range(0.5..=1.0) * height;
            Shape::Box(Aabb::new(Vec3::new(c.x - sx / 2.0, c.y - sy / 2.0, -sz), Vec3::new(c.x + sx / 2.0, c.y + sy / 2.0, 0.0))?)
        } else {
            Shape::Cylinder {
                x: c.x,
                y: c.y,
                radius: rng.random_range(0.05..0.2),
                height,
            }
        };
        centers.push(c);
        obstacles.push(Obstacle::new(shape, refl)?);
    }
    WorldScene::new(bounds, obstacles)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TraversabilitySpec {
    pub transects: usize,
    /// Free paths are capped at this length, meters.
    pub max_range: f64,
    pub robot_diameter: f64,
    pub seed: u64,
}

impl Default for TraversabilitySpec {
    fn default() -> Self {
        Self {
            transects: 1000,
            max_range: 10.0,
            robot_diameter: 0.3,
            seed: 0,
        }
    }
}

/// Mean free path, in robot diameters, along horizontal transects from
/// uniform points in the bounds. The transects depend only on the bounds
/// and seed, so adding an obstacle can only lower the score. An empty scene
/// scores `max_range / robot_diameter`.
pub fn traversability(scene: &WorldScene, spec: &TraversabilitySpec) -> Result<f64> {
    if spec.transects == 0 || !(spec.max_range > 0.0) || !(spec.robot_diameter > 0.0) {
        return Err(Error::invalid("traversability needs transects, a positive range and a positive diameter"));
    }
    let b = scene.bounds;
    let mut rng = seed::rng(spec.seed);
    let mut total = 0.0;
    for _ in 0..spec.transects {
        let o = Vec3::new(
            rng.random_range(b.min.x..=b.max.x),
            rng.random_range(b.min.y..=b.max.y),
            rng.random_range(b.min.z..=b.max.z),
        );
        let a: f64 = rng.random_range(0.0..TAU);
        let d = Vec3::new(a.cos(), a.sin(), 0.0);
        total += scene.raycast(o, d).map_or(spec.max_range, |h| h.t.min(spec.max_range));
    }
    Ok(total / spec.transects as f64 / spec.robot_diameter)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bounds() -> Aabb {
        Aabb::new(Vec3::new(0.0, -4.0, -3.0), Vec3::new(12.0, 4.0, 0.0)).unwrap()
    }

    #[test]
    fn zero_density_is_empty() {
        assert!(sample_forest(1, bounds(), 0.0, ObstacleMix::Forest).unwrap().obstacles.is_empty());
    }

    #[test]
    fn deterministic_and_clear_corridor_ends() {
        let a = sample_forest(5, bounds(), 0.3, ObstacleMix::Forest).unwrap();
        assert_eq!(a, sample_forest(5, bounds(), 0.3, ObstacleMix::Forest).unwrap());
        assert!(!a.obstacles.is_empty());
        let (s, g) = corridor(&a.bounds);
        assert!(a.clearance(s) > CLEAR_RADIUS - 1e-9);
        assert!(a.clearance(g) > CLEAR_RADIUS - 1e-9);
    }

    #[test]
    fn dark_objects_include_rope() {
        let s = sample_forest(2, bounds(), 0.2, ObstacleMix::DarkObjects).unwrap();
        assert!(s
            .obstacles
            .iter()
            .any(|o| matches!(o.shape, Shape::Capsule { a, b, radius } if radius == ROPE_RADIUS && a.z == b.z)));
        assert!(s.obstacles.iter().all(|o| o.reflectivity <= 0.1));
    }

    #[test]
    fn empty_scene_scores_the_cap() {
        let spec = TraversabilitySpec::default();
        let t = traversability(&WorldScene::empty(bounds()), &spec).unwrap();
        assert!((t - spec.max_range / spec.robot_diameter).abs() < 1e-9);
    }

    #[test]
    fn extra_obstacle_never_raises_score() {
        let spec = TraversabilitySpec::default();
        let a = sample_forest(3, bounds(), 0.2, ObstacleMix::Forest).unwrap();
        let mut b = a.clone();
        b.obstacles
            .push(Obstacle::new(Shape::Cylinder { x: 6.0, y: 0.0, radius: 0.3, height: 3.0 }, 0.5).unwrap());
        assert!(traversability(&b, &spec).unwrap() <= traversability(&a, &spec).unwrap());
    }

    #[test]
    fn unknown_mix_name_rejected() {
        assert!("trees".parse::<ObstacleMix>().is_err());
        assert_eq!("dark_objects".parse::<ObstacleMix>().unwrap(), ObstacleMix::DarkObjects);
    }
}
