use std::f64::consts::FRAC_PI_2;
use std::f64::consts::FRAC_PI_4;

use darkdepth::calibration::{build_calibration_set, DepthPlanes};
use darkdepth::estimation::{GridSpec, TemplateMatcher};
use darkdepth::imagery::{convolve2d, GrayImage};
use darkdepth::navigation::{NavCommand, NavConfig};
use darkdepth::optics::{blur_diameter_px, rasterize_psf, stamp_spots, ApertureMask, DotPattern, OpticalConfig, PatternSpec, Spot};
use darkdepth::simworld::{
    raycast_depth, run_batch, run_trial, sample_forest, step, traversability, Aabb, FailureKind, Obstacle, ObstacleMix,
    RobotState, SensorModel, SensorSpec, Shape, SimConfig, SpeedLimits, TraversabilitySpec, Vec3, WorldScene,
};

fn forest_bounds() -> Aabb {
    Aabb::new(Vec3::new(0.0, -4.0, -3.0), Vec3::new(12.0, 4.0, 0.0)).unwrap()
}

fn cfg(width: usize, height: usize) -> OpticalConfig {
    OpticalConfig {
        width,
        height,
        ..OpticalConfig::default()
    }
}

#[test]
fn denser_forests_are_less_traversable() {
    for s in 0..10 {
        let spec = TraversabilitySpec {
            seed: s,
            ..TraversabilitySpec::default()
        };
        let sparse = sample_forest(s, forest_bounds(), 0.1, ObstacleMix::Forest).unwrap();
        let dense = sample_forest(s, forest_bounds(), 0.4, ObstacleMix::Forest).unwrap();
        let a = traversability(&sparse, &spec).unwrap();
        let b = traversability(&dense, &spec).unwrap();
        assert!(b < a, "seed {s}: density 0.4 scored {b}, density 0.1 scored {a}");
    }
}

/// Entry distance of a ray into an axis-aligned box by the slab method.
fn slab_hit(o: Vec3, d: Vec3, b: &Aabb) -> Option<f64> {
    let (mut t0, mut t1) = (0.0f64, f64::INFINITY);
    for (oi, di, lo, hi) in [(o.x, d.x, b.min.x, b.max.x), (o.y, d.y, b.min.y, b.max.y), (o.z, d.z, b.min.z, b.max.z)] {
        if di.abs() < 1e-15 {
            if oi < lo || oi > hi {
                return None;
            }
            continue;
        }
        let (a, c) = ((lo - oi) / di, (hi - oi) / di);
        t0 = t0.max(a.min(c));
        t1 = t1.min(a.max(c));
    }
    (t0 <= t1).then_some(t0)
}

#[test]
fn box_corner_depth_matches_supersampled_caster() {
    let c = cfg(320, 240);
    let block = Aabb::new(Vec3::new(2.0, 2.0, -5.0), Vec3::new(10.0, 10.0, 5.0)).unwrap();
    let bounds = Aabb::new(Vec3::new(-1.0, -1.0, -6.0), Vec3::new(11.0, 11.0, 6.0)).unwrap();
    let scene = WorldScene::new(bounds, vec![Obstacle::new(Shape::Box(block), 0.5).unwrap()]).unwrap();
    let robot = RobotState::new(Vec3::ZERO, FRAC_PI_4, 0.15).unwrap();
    let depth = raycast_depth(&scene, &robot, &c, 10.0).unwrap();

    let f = c.focal_length_m / c.pixel_pitch_m;
    let (cx, cy) = (c.width as f64 / 2.0, c.height as f64 / 2.0);
    let (s, co) = robot.yaw.sin_cos();
    let fwd = Vec3::new(co, s, 0.0);
    let right = Vec3::new(-s, co, 0.0);
    let down = Vec3::new(0.0, 0.0, 1.0);
    let ss = 10;
    let mut good = 0;
    for y in 0..c.height {
        for x in 0..c.width {
            let mut acc = 0.0;
            for j in 0..ss {
                for i in 0..ss {
                    let u = (x as f64 + (i as f64 + 0.5) / ss as f64 - cx) / f;
                    let v = (y as f64 + (j as f64 + 0.5) / ss as f64 - cy) / f;
                    // Unit forward component, so the hit distance is the axial depth.
                    let d = right * u + down * v + fwd;
                    acc += slab_hit(Vec3::ZERO, d, &block).map_or(10.0, |t| t.min(10.0));
                }
            }
            let reference = acc / (ss * ss) as f64;
            if (depth.get(x, y) - reference).abs() <= 1e-3 {
                good += 1;
            }
        }
    }
    let n = c.width * c.height;
    assert!(good as f64 >= 0.99 * n as f64, "{good}/{n} pixels within 1 mm");
}

fn wall(z: f64) -> WorldScene {
    let b = Aabb::new(Vec3::new(-1.0, -20.0, -20.0), Vec3::new(30.0, 20.0, 20.0)).unwrap();
    let slab = Aabb::new(Vec3::new(z, -19.0, -19.0), Vec3::new(z + 0.1, 19.0, 19.0)).unwrap();
    WorldScene::new(b, vec![Obstacle::new(Shape::Box(slab), 1.0).unwrap()]).unwrap()
}

#[test]
fn projector_offset_shifts_dots_but_keeps_their_blur() {
    let c = cfg(256, 192);
    let mask = ApertureMask::default_coded();
    let planes = DepthPlanes::canonical();
    let uv = vec![(0.3, 0.3), (0.5, 0.5), (0.4, 0.7), (0.6, 0.35), (0.2, 0.6)];
    let pattern = DotPattern::new(uv, 3.0, 1.0, 0, 1.0).unwrap();
    let model = |offset: Vec3| {
        let spec = SensorSpec {
            projector_offset: offset,
            ..SensorSpec::default()
        };
        SensorModel::new(c, &mask, pattern.clone(), planes.clone(), spec, 1).unwrap()
    };
    let z = 1.5;
    let scene = wall(z);
    let robot = RobotState::new(Vec3::ZERO, 0.0, 0.15).unwrap();
    let base = model(Vec3::ZERO).project_dots(&scene, &robot);
    let shifted_model = model(Vec3::new(0.02, 0.0, 0.0));
    let shifted = shifted_model.project_dots(&scene, &robot);
    assert_eq!(base.len(), 5);
    assert_eq!(shifted.len(), 5);

    let parallax = c.focal_length_m / c.pixel_pitch_m * 0.02 / z;
    let plane = planes.nearest_index(z);
    for (a, b) in base.iter().zip(&shifted) {
        assert!((b.x - a.x - parallax).abs() < 1e-6, "dx {} vs {parallax}", b.x - a.x);
        assert!((b.y - a.y).abs() < 1e-6);
        assert!((b.z - z).abs() < 1e-9);
        assert_eq!(a.plane, plane);
        assert_eq!(b.plane, plane);
    }

    // Each shifted dot is its footprint blurred by the bank kernel of its depth.
    let kernel = rasterize_psf(&mask, blur_diameter_px(&c, planes.get(plane)).unwrap()).unwrap();
    let mut aif = GrayImage::new(c.width, c.height);
    let spots: Vec<Spot> = shifted
        .iter()
        .map(|d| Spot {
            x: d.x,
            y: d.y,
            amplitude: d.amplitude,
        })
        .collect();
    stamp_spots(&mut aif, &spots, pattern.dot_radius_px());
    let expected = convolve2d(&aif, &kernel).unwrap();
    let lit = shifted_model.render_dots(&shifted).unwrap();
    let dark = shifted_model.render_dots(&[]).unwrap();
    for (i, e) in expected.data().iter().enumerate() {
        let got = lit.data()[i] - dark.data()[i];
        assert!((got - e).abs() < 1e-9);
    }
}

struct Rig {
    sensor: SensorModel,
    tm: TemplateMatcher,
}

fn rig() -> Rig {
    let c = cfg(128, 96);
    let mask = ApertureMask::default_coded();
    let planes = DepthPlanes::canonical();
    let pattern = DotPattern::generate(7, &PatternSpec::default(), c.width, c.height).unwrap();
    let calib = build_calibration_set(&c, &mask, &pattern, &planes).unwrap();
    let tm = TemplateMatcher::new(&calib, GridSpec::default()).unwrap();
    let sensor = SensorModel::new(c, &mask, pattern, planes, SensorSpec::default(), 5).unwrap();
    Rig { sensor, tm }
}

#[test]
fn empty_scene_is_flown_straight_to_the_goal() {
    let r = rig();
    let scene = WorldScene::empty(forest_bounds());
    let out = run_trial(&scene, &r.sensor, &r.tm, &NavConfig::default(), &SimConfig::default()).unwrap();
    assert!(out.success);
    assert_eq!(out.failure_kind, FailureKind::None);
    let start = out.path[0].state.position;
    for p in &out.path {
        assert_eq!(p.state.position.y, start.y);
        assert_eq!(p.state.position.z, start.z);
    }
}

#[test]
fn far_wall_with_short_timeout_times_out() {
    let r = rig();
    let b = forest_bounds();
    let slab = Aabb::new(Vec3::new(11.0, -4.0, -3.0), Vec3::new(11.2, 4.0, 0.0)).unwrap();
    let scene = WorldScene::new(b, vec![Obstacle::new(Shape::Box(slab), 0.5).unwrap()]).unwrap();
    let sim = SimConfig {
        timeout_s: 2.0,
        ..SimConfig::default()
    };
    let out = run_trial(&scene, &r.sensor, &r.tm, &NavConfig::default(), &sim).unwrap();
    assert!(!out.success);
    assert_eq!(out.failure_kind, FailureKind::Timeout);
}

#[test]
fn batches_are_checked_and_reproducible() {
    let r = rig();
    let nav = NavConfig::default();
    let sim = SimConfig {
        seed: 3,
        ..SimConfig::default()
    };
    assert!(run_batch(&[], &r.sensor, &r.tm, &nav, &sim).is_err());

    let scenes: Vec<WorldScene> = (0..2)
        .map(|s| sample_forest(100 + s, forest_bounds(), 0.2, ObstacleMix::Forest).unwrap())
        .collect();
    let one = run_batch(&scenes[..1], &r.sensor, &r.tm, &nav, &sim).unwrap();
    assert!(one.success_rate == 0.0 || one.success_rate == 1.0);

    let a = run_batch(&scenes, &r.sensor, &r.tm, &nav, &sim).unwrap();
    let b = run_batch(&scenes, &r.sensor, &r.tm, &nav, &sim).unwrap();
    assert_eq!(a, b);
    assert_eq!(a.summary_csv(), b.summary_csv());
}

#[test]
fn lateral_command_at_quarter_turn_moves_along_minus_x() {
    let robot = RobotState::new(Vec3::ZERO, FRAC_PI_2, 0.15).unwrap();
    let cmd = NavCommand {
        v_forward: 0.0,
        v_lateral: 1.0,
        v_vertical: 0.0,
    };
    let next = step(&robot, &cmd, 1.0, &SpeedLimits::default());
    assert!((next.position.x + 1.0).abs() < 1e-12);
    assert!(next.position.y.abs() < 1e-12);
    assert!(next.position.z.abs() < 1e-12);
}
