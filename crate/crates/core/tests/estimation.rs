use darkdepth::calibration::{build_calibration_set, build_psf_bank, CalibrationSet, DepthPlanes};
use darkdepth::datagen::{make_pair, BackgroundSource, SceneLimits};
use darkdepth::estimation::{
    argmax, build_samples, dog_segment, phase_correlate, split_samples, train_patch_model, DepthEstimator, FeatureExtractor,
    FeatureSpec, GridSpec, PatchEstimator, PatchModel, TemplateMatcher, TrainConfig,
};
use darkdepth::imagery::GrayImage;
use darkdepth::optics::{render_dot_wall, stamp_spots, wall_spots, ApertureMask, DotPattern, OpticalConfig, PatternSpec};
use darkdepth::seed;
use rand::Rng;
use rand_distr::{Distribution, Normal};

fn cfg(width: usize, height: usize) -> OpticalConfig {
    OpticalConfig {
        width,
        height,
        ..OpticalConfig::default()
    }
}

fn pattern(c: &OpticalConfig) -> DotPattern {
    DotPattern::generate(7, &PatternSpec::default(), c.width, c.height).unwrap()
}

/// Left columns `< split` from `a`, the rest from `b`.
fn halves(a: &GrayImage, b: &GrayImage, split: usize) -> GrayImage {
    GrayImage::from_fn(a.width(), a.height(), |x, y| if x < split { a.get(x, y) } else { b.get(x, y) })
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    v[v.len() / 2]
}

#[test]
fn noisy_kernel_patches_keep_their_plane() {
    let c = OpticalConfig::default();
    let planes = DepthPlanes::canonical();
    let bank = build_psf_bank(&c, &ApertureMask::default_coded(), &planes).unwrap();
    let size = 31;
    let fx = FeatureExtractor::new(
        &bank,
        FeatureSpec {
            patch_size: size,
            spot_sigma: 0.0,
            search_radius: 0,
        },
    )
    .unwrap();
    let noise = Normal::new(0.0, 0.05).unwrap();
    let mut rng = seed::rng(2024);
    let mut hits = 0;
    let trials = 1000;
    for t in 0..trials {
        let i = t % planes.len();
        let k = bank.kernel(i);
        let k = k.scaled(1.0 / k.max());
        let (kw, kh) = k.dims();
        let (ox, oy) = (size / 2 - kw / 2, size / 2 - kh / 2);
        let patch = GrayImage::from_fn(size, size, |x, y| {
            let inside = x >= ox && y >= oy && x - ox < kw && y - oy < kh;
            let v = if inside { k.get(x - ox, y - oy) } else { 0.0 };
            v + noise.sample(&mut rng)
        });
        if argmax(&fx.extract(&patch, size / 2, size / 2)) == i {
            hits += 1;
        }
    }
    assert!(hits as f64 >= 0.95 * trials as f64, "{hits}/{trials} correct");
}

#[test]
fn two_plane_toy_problem_is_learned() {
    let c = cfg(160, 120);
    let planes = DepthPlanes::new(vec![1.0, 2.0]).unwrap();
    let mask = ApertureMask::default_coded();
    let p = pattern(&c);
    let calib = build_calibration_set(&c, &mask, &p, &planes).unwrap();
    let bank = build_psf_bank(&c, &mask, &planes).unwrap();
    let fx = FeatureExtractor::new(&bank, FeatureSpec::default()).unwrap();
    let limits = SceneLimits {
        max_polygons: 0,
        w_ref_max: 0.0,
        sigma_min: 0.0,
        sigma_max: 0.0,
        ..SceneLimits::default()
    };
    let samples = build_samples(
        80,
        |i| make_pair(i, 5, &calib, &BackgroundSource::Procedural, &limits),
        &p,
        &fx,
        16,
        1,
    )
    .unwrap();
    let (train, held) = split_samples(samples, 0.25, 9);
    assert!(held.len() >= 200);
    let label = |z: f64| usize::from(z > 1.5);

    let oracle = held.iter().filter(|s| argmax(&s.features) == label(s.depth)).count();
    assert_eq!(oracle, held.len(), "NCC argmax does not separate the toy set");

    let tc = TrainConfig {
        epochs: 20,
        ..TrainConfig::default()
    };
    let report = train_patch_model(PatchModel::new(planes, FeatureSpec::default()).unwrap(), &train, &tc, None).unwrap();
    let right = held
        .iter()
        .filter(|s| label(report.model.predict(&s.features).depth) == label(s.depth))
        .count();
    assert!(right as f64 >= 0.99 * held.len() as f64, "{right}/{} held-out correct", held.len());
}

fn patch_estimator(c: &OpticalConfig, planes: &DepthPlanes) -> PatchEstimator {
    let bank = build_psf_bank(c, &ApertureMask::default_coded(), planes).unwrap();
    PatchEstimator::new(PatchModel::new(planes.clone(), FeatureSpec::default()).unwrap(), &bank).unwrap()
}

#[test]
fn patch_inference_on_uniform_planes() {
    let c = OpticalConfig::default();
    let planes = DepthPlanes::canonical();
    let est = patch_estimator(&c, &planes);
    let p = pattern(&c);
    let mask = ApertureMask::default_coded();
    for &z in &[0.75, 1.25, 1.75, 2.25] {
        let img = render_dot_wall(&p, &c, &mask, z).unwrap();
        let dots = est.detector.detect(&img);
        assert!(dots.len() >= 20, "only {} dots at {z}", dots.len());
        let out = est.estimate(&img).unwrap();
        let close = dots.iter().filter(|d| (out.depth.get(d.x, d.y) - z).abs() <= 0.25 + 1e-9).count();
        assert!(close as f64 >= 0.9 * dots.len() as f64, "plane {z}: {close}/{} dots", dots.len());
    }
}

#[test]
fn patch_inference_on_two_planes() {
    let c = cfg(256, 192);
    let planes = DepthPlanes::canonical();
    let est = patch_estimator(&c, &planes);
    let p = pattern(&c);
    let mask = ApertureMask::default_coded();
    let near = render_dot_wall(&p, &c, &mask, 0.5).unwrap();
    let far = render_dot_wall(&p, &c, &mask, 2.0).unwrap();
    let img = halves(&near, &far, 128);
    let out = est.estimate(&img).unwrap();
    let region = |x0: usize, x1: usize| {
        let mut v = Vec::new();
        for y in 0..192 {
            for x in x0..x1 {
                v.push(out.depth.get(x, y));
            }
        }
        median(v)
    };
    let left = region(0, 112);
    let right = region(144, 256);
    assert!((left - 0.5).abs() <= 0.25, "near median {left}");
    assert!((right - 2.0).abs() <= 0.25, "far median {right}");
}

#[test]
fn dog_separates_sharp_from_blurred_dots() {
    let c = cfg(256, 192);
    let p = pattern(&c);
    let mask = ApertureMask::default_coded();
    let sharp = render_dot_wall(&p, &c, &mask, c.focus_distance_m).unwrap();
    let blurred = render_dot_wall(&p, &c, &mask, 2.0).unwrap();
    let img = halves(&sharp, &blurred, 128);

    let mut footprint = GrayImage::new(c.width, c.height);
    stamp_spots(&mut footprint, &wall_spots(&p, &c, 1.0), p.dot_radius_px());
    let peak = footprint.max();
    let seg = dog_segment(&img, &c, c.focus_distance_m, p.dot_radius_px(), 0.02).unwrap();

    let (mut sharp_px, mut sharp_on, mut blur_px, mut blur_on) = (0, 0, 0, 0);
    let (mut sharp_resp, mut blur_resp) = (0.0, 0.0);
    for y in 0..c.height {
        for x in 0..c.width {
            if footprint.get(x, y) < 0.5 * peak {
                continue;
            }
            let on = seg.mask.get(x, y);
            if x < 112 {
                sharp_px += 1;
                sharp_on += usize::from(on);
                sharp_resp += seg.response.get(x, y);
            } else if x >= 144 {
                blur_px += 1;
                blur_on += usize::from(on);
                blur_resp += seg.response.get(x, y);
            }
        }
    }
    assert!(sharp_resp / sharp_px as f64 > blur_resp / blur_px as f64);
    assert!(sharp_on as f64 >= 0.8 * sharp_px as f64, "sharp coverage {sharp_on}/{sharp_px}");
    assert!(blur_on as f64 <= 0.1 * blur_px as f64, "blurred coverage {blur_on}/{blur_px}");
}

#[test]
fn independent_noise_rarely_correlates() {
    let mut rng = seed::rng(31);
    let mut noise = || GrayImage::from_fn(32, 32, |_, _| rng.random::<f64>());
    let trials = 1000;
    let mut low = 0;
    for _ in 0..trials {
        let (a, b) = (noise(), noise());
        if phase_correlate(&a, &b).unwrap().peak < 0.2 {
            low += 1;
        }
    }
    assert!(low as f64 >= 0.95 * trials as f64, "{low}/{trials} below 0.2");
}

fn tm_setup() -> (CalibrationSet, TemplateMatcher) {
    let c = cfg(256, 192);
    let calib = build_calibration_set(&c, &ApertureMask::default_coded(), &pattern(&c), &DepthPlanes::canonical()).unwrap();
    let tm = TemplateMatcher::new(&calib, GridSpec::default()).unwrap();
    (calib, tm)
}

#[test]
fn template_matching_round_trips() {
    let (calib, tm) = tm_setup();
    for i in 0..calib.planes.len() {
        let r = tm.match_cells(calib.image(i)).unwrap();
        assert_eq!(r.cells.len(), 12);
        for (k, cell) in r.cells.iter().enumerate() {
            assert_eq!(cell.plane, i, "plane {i}, cell {k}");
            assert!(!cell.low_confidence);
        }
    }

    // Plane 1 (0.75 m) on the left two cell columns, plane 6 (2.0 m) on the right.
    let img = halves(calib.image(1), calib.image(6), 128);
    let r = tm.match_cells(&img).unwrap();
    let (mut left, mut right) = (0, 0);
    for (k, cell) in r.cells.iter().enumerate() {
        if k % r.cols < 2 {
            left += usize::from(cell.plane == 1);
        } else {
            right += usize::from(cell.plane == 6);
        }
    }
    assert!(left as f64 >= 0.85 * 6.0, "left {left}/6");
    assert!(right as f64 >= 0.85 * 6.0, "right {right}/6");

    let black = GrayImage::new(256, 192);
    let r = tm.match_cells(&black).unwrap();
    assert!(r.cells.iter().all(|c| c.low_confidence));
}
