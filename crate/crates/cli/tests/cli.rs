use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

const SMALL: &str = r#"
seed = 5

[optics]
width = 128
height = 96

[benchmark]
seeds = 2
focus = [0.5]
z_background = [1.0, 2.0]

[datagen]
count = 6

[train.optimizer]
epochs = 2
samples_per_pair = 8

[forest]
trials = 2
"#;

fn write_config(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p
}

fn run(args: &[&str], config: Option<&Path>, out: &Path) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_darkdepth"));
    if let Some(c) = config {
        cmd.arg("--config").arg(c);
    }
    cmd.arg("--out").arg(out).args(args);
    cmd.output().unwrap()
}

fn ok(o: &Output) {
    assert!(
        o.status.success(),
        "exit {:?}: {}",
        o.status.code(),
        String::from_utf8_lossy(&o.stderr)
    );
}

fn csv_rows(path: &Path) -> Vec<Vec<String>> {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .skip(1)
        .map(|l| l.split(',').map(str::to_string).collect())
        .collect()
}

#[test]
fn calibrate_creates_missing_output_directory() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("nested").join("calib");
    let o = run(&["calibrate"], None, &out);
    ok(&o);
    let planes = fs::read_dir(&out)
        .unwrap()
        .filter(|e| e.as_ref().unwrap().file_name().to_string_lossy().starts_with("plane_"))
        .count();
    assert_eq!(planes, 9);
    assert!(out.join("run.meta").exists());
    assert!(out.join("mask.txt").exists());
}

#[test]
fn unordered_planes_are_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "bad.toml", "planes = [1.0, 0.5, 2.0]\n");
    let o = run(&["calibrate"], Some(&cfg), &dir.path().join("out"));
    assert_eq!(o.status.code(), Some(3));
    assert!(!dir.path().join("out").exists());
}

#[test]
fn aperture_benchmark_rows_and_determinism() {
    let dir = tempfile::tempdir().unwrap();
    let text = SMALL.replace("focus = [0.5]", "focus = [0.5, 0.75, 1.0]");
    let cfg = write_config(dir.path(), "small.toml", &text);
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    ok(&run(&["benchmark", "apertures"], Some(&cfg), &a));
    ok(&run(&["benchmark", "apertures"], Some(&cfg), &b));
    let rows = csv_rows(&a.join("apertures.csv"));
    // Three apertures, three focus distances, two backgrounds.
    assert_eq!(rows.len(), 18);
    assert_eq!(
        fs::read(a.join("apertures.csv")).unwrap(),
        fs::read(b.join("apertures.csv")).unwrap()
    );

    let empty = write_config(dir.path(), "empty.toml", &SMALL.replace("z_background = [1.0, 2.0]", "z_background = []"));
    let o = run(&["benchmark", "apertures"], Some(&empty), &dir.path().join("c"));
    assert!(!o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("z_background"));
}

#[test]
fn estimator_benchmark_on_a_single_cell() {
    let dir = tempfile::tempdir().unwrap();
    let text = SMALL.replace("z_background = [1.0, 2.0]", "z_background = [2.0]");
    let cfg = write_config(dir.path(), "one.toml", &text);
    let out = dir.path().join("est");
    ok(&run(&["benchmark", "estimators", "--estimators", "dog,tm,patch"], Some(&cfg), &out));
    let rows = csv_rows(&out.join("estimators.csv"));
    assert_eq!(rows.len(), 3);
    let names: Vec<&str> = rows.iter().map(|r| r[5].as_str()).collect();
    assert_eq!(names, ["dog", "tm", "patch"]);
    assert!(out.join("model.bin").exists());
}

#[test]
fn unknown_estimator_lists_valid_names() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["benchmark", "estimators", "--estimators", "tm,magic"], None, dir.path());
    assert_eq!(o.status.code(), Some(3));
    let err = String::from_utf8_lossy(&o.stderr);
    for n in ["dog", "tm", "patch"] {
        assert!(err.contains(n), "{err}");
    }
}

#[test]
fn dry_run_writes_scenes_only_and_records_density() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "small.toml", SMALL);
    let out = dir.path().join("fly");
    ok(&run(&["fly", "--dry-run", "--density", "0.35"], Some(&cfg), &out));
    let scenes = fs::read_dir(out.join("scenes")).unwrap().count();
    assert_eq!(scenes, 2);
    assert!(!out.join("trials").exists());
    assert!(!out.join("summary.csv").exists());
    let meta: toml::Table = toml::from_str(&fs::read_to_string(out.join("run.meta")).unwrap()).unwrap();
    assert_eq!(meta["config"]["forest"]["density"].as_float(), Some(0.35));
}

#[test]
fn extrinsic_sweep_matches_benchmark_baseline() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "small.toml", SMALL);
    let sweep = dir.path().join("sweep");
    ok(&run(&["extrinsic-sweep"], Some(&cfg), &sweep));
    let rows = csv_rows(&sweep.join("extrinsic.csv"));
    let offsets: Vec<f64> = rows.iter().map(|r| r[0].parse().unwrap()).collect();
    assert_eq!(offsets, [0.0, 1.0, 2.0, 4.0]);

    let bench = dir.path().join("bench");
    ok(&run(&["benchmark", "estimators", "--estimators", "tm"], Some(&cfg), &bench));
    let tm = csv_rows(&bench.join("estimators.csv"));
    let baseline = tm.iter().map(|r| r[7].parse::<f64>().unwrap()).sum::<f64>() / tm.len() as f64;
    let zero: f64 = rows[0][2].parse().unwrap();
    assert!((zero - baseline).abs() <= 2e-6, "sweep {zero} vs benchmark {baseline}");

    let neg = write_config(dir.path(), "neg.toml", &format!("{SMALL}\n[extrinsic]\noffsets_cm = [-2.0, 0.0, 2.0]\n"));
    let out = dir.path().join("neg");
    ok(&run(&["extrinsic-sweep"], Some(&neg), &out));
    let rows = csv_rows(&out.join("extrinsic.csv"));
    assert_eq!(rows.len(), 3);
    assert_eq!(rows[0][0], "-2");
}
