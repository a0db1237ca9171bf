use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use super::compose::{compose_pair, BackgroundSource, TrainingPair};
use super::scene::{random_scene, SceneLimits, SceneSpec};
use crate::calibration::CalibrationSet;
use crate::error::{Error, Result};
use crate::imagery::{read_depth_pgm, read_pgm, write_depth_pgm, write_pgm, DepthMap, GrayImage};
use crate::seed;

pub const MANIFEST_FILE: &str = "dataset.manifest";
pub const SCENES_FILE: &str = "scenes.jsonl";
const PARTIAL_MARKER: &str = "# PARTIAL";

/// Builds pair `index` of a dataset seeded with `master_seed`.
pub fn make_pair(
    index: u64,
    master_seed: u64,
    calib: &CalibrationSet,
    source: &BackgroundSource,
    limits: &SceneLimits,
) -> Result<TrainingPair> {
    let pair_seed = seed::derive_seed(master_seed, index);
    let (w, h) = calib.dims();
    let spec = random_scene(pair_seed, &calib.planes, limits, w, h)?;
    let background = source.background(seed::derive_seed(pair_seed, 2), w, h)?;
    compose_pair(&spec, calib, &background)
}

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetEntry {
    pub index: u64,
    pub seed: u64,
    pub image: String,
    pub depth: String,
    pub planes_id: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetManifest {
    pub entries: Vec<DatasetEntry>,
    pub partial: bool,
}

impl DatasetManifest {
    pub fn to_text(&self) -> String {
        let mut s = String::from("# index seed image depth planes\n");
        for e in &self.entries {
            s.push_str(&format!("{} {} {} {} {}\n", e.index, e.seed, e.image, e.depth, e.planes_id));
        }
        if self.partial {
            s.push_str(PARTIAL_MARKER);
            s.push('\n');
        }
        s
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut entries = Vec::new();
        let mut partial = false;
        let mut offset = 0;
        for line in text.split_inclusive('\n') {
            let t = line.trim();
            if t == PARTIAL_MARKER {
                partial = true;
            } else if !t.is_empty() && !t.starts_with('#') {
                let f: Vec<&str> = t.split_whitespace().collect();
                let bad = || Error::Parse {
                    offset,
                    message: format!("bad manifest line {t:?}"),
                };
                if f.len() != 5 {
                    return Err(bad());
                }
                entries.push(DatasetEntry {
                    index: f[0].parse().map_err(|_| bad())?,
                    seed: f[1].parse().map_err(|_| bad())?,
                    image: f[2].to_string(),
                    depth: f[3].to_string(),
                    planes_id: f[4].to_string(),
                });
            }
            offset += line.len();
        }
        Ok(Self { entries, partial })
    }

    pub fn load(dir: impl AsRef<Path>) -> Result<Self> {
        let path = dir.as_ref().join(MANIFEST_FILE);
        let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        Self::parse(&text)
    }
}

/// Reads one stored pair back.
pub fn load_pair(dir: impl AsRef<Path>, entry: &DatasetEntry) -> Result<(GrayImage, DepthMap)> {
    let dir = dir.as_ref();
    Ok((read_pgm(dir.join(&entry.image))?, read_depth_pgm(dir.join(&entry.depth))?))
}

/// Writes `count` pairs (image PGM, depth PGM with scale sidecar), the
/// manifest and one JSON scene description per line. On an I/O failure the
/// manifest lists the pairs written so far and ends with a partial marker.
pub fn generate_dataset(
    count: usize,
    master_seed: u64,
    calib: &CalibrationSet,
    source: &BackgroundSource,
    limits: &SceneLimits,
    out_dir: impl AsRef<Path>,
) -> Result<DatasetManifest> {
    if count == 0 {
        return Err(Error::invalid("dataset count must be >= 1"));
    }
    let out = out_dir.as_ref();
    fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    let planes_id = calib.planes.id();
    let scale = 1e-4_f64.max(calib.planes.last() / 65535.0);

    let write_one = |i: usize| -> Result<(DatasetEntry, SceneSpec)> {
        let pair = make_pair(i as u64, master_seed, calib, source, limits)?;
        let image = format!("pair_{i:06}.pgm");
        let depth = format!("depth_{i:06}.pgm");
        write_pgm(&pair.image, out.join(&image))?;
        write_depth_pgm(&pair.depth, out.join(&depth), scale)?;
        Ok((
            DatasetEntry {
                index: i as u64,
                seed: pair.spec.seed,
                image,
                depth,
                planes_id: planes_id.clone(),
            },
            pair.spec,
        ))
    };

    let mut manifest = DatasetManifest {
        entries: Vec::with_capacity(count),
        partial: false,
    };
    let mut scenes = String::new();
    let mut failure = None;
    // Fixed-size chunks keep memory bounded while results stay in index order.
    for chunk_start in (0..count).step_by(64) {
        let chunk_end = (chunk_start + 64).min(count);
        let results: Vec<Result<(DatasetEntry, SceneSpec)>> =
            (chunk_start..chunk_end).into_par_iter().map(write_one).collect();
        for r in results {
            match r {
                Ok((entry, spec)) if failure.is_none() => {
                    manifest.entries.push(entry);
                    scenes.push_str(&serde_json::to_string(&spec).expect("scene serializes"));
                    scenes.push('\n');
                }
                Ok(_) => {}
                Err(e) => {
                    if failure.is_none() {
                        failure = Some(e);
                    }
                }
            }
        }
        if failure.is_some() {
            break;
        }
    }
    manifest.partial = failure.is_some();
    write_text(&out.join(MANIFEST_FILE), &manifest.to_text())?;
    write_text(&out.join(SCENES_FILE), &scenes)?;
    match failure {
        Some(e) => Err(e),
        None => Ok(manifest),
    }
}

fn write_text(path: &PathBuf, text: &str) -> Result<()> {
    let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(text.as_bytes()).map_err(|e| Error::io(path, e))
}
