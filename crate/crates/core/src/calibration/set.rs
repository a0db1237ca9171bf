use std::fs;
use std::path::Path;

use rayon::prelude::*;

use super::planes::DepthPlanes;
use crate::error::{Error, Result};
use crate::imagery::{read_pgm, write_pgm, GrayImage};
use crate::optics::{plane_kernels, render_dot_wall, ApertureMask, DotPattern, OpticalConfig};

/// Rendered (or captured) dot-wall images, one per depth plane.
#[derive(Debug, Clone, PartialEq)]
pub struct CalibrationSet {
    pub planes: DepthPlanes,
    pub images: Vec<GrayImage>,
    pub pattern: DotPattern,
    pub cfg: OpticalConfig,
    pub mask_id: String,
}

impl CalibrationSet {
    pub fn new(
        planes: DepthPlanes,
        images: Vec<GrayImage>,
        pattern: DotPattern,
        cfg: OpticalConfig,
        mask_id: String,
    ) -> Result<Self> {
        if images.len() != planes.len() {
            return Err(Error::Invariant(format!(
                "{} calibration images for {} planes",
                images.len(),
                planes.len()
            )));
        }
        if let Some(first) = images.first() {
            if images.iter().any(|i| i.dims() != first.dims()) {
                return Err(Error::Invariant("calibration images differ in size".into()));
            }
        }
        Ok(Self {
            planes,
            images,
            pattern,
            cfg,
            mask_id,
        })
    }

    pub fn dims(&self) -> (usize, usize) {
        self.images[0].dims()
    }

    pub fn image(&self, i: usize) -> &GrayImage {
        &self.images[i]
    }
}

/// Normalized blur kernel per depth plane.
#[derive(Debug, Clone, PartialEq)]
pub struct PsfBank {
    pub planes: DepthPlanes,
    pub kernels: Vec<GrayImage>,
}

impl PsfBank {
    pub fn kernel(&self, i: usize) -> &GrayImage {
        &self.kernels[i]
    }

    pub fn max_side(&self) -> usize {
        self.kernels.iter().map(GrayImage::width).max().unwrap_or(1)
    }
}

pub fn build_calibration_set(
    cfg: &OpticalConfig,
    mask: &ApertureMask,
    pattern: &DotPattern,
    planes: &DepthPlanes,
) -> Result<CalibrationSet> {
    cfg.validate()?;
    let images = planes
        .planes()
        .par_iter()
        .map(|z| render_dot_wall(pattern, cfg, mask, *z))
        .collect::<Result<Vec<_>>>()?;
    CalibrationSet::new(planes.clone(), images, pattern.clone(), *cfg, mask.id())
}

pub fn build_psf_bank(cfg: &OpticalConfig, mask: &ApertureMask, planes: &DepthPlanes) -> Result<PsfBank> {
    cfg.validate()?;
    Ok(PsfBank {
        planes: planes.clone(),
        kernels: plane_kernels(cfg, mask, planes)?,
    })
}

const PATTERN_FILE: &str = "pattern.txt";

fn plane_file(i: usize) -> String {
    format!("plane_{i:02}.pgm")
}

/// Writes `manifest.txt`, `pattern.txt` and one 16-bit PGM per plane.
pub fn save_calibration(set: &CalibrationSet, dir: impl AsRef<Path>) -> Result<()> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let c = &set.cfg;
    let mut manifest = format!(
        "cfg focal_length_m={} f_number={} focus_distance_m={} pixel_pitch_m={} width={} height={}\nmask_id={}\npattern_file={PATTERN_FILE}\n",
        c.focal_length_m, c.f_number, c.focus_distance_m, c.pixel_pitch_m, c.width, c.height, set.mask_id
    );
    for (i, (z, img)) in set.planes.planes().iter().zip(&set.images).enumerate() {
        let name = plane_file(i);
        write_pgm(img, dir.join(&name))?;
        manifest.push_str(&format!("plane_m={z} file={name}\n"));
    }
    set.pattern.save(dir.join(PATTERN_FILE))?;
    let path = dir.join("manifest.txt");
    fs::write(&path, manifest).map_err(|e| Error::io(&path, e))
}

pub fn load_calibration(dir: impl AsRef<Path>) -> Result<CalibrationSet> {
    let dir = dir.as_ref();
    let path = dir.join("manifest.txt");
    let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    let load_err = |m: String| Error::CalibrationLoad(format!("{}: {m}", path.display()));

    let mut cfg = None;
    let mut mask_id = None;
    let mut pattern_file = None;
    let mut entries: Vec<(f64, String)> = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        if let Some(rest) = line.strip_prefix("cfg ") {
            cfg = Some(parse_cfg(rest).map_err(|m| load_err(format!("line {}: {m}", lineno + 1)))?);
        } else if let Some(v) = line.strip_prefix("mask_id=") {
            mask_id = Some(v.to_string());
        } else if let Some(v) = line.strip_prefix("pattern_file=") {
            pattern_file = Some(v.to_string());
        } else if let Some(rest) = line.strip_prefix("plane_m=") {
            let (z, file) = rest
                .split_once(" file=")
                .ok_or_else(|| load_err(format!("line {}: expected `plane_m=<m> file=<name>`", lineno + 1)))?;
            let z: f64 = z
                .trim()
                .parse()
                .map_err(|_| load_err(format!("line {}: bad plane depth {z:?}", lineno + 1)))?;
            entries.push((z, file.trim().to_string()));
        } else {
            return Err(load_err(format!("line {}: unrecognized entry {line:?}", lineno + 1)));
        }
    }
    let cfg = cfg.ok_or_else(|| load_err("missing cfg line".into()))?;
    let mask_id = mask_id.ok_or_else(|| load_err("missing mask_id".into()))?;
    let pattern_file = pattern_file.ok_or_else(|| load_err("missing pattern_file".into()))?;
    let planes = DepthPlanes::new(entries.iter().map(|e| e.0).collect())?;

    for (z, file) in &entries {
        if !dir.join(file).is_file() {
            return Err(load_err(format!("missing image {file} for plane {z} m")));
        }
    }
    let mut images = Vec::with_capacity(entries.len());
    for (z, file) in &entries {
        let img = read_pgm(dir.join(file))?;
        if img.dims() != (cfg.width, cfg.height) {
            return Err(load_err(format!(
                "image {file} for plane {z} m is {}x{}, manifest says {}x{}",
                img.width(),
                img.height(),
                cfg.width,
                cfg.height
            )));
        }
        images.push(img);
    }
    let pattern = DotPattern::load(dir.join(&pattern_file))?;
    CalibrationSet::new(planes, images, pattern, cfg, mask_id)
}

fn parse_cfg(rest: &str) -> std::result::Result<OpticalConfig, String> {
    let mut cfg = OpticalConfig::default();
    let mut seen = 0;
    for field in rest.split_whitespace() {
        let (k, v) = field.split_once('=').ok_or_else(|| format!("bad cfg field {field:?}"))?;
        let f = || v.parse::<f64>().map_err(|_| format!("bad value for {k}: {v:?}"));
        let u = || v.parse::<usize>().map_err(|_| format!("bad value for {k}: {v:?}"));
        match k {
            "focal_length_m" => cfg.focal_length_m = f()?,
            "f_number" => cfg.f_number = f()?,
            "focus_distance_m" => cfg.focus_distance_m = f()?,
            "pixel_pitch_m" => cfg.pixel_pitch_m = f()?,
            "width" => cfg.width = u()?,
            "height" => cfg.height = u()?,
            _ => return Err(format!("unknown cfg field {k:?}")),
        }
        seen += 1;
    }
    if seen != 6 {
        return Err(format!("cfg line has {seen} of 6 fields"));
    }
    cfg.validate().map_err(|e| e.to_string())?;
    Ok(cfg)
}
