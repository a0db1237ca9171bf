//! Brute-force matching of image cells against co-located calibration crops.

use rayon::prelude::*;
use rustfft::num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::estimate::{DepthEstimate, DepthEstimator};
use super::phase::Fft2;
use crate::calibration::CalibrationSet;
use crate::error::{Error, Result};
use crate::imagery::{DepthMap, GrayImage};

pub const LOGVAR_EPS: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridSpec {
    /// Square cell side in pixels (power of two).
    pub cell_px: usize,
    /// Cells whose best peak falls below this are low-confidence and
    /// reported at the farthest plane.
    pub min_peak: f64,
    /// Relative magnitude floor: per cell only the bins where every
    /// calibration crop reaches this fraction of its peak magnitude take part
    /// in the match (0 keeps every bin).
    pub band: f64,
    /// A cell is also low-confidence when its peak is within this many
    /// standard deviations of the peak of random phases over the cell's band.
    pub null_sigmas: f64,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self {
            cell_px: 64,
            min_peak: 0.1,
            band: 0.01,
            null_sigmas: 6.0,
        }
    }
}

/// Best match of one grid cell.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CellMatch {
    pub x0: usize,
    pub y0: usize,
    pub plane: usize,
    pub peak: f64,
    pub low_confidence: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TmResult {
    pub estimate: DepthEstimate,
    pub cells: Vec<CellMatch>,
    pub cols: usize,
    pub rows: usize,
}

/// Calibration spectra cached per cell and plane.
#[derive(Debug)]
pub struct TemplateMatcher {
    grid: GridSpec,
    fft: Fft2,
    planes: Vec<f64>,
    width: usize,
    height: usize,
    cols: usize,
    rows: usize,
    /// `spectra[cell][plane]`.
    spectra: Vec<Vec<Vec<Complex64>>>,
    /// Per-cell peak floor.
    thresholds: Vec<f64>,
}

/// Cell origins along one axis; the last cell is pulled inside the frame.
fn origins(len: usize, cell: usize) -> Vec<usize> {
    let n = len.div_ceil(cell);
    (0..n).map(|i| (i * cell).min(len - cell)).collect()
}

impl TemplateMatcher {
    pub fn new(calib: &CalibrationSet, grid: GridSpec) -> Result<Self> {
        let (w, h) = calib.dims();
        if grid.cell_px == 0 || grid.cell_px > w || grid.cell_px > h {
            return Err(Error::invalid(format!("cell size {} does not fit a {w}x{h} frame", grid.cell_px)));
        }
        let fft = Fft2::new(grid.cell_px, grid.cell_px)?;
        let xs = origins(w, grid.cell_px);
        let ys = origins(h, grid.cell_px);
        let cells: Vec<(usize, usize)> = ys.iter().flat_map(|y| xs.iter().map(move |x| (*x, *y))).collect();
        let per_cell: Vec<(Vec<Vec<Complex64>>, f64)> = cells
            .par_iter()
            .map(|(x0, y0)| {
                let mut specs: Vec<Vec<Complex64>> =
                    calib.images.iter().map(|img| fft.phase_spectrum(img, *x0, *y0)).collect();
                if grid.band > 0.0 {
                    let keep = fft.common_band(calib.images.iter().map(|img| (img, *x0, *y0)), grid.band);
                    for s in specs.iter_mut() {
                        for (c, k) in s.iter_mut().zip(&keep) {
                            if !k {
                                *c = Complex64::new(0.0, 0.0);
                            }
                        }
                    }
                }
                // Random image phases over k Hermitian-paired bins give a
                // correlation with standard deviation 1 / sqrt(k) at any shift.
                let k = specs[0].iter().filter(|c| c.norm_sqr() > 0.0).count().max(1) as f64;
                let floor = grid.min_peak.max(grid.null_sigmas / k.sqrt());
                (specs, floor)
            })
            .collect();
        let (spectra, thresholds) = per_cell.into_iter().unzip();
        Ok(Self {
            grid,
            fft,
            planes: calib.planes.planes().to_vec(),
            width: w,
            height: h,
            cols: xs.len(),
            rows: ys.len(),
            spectra,
            thresholds,
        })
    }

    /// Peak floor of each cell, row-major.
    pub fn thresholds(&self) -> &[f64] {
        &self.thresholds
    }

    pub fn grid(&self) -> GridSpec {
        self.grid
    }

    pub fn match_cells(&self, image: &GrayImage) -> Result<TmResult> {
        if image.dims() != (self.width, self.height) {
            return Err(Error::invalid(format!(
                "image {:?} does not match calibration {:?}",
                image.dims(),
                (self.width, self.height)
            )));
        }
        let xs = origins(self.width, self.grid.cell_px);
        let ys = origins(self.height, self.grid.cell_px);
        let far = self.planes.len() - 1;
        let cells: Vec<CellMatch> = (0..self.rows * self.cols)
            .into_par_iter()
            .map(|k| {
                let (x0, y0) = (xs[k % self.cols], ys[k / self.cols]);
                let spec = self.fft.phase_spectrum(image, x0, y0);
                let mut scratch = Vec::with_capacity(spec.len());
                let mut best = (0, f64::NEG_INFINITY);
                for (i, cal) in self.spectra[k].iter().enumerate() {
                    let m = self.fft.correlate(cal, &spec, &mut scratch);
                    if m.peak > best.1 {
                        best = (i, m.peak);
                    }
                }
                let low = best.1 < self.thresholds[k];
                CellMatch {
                    x0,
                    y0,
                    plane: if low { far } else { best.0 },
                    peak: best.1,
                    low_confidence: low,
                }
            })
            .collect();

        let c = self.grid.cell_px;
        let mut depth = vec![0.0; self.width * self.height];
        let mut logvar = vec![0.0; self.width * self.height];
        for y in 0..self.height {
            let r = (y / c).min(self.rows - 1);
            for x in 0..self.width {
                let cell = &cells[r * self.cols + (x / c).min(self.cols - 1)];
                depth[y * self.width + x] = self.planes[cell.plane];
                logvar[y * self.width + x] = -(cell.peak * cell.peak + LOGVAR_EPS).ln();
            }
        }
        Ok(TmResult {
            estimate: DepthEstimate::new(DepthMap::from_vec(self.width, self.height, depth)?, logvar)?,
            cells,
            cols: self.cols,
            rows: self.rows,
        })
    }
}

impl DepthEstimator for TemplateMatcher {
    fn name(&self) -> &str {
        "tm"
    }

    fn estimate(&self, image: &GrayImage) -> Result<DepthEstimate> {
        Ok(self.match_cells(image)?.estimate)
    }
}

/// One-shot template matching; build a [`TemplateMatcher`] to reuse the
/// calibration spectra across frames.
pub fn tm_depth(image: &GrayImage, calib: &CalibrationSet, grid: GridSpec) -> Result<TmResult> {
    TemplateMatcher::new(calib, grid)?.match_cells(image)
}
