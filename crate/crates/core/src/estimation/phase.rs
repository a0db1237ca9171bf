//! FFT phase correlation.

use std::sync::Arc;

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};
use crate::imagery::GrayImage;

/// Result of matching two equally sized patches.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhaseMatch {
    /// Shift of the second patch relative to the first, wrapped to
    /// `[-n/2, n/2)`.
    pub dx: i64,
    pub dy: i64,
    /// Height of the correlation peak; 1 for a pure circular shift.
    pub peak: f64,
}

/// Planned 2-D transforms for one patch size.
pub struct Fft2 {
    w: usize,
    h: usize,
    row_fwd: Arc<dyn Fft<f64>>,
    col_fwd: Arc<dyn Fft<f64>>,
    row_inv: Arc<dyn Fft<f64>>,
    col_inv: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for Fft2 {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "Fft2({}x{})", self.w, self.h)
    }
}

impl Fft2 {
    pub fn new(w: usize, h: usize) -> Result<Self> {
        if !w.is_power_of_two() || !h.is_power_of_two() {
            return Err(Error::invalid(format!("FFT size {w}x{h} must be powers of two")));
        }
        let mut planner = FftPlanner::new();
        Ok(Self {
            w,
            h,
            row_fwd: planner.plan_fft_forward(w),
            col_fwd: planner.plan_fft_forward(h),
            row_inv: planner.plan_fft_inverse(w),
            col_inv: planner.plan_fft_inverse(h),
        })
    }

    pub fn len(&self) -> usize {
        self.w * self.h
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    fn transform(&self, buf: &mut [Complex64], inverse: bool) {
        let (rows, cols) = if inverse {
            (&self.row_inv, &self.col_inv)
        } else {
            (&self.row_fwd, &self.col_fwd)
        };
        rows.process(buf);
        let mut t = vec![Complex64::new(0.0, 0.0); buf.len()];
        transpose(buf, &mut t, self.w, self.h);
        cols.process(&mut t);
        transpose(&t, buf, self.h, self.w);
    }

    pub fn forward(&self, buf: &mut [Complex64]) {
        self.transform(buf, false);
    }

    /// Unnormalized inverse transform.
    pub fn inverse(&self, buf: &mut [Complex64]) {
        self.transform(buf, true);
    }

    /// Unit-magnitude spectrum of a real patch read from `img` at
    /// `(x0, y0)`; bins with negligible magnitude are zeroed.
    pub fn phase_spectrum(&self, img: &GrayImage, x0: usize, y0: usize) -> Vec<Complex64> {
        let mut buf = self.spectrum(img, x0, y0);
        normalize_phase(&mut buf, 1e-12);
        buf
    }

    /// Bins (DC excluded) where every patch's magnitude reaches `band` times
    /// that patch's largest non-DC magnitude.
    pub fn common_band<'a>(&self, patches: impl Iterator<Item = (&'a GrayImage, usize, usize)>, band: f64) -> Vec<bool> {
        let mut keep = vec![true; self.len()];
        keep[0] = false;
        for (img, x0, y0) in patches {
            let s = self.spectrum(img, x0, y0);
            let max = s.iter().skip(1).map(|c| c.norm()).fold(0.0, f64::max);
            for (k, c) in keep.iter_mut().zip(&s) {
                *k &= c.norm() >= band * max && max > 0.0;
            }
        }
        keep
    }

    fn spectrum(&self, img: &GrayImage, x0: usize, y0: usize) -> Vec<Complex64> {
        let mut buf = Vec::with_capacity(self.len());
        for y in 0..self.h {
            for x in 0..self.w {
                buf.push(Complex64::new(img.get(x0 + x, y0 + y), 0.0));
            }
        }
        self.forward(&mut buf);
        buf
    }

    /// Correlation surface of two unit-phase spectra; returns the peak.
    pub fn correlate(&self, a: &[Complex64], b: &[Complex64], scratch: &mut Vec<Complex64>) -> PhaseMatch {
        scratch.clear();
        scratch.extend(a.iter().zip(b).map(|(p, q)| q * p.conj()));
        let n = scratch.iter().filter(|c| c.norm_sqr() > 0.0).count().max(1) as f64;
        self.inverse(scratch);
        let mut best = 0;
        for i in 1..scratch.len() {
            if scratch[i].re > scratch[best].re {
                best = i;
            }
        }
        let wrap = |v: usize, n: usize| -> i64 {
            if v >= n / 2 {
                v as i64 - n as i64
            } else {
                v as i64
            }
        };
        PhaseMatch {
            dx: wrap(best % self.w, self.w),
            dy: wrap(best / self.w, self.h),
            peak: (scratch[best].re / n).max(0.0),
        }
    }
}

fn transpose(src: &[Complex64], dst: &mut [Complex64], w: usize, h: usize) {
    for y in 0..h {
        for x in 0..w {
            dst[x * h + y] = src[y * w + x];
        }
    }
}

fn normalize_phase(buf: &mut [Complex64], rel_floor: f64) {
    let max = buf.iter().map(|c| c.norm()).fold(0.0, f64::max);
    let floor = (max * rel_floor).max(1e-300);
    for c in buf.iter_mut() {
        let m = c.norm();
        *c = if m > floor { *c / m } else { Complex64::new(0.0, 0.0) };
    }
}

/// Phase correlation of two equally sized, power-of-two patches.
pub fn phase_correlate(a: &GrayImage, b: &GrayImage) -> Result<PhaseMatch> {
    if a.dims() != b.dims() {
        return Err(Error::invalid(format!("patch sizes differ: {:?} vs {:?}", a.dims(), b.dims())));
    }
    let fft = Fft2::new(a.width(), a.height())?;
    let sa = fft.phase_spectrum(a, 0, 0);
    let sb = fft.phase_spectrum(b, 0, 0);
    let mut scratch = Vec::new();
    Ok(fft.correlate(&sa, &sb, &mut scratch))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seed;
    use rand::Rng;

    fn noise(seed: u64, n: usize) -> GrayImage {
        let mut rng = seed::rng(seed);
        GrayImage::from_fn(n, n, |_, _| rng.random::<f64>())
    }

    #[test]
    fn identical_patches() {
        let a = noise(1, 32);
        let m = phase_correlate(&a, &a).unwrap();
        assert_eq!((m.dx, m.dy), (0, 0));
        assert!((m.peak - 1.0).abs() < 1e-9);
    }

    #[test]
    fn recovers_circular_shift() {
        let a = noise(2, 64);
        let b = a.roll(3, -2);
        let m = phase_correlate(&a, &b).unwrap();
        assert_eq!((m.dx, m.dy), (3, -2));
        assert!((m.peak - 1.0).abs() < 1e-9);
    }

    #[test]
    fn rejects_non_power_of_two() {
        let a = GrayImage::new(24, 32);
        assert!(phase_correlate(&a, &a).is_err());
    }

    #[test]
    fn black_patch_has_zero_peak() {
        let a = GrayImage::new(16, 16);
        assert_eq!(phase_correlate(&a, &noise(3, 16)).unwrap().peak, 0.0);
    }
}
