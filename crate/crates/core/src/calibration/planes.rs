use std::fmt::Write as _;

use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

/// Strictly increasing set of calibrated depths (meters).
#[derive(Debug, Clone, PartialEq)]
pub struct DepthPlanes {
    planes: Vec<f64>,
}

impl DepthPlanes {
    /// A single plane is accepted so that an in-focus-only calibration can be
    /// captured; estimators need at least two.
    pub fn new(planes: Vec<f64>) -> Result<Self> {
        if planes.is_empty() {
            return Err(Error::Invariant("depth plane set is empty".into()));
        }
        if let Some(z) = planes.iter().find(|z| !(z.is_finite() && **z > 0.0)) {
            return Err(Error::Invariant(format!("depth plane {z} must be finite and > 0")));
        }
        if let Some(w) = planes.windows(2).find(|w| w[1] <= w[0]) {
            return Err(Error::Invariant(format!(
                "depth planes must be strictly increasing, found {} then {}",
                w[0], w[1]
            )));
        }
        Ok(Self { planes })
    }

    /// `start, start + step, ...` up to and including `stop` (within 1e-9).
    pub fn linspace(start: f64, stop: f64, step: f64) -> Result<Self> {
        if !(step > 0.0 && stop >= start) {
            return Err(Error::invalid(format!("bad plane range {start}..{stop} step {step}")));
        }
        let n = ((stop - start) / step + 1e-9).floor() as usize + 1;
        Self::new((0..n).map(|i| start + step * i as f64).collect())
    }

    /// 0.5 m to 2.5 m in 0.25 m steps.
    pub fn canonical() -> Self {
        Self::linspace(0.5, 2.5, 0.25).expect("canonical planes are valid")
    }

    pub fn planes(&self) -> &[f64] {
        &self.planes
    }

    pub fn len(&self) -> usize {
        self.planes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.planes.is_empty()
    }

    pub fn get(&self, i: usize) -> f64 {
        self.planes[i]
    }

    pub fn first(&self) -> f64 {
        self.planes[0]
    }

    pub fn last(&self) -> f64 {
        self.planes[self.planes.len() - 1]
    }

    /// Index of a plane equal to `z` (exact comparison).
    pub fn index_of(&self, z: f64) -> Option<usize> {
        self.planes.iter().position(|p| *p == z)
    }

    pub fn nearest_index(&self, z: f64) -> usize {
        let mut best = 0;
        for (i, p) in self.planes.iter().enumerate() {
            if (p - z).abs() < (self.planes[best] - z).abs() {
                best = i;
            }
        }
        best
    }

    pub fn nearest(&self, z: f64) -> f64 {
        self.planes[self.nearest_index(z)]
    }

    /// Content-derived identifier, e.g. `planes9-0a1b2c3d`.
    pub fn id(&self) -> String {
        let mut h = Sha256::new();
        for p in &self.planes {
            h.update(p.to_le_bytes());
        }
        let digest = h.finalize();
        let mut s = format!("planes{}-", self.planes.len());
        for b in &digest[..4] {
            let _ = write!(s, "{b:02x}");
        }
        s
    }
}
