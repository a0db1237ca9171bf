use crate::error::{Error, Result};
use crate::imagery::{DepthMap, GrayImage};

/// Dense depth with per-pixel predicted log-variance.
#[derive(Debug, Clone, PartialEq)]
pub struct DepthEstimate {
    pub depth: DepthMap,
    pub log_variance: Vec<f64>,
}

impl DepthEstimate {
    pub fn new(depth: DepthMap, log_variance: Vec<f64>) -> Result<Self> {
        if log_variance.len() != depth.data().len() {
            return Err(Error::invalid("log-variance grid does not match depth map"));
        }
        if log_variance.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("log-variance must be finite"));
        }
        Ok(Self { depth, log_variance })
    }

    pub fn width(&self) -> usize {
        self.depth.width()
    }

    pub fn height(&self) -> usize {
        self.depth.height()
    }

    pub fn log_variance_at(&self, x: usize, y: usize) -> f64 {
        self.log_variance[y * self.depth.width() + x]
    }
}

/// Common interface of every single-image depth estimator.
pub trait DepthEstimator: Send + Sync {
    fn name(&self) -> &str;
    fn estimate(&self, image: &GrayImage) -> Result<DepthEstimate>;
}
