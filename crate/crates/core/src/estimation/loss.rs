//! Heteroscedastic Huber loss and its analytic gradient.

use super::estimate::DepthEstimate;
use crate::error::{Error, Result};
use crate::imagery::DepthMap;

pub fn huber(r: f64, delta: f64) -> f64 {
    let a = r.abs();
    if a <= delta {
        0.5 * r * r
    } else {
        delta * (a - 0.5 * delta)
    }
}

pub fn huber_grad(r: f64, delta: f64) -> f64 {
    r.clamp(-delta, delta)
}

/// `mean_p( Huber(pred_p - gt_p) * exp(-s_p) + 0.5 * s_p )` with `s = log variance`.
pub fn hetero_loss_values(pred: &[f64], log_var: &[f64], gt: &[f64], delta: f64) -> f64 {
    let n = pred.len() as f64;
    pred.iter()
        .zip(log_var)
        .zip(gt)
        .map(|((p, s), g)| huber(p - g, delta) * (-s).exp() + 0.5 * s)
        .sum::<f64>()
        / n
}

/// Gradients of [`hetero_loss_values`] with respect to the prediction and
/// the log variance.
pub fn hetero_loss_grad_values(pred: &[f64], log_var: &[f64], gt: &[f64], delta: f64) -> (Vec<f64>, Vec<f64>) {
    let n = pred.len() as f64;
    let mut gz = Vec::with_capacity(pred.len());
    let mut gs = Vec::with_capacity(pred.len());
    for ((p, s), g) in pred.iter().zip(log_var).zip(gt) {
        let r = p - g;
        let w = (-s).exp();
        gz.push(huber_grad(r, delta) * w / n);
        gs.push((0.5 - huber(r, delta) * w) / n);
    }
    (gz, gs)
}

fn check(pred: &DepthEstimate, gt: &DepthMap, delta: f64) -> Result<()> {
    if !(delta > 0.0) {
        return Err(Error::invalid(format!("huber delta must be > 0, got {delta}")));
    }
    if pred.depth.dims() != gt.dims() {
        return Err(Error::invalid("prediction and ground truth differ in size"));
    }
    Ok(())
}

pub fn hetero_loss(pred: &DepthEstimate, gt: &DepthMap, delta: f64) -> Result<f64> {
    check(pred, gt, delta)?;
    Ok(hetero_loss_values(pred.depth.data(), &pred.log_variance, gt.data(), delta))
}

pub fn hetero_loss_grad(pred: &DepthEstimate, gt: &DepthMap, delta: f64) -> Result<(Vec<f64>, Vec<f64>)> {
    check(pred, gt, delta)?;
    Ok(hetero_loss_grad_values(pred.depth.data(), &pred.log_variance, gt.data(), delta))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn huber_branches() {
        assert_eq!(huber(0.0, 1.0), 0.0);
        assert_eq!(huber(0.5, 1.0), 0.125);
        assert_eq!(huber(2.0, 1.0), 1.5);
        assert_eq!(huber(-2.0, 1.0), 1.5);
    }

    #[test]
    fn loss_examples() {
        let gt = [1.0, 2.0];
        assert_eq!(hetero_loss_values(&gt, &[0.0, 0.0], &gt, 0.25), 0.0);
        // Residual 1.5 with delta 1 gives Huber 1.0.
        let pred = [2.5, 3.5];
        let l = hetero_loss_values(&pred, &[2.0, 2.0], &gt, 1.0);
        assert!((l - ((-2.0f64).exp() + 1.0)).abs() < 1e-12);
        assert!((l - 1.1353).abs() < 1e-4);
    }

    #[test]
    fn gradient_at_exact_prediction() {
        let gt = [1.0, 2.0, 3.0, 4.0];
        let (gz, gs) = hetero_loss_grad_values(&gt, &[0.3; 4], &gt, 0.25);
        assert!(gz.iter().all(|g| *g == 0.0));
        assert!(gs.iter().all(|g| (*g - 0.5 / 4.0).abs() < 1e-15));
    }
}
