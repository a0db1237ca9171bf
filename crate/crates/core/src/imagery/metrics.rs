use serde::Serialize;

use super::image::{BinaryMask, DepthMap};
use crate::error::{Error, Result};

/// Masked l1 depth error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct L1Error {
    /// Mean absolute error in meters.
    pub absolute: f64,
    /// Mean of `|pred - gt| / gt` (ratio, not percent-scaled).
    pub percent: f64,
}

pub fn l1_error(pred: &DepthMap, gt: &DepthMap, mask: &BinaryMask) -> Result<L1Error> {
    if pred.dims() != gt.dims() || pred.dims() != mask.dims() {
        return Err(Error::invalid(format!(
            "l1_error: dimension mismatch pred {:?} gt {:?} mask {:?}",
            pred.dims(),
            gt.dims(),
            mask.dims()
        )));
    }
    let mut n = 0usize;
    let mut abs = 0.0;
    let mut rel = 0.0;
    for ((p, g), m) in pred.data().iter().zip(gt.data()).zip(mask.data()) {
        if *m {
            let e = (p - g).abs();
            abs += e;
            rel += e / g;
            n += 1;
        }
    }
    if n == 0 {
        return Err(Error::invalid("l1_error: mask selects no pixels"));
    }
    Ok(L1Error {
        absolute: abs / n as f64,
        percent: rel / n as f64,
    })
}
