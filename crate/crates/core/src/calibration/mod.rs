//! Per-plane calibration images and PSF banks.

mod planes;
mod set;

pub use planes::DepthPlanes;
pub use set::{build_calibration_set, build_psf_bank, load_calibration, save_calibration, CalibrationSet, PsfBank};
