//! Structured-light depth from defocus with coded apertures: optics
//! simulation, calibration, synthetic data, depth estimators, a reactive
//! navigation policy and a closed-loop dark-world simulator.

pub mod calibration;
pub mod datagen;
pub mod error;
pub mod estimation;
pub mod imagery;
pub mod navigation;
pub mod optics;
pub mod seed;
pub mod simworld;

pub use error::{Error, Result};
