//! Thin-lens defocus, aperture codes, projected dot patterns and rendering.

mod aperture;
mod config;
mod pattern;
mod psf;
mod render;

pub use aperture::ApertureMask;
pub use config::{blur_diameter, blur_diameter_px, OpticalConfig};
pub use pattern::{DotPattern, PatternSpec};
pub use psf::{rasterize_psf, second_moment};
pub use render::{
    falloff, plane_kernels, render_depth_scene, render_dot_wall, render_layers, stamp_spots, wall_spots, Spot,
    FALLOFF_REF_M,
};
