//! Image and depth-map value types, convolution, filtering and PGM I/O.

mod convolve;
mod filter;
mod image;
mod metrics;
mod pgm;

pub use convolve::convolve2d;
pub use filter::{
    add_gaussian_noise, close, dilate, erode, gaussian_blur, gaussian_taps, open, squared_distance_to_set,
};
pub use image::{BinaryMask, DepthMap, GrayImage};
pub use metrics::{l1_error, L1Error};
pub use pgm::{
    decode_pgm, default_depth_scale, depth_scale_path, encode_pgm, read_depth_pgm, read_pgm, write_depth_pgm,
    write_pgm,
};
