use super::aperture::ApertureMask;
use crate::error::{Error, Result};
use crate::imagery::GrayImage;

/// Resamples the aperture code onto a pixel grid whose open area spans
/// `blur_px` pixels, with exact area weighting, and normalizes to unit sum.
///
/// The kernel side is the smallest odd integer `>= blur_px`; any blur of at
/// most one pixel yields the 1x1 identity kernel.
pub fn rasterize_psf(mask: &ApertureMask, blur_px: f64) -> Result<GrayImage> {
    if !(blur_px.is_finite() && blur_px >= 0.0) {
        return Err(Error::invalid(format!("blur diameter must be >= 0, got {blur_px}")));
    }
    if !mask.cells().iter().any(|c| *c) {
        return Err(Error::invalid("aperture mask has no open cell"));
    }
    if blur_px <= 1.0 {
        return Ok(GrayImage::filled(1, 1, 1.0));
    }
    let mut side = blur_px.ceil() as usize;
    if side % 2 == 0 {
        side += 1;
    }
    let n = mask.side();
    let cell = blur_px / n as f64;
    let origin = (side as f64 - blur_px) / 2.0;

    // Per-axis overlap of mask cell `a` with pixel `i`.
    let mut overlap = vec![0.0; n * side];
    for a in 0..n {
        let lo = origin + a as f64 * cell;
        let hi = lo + cell;
        for i in 0..side {
            let o = (hi.min(i as f64 + 1.0) - lo.max(i as f64)).max(0.0);
            overlap[a * side + i] = o;
        }
    }

    let mut k = GrayImage::new(side, side);
    for row in 0..n {
        for col in 0..n {
            if !mask.cell(col, row) {
                continue;
            }
            for y in 0..side {
                let oy = overlap[row * side + y];
                if oy == 0.0 {
                    continue;
                }
                for x in 0..side {
                    let ox = overlap[col * side + x];
                    if ox != 0.0 {
                        k.add(x, y, ox * oy);
                    }
                }
            }
        }
    }
    let total = k.sum();
    Ok(k.scaled(1.0 / total))
}

/// Second central moment `E[(x - mx)^2 + (y - my)^2]` of a non-negative kernel.
pub fn second_moment(kernel: &GrayImage) -> f64 {
    let total = kernel.sum();
    let (mut mx, mut my) = (0.0, 0.0);
    for y in 0..kernel.height() {
        for x in 0..kernel.width() {
            let w = kernel.get(x, y);
            mx += w * x as f64;
            my += w * y as f64;
        }
    }
    mx /= total;
    my /= total;
    let mut m = 0.0;
    for y in 0..kernel.height() {
        for x in 0..kernel.width() {
            let dx = x as f64 - mx;
            let dy = y as f64 - my;
            m += kernel.get(x, y) * (dx * dx + dy * dy);
        }
    }
    m / total
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sub_pixel_blur_is_identity() {
        let k = rasterize_psf(&ApertureMask::default_coded(), 0.5).unwrap();
        assert_eq!(k.dims(), (1, 1));
        assert_eq!(k.get(0, 0), 1.0);
    }

    #[test]
    fn side_is_next_odd() {
        let m = ApertureMask::default_coded();
        for (b, side) in [(1.5, 3), (3.0, 3), (3.2, 5), (4.0, 5), (9.0, 9), (20.99, 21)] {
            assert_eq!(rasterize_psf(&m, b).unwrap().width(), side, "blur {b}");
        }
    }

    #[test]
    fn kernels_sum_to_one() {
        let m = ApertureMask::default_coded();
        for b in [1.1, 2.5, 5.0, 7.3, 13.0, 21.0] {
            assert!((rasterize_psf(&m, b).unwrap().sum() - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn open_disk_at_nine_px_is_a_disk() {
        let d = ApertureMask::disk(9, 6.0).unwrap();
        let k = rasterize_psf(&d, 9.0).unwrap();
        assert_eq!(k.dims(), (9, 9));
        // Cells map one-to-one onto pixels, so the kernel is the mask itself.
        let open = d.cells().iter().filter(|c| **c).count() as f64;
        for (v, c) in k.data().iter().zip(d.cells()) {
            let expect = if *c { 1.0 / open } else { 0.0 };
            assert!((v - expect).abs() < 1e-12);
        }
    }
}
