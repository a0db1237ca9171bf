use super::image::GrayImage;
use crate::error::{Error, Result};

/// 2-D convolution with replicate-edge padding.
///
/// `out(y, x) = sum_k K(k) * in(clamp(y - ky), clamp(x - kx))` with `k`
/// measured from the kernel center, so an impulse reproduces the kernel
/// centered on it (unflipped). Sparse inputs take a scatter path; both paths
/// implement the same border policy exactly.
pub fn convolve2d(image: &GrayImage, kernel: &GrayImage) -> Result<GrayImage> {
    if image.width() == 0 || image.height() == 0 {
        return Err(Error::invalid("convolve2d: image has a zero dimension"));
    }
    if kernel.width() == 0 || kernel.height() == 0 {
        return Err(Error::invalid("convolve2d: kernel has a zero dimension"));
    }
    if kernel.width() % 2 == 0 || kernel.height() % 2 == 0 {
        return Err(Error::invalid(format!(
            "convolve2d: kernel side lengths must be odd, got {}x{}",
            kernel.width(),
            kernel.height()
        )));
    }
    if kernel.data().iter().any(|v| *v < 0.0) {
        return Err(Error::invalid("convolve2d: kernel values must be non-negative"));
    }

    let taps = taps(kernel);
    let nnz = image.count_nonzero();
    if nnz * 4 < image.len() {
        Ok(scatter(image, kernel, &taps))
    } else {
        Ok(gather(image, &taps))
    }
}

struct Tap {
    dx: isize,
    dy: isize,
    w: f64,
}

fn taps(kernel: &GrayImage) -> Vec<Tap> {
    let rx = (kernel.width() / 2) as isize;
    let ry = (kernel.height() / 2) as isize;
    let mut out = Vec::new();
    for ky in 0..kernel.height() {
        for kx in 0..kernel.width() {
            let w = kernel.get(kx, ky);
            if w != 0.0 {
                out.push(Tap {
                    dx: kx as isize - rx,
                    dy: ky as isize - ry,
                    w,
                });
            }
        }
    }
    out
}

fn gather(image: &GrayImage, taps: &[Tap]) -> GrayImage {
    let w = image.width() as isize;
    let h = image.height() as isize;
    let src = image.data();
    let mut out = vec![0.0; image.len()];
    for y in 0..h {
        let orow = &mut out[(y * w) as usize..((y + 1) * w) as usize];
        for t in taps {
            let sy = (y - t.dy).clamp(0, h - 1);
            let srow = &src[(sy * w) as usize..((sy + 1) * w) as usize];
            // x - dx must stay inside [0, w) for the unclamped span.
            let lo = t.dx.clamp(0, w);
            let hi = (w + t.dx).clamp(0, w);
            for x in 0..lo {
                orow[x as usize] += t.w * srow[0];
            }
            if hi > lo {
                let s0 = (lo - t.dx) as usize;
                let n = (hi - lo) as usize;
                for (o, s) in orow[lo as usize..hi as usize].iter_mut().zip(&srow[s0..s0 + n]) {
                    *o += t.w * s;
                }
            }
            for x in hi.max(lo)..w {
                orow[x as usize] += t.w * srow[(w - 1) as usize];
            }
        }
    }
    GrayImage::from_raw_unchecked(image.width(), image.height(), out)
}

fn scatter(image: &GrayImage, kernel: &GrayImage, taps: &[Tap]) -> GrayImage {
    let w = image.width() as isize;
    let h = image.height() as isize;
    let rx = (kernel.width() / 2) as isize;
    let ry = (kernel.height() / 2) as isize;
    let max_dx = kernel.width() as isize - 1 - rx;
    let max_dy = kernel.height() as isize - 1 - ry;
    let mut out = vec![0.0; image.len()];
    let src = image.data();

    // A border pixel stands in for every virtual pixel that clamps onto it.
    let span = |s: isize, n: isize, max_d: isize, r: isize| -> (isize, isize) {
        let lo = if s == 0 { -max_d } else { s };
        let hi = if s == n - 1 { s + r } else { s };
        (lo, hi)
    };

    for sy in 0..h {
        for sx in 0..w {
            let v = src[(sy * w + sx) as usize];
            if v == 0.0 {
                continue;
            }
            let (ylo, yhi) = span(sy, h, max_dy, ry);
            let (xlo, xhi) = span(sx, w, max_dx, rx);
            for vy in ylo..=yhi {
                for vx in xlo..=xhi {
                    for t in taps {
                        let y = vy + t.dy;
                        let x = vx + t.dx;
                        if y >= 0 && y < h && x >= 0 && x < w {
                            out[(y * w + x) as usize] += t.w * v;
                        }
                    }
                }
            }
        }
    }
    GrayImage::from_raw_unchecked(image.width(), image.height(), out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn kernel3() -> GrayImage {
        GrayImage::from_vec(3, 3, vec![0.0, 0.1, 0.2, 0.05, 0.3, 0.0, 0.15, 0.1, 0.1]).unwrap()
    }

    #[test]
    fn identity_kernel_is_noop() {
        let img = GrayImage::from_fn(7, 5, |x, y| ((x * 3 + y * 5) % 7) as f64 / 7.0);
        let k = GrayImage::filled(1, 1, 1.0);
        assert_eq!(convolve2d(&img, &k).unwrap(), img);
    }

    #[test]
    fn impulse_reproduces_kernel_centered() {
        // Hand summation: an impulse at (2,2) yields out(2+dx, 2+dy) = K(dx, dy).
        let mut img = GrayImage::new(5, 5);
        img.set(2, 2, 1.0);
        let k = kernel3();
        let out = convolve2d(&img, &k).unwrap();
        for y in 0..5 {
            for x in 0..5 {
                let expected = if (1..=3).contains(&x) && (1..=3).contains(&y) {
                    k.get(x - 1, y - 1)
                } else {
                    0.0
                };
                assert!((out.get(x, y) - expected).abs() < 1e-15, "({x},{y})");
            }
        }
    }

    #[test]
    fn constant_image_stays_constant_including_borders() {
        let img = GrayImage::filled(9, 6, 0.37);
        let k = kernel3().scaled(1.0 / kernel3().sum());
        let out = convolve2d(&img, &k).unwrap();
        for v in out.data() {
            assert!((v - 0.37).abs() < 1e-12);
        }
    }

    #[test]
    fn scatter_and_gather_agree_with_border_pixels() {
        let mut img = GrayImage::new(8, 6);
        img.set(0, 0, 1.0);
        img.set(7, 2, 0.5);
        img.set(3, 5, 0.25);
        img.set(4, 3, 0.75);
        let k = GrayImage::from_fn(5, 3, |x, y| (x + 2 * y) as f64 * 0.01);
        let t = taps(&k);
        let a = scatter(&img, &k, &t);
        let b = gather(&img, &t);
        for (p, q) in a.data().iter().zip(b.data()) {
            assert!((p - q).abs() < 1e-14);
        }
    }

    #[test]
    fn single_row_image_with_border_impulse() {
        let mut img = GrayImage::new(4, 1);
        img.set(0, 0, 1.0);
        let k = GrayImage::filled(3, 3, 1.0 / 9.0);
        let t = taps(&k);
        let a = scatter(&img, &k, &t);
        let b = gather(&img, &t);
        for (p, q) in a.data().iter().zip(b.data()) {
            assert!((p - q).abs() < 1e-14);
        }
    }

    #[test]
    fn rejects_bad_shapes() {
        let img = GrayImage::new(4, 4);
        assert!(convolve2d(&img, &GrayImage::filled(2, 3, 0.1)).is_err());
        assert!(convolve2d(&GrayImage::new(0, 3), &GrayImage::filled(1, 1, 1.0)).is_err());
        let neg = GrayImage::from_vec(1, 1, vec![-1.0]).unwrap();
        assert!(convolve2d(&img, &neg).is_err());
    }
}
