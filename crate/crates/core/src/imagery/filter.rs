//! Separable Gaussian smoothing, Euclidean distance transforms and binary
//! morphology built on them.

use rand::Rng;
use rand_distr::{Distribution, Normal};

use super::image::{BinaryMask, GrayImage};

/// Normalized 1-D Gaussian taps truncated at `3 sigma`.
pub fn gaussian_taps(sigma: f64) -> Vec<f64> {
    if sigma <= 0.0 {
        return vec![1.0];
    }
    let r = (3.0 * sigma).ceil() as isize;
    let mut taps: Vec<f64> = (-r..=r)
        .map(|i| (-(i * i) as f64 / (2.0 * sigma * sigma)).exp())
        .collect();
    let s: f64 = taps.iter().sum();
    for t in &mut taps {
        *t /= s;
    }
    taps
}

/// Separable Gaussian blur with replicate-edge borders.
pub fn gaussian_blur(image: &GrayImage, sigma: f64) -> GrayImage {
    let taps = gaussian_taps(sigma);
    if taps.len() == 1 {
        return image.clone();
    }
    let (w, h) = image.dims();
    let r = (taps.len() / 2) as isize;
    let src = image.data();
    let mut tmp = vec![0.0; w * h];
    let mut padded = vec![0.0; w + 2 * r as usize];
    for y in 0..h {
        let row = &src[y * w..(y + 1) * w];
        for (i, p) in padded.iter_mut().enumerate() {
            let sx = (i as isize - r).clamp(0, w as isize - 1) as usize;
            *p = row[sx];
        }
        let out = &mut tmp[y * w..(y + 1) * w];
        for (x, o) in out.iter_mut().enumerate() {
            let win = &padded[x..x + taps.len()];
            *o = win.iter().zip(&taps).map(|(a, b)| a * b).sum();
        }
    }
    let mut out = vec![0.0; w * h];
    for (k, t) in taps.iter().enumerate() {
        let dy = k as isize - r;
        for y in 0..h {
            let sy = (y as isize + dy).clamp(0, h as isize - 1) as usize;
            let srow = &tmp[sy * w..(sy + 1) * w];
            let orow = &mut out[y * w..(y + 1) * w];
            for (o, s) in orow.iter_mut().zip(srow) {
                *o += t * s;
            }
        }
    }
    GrayImage::from_raw_unchecked(w, h, out)
}

/// Adds i.i.d. `N(0, sigma^2)` noise to every pixel (no clamping).
pub fn add_gaussian_noise<R: Rng + ?Sized>(image: &GrayImage, sigma: f64, rng: &mut R) -> GrayImage {
    if sigma <= 0.0 {
        return image.clone();
    }
    let normal = Normal::new(0.0, sigma).expect("sigma is positive");
    let data = image.data().iter().map(|v| v + normal.sample(rng)).collect();
    GrayImage::from_raw_unchecked(image.width(), image.height(), data)
}

/// Squared Euclidean distance (in pixels) from every pixel to the nearest
/// set pixel of `mask`; `f64::INFINITY` everywhere when the mask is empty.
pub fn squared_distance_to_set(mask: &BinaryMask) -> Vec<f64> {
    let (w, h) = mask.dims();
    let mut g = vec![0.0; w * h];
    for (d, m) in g.iter_mut().zip(mask.data()) {
        *d = if *m { 0.0 } else { f64::INFINITY };
    }
    let mut f = vec![0.0; w.max(h)];
    let mut d = vec![0.0; w.max(h)];
    for x in 0..w {
        for y in 0..h {
            f[y] = g[y * w + x];
        }
        edt_1d(&f[..h], &mut d[..h]);
        for y in 0..h {
            g[y * w + x] = d[y];
        }
    }
    for y in 0..h {
        f[..w].copy_from_slice(&g[y * w..(y + 1) * w]);
        edt_1d(&f[..w], &mut d[..w]);
        g[y * w..(y + 1) * w].copy_from_slice(&d[..w]);
    }
    g
}

// Lower envelope of parabolas (Felzenszwalb & Huttenlocher).
fn edt_1d(f: &[f64], out: &mut [f64]) {
    let n = f.len();
    let mut v = vec![0usize; n];
    let mut z = vec![0.0f64; n + 1];
    let mut k: isize = -1;
    for q in 0..n {
        if f[q].is_infinite() {
            continue;
        }
        loop {
            if k < 0 {
                k = 0;
                v[0] = q;
                z[0] = f64::NEG_INFINITY;
                z[1] = f64::INFINITY;
                break;
            }
            let p = v[k as usize];
            let s = ((f[q] + (q * q) as f64) - (f[p] + (p * p) as f64)) / (2.0 * (q as f64 - p as f64));
            if s <= z[k as usize] {
                k -= 1;
            } else {
                k += 1;
                v[k as usize] = q;
                z[k as usize] = s;
                z[k as usize + 1] = f64::INFINITY;
                break;
            }
        }
    }
    if k < 0 {
        out.iter_mut().for_each(|o| *o = f64::INFINITY);
        return;
    }
    let mut j = 0usize;
    for (q, o) in out.iter_mut().enumerate() {
        while z[j + 1] < q as f64 {
            j += 1;
        }
        let p = v[j];
        let dq = q as f64 - p as f64;
        *o = dq * dq + f[p];
    }
}

/// Dilation by a Euclidean disk of the given radius.
pub fn dilate(mask: &BinaryMask, radius: f64) -> BinaryMask {
    let d = squared_distance_to_set(mask);
    let r2 = radius * radius;
    BinaryMask::from_vec(mask.width(), mask.height(), d.iter().map(|v| *v <= r2).collect())
        .expect("same dims")
}

/// Erosion by a Euclidean disk; pixels outside the image count as set.
pub fn erode(mask: &BinaryMask, radius: f64) -> BinaryMask {
    let comp = mask.complement();
    if comp.count() == 0 {
        return mask.clone();
    }
    dilate(&comp, radius).complement()
}

pub fn open(mask: &BinaryMask, radius: f64) -> BinaryMask {
    dilate(&erode(mask, radius), radius)
}

pub fn close(mask: &BinaryMask, radius: f64) -> BinaryMask {
    erode(&dilate(mask, radius), radius)
}
