//! Binary PGM ("P5") reading and writing.
//!
//! Images are written at maxval 65535 (big-endian 16-bit samples). Reading
//! accepts any maxval in `1..=65535`; samples are scaled by `1/maxval`.
//! Depth maps are stored as 16-bit PGM plus a one-line sidecar
//! `scale_m_per_unit=<float>` next to the image (`<file>.scale`).

use std::fs;
use std::path::{Path, PathBuf};

use super::image::{DepthMap, GrayImage};
use crate::error::{Error, Result};

pub fn encode_pgm(image: &GrayImage) -> Result<Vec<u8>> {
    if let Some(i) = image.data().iter().position(|v| !(0.0..=1.0).contains(v)) {
        return Err(Error::invalid(format!(
            "write_pgm: pixel {i} has value {} outside [0, 1]",
            image.data()[i]
        )));
    }
    let header = format!("P5\n{} {}\n65535\n", image.width(), image.height());
    let mut out = Vec::with_capacity(header.len() + image.len() * 2);
    out.extend_from_slice(header.as_bytes());
    for v in image.data() {
        let q = (v * 65535.0).round() as u16;
        out.extend_from_slice(&q.to_be_bytes());
    }
    Ok(out)
}

pub fn decode_pgm(bytes: &[u8]) -> Result<GrayImage> {
    let mut cur = Cursor { bytes, pos: 0 };
    let magic = cur.token()?;
    if magic != b"P5" {
        return Err(Error::Parse {
            offset: 0,
            message: format!(
                "unsupported magic {:?}; only binary \"P5\" is accepted",
                String::from_utf8_lossy(magic)
            ),
        });
    }
    let width = cur.number("width")?;
    let height = cur.number("height")?;
    let maxval = cur.number("maxval")?;
    if maxval == 0 || maxval > 65535 {
        return Err(Error::Parse {
            offset: cur.pos,
            message: format!("maxval {maxval} outside 1..=65535"),
        });
    }
    // Exactly one whitespace byte separates the header from the raster.
    if cur.pos >= bytes.len() || !bytes[cur.pos].is_ascii_whitespace() {
        return Err(Error::Parse {
            offset: cur.pos,
            message: "missing whitespace after maxval".into(),
        });
    }
    let start = cur.pos + 1;
    let bytes_per_sample = if maxval < 256 { 1 } else { 2 };
    let needed = width
        .checked_mul(height)
        .and_then(|n| n.checked_mul(bytes_per_sample))
        .ok_or_else(|| Error::Parse {
            offset: start,
            message: "image dimensions overflow".into(),
        })?;
    let available = bytes.len().saturating_sub(start);
    if available < needed {
        return Err(Error::Parse {
            offset: bytes.len(),
            message: format!("truncated raster: expected {needed} bytes, found {available}"),
        });
    }
    let raster = &bytes[start..start + needed];
    let scale = 1.0 / maxval as f64;
    let mut data = Vec::with_capacity(width * height);
    for i in 0..width * height {
        let raw = if bytes_per_sample == 1 {
            raster[i] as usize
        } else {
            u16::from_be_bytes([raster[2 * i], raster[2 * i + 1]]) as usize
        };
        if raw > maxval {
            return Err(Error::Parse {
                offset: start + i * bytes_per_sample,
                message: format!("sample {raw} exceeds maxval {maxval}"),
            });
        }
        data.push(raw as f64 * scale);
    }
    GrayImage::from_vec(width, height, data)
}

pub fn write_pgm(image: &GrayImage, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let bytes = encode_pgm(image)?;
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

pub fn read_pgm(path: impl AsRef<Path>) -> Result<GrayImage> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_pgm(&bytes)
}

/// Sidecar path holding the depth scale for a depth PGM.
pub fn depth_scale_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".scale");
    PathBuf::from(s)
}

/// Default depth quantum (0.1 mm per unit, 6.55 m full scale) widened when
/// the map holds larger depths.
pub fn default_depth_scale(depth: &DepthMap) -> f64 {
    let fine = 1e-4;
    let needed = depth.max() / 65535.0;
    if needed > fine {
        needed
    } else {
        fine
    }
}

pub fn write_depth_pgm(depth: &DepthMap, path: impl AsRef<Path>, scale_m_per_unit: f64) -> Result<()> {
    let path = path.as_ref();
    if !(scale_m_per_unit.is_finite() && scale_m_per_unit > 0.0) {
        return Err(Error::invalid("depth scale must be positive"));
    }
    let units: Vec<f64> = depth
        .data()
        .iter()
        .map(|z| (z / scale_m_per_unit).round() / 65535.0)
        .collect();
    if units.iter().any(|u| *u > 1.0) {
        return Err(Error::invalid(format!(
            "depth {} m exceeds 16-bit range at scale {scale_m_per_unit}",
            depth.max()
        )));
    }
    let img = GrayImage::from_vec(depth.width(), depth.height(), units)?;
    write_pgm(&img, path)?;
    let side = depth_scale_path(path);
    fs::write(&side, format!("scale_m_per_unit={scale_m_per_unit}\n")).map_err(|e| Error::io(&side, e))
}

pub fn read_depth_pgm(path: impl AsRef<Path>) -> Result<DepthMap> {
    let path = path.as_ref();
    let side = depth_scale_path(path);
    let text = fs::read_to_string(&side).map_err(|e| Error::io(&side, e))?;
    let line = text.lines().next().unwrap_or("").trim();
    let scale: f64 = line
        .strip_prefix("scale_m_per_unit=")
        .and_then(|v| v.trim().parse().ok())
        .ok_or_else(|| Error::Parse {
            offset: 0,
            message: format!("bad depth sidecar line {line:?} in {}", side.display()),
        })?;
    let img = read_pgm(path)?;
    let data = img.data().iter().map(|u| (u * 65535.0).round() * scale).collect();
    DepthMap::from_vec(img.width(), img.height(), data)
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn skip_space_and_comments(&mut self) {
        while self.pos < self.bytes.len() {
            let b = self.bytes[self.pos];
            if b == b'#' {
                while self.pos < self.bytes.len() && self.bytes[self.pos] != b'\n' {
                    self.pos += 1;
                }
            } else if b.is_ascii_whitespace() {
                self.pos += 1;
            } else {
                break;
            }
        }
    }

    fn token(&mut self) -> Result<&'a [u8]> {
        self.skip_space_and_comments();
        let start = self.pos;
        while self.pos < self.bytes.len() && !self.bytes[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
        if start == self.pos {
            return Err(Error::Parse {
                offset: start,
                message: "unexpected end of header".into(),
            });
        }
        Ok(&self.bytes[start..self.pos])
    }

    fn number(&mut self, what: &str) -> Result<usize> {
        let tok = self.token()?;
        let start = self.pos - tok.len();
        std::str::from_utf8(tok)
            .ok()
            .filter(|s| s.bytes().all(|b| b.is_ascii_digit()))
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| Error::Parse {
                offset: start,
                message: format!("malformed {what} {:?}", String::from_utf8_lossy(tok)),
            })
    }
}
