use std::fmt::Write as _;
use std::path::Path;

use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

const DEFAULT_CODED: &str = include_str!("../../assets/coded_mask_7x7.txt");

/// Binary aperture code on an odd square grid.
#[derive(Debug, Clone, PartialEq)]
pub struct ApertureMask {
    side: usize,
    cells: Vec<bool>,
    diameter_mm: f64,
}

impl ApertureMask {
    pub fn new(side: usize, cells: Vec<bool>, diameter_mm: f64) -> Result<Self> {
        if side == 0 || side % 2 == 0 {
            return Err(Error::invalid(format!("aperture side must be odd, got {side}")));
        }
        if cells.len() != side * side {
            return Err(Error::invalid(format!(
                "aperture has {} cells, expected {}",
                cells.len(),
                side * side
            )));
        }
        if !cells.iter().any(|c| *c) {
            return Err(Error::invalid("aperture mask has no open cell"));
        }
        if !(diameter_mm.is_finite() && diameter_mm > 0.0) {
            return Err(Error::invalid(format!("aperture diameter must be > 0, got {diameter_mm}")));
        }
        Ok(Self {
            side,
            cells,
            diameter_mm,
        })
    }

    /// Fully open circular aperture: cells whose centers fall inside the
    /// inscribed circle.
    pub fn disk(side: usize, diameter_mm: f64) -> Result<Self> {
        let r = side as f64 / 2.0;
        let cells = (0..side * side)
            .map(|i| {
                let dx = (i % side) as f64 + 0.5 - r;
                let dy = (i / side) as f64 + 0.5 - r;
                dx * dx + dy * dy <= r * r
            })
            .collect();
        Self::new(side, cells, diameter_mm)
    }

    /// The bundled 7x7 coded aperture.
    pub fn default_coded() -> Self {
        Self::parse(DEFAULT_CODED).expect("bundled mask asset is valid")
    }

    /// Parses the text format: a `diameter_mm=<float>` header followed by
    /// rows of `0`/`1` (whitespace between cells is ignored).
    pub fn parse(text: &str) -> Result<Self> {
        let mut diameter = None;
        let mut rows: Vec<Vec<bool>> = Vec::new();
        let mut offset = 0;
        for line in text.split_inclusive('\n') {
            let start = offset;
            offset += line.len();
            let t = line.trim();
            if t.is_empty() || t.starts_with('#') {
                continue;
            }
            if let Some(v) = t.strip_prefix("diameter_mm=") {
                diameter = Some(v.trim().parse::<f64>().map_err(|_| Error::Parse {
                    offset: start,
                    message: format!("bad diameter {v:?}"),
                })?);
                continue;
            }
            let mut row = Vec::new();
            for c in t.chars().filter(|c| !c.is_whitespace()) {
                match c {
                    '0' => row.push(false),
                    '1' => row.push(true),
                    other => {
                        return Err(Error::Parse {
                            offset: start,
                            message: format!("unexpected character {other:?} in mask row"),
                        })
                    }
                }
            }
            rows.push(row);
        }
        let diameter = diameter.ok_or_else(|| Error::Parse {
            offset: 0,
            message: "missing diameter_mm header".into(),
        })?;
        let side = rows.len();
        if rows.iter().any(|r| r.len() != side) {
            return Err(Error::Parse {
                offset: 0,
                message: format!("mask must be square; got {side} rows of lengths {:?}", rows.iter().map(Vec::len).collect::<Vec<_>>()),
            });
        }
        Self::new(side, rows.concat(), diameter)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    pub fn to_text(&self) -> String {
        let mut s = format!("diameter_mm={}\n", self.diameter_mm);
        for row in self.cells.chunks(self.side) {
            for c in row {
                s.push(if *c { '1' } else { '0' });
            }
            s.push('\n');
        }
        s
    }

    pub fn side(&self) -> usize {
        self.side
    }

    pub fn cells(&self) -> &[bool] {
        &self.cells
    }

    pub fn cell(&self, col: usize, row: usize) -> bool {
        self.cells[row * self.side + col]
    }

    pub fn diameter_mm(&self) -> f64 {
        self.diameter_mm
    }

    pub fn open_fraction(&self) -> f64 {
        self.cells.iter().filter(|c| **c).count() as f64 / self.cells.len() as f64
    }

    /// Short content-derived identifier, e.g. `mask7-1a2b3c4d`.
    pub fn id(&self) -> String {
        let digest = Sha256::digest(self.to_text().as_bytes());
        let mut s = format!("mask{}-", self.side);
        for b in &digest[..4] {
            let _ = write!(s, "{b:02x}");
        }
        s
    }
}
