//! Obstacle primitives, scene files, ray intersection and clearance.
//!
//! World axes: x forward (toward the goal), y right, z down. The ground is
//! the plane z = 0, so heights above it are negative z.

use std::fmt::Write as _;
use std::fs;
use std::ops::{Add, Mul, Neg, Sub};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Vec3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Vec3 {
    pub const ZERO: Vec3 = Vec3 { x: 0.0, y: 0.0, z: 0.0 };

    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Self { x, y, z }
    }

    pub fn dot(self, o: Vec3) -> f64 {
        self.x * o.x + self.y * o.y + self.z * o.z
    }

    pub fn norm(self) -> f64 {
        self.dot(self).sqrt()
    }

    pub fn normalized(self) -> Vec3 {
        self * (1.0 / self.norm())
    }

    pub fn abs(self) -> Vec3 {
        Vec3::new(self.x.abs(), self.y.abs(), self.z.abs())
    }

    pub fn max_elem(self) -> f64 {
        self.x.max(self.y).max(self.z)
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }
}

impl Add for Vec3 {
    type Output = Vec3;
    fn add(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x + o.x, self.y + o.y, self.z + o.z)
    }
}

impl Sub for Vec3 {
    type Output = Vec3;
    fn sub(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x - o.x, self.y - o.y, self.z - o.z)
    }
}

impl Mul<f64> for Vec3 {
    type Output = Vec3;
    fn mul(self, s: f64) -> Vec3 {
        Vec3::new(self.x * s, self.y * s, self.z * s)
    }
}

impl Neg for Vec3 {
    type Output = Vec3;
    fn neg(self) -> Vec3 {
        self * -1.0
    }
}

/// Axis-aligned box.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Aabb {
    pub min: Vec3,
    pub max: Vec3,
}

impl Aabb {
    pub fn new(min: Vec3, max: Vec3) -> Result<Self> {
        if !(min.is_finite() && max.is_finite() && min.x < max.x && min.y < max.y && min.z < max.z) {
            return Err(Error::invalid(format!("degenerate box {min:?}..{max:?}")));
        }
        Ok(Self { min, max })
    }

    pub fn from_center(c: Vec3, size: Vec3) -> Result<Self> {
        Self::new(c - size * 0.5, c + size * 0.5)
    }

    pub fn center(&self) -> Vec3 {
        (self.min + self.max) * 0.5
    }

    pub fn contains(&self, p: Vec3) -> bool {
        p.x >= self.min.x && p.x <= self.max.x && p.y >= self.min.y && p.y <= self.max.y && p.z >= self.min.z && p.z <= self.max.z
    }

    pub fn contains_box(&self, o: &Aabb) -> bool {
        self.contains(o.min) && self.contains(o.max)
    }

    /// Entry and exit distances along the ray, if it meets the box ahead.
    fn slab(&self, o: Vec3, d: Vec3) -> Option<(f64, f64)> {
        let mut t0 = f64::NEG_INFINITY;
        let mut t1 = f64::INFINITY;
        for (oi, di, lo, hi) in [
            (o.x, d.x, self.min.x, self.max.x),
            (o.y, d.y, self.min.y, self.max.y),
            (o.z, d.z, self.min.z, self.max.z),
        ] {
            if di == 0.0 {
                if oi < lo || oi > hi {
                    return None;
                }
            } else {
                let a = (lo - oi) / di;
                let b = (hi - oi) / di;
                t0 = t0.max(a.min(b));
                t1 = t1.min(a.max(b));
            }
        }
        (t0 <= t1 && t1 >= 0.0).then_some((t0, t1))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Shape {
    Box(Aabb),
    /// Vertical cylinder standing on the ground, `height` meters tall.
    Cylinder { x: f64, y: f64, radius: f64, height: f64 },
    /// Segment `a`-`b` swept by a sphere of `radius`.
    Capsule { a: Vec3, b: Vec3, radius: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Obstacle {
    pub shape: Shape,
    pub reflectivity: f64,
}

impl Obstacle {
    pub fn new(shape: Shape, reflectivity: f64) -> Result<Self> {
        let o = Self { shape, reflectivity };
        o.validate()?;
        Ok(o)
    }

    fn validate(&self) -> Result<()> {
        if !(self.reflectivity > 0.0 && self.reflectivity <= 1.0) {
            return Err(Error::invalid(format!("reflectivity {} must lie in (0, 1]", self.reflectivity)));
        }
        match self.shape {
            Shape::Box(b) => {
                Aabb::new(b.min, b.max)?;
            }
            Shape::Cylinder { x, y, radius, height } => {
                if !(x.is_finite() && y.is_finite() && radius > 0.0 && height > 0.0 && radius.is_finite() && height.is_finite()) {
                    return Err(Error::invalid("cylinder needs finite center and positive radius and height"));
                }
            }
            Shape::Capsule { a, b, radius } => {
                if !(a.is_finite() && b.is_finite() && radius > 0.0 && radius.is_finite()) {
                    return Err(Error::invalid("capsule needs finite endpoints and a positive radius"));
                }
            }
        }
        Ok(())
    }

    pub fn bounding_box(&self) -> Aabb {
        match self.shape {
            Shape::Box(b) => b,
            Shape::Cylinder { x, y, radius, height } => Aabb {
                min: Vec3::new(x - radius, y - radius, -height),
                max: Vec3::new(x + radius, y + radius, 0.0),
            },
            Shape::Capsule { a, b, radius } => {
                let r = Vec3::new(radius, radius, radius);
                Aabb {
                    min: Vec3::new(a.x.min(b.x), a.y.min(b.y), a.z.min(b.z)) - r,
                    max: Vec3::new(a.x.max(b.x), a.y.max(b.y), a.z.max(b.z)) + r,
                }
            }
        }
    }

    /// Signed distance from `p` to the surface (negative inside).
    pub fn distance(&self, p: Vec3) -> f64 {
        match self.shape {
            Shape::Box(b) => {
                let q = (p - b.center()).abs() - (b.max - b.min) * 0.5;
                let outside = Vec3::new(q.x.max(0.0), q.y.max(0.0), q.z.max(0.0)).norm();
                outside + q.max_elem().min(0.0)
            }
            Shape::Cylinder { x, y, radius, height } => {
                let dr = (p.x - x).hypot(p.y - y) - radius;
                let dz = (p.z + 0.5 * height).abs() - 0.5 * height;
                dr.max(0.0).hypot(dz.max(0.0)) + dr.max(dz).min(0.0)
            }
            Shape::Capsule { a, b, radius } => {
                let ab = b - a;
                let len2 = ab.dot(ab);
                let t = if len2 > 0.0 { ((p - a).dot(ab) / len2).clamp(0.0, 1.0) } else { 0.0 };
                (p - (a + ab * t)).norm() - radius
            }
        }
    }

    /// Distance along the unit ray `o + t d` to the first surface hit with
    /// `t >= 0`; zero when `o` is inside.
    pub fn intersect(&self, o: Vec3, d: Vec3) -> Option<f64> {
        if self.distance(o) <= 0.0 {
            return Some(0.0);
        }
        match self.shape {
            Shape::Box(b) => b.slab(o, d).map(|(t0, _)| t0.max(0.0)),
            Shape::Cylinder { x, y, radius, height } => intersect_cylinder(o, d, x, y, radius, height),
            Shape::Capsule { a, b, radius } => intersect_capsule(o, d, a, b, radius),
        }
    }
}

/// Smallest root `>= 0` of `a t^2 + 2 b t + c`.
fn first_root(a: f64, b: f64, c: f64) -> Option<f64> {
    if a == 0.0 {
        return None;
    }
    let disc = b * b - a * c;
    if disc < 0.0 {
        return None;
    }
    let s = disc.sqrt();
    [(-b - s) / a, (-b + s) / a].into_iter().filter(|t| *t >= 0.0).reduce(f64::min)
}

fn intersect_cylinder(o: Vec3, d: Vec3, cx: f64, cy: f64, r: f64, h: f64) -> Option<f64> {
    let mut best: Option<f64> = None;
    let mut take = |t: f64| best = Some(best.map_or(t, |b: f64| b.min(t)));
    let (ox, oy) = (o.x - cx, o.y - cy);
    let a = d.x * d.x + d.y * d.y;
    if a > 0.0 {
        let b = ox * d.x + oy * d.y;
        let c = ox * ox + oy * oy - r * r;
        let disc = b * b - a * c;
        if disc >= 0.0 {
            let s = disc.sqrt();
            for t in [(-b - s) / a, (-b + s) / a] {
                let z = o.z + t * d.z;
                if t >= 0.0 && (-h..=0.0).contains(&z) {
                    take(t);
                }
            }
        }
    }
    if d.z != 0.0 {
        for zc in [-h, 0.0] {
            let t = (zc - o.z) / d.z;
            if t >= 0.0 {
                let (px, py) = (ox + t * d.x, oy + t * d.y);
                if px * px + py * py <= r * r {
                    take(t);
                }
            }
        }
    }
    best
}

fn intersect_capsule(o: Vec3, d: Vec3, pa: Vec3, pb: Vec3, r: f64) -> Option<f64> {
    let ba = pb - pa;
    let oa = o - pa;
    let baba = ba.dot(ba);
    let bard = ba.dot(d);
    let baoa = ba.dot(oa);
    let rdoa = d.dot(oa);
    let oaoa = oa.dot(oa);
    let mut best: Option<f64> = None;
    if baba > 0.0 {
        // Lateral surface: roots where the projected distance equals r.
        let a = baba - bard * bard;
        let b = baba * rdoa - baoa * bard;
        let c = baba * oaoa - baoa * baoa - r * r * baba;
        let disc = b * b - a * c;
        if a > 0.0 && disc >= 0.0 {
            let s = disc.sqrt();
            for t in [(-b - s) / a, (-b + s) / a] {
                let y = baoa + t * bard;
                if t >= 0.0 && y > 0.0 && y < baba {
                    best = Some(best.map_or(t, |v: f64| v.min(t)));
                }
            }
        }
    }
    for c in [pa, pb] {
        let oc = o - c;
        if let Some(t) = first_root(1.0, oc.dot(d), oc.dot(oc) - r * r) {
            best = Some(best.map_or(t, |v: f64| v.min(t)));
        }
    }
    best
}

/// Flight volume plus obstacles.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorldScene {
    pub bounds: Aabb,
    pub obstacles: Vec<Obstacle>,
}

/// First obstacle hit along a ray.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Hit {
    pub t: f64,
    pub obstacle: usize,
}

impl WorldScene {
    pub fn new(bounds: Aabb, obstacles: Vec<Obstacle>) -> Result<Self> {
        let s = Self { bounds, obstacles };
        s.validate()?;
        Ok(s)
    }

    pub fn empty(bounds: Aabb) -> Self {
        Self {
            bounds,
            obstacles: Vec::new(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        Aabb::new(self.bounds.min, self.bounds.max)?;
        for (i, o) in self.obstacles.iter().enumerate() {
            o.validate()?;
            if !self.bounds.contains_box(&o.bounding_box()) {
                return Err(Error::invalid(format!("obstacle {i} extends outside the scene bounds")));
            }
        }
        Ok(())
    }

    pub fn raycast(&self, o: Vec3, d: Vec3) -> Option<Hit> {
        let mut best: Option<Hit> = None;
        for (i, ob) in self.obstacles.iter().enumerate() {
            if let Some(t) = ob.intersect(o, d) {
                if best.is_none_or(|b| t < b.t) {
                    best = Some(Hit { t, obstacle: i });
                }
            }
        }
        best
    }

    /// Distance to the nearest obstacle surface (infinite when empty).
    pub fn clearance(&self, p: Vec3) -> f64 {
        self.obstacles.iter().map(|o| o.distance(p)).fold(f64::INFINITY, f64::min)
    }

    /// One line per item: `bounds x0 y0 z0 x1 y1 z1`, then
    /// `box x y z sx sy sz refl` (center and size), `cyl x y r h refl` or
    /// `cap x1 y1 z1 x2 y2 z2 r refl`. `#` starts a comment.
    pub fn to_text(&self) -> String {
        let b = self.bounds;
        let mut s = format!("bounds {} {} {} {} {} {}\n", b.min.x, b.min.y, b.min.z, b.max.x, b.max.y, b.max.z);
        for o in &self.obstacles {
            let refl = o.reflectivity;
            let _ = match o.shape {
                Shape::Box(bx) => {
                    let (c, sz) = (bx.center(), bx.max - bx.min);
                    writeln!(s, "box {} {} {} {} {} {} {refl}", c.x, c.y, c.z, sz.x, sz.y, sz.z)
                }
                Shape::Cylinder { x, y, radius, height } => writeln!(s, "cyl {x} {y} {radius} {height} {refl}"),
                Shape::Capsule { a, b, radius } => {
                    writeln!(s, "cap {} {} {} {} {} {} {radius} {refl}", a.x, a.y, a.z, b.x, b.y, b.z)
                }
            };
        }
        s
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut bounds = None;
        let mut obstacles = Vec::new();
        let mut offset = 0;
        for line in text.split_inclusive('\n') {
            let here = offset;
            offset += line.len();
            let body = line.split('#').next().unwrap_or("").trim();
            if body.is_empty() {
                continue;
            }
            let bad = |m: String| Error::Parse { offset: here, message: m };
            let mut parts = body.split_whitespace();
            let kind = parts.next().expect("non-empty line");
            let nums = parts
                .map(|t| t.parse::<f64>().map_err(|_| bad(format!("bad number {t:?}"))))
                .collect::<Result<Vec<f64>>>()?;
            let want = |n: usize| {
                if nums.len() == n {
                    Ok(())
                } else {
                    Err(bad(format!("{kind} takes {n} numbers, got {}", nums.len())))
                }
            };
            let item = match kind {
                "bounds" => {
                    want(6)?;
                    let b = Aabb::new(Vec3::new(nums[0], nums[1], nums[2]), Vec3::new(nums[3], nums[4], nums[5]))
                        .map_err(|e| bad(e.to_string()))?;
                    if bounds.replace(b).is_some() {
                        return Err(bad("duplicate bounds line".into()));
                    }
                    continue;
                }
                "box" => {
                    want(7)?;
                    let b = Aabb::from_center(Vec3::new(nums[0], nums[1], nums[2]), Vec3::new(nums[3], nums[4], nums[5]))
                        .map_err(|e| bad(e.to_string()))?;
                    Obstacle::new(Shape::Box(b), nums[6])
                }
                "cyl" => {
                    want(5)?;
                    Obstacle::new(
                        Shape::Cylinder {
                            x: nums[0],
                            y: nums[1],
                            radius: nums[2],
                            height: nums[3],
                        },
                        nums[4],
                    )
                }
                "cap" => {
                    want(8)?;
                    Obstacle::new(
                        Shape::Capsule {
                            a: Vec3::new(nums[0], nums[1], nums[2]),
                            b: Vec3::new(nums[3], nums[4], nums[5]),
                            radius: nums[6],
                        },
                        nums[7],
                    )
                }
                other => return Err(bad(format!("unknown item {other:?}"))),
            };
            obstacles.push(item.map_err(|e| bad(e.to_string()))?);
        }
        let bounds = bounds.ok_or_else(|| Error::Parse {
            offset: 0,
            message: "scene has no bounds line".into(),
        })?;
        Self::new(bounds, obstacles)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_text()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        Self::parse(&fs::read_to_string(path).map_err(|e| Error::io(path, e))?)
    }
}
