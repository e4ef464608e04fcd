//! Convex polygons, half-plane clipping, planar measures and line transversals.

mod measure;
mod transversal;

use std::ops::{Add, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use measure::{disk_polygon_overlap, measure_of, PlanarMeasure, PreparedMeasure, DEFAULT_SMOOTHING};
pub use transversal::{line_transversal_exists, Separation, Transversal, MAX_TRANSVERSAL_SETS};

pub const GEOM_EPS: f64 = 1e-9;

/// A convex region; the empty polygon stands for the empty region.
pub type Region = ConvexPolygon;

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(from = "[f64; 2]", into = "[f64; 2]")]
pub struct Point2 {
    pub x: f64,
    pub y: f64,
}

impl Point2 {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn polar(r: f64, theta: f64) -> Self {
        Self::new(r * theta.cos(), r * theta.sin())
    }

    pub fn dot(self, o: Self) -> f64 {
        self.x * o.x + self.y * o.y
    }

    pub fn cross(self, o: Self) -> f64 {
        self.x * o.y - self.y * o.x
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    /// Counterclockwise quarter turn.
    pub fn perp(self) -> Self {
        Self::new(-self.y, self.x)
    }

    pub fn rotated(self, theta: f64) -> Self {
        let (s, c) = theta.sin_cos();
        Self::new(c * self.x - s * self.y, s * self.x + c * self.y)
    }

    pub fn lerp(self, o: Self, t: f64) -> Self {
        self + (o - self) * t
    }
}

impl From<[f64; 2]> for Point2 {
    fn from([x, y]: [f64; 2]) -> Self {
        Self { x, y }
    }
}

impl From<Point2> for [f64; 2] {
    fn from(p: Point2) -> Self {
        [p.x, p.y]
    }
}

impl Add for Point2 {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        Self::new(self.x + o.x, self.y + o.y)
    }
}

impl Sub for Point2 {
    type Output = Self;
    fn sub(self, o: Self) -> Self {
        Self::new(self.x - o.x, self.y - o.y)
    }
}

impl Mul<f64> for Point2 {
    type Output = Self;
    fn mul(self, s: f64) -> Self {
        Self::new(self.x * s, self.y * s)
    }
}

impl Neg for Point2 {
    type Output = Self;
    fn neg(self) -> Self {
        Self::new(-self.x, -self.y)
    }
}

/// The line `a·x + b·y = c` with unit normal `(a, b)`; its positive side is
/// `a·x + b·y ≥ c`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DirectedLine {
    pub a: f64,
    pub b: f64,
    pub c: f64,
}

impl DirectedLine {
    pub fn new(a: f64, b: f64, c: f64) -> Result<Self> {
        let n = a.hypot(b);
        if !(n > 0.0) || !c.is_finite() {
            return Err(Error::InvalidArgument(format!("degenerate line {a}x + {b}y = {c}")));
        }
        Ok(Self {
            a: a / n,
            b: b / n,
            c: c / n,
        })
    }

    /// The line through `p` and `q` whose positive side lies to the left of
    /// `p → q`.
    pub fn through(p: Point2, q: Point2) -> Result<Self> {
        let n = (q - p).perp();
        Self::new(n.x, n.y, n.dot(p))
    }

    /// The line with unit normal at angle `theta` and offset `c`.
    pub fn with_normal_angle(theta: f64, c: f64) -> Self {
        Self {
            a: theta.cos(),
            b: theta.sin(),
            c,
        }
    }

    pub fn normal(&self) -> Point2 {
        Point2::new(self.a, self.b)
    }

    /// Signed distance, positive on the positive side.
    pub fn eval(&self, p: Point2) -> f64 {
        self.a * p.x + self.b * p.y - self.c
    }

    pub fn flipped(&self) -> Self {
        Self {
            a: -self.a,
            b: -self.b,
            c: -self.c,
        }
    }
}

/// A convex polygon with counterclockwise vertices. Points and segments are
/// allowed as degenerate cases; the empty polygon has no vertices.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ConvexPolygon {
    pub vertices: Vec<Point2>,
}

impl ConvexPolygon {
    /// Validates convexity and orientation (clockwise input is reversed).
    pub fn new(mut vertices: Vec<Point2>) -> Result<Self> {
        if vertices.iter().any(|p| !p.x.is_finite() || !p.y.is_finite()) {
            return Err(Error::InvalidArgument("non-finite polygon vertex".into()));
        }
        if signed_area(&vertices) < 0.0 {
            vertices.reverse();
        }
        let n = vertices.len();
        if n >= 3 {
            let scale = vertices.iter().map(|p| p.norm()).fold(1.0, f64::max);
            let tol = GEOM_EPS * scale * scale;
            for i in 0..n {
                let (a, b, c) = (vertices[i], vertices[(i + 1) % n], vertices[(i + 2) % n]);
                if (b - a).cross(c - b) < -tol {
                    return Err(Error::InvalidArgument(format!("polygon is not convex at vertex {}", (i + 1) % n)));
                }
            }
        }
        Ok(Self { vertices })
    }

    pub fn empty() -> Self {
        Self::default()
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    /// Convex hull by the monotone chain.
    pub fn hull(points: &[Point2]) -> Self {
        let mut pts = points.to_vec();
        pts.sort_by(|a, b| a.x.total_cmp(&b.x).then(a.y.total_cmp(&b.y)));
        pts.dedup();
        if pts.len() < 3 {
            return Self { vertices: pts };
        }
        let mut lower: Vec<Point2> = vec![];
        for &p in &pts {
            while lower.len() >= 2 && (lower[lower.len() - 1] - lower[lower.len() - 2]).cross(p - lower[lower.len() - 2]) <= 0.0 {
                lower.pop();
            }
            lower.push(p);
        }
        let mut upper: Vec<Point2> = vec![];
        for &p in pts.iter().rev() {
            while upper.len() >= 2 && (upper[upper.len() - 1] - upper[upper.len() - 2]).cross(p - upper[upper.len() - 2]) <= 0.0 {
                upper.pop();
            }
            upper.push(p);
        }
        lower.pop();
        upper.pop();
        lower.extend(upper);
        Self { vertices: lower }
    }

    pub fn rectangle(x0: f64, y0: f64, x1: f64, y1: f64) -> Self {
        Self {
            vertices: vec![
                Point2::new(x0, y0),
                Point2::new(x1, y0),
                Point2::new(x1, y1),
                Point2::new(x0, y1),
            ],
        }
    }

    /// Regular `n`-gon inscribed in the circle of radius `r` about `center`.
    pub fn regular(center: Point2, r: f64, n: usize) -> Self {
        let step = std::f64::consts::TAU / n as f64;
        Self {
            vertices: (0..n).map(|i| center + Point2::polar(r, i as f64 * step)).collect(),
        }
    }

    pub fn area(&self) -> f64 {
        signed_area(&self.vertices).abs()
    }

    pub fn centroid(&self) -> Option<Point2> {
        let n = self.vertices.len();
        if n == 0 {
            return None;
        }
        let a = signed_area(&self.vertices);
        if a.abs() < 1e-15 {
            let sum = self.vertices.iter().fold(Point2::default(), |s, &p| s + p);
            return Some(sum * (1.0 / n as f64));
        }
        let mut c = Point2::default();
        for i in 0..n {
            let (p, q) = (self.vertices[i], self.vertices[(i + 1) % n]);
            c = c + (p + q) * p.cross(q);
        }
        Some(c * (1.0 / (6.0 * a)))
    }

    /// Closed containment with `eps` slack.
    pub fn contains(&self, p: Point2, eps: f64) -> bool {
        match self.vertices.len() {
            0 => false,
            1 => (p - self.vertices[0]).norm() <= eps,
            2 => segment_distance(p, self.vertices[0], self.vertices[1]) <= eps,
            n => (0..n).all(|i| {
                let (a, b) = (self.vertices[i], self.vertices[(i + 1) % n]);
                let len = (b - a).norm();
                len == 0.0 || (b - a).cross(p - a) / len >= -eps
            }),
        }
    }

    /// Extent of the orthogonal projection onto `dir`.
    pub fn projection(&self, dir: Point2) -> (f64, f64) {
        self.vertices
            .iter()
            .map(|p| p.dot(dir))
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), t| (lo.min(t), hi.max(t)))
    }

    /// Intersection with the closed positive side of `line`.
    pub fn clip(&self, line: &DirectedLine) -> Self {
        clip(self, line)
    }

    /// Does the closed polygon meet `line`?
    pub fn meets_line(&self, line: &DirectedLine, eps: f64) -> bool {
        let (lo, hi) = self.projection(line.normal());
        !self.is_empty() && lo - eps <= line.c && line.c <= hi + eps
    }

    /// Is the polygon inside the open positive side of `line`, `eps` away
    /// from it?
    pub fn strictly_positive(&self, line: &DirectedLine, eps: f64) -> bool {
        !self.is_empty() && self.vertices.iter().all(|&p| line.eval(p) > eps)
    }

    pub fn map(&self, f: impl Fn(Point2) -> Point2) -> Self {
        Self {
            vertices: self.vertices.iter().map(|&p| f(p)).collect(),
        }
    }
}

pub fn signed_area(v: &[Point2]) -> f64 {
    let n = v.len();
    if n < 3 {
        return 0.0;
    }
    (0..n).map(|i| v[i].cross(v[(i + 1) % n])).sum::<f64>() / 2.0
}

fn segment_distance(p: Point2, a: Point2, b: Point2) -> f64 {
    let d = b - a;
    let len2 = d.dot(d);
    if len2 == 0.0 {
        return (p - a).norm();
    }
    let t = ((p - a).dot(d) / len2).clamp(0.0, 1.0);
    (p - a.lerp(b, t)).norm()
}

/// Sutherland–Hodgman against one closed half-plane.
pub fn clip(poly: &ConvexPolygon, line: &DirectedLine) -> ConvexPolygon {
    let v = &poly.vertices;
    let n = v.len();
    if n == 0 {
        return ConvexPolygon::empty();
    }
    if n == 1 {
        return if line.eval(v[0]) >= 0.0 {
            poly.clone()
        } else {
            ConvexPolygon::empty()
        };
    }
    let mut out = Vec::with_capacity(n + 1);
    for i in 0..n {
        let (s, e) = (v[i], v[(i + 1) % n]);
        let (ds, de) = (line.eval(s), line.eval(e));
        if ds >= 0.0 {
            out.push(s);
        }
        if (ds >= 0.0) != (de >= 0.0) {
            let t = ds / (ds - de);
            out.push(s.lerp(e, t));
        }
    }
    // A segment is traversed twice; drop the duplicate closing edge.
    if n == 2 {
        out.dedup();
        if out.len() > 2 {
            out.truncate(2);
        }
    }
    out.dedup_by(|a, b| (*a - *b).norm() < 1e-15);
    if out.len() > 1 && (out[0] - out[out.len() - 1]).norm() < 1e-15 {
        out.pop();
    }
    ConvexPolygon { vertices: out }
}

/// Intersection of two convex polygons (the second must have area).
pub fn intersect(a: &ConvexPolygon, b: &ConvexPolygon) -> ConvexPolygon {
    let n = b.vertices.len();
    let mut out = a.clone();
    for i in 0..n {
        if out.is_empty() {
            break;
        }
        if let Ok(l) = DirectedLine::through(b.vertices[i], b.vertices[(i + 1) % n]) {
            out = clip(&out, &l);
        }
    }
    out
}
