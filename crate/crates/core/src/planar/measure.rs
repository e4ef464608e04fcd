use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::{ConvexPolygon, Point2};
use crate::error::{Error, Result};

pub const DEFAULT_SMOOTHING: f64 = 0.01;
const MASS_TOLERANCE: f64 = 1e-9;

fn default_smoothing() -> f64 {
    DEFAULT_SMOOTHING
}

/// A probability measure on the plane (`measure.v1`).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum PlanarMeasure {
    /// Weighted points, each smeared uniformly over a disk of `radius`.
    Points {
        points: Vec<[f64; 3]>,
        #[serde(default = "default_smoothing")]
        radius: f64,
    },
    /// Piecewise-constant density; `grid[r][c]` covers
    /// `[x0 + c·cell, x0 + (c+1)·cell] × [y0 + r·cell, y0 + (r+1)·cell]`.
    Raster {
        origin: [f64; 2],
        cell: f64,
        grid: Vec<Vec<f64>>,
    },
}

impl PlanarMeasure {
    pub fn total_mass(&self) -> f64 {
        match self {
            Self::Points { points, .. } => points.iter().map(|p| p[2]).sum(),
            Self::Raster { cell, grid, .. } => grid.iter().flatten().sum::<f64>() * cell * cell,
        }
    }

    /// Rescales to total mass one.
    pub fn normalized(mut self) -> Result<Self> {
        let mass = self.total_mass();
        if !(mass > 0.0) || !mass.is_finite() {
            return Err(Error::NormalizationError(format!("total mass {mass} cannot be normalized")));
        }
        match &mut self {
            Self::Points { points, .. } => points.iter_mut().for_each(|p| p[2] /= mass),
            Self::Raster { grid, .. } => grid.iter_mut().flatten().for_each(|d| *d /= mass),
        }
        Ok(self)
    }

    /// Checks nonnegativity, unit mass and support inside the unit disk.
    pub fn validate(&self) -> Result<()> {
        match self {
            Self::Points { points, radius } => {
                if !(*radius >= 0.0) {
                    return Err(Error::InvalidArgument(format!("negative smoothing radius {radius}")));
                }
                for p in points {
                    if p.iter().any(|v| !v.is_finite()) || p[2] < 0.0 {
                        return Err(Error::InvalidArgument(format!("bad weighted point {p:?}")));
                    }
                    if p[0].hypot(p[1]) + radius > 1.0 + MASS_TOLERANCE {
                        return Err(Error::InvalidArgument(format!("point {p:?} leaves the unit disk")));
                    }
                }
            }
            Self::Raster { origin, cell, grid } => {
                if !(*cell > 0.0) || origin.iter().any(|v| !v.is_finite()) {
                    return Err(Error::InvalidArgument("bad raster geometry".into()));
                }
                let cols = grid.first().map_or(0, Vec::len);
                for (r, row) in grid.iter().enumerate() {
                    if row.len() != cols {
                        return Err(Error::InvalidArgument(format!("raster row {r} has {} cells, expected {cols}", row.len())));
                    }
                    for (c, &d) in row.iter().enumerate() {
                        if !(d >= 0.0) || !d.is_finite() {
                            return Err(Error::InvalidArgument(format!("bad density at ({r}, {c})")));
                        }
                        if d > 0.0 {
                            let corners = [(0.0, 0.0), (1.0, 0.0), (0.0, 1.0), (1.0, 1.0)];
                            let outside = corners.iter().any(|(dx, dy)| {
                                let x = origin[0] + (c as f64 + dx) * cell;
                                let y = origin[1] + (r as f64 + dy) * cell;
                                x.hypot(y) > 1.0 + MASS_TOLERANCE
                            });
                            if outside {
                                return Err(Error::InvalidArgument(format!("raster cell ({r}, {c}) leaves the unit disk")));
                            }
                        }
                    }
                }
            }
        }
        let mass = self.total_mass();
        if (mass - 1.0).abs() > MASS_TOLERANCE {
            return Err(Error::NormalizationError(format!("total mass is {mass}, not 1")));
        }
        Ok(())
    }

    /// Upper bound on the density, used for continuity estimates.
    pub fn max_density(&self) -> f64 {
        match self {
            Self::Points { points, radius } => {
                if *radius == 0.0 {
                    f64::INFINITY
                } else {
                    points.iter().map(|p| p[2]).sum::<f64>() / (PI * radius * radius)
                }
            }
            Self::Raster { grid, .. } => grid.iter().flatten().copied().fold(0.0, f64::max),
        }
    }
}

/// Mass of `region` under `measure`. Points and segments carry no mass
/// unless the measure has unsmoothed atoms.
pub fn measure_of(measure: &PlanarMeasure, region: &ConvexPolygon) -> f64 {
    PreparedMeasure::new(measure).measure(region)
}

/// A measure with its raster prefix sums precomputed, for repeated queries.
#[derive(Clone, Debug)]
pub struct PreparedMeasure {
    measure: PlanarMeasure,
    prefix: Vec<Vec<f64>>,
}

impl PreparedMeasure {
    pub fn new(measure: &PlanarMeasure) -> Self {
        let prefix = match measure {
            PlanarMeasure::Raster { cell, grid, .. } => grid
                .iter()
                .map(|row| {
                    let mut acc = 0.0;
                    let mut out = Vec::with_capacity(row.len() + 1);
                    out.push(0.0);
                    for &d in row {
                        acc += d * cell;
                        out.push(acc);
                    }
                    out
                })
                .collect(),
            PlanarMeasure::Points { .. } => vec![],
        };
        Self {
            measure: measure.clone(),
            prefix,
        }
    }

    pub fn inner(&self) -> &PlanarMeasure {
        &self.measure
    }

    pub fn measure(&self, region: &ConvexPolygon) -> f64 {
        match &self.measure {
            PlanarMeasure::Points { points, radius } if *radius == 0.0 => points
                .iter()
                .filter(|p| region.contains(Point2::new(p[0], p[1]), 0.0))
                .map(|p| p[2])
                .sum(),
            _ if region.vertices.len() < 3 => 0.0,
            PlanarMeasure::Points { points, radius } => {
                let disk = PI * radius * radius;
                points
                    .iter()
                    .map(|p| p[2] * disk_polygon_overlap(Point2::new(p[0], p[1]), *radius, region) / disk)
                    .sum()
            }
            PlanarMeasure::Raster { origin, cell, grid } => raster_measure(*origin, *cell, grid, &self.prefix, region),
        }
    }
}

/// Area of `disk(center, r) ∩ poly`, summed over the signed triangles
/// `(center, p_i, p_{i+1})`.
pub fn disk_polygon_overlap(center: Point2, r: f64, poly: &ConvexPolygon) -> f64 {
    let v = &poly.vertices;
    let n = v.len();
    if n < 3 {
        return 0.0;
    }
    let total: f64 = (0..n)
        .map(|i| triangle_disk(v[i] - center, v[(i + 1) % n] - center, r))
        .sum();
    total.abs().min(PI * r * r)
}

/// Signed area of `disk(0, r) ∩ triangle(0, a, b)`.
fn triangle_disk(a: Point2, b: Point2, r: f64) -> f64 {
    let d = b - a;
    let (qa, qb, qc) = (d.dot(d), 2.0 * a.dot(d), a.dot(a) - r * r);
    // Parameters where the line through a, b is inside the open disk.
    let mut inside = (f64::INFINITY, f64::NEG_INFINITY);
    let mut ts = vec![0.0];
    if qa > 0.0 {
        let disc = qb * qb - 4.0 * qa * qc;
        if disc > 0.0 {
            let s = disc.sqrt();
            inside = ((-qb - s) / (2.0 * qa), (-qb + s) / (2.0 * qa));
            for t in [inside.0, inside.1] {
                if t > 0.0 && t < 1.0 {
                    ts.push(t);
                }
            }
        }
    } else if qc < 0.0 {
        inside = (0.0, 1.0);
    }
    ts.push(1.0);
    let mut area = 0.0;
    for w in ts.windows(2) {
        let (p, q) = (a.lerp(b, w[0]), a.lerp(b, w[1]));
        let mid = 0.5 * (w[0] + w[1]);
        if mid >= inside.0 && mid <= inside.1 {
            area += p.cross(q) / 2.0;
        } else {
            area += r * r * p.cross(q).atan2(p.dot(q)) / 2.0;
        }
    }
    area
}

/// Raster mass by Green's theorem: with `F(x, y)` the row prefix integral of
/// the density, the mass of a region is `∮ F dy` over its boundary. Each
/// edge is split at grid lines so that `F` is linear on every piece.
fn raster_measure(origin: [f64; 2], h: f64, grid: &[Vec<f64>], prefix: &[Vec<f64>], poly: &ConvexPolygon) -> f64 {
    let rows = grid.len();
    let cols = grid.first().map_or(0, Vec::len);
    if rows == 0 || cols == 0 {
        return 0.0;
    }
    let [x0, y0] = origin;
    let f_at = |x: f64, y: f64| -> f64 {
        let r = ((y - y0) / h).floor();
        if r < 0.0 || r >= rows as f64 {
            return 0.0;
        }
        let r = r as usize;
        let u = (x - x0) / h;
        if u <= 0.0 {
            return 0.0;
        }
        if u >= cols as f64 {
            return prefix[r][cols];
        }
        let c = (u.floor() as usize).min(cols - 1);
        prefix[r][c] + grid[r][c] * (u - c as f64) * h
    };

    let v = &poly.vertices;
    let n = v.len();
    let mut total = 0.0;
    let mut ts: Vec<f64> = Vec::new();
    for i in 0..n {
        let (p, q) = (v[i], v[(i + 1) % n]);
        if p.y == q.y {
            continue;
        }
        ts.clear();
        ts.push(0.0);
        ts.push(1.0);
        push_crossings(&mut ts, p.x, q.x, x0, h, cols);
        push_crossings(&mut ts, p.y, q.y, y0, h, rows);
        ts.sort_by(f64::total_cmp);
        for w in ts.windows(2) {
            if w[1] <= w[0] {
                continue;
            }
            let mid = p.lerp(q, 0.5 * (w[0] + w[1]));
            total += f_at(mid.x, mid.y) * (q.y - p.y) * (w[1] - w[0]);
        }
    }
    total.abs()
}

/// Parameters in `(0, 1)` where `a + t·(b − a)` meets a grid line
/// `origin + j·h`, `0 ≤ j ≤ lines`.
fn push_crossings(ts: &mut Vec<f64>, a: f64, b: f64, origin: f64, h: f64, lines: usize) {
    if a == b {
        return;
    }
    let (lo, hi) = (a.min(b), a.max(b));
    let j0 = ((lo - origin) / h).ceil().max(0.0) as usize;
    let j1 = ((hi - origin) / h).floor().min(lines as f64);
    if j1 < 0.0 {
        return;
    }
    for j in j0..=j1 as usize {
        let t = (origin + j as f64 * h - a) / (b - a);
        if t > 0.0 && t < 1.0 {
            ts.push(t);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::planar::DirectedLine;

    #[test]
    fn disk_overlap_cases() {
        let sq = ConvexPolygon::rectangle(-2.0, -2.0, 2.0, 2.0);
        assert!((disk_polygon_overlap(Point2::default(), 1.0, &sq) - PI).abs() < 1e-12);
        let half = sq.clip(&DirectedLine::new(1.0, 0.0, 0.0).unwrap());
        assert!((disk_polygon_overlap(Point2::default(), 1.0, &half) - PI / 2.0).abs() < 1e-12);
        let tiny = ConvexPolygon::rectangle(0.0, 0.0, 0.1, 0.1);
        assert!((disk_polygon_overlap(Point2::default(), 1.0, &tiny) - 0.01).abs() < 1e-14);
        let far = ConvexPolygon::rectangle(5.0, 5.0, 6.0, 6.0);
        assert_eq!(disk_polygon_overlap(Point2::default(), 1.0, &far), 0.0);
    }

    #[test]
    fn raster_cells_are_exact() {
        let m = PlanarMeasure::Raster {
            origin: [-0.5, -0.5],
            cell: 0.5,
            grid: vec![vec![1.0, 2.0], vec![0.0, 1.0]],
        }
        .normalized()
        .unwrap();
        let all = ConvexPolygon::rectangle(-1.0, -1.0, 1.0, 1.0);
        assert!((measure_of(&m, &all) - 1.0).abs() < 1e-14);
        let cell = ConvexPolygon::rectangle(0.0, -0.5, 0.5, 0.0);
        assert!((measure_of(&m, &cell) - 0.5).abs() < 1e-14);
        // Lower-left triangle of the lower-right cell: half of it.
        let tri = ConvexPolygon::new(vec![Point2::new(0.0, -0.5), Point2::new(0.5, -0.5), Point2::new(0.0, 0.0)]).unwrap();
        assert!((measure_of(&m, &tri) - 0.25).abs() < 1e-14);
    }

    #[test]
    fn measure_json_shape() {
        let m: PlanarMeasure = serde_json::from_str(r#"{"type": "points", "points": [[0, 0, 1]]}"#).unwrap();
        assert_eq!(m, PlanarMeasure::Points { points: vec![[0.0, 0.0, 1.0]], radius: DEFAULT_SMOOTHING });
        m.validate().unwrap();
        let r: PlanarMeasure =
            serde_json::from_str(r#"{"type": "raster", "origin": [0, 0], "cell": 0.5, "grid": [[4]]}"#).unwrap();
        r.validate().unwrap();
    }

    #[test]
    fn validation_failures() {
        let m = PlanarMeasure::Points { points: vec![[0.0, 0.0, 0.5]], radius: 0.1 };
        assert!(matches!(m.validate(), Err(Error::NormalizationError(_))));
        let m = PlanarMeasure::Points { points: vec![[0.95, 0.0, 1.0]], radius: 0.1 };
        assert!(m.validate().is_err());
    }
}
