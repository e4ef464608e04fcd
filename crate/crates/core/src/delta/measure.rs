use serde::{Deserialize, Serialize};

use super::poly3::Polytope3;
use super::Polyhedron;
use crate::error::{Error, Result};
use crate::planar::{ConvexPolygon, DirectedLine, PlanarMeasure, PreparedMeasure};

const MASS_TOLERANCE: f64 = 1e-9;

fn default_radius() -> f64 {
    crate::planar::DEFAULT_SMOOTHING
}

/// A probability measure on `ℝ^d`, `d ∈ {2, 3}`.
///
/// In the plane, points are smeared over disks; in space, over axis-aligned
/// cubes of half-width `radius`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum DMeasure {
    /// Rows `[y_1, …, y_d, weight]`.
    Points {
        points: Vec<Vec<f64>>,
        #[serde(default = "default_radius")]
        radius: f64,
    },
    /// Piecewise-constant density on a grid of cubes, row-major with the
    /// last axis fastest.
    Raster {
        origin: Vec<f64>,
        cell: f64,
        shape: Vec<usize>,
        density: Vec<f64>,
    },
}

impl DMeasure {
    pub fn dim(&self) -> usize {
        match self {
            Self::Points { points, .. } => points.first().map_or(0, |p| p.len().saturating_sub(1)),
            Self::Raster { origin, .. } => origin.len(),
        }
    }

    pub fn total_mass(&self) -> f64 {
        match self {
            Self::Points { points, .. } => points.iter().map(|p| p[p.len() - 1]).sum(),
            Self::Raster { cell, shape, density, .. } => {
                density.iter().sum::<f64>() * cell.powi(shape.len() as i32)
            }
        }
    }

    pub fn normalized(mut self) -> Result<Self> {
        let mass = self.total_mass();
        if !(mass > 0.0) || !mass.is_finite() {
            return Err(Error::NormalizationError(format!("total mass {mass} cannot be normalized")));
        }
        match &mut self {
            Self::Points { points, .. } => points.iter_mut().for_each(|p| *p.last_mut().unwrap() /= mass),
            Self::Raster { density, .. } => density.iter_mut().for_each(|v| *v /= mass),
        }
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        let d = self.dim();
        if !(2..=3).contains(&d) {
            return Err(Error::InvalidArgument(format!("dimension {d} is not supported")));
        }
        match self {
            Self::Points { points, radius } => {
                if !(*radius > 0.0) {
                    return Err(Error::InvalidArgument("smoothing radius must be positive".into()));
                }
                for p in points {
                    if p.len() != d + 1 || p.iter().any(|v| !v.is_finite()) || p[d] < 0.0 {
                        return Err(Error::InvalidArgument(format!("bad weighted point {p:?}")));
                    }
                }
            }
            Self::Raster { origin, cell, shape, density } => {
                if shape.len() != d || !(*cell > 0.0) || origin.iter().any(|v| !v.is_finite()) {
                    return Err(Error::InvalidArgument("bad raster geometry".into()));
                }
                if shape.iter().product::<usize>() != density.len() {
                    return Err(Error::InvalidArgument(format!(
                        "raster shape {shape:?} needs {} densities, got {}",
                        shape.iter().product::<usize>(),
                        density.len()
                    )));
                }
                if density.iter().any(|v| !(*v >= 0.0) || !v.is_finite()) {
                    return Err(Error::InvalidArgument("densities must be finite and nonnegative".into()));
                }
            }
        }
        let mass = self.total_mass();
        if (mass - 1.0).abs() > MASS_TOLERANCE {
            return Err(Error::NormalizationError(format!("total mass is {mass}, not 1")));
        }
        Ok(())
    }

    fn bounds(&self) -> (Vec<f64>, Vec<f64>) {
        let d = self.dim();
        match self {
            Self::Points { points, radius } => {
                let mut lo = vec![f64::INFINITY; d];
                let mut hi = vec![f64::NEG_INFINITY; d];
                for p in points {
                    for a in 0..d {
                        lo[a] = lo[a].min(p[a] - radius);
                        hi[a] = hi[a].max(p[a] + radius);
                    }
                }
                (lo, hi)
            }
            Self::Raster { origin, cell, shape, .. } => {
                let hi = origin.iter().zip(shape).map(|(o, &s)| o + cell * s as f64).collect();
                (origin.clone(), hi)
            }
        }
    }

    fn to_planar(&self) -> PlanarMeasure {
        match self {
            Self::Points { points, radius } => PlanarMeasure::Points {
                points: points.iter().map(|p| [p[0], p[1], p[2]]).collect(),
                radius: *radius,
            },
            Self::Raster { origin, cell, shape, density } => {
                let (nx, ny) = (shape[0], shape[1]);
                PlanarMeasure::Raster {
                    origin: [origin[0], origin[1]],
                    cell: *cell,
                    grid: (0..ny).map(|r| (0..nx).map(|c| density[c * ny + r]).collect()).collect(),
                }
            }
        }
    }

    /// Weighted boxes `(lo, hi, mass)` for three-dimensional measures.
    fn boxes(&self) -> Vec<([f64; 3], [f64; 3], f64)> {
        match self {
            Self::Points { points, radius } => points
                .iter()
                .filter(|p| p[3] > 0.0)
                .map(|p| {
                    (
                        [p[0] - radius, p[1] - radius, p[2] - radius],
                        [p[0] + radius, p[1] + radius, p[2] + radius],
                        p[3],
                    )
                })
                .collect(),
            Self::Raster { origin, cell, shape, density } => {
                let mut out = vec![];
                let vol = cell * cell * cell;
                for i in 0..shape[0] {
                    for j in 0..shape[1] {
                        for k in 0..shape[2] {
                            let w = density[(i * shape[1] + j) * shape[2] + k];
                            if w > 0.0 {
                                let lo = [
                                    origin[0] + i as f64 * cell,
                                    origin[1] + j as f64 * cell,
                                    origin[2] + k as f64 * cell,
                                ];
                                out.push((lo, [lo[0] + cell, lo[1] + cell, lo[2] + cell], w * vol));
                            }
                        }
                    }
                }
                out
            }
        }
    }
}

/// A measure ready for repeated region queries.
#[derive(Clone, Debug)]
pub enum PreparedDMeasure {
    Planar {
        measure: PreparedMeasure,
        window: ConvexPolygon,
    },
    Spatial {
        boxes: Vec<([f64; 3], [f64; 3], f64)>,
    },
}

impl PreparedDMeasure {
    pub fn new(measure: &DMeasure) -> Result<Self> {
        measure.validate()?;
        Ok(match measure.dim() {
            2 => {
                let (lo, hi) = measure.bounds();
                PreparedDMeasure::Planar {
                    measure: PreparedMeasure::new(&measure.to_planar()),
                    window: ConvexPolygon::rectangle(lo[0] - 1.0, lo[1] - 1.0, hi[0] + 1.0, hi[1] + 1.0),
                }
            }
            _ => PreparedDMeasure::Spatial { boxes: measure.boxes() },
        })
    }

    pub fn dim(&self) -> usize {
        match self {
            Self::Planar { .. } => 2,
            Self::Spatial { .. } => 3,
        }
    }

    pub fn measure(&self, region: &Polyhedron) -> f64 {
        if region.empty {
            return 0.0;
        }
        match self {
            Self::Planar { measure, window } => {
                let mut poly = window.clone();
                for h in &region.halfspaces {
                    let Ok(line) = DirectedLine::new(h.normal[0], h.normal[1], h.offset) else {
                        continue;
                    };
                    poly = poly.clip(&line);
                    if poly.is_empty() {
                        return 0.0;
                    }
                }
                measure.measure(&poly)
            }
            Self::Spatial { boxes } => boxes
                .iter()
                .map(|(lo, hi, w)| {
                    let mut inside = true;
                    for h in &region.halfspaces {
                        let n = [h.normal[0], h.normal[1], h.normal[2]];
                        // Extreme corners of the box along n.
                        let pick = |a: usize, hi_side: bool| if (n[a] >= 0.0) == hi_side { hi[a] } else { lo[a] };
                        let top = (0..3).map(|a| n[a] * pick(a, true)).sum::<f64>();
                        let bottom = (0..3).map(|a| n[a] * pick(a, false)).sum::<f64>();
                        if top <= h.offset {
                            return 0.0;
                        }
                        if bottom < h.offset {
                            inside = false;
                        }
                    }
                    if inside {
                        return *w;
                    }
                    let full = Polytope3::cuboid(*lo, *hi);
                    let vol = full.volume();
                    let mut p = full;
                    for h in &region.halfspaces {
                        p = p.clip([h.normal[0], h.normal[1], h.normal[2]], h.offset);
                        if p.is_empty() {
                            return 0.0;
                        }
                    }
                    w * p.volume() / vol
                })
                .sum(),
        }
    }
}
