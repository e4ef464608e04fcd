//! Two-line configurations of the disk and the colorful T(4) solver: either a
//! family is pierced by two lines, one parallel to a given direction, or a
//! colorful four-set has no line transversal.

use std::f64::consts::{PI, TAU};

use serde::{Deserialize, Serialize};

use crate::engine::{solve_colorful_kkm, FnOracle, Mode, Schedule, SolveOptions};
use crate::error::{Error, Result};
use crate::planar::{line_transversal_exists, ConvexPolygon, DirectedLine, Point2, Transversal, GEOM_EPS};
use crate::simplex::{grid_diameter, BarycentricPoint, Grid};

pub const T4_SCHEMA: &str = "t4_outcome.v1";
/// Radius of the disk the instance is scaled into; strictly inside the
/// construction's circle of radius 1/2.
pub const WORKING_RADIUS: f64 = 0.49;
const MAX_SCAN_VERTICES: u64 = 2_000_000;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TwoLineConfig {
    pub x: BarycentricPoint,
    /// `ℓ₁ = {y : y₀ = h}`.
    pub h: f64,
    pub lower: Point2,
    pub upper: Point2,
    pub p: Point2,
    pub q: Point2,
}

impl TwoLineConfig {
    pub fn l1(&self) -> DirectedLine {
        // Positive side to the right.
        DirectedLine::with_normal_angle(0.0, self.h)
    }

    /// `ℓ₂` directed from `p` to `q`, or `None` when it is a point.
    pub fn l2(&self) -> Option<DirectedLine> {
        if (self.q - self.p).norm() < 1e-12 {
            None
        } else {
            DirectedLine::through(self.p, self.q).ok()
        }
    }

    /// Open quadrant (0-based) strictly containing `poly`, if any.
    pub fn quadrant_of(&self, poly: &ConvexPolygon, eps: f64) -> Option<usize> {
        if poly.is_empty() || poly.vertices.iter().any(|v| v.norm() >= 0.5 - eps) {
            return None;
        }
        let l1 = self.l1();
        let right = if poly.strictly_positive(&l1, eps) {
            true
        } else if poly.strictly_positive(&l1.flipped(), eps) {
            false
        } else {
            return None;
        };
        let c = self.x.coords();
        let below = match self.l2() {
            Some(l2) => {
                if poly.strictly_positive(&l2, eps) {
                    true
                } else if poly.strictly_positive(&l2.flipped(), eps) {
                    false
                } else {
                    return None;
                }
            }
            // With ℓ₂ a point, each side of ℓ₁ is a single region, named by
            // whichever of its two quadrants can be nonempty.
            None if right => c[1] == 0.0,
            None => c[2] == 0.0,
        };
        let q = match (right, below) {
            (true, true) => 0,
            (true, false) => 1,
            (false, false) => 2,
            (false, true) => 3,
        };
        // The empty quadrant of a degenerate coordinate holds nothing.
        (c[q] > 0.0).then_some(q)
    }

    pub fn meets(&self, poly: &ConvexPolygon, eps: f64) -> Option<usize> {
        if poly.meets_line(&self.l1(), eps) {
            return Some(0);
        }
        match self.l2() {
            Some(l2) => poly.meets_line(&l2, eps).then_some(1),
            None => poly.contains(self.p, eps).then_some(1),
        }
    }

    /// The two lines, with a point `ℓ₂` replaced by the horizontal line through it.
    pub fn lines(&self) -> [DirectedLine; 2] {
        let l2 = self
            .l2()
            .unwrap_or_else(|| DirectedLine::with_normal_angle(PI / 2.0, self.p.y));
        [self.l1(), l2]
    }
}

/// Builds `ℓ₁`, `D`, `U`, `p` and `q` for `x ∈ Δ₃` on the circle of radius 1/2.
pub fn two_lines_from(x: &BarycentricPoint) -> Result<TwoLineConfig> {
    if x.dim() != 4 {
        return Err(Error::InvalidArgument(format!("expected 4 coordinates, got {}", x.dim())));
    }
    let c = x.coords();
    let (s, t) = (c[0] + c[1], c[2] + c[3]);
    let h = (0.5 - s).clamp(-0.5, 0.5);
    let theta_u = (2.0 * h).clamp(-1.0, 1.0).acos();
    let on_circle = |a: f64| Point2::polar(0.5, a);
    let (lower, upper) = (on_circle(-theta_u), on_circle(theta_u));
    let p = if s == 0.0 {
        Point2::new(0.5, 0.0)
    } else {
        on_circle(-theta_u + c[0] / s * 2.0 * theta_u)
    };
    let q = if t == 0.0 {
        Point2::new(-0.5, 0.0)
    } else {
        on_circle(theta_u + c[2] / t * (TAU - 2.0 * theta_u))
    };
    Ok(TwoLineConfig {
        x: x.clone(),
        h,
        lower,
        upper,
        p,
        q,
    })
}

/// Rotation taking the direction to vertical, then a similarity into the
/// working disk about the vertex centroid.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Normalization {
    pub angle: f64,
    pub center: Point2,
    pub scale: f64,
}

impl Normalization {
    pub fn fit(families: &[Vec<ConvexPolygon>], direction: Point2) -> Result<Self> {
        if !(direction.norm() > 0.0) {
            return Err(Error::InvalidArgument("direction must be nonzero".into()));
        }
        let angle = PI / 2.0 - direction.y.atan2(direction.x);
        let pts: Vec<Point2> = families
            .iter()
            .flatten()
            .flat_map(|p| p.vertices.iter().map(|v| v.rotated(angle)))
            .collect();
        if pts.is_empty() {
            return Err(Error::InvalidArgument("families have no vertices".into()));
        }
        let center = pts.iter().fold(Point2::default(), |a, &p| a + p) * (1.0 / pts.len() as f64);
        let radius = pts.iter().map(|&p| (p - center).norm()).fold(0.0, f64::max);
        let scale = if radius > 0.0 { WORKING_RADIUS / radius } else { 1.0 };
        Ok(Self { angle, center, scale })
    }

    pub fn apply(&self, p: Point2) -> Point2 {
        (p.rotated(self.angle) - self.center) * self.scale
    }

    /// Maps a line of the working frame back to the input frame.
    pub fn unapply_line(&self, l: &DirectedLine) -> DirectedLine {
        // n·(s(Rp − c)) = c'  ⇔  (Rᵀn)·p = c'/s + n·c
        let n = l.normal();
        let back = n.rotated(-self.angle);
        DirectedLine::new(back.x, back.y, l.c / self.scale + n.dot(self.center)).expect("unit normal")
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct WitnessMember {
    pub family: usize,
    pub member: usize,
    pub quadrant: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "outcome", rename_all = "snake_case")]
pub enum T4Outcome {
    /// Every member of `family` meets one of `lines`; `lines[0]` is parallel
    /// to the direction.
    Piercing {
        schema: String,
        family: usize,
        x: BarycentricPoint,
        lines: [DirectedLine; 2],
        /// `hits[m]` is the line meeting member `m`.
        hits: Vec<usize>,
    },
    /// One member per family, in distinct open quadrants at `x`, with no
    /// common line transversal.
    Witness {
        schema: String,
        x: BarycentricPoint,
        members: Vec<WitnessMember>,
        polygons: Vec<ConvexPolygon>,
        refutation: Transversal,
    },
}

fn validate(families: &[Vec<ConvexPolygon>]) -> Result<()> {
    if families.len() != 4 {
        return Err(Error::InvalidArgument(format!("expected 4 families, got {}", families.len())));
    }
    if let Some(i) = families.iter().position(Vec::is_empty) {
        return Err(Error::InvalidArgument(format!("family {i} is empty")));
    }
    if families.iter().flatten().any(ConvexPolygon::is_empty) {
        return Err(Error::InvalidArgument("empty polygon in a family".into()));
    }
    Ok(())
}

/// Checks an outcome against the input directly.
pub fn verify_t4(families: &[Vec<ConvexPolygon>], direction: Point2, outcome: &T4Outcome) -> bool {
    let Ok(norm) = Normalization::fit(families, direction) else {
        return false;
    };
    let eps = GEOM_EPS / norm.scale;
    match outcome {
        T4Outcome::Piercing { family, lines, hits, .. } => {
            let parallel = lines[0].normal().dot(direction).abs() <= 1e-9 * direction.norm();
            *family < families.len()
                && parallel
                && hits.len() == families[*family].len()
                && families[*family]
                    .iter()
                    .zip(hits)
                    .all(|(p, &l)| l < 2 && p.meets_line(&lines[l], eps))
        }
        T4Outcome::Witness { x, members, polygons, .. } => {
            let Ok(cfg) = two_lines_from(x) else {
                return false;
            };
            let mut fams: Vec<usize> = members.iter().map(|m| m.family).collect();
            fams.sort();
            let mut quads: Vec<usize> = members.iter().map(|m| m.quadrant).collect();
            quads.sort();
            fams == [0, 1, 2, 3]
                && quads == [0, 1, 2, 3]
                && members.iter().zip(polygons).all(|(m, p)| {
                    families[m.family].get(m.member) == Some(p)
                        && cfg.quadrant_of(&p.map(|v| norm.apply(v)), GEOM_EPS) == Some(m.quadrant)
                })
                && line_transversal_exists(polygons).is_ok_and(|t| !t.exists)
        }
    }
}

struct Scene {
    norm: Normalization,
    families: Vec<Vec<ConvexPolygon>>,
}

impl Scene {
    fn labels(&self, cfg: &TwoLineConfig, family: usize) -> Vec<usize> {
        let mut out: Vec<usize> = self.families[family]
            .iter()
            .filter_map(|p| cfg.quadrant_of(p, GEOM_EPS))
            .collect();
        out.sort_unstable();
        out.dedup();
        out
    }

    fn piercing(&self, cfg: &TwoLineConfig, family: usize, originals: &[Vec<ConvexPolygon>], direction: Point2) -> Option<T4Outcome> {
        let hits = self.families[family]
            .iter()
            .map(|p| cfg.meets(p, GEOM_EPS))
            .collect::<Option<Vec<_>>>()?;
        let [a, b] = cfg.lines();
        let out = T4Outcome::Piercing {
            schema: T4_SCHEMA.into(),
            family,
            x: cfg.x.clone(),
            lines: [self.norm.unapply_line(&a), self.norm.unapply_line(&b)],
            hits,
        };
        verify_t4(originals, direction, &out).then_some(out)
    }

    fn witness(&self, cfg: &TwoLineConfig, originals: &[Vec<ConvexPolygon>], direction: Point2) -> Option<T4Outcome> {
        // quadrant → (family, member) candidates
        let mut by_family: Vec<Vec<(usize, usize)>> = vec![vec![]; 4];
        for (f, fam) in self.families.iter().enumerate() {
            for (m, p) in fam.iter().enumerate() {
                if let Some(q) = cfg.quadrant_of(p, GEOM_EPS) {
                    if !by_family[f].iter().any(|&(qq, _)| qq == q) {
                        by_family[f].push((q, m));
                    }
                }
            }
        }
        for perm in permutations4() {
            let picks: Option<Vec<WitnessMember>> = (0..4)
                .map(|f| {
                    by_family[f]
                        .iter()
                        .find(|&&(q, _)| q == perm[f])
                        .map(|&(quadrant, member)| WitnessMember { family: f, member, quadrant })
                })
                .collect();
            if let Some(members) = picks {
                let polygons: Vec<ConvexPolygon> = members.iter().map(|m| originals[m.family][m.member].clone()).collect();
                let refutation = line_transversal_exists(&polygons).ok()?;
                let out = T4Outcome::Witness {
                    schema: T4_SCHEMA.into(),
                    x: cfg.x.clone(),
                    members,
                    polygons,
                    refutation,
                };
                if verify_t4(originals, direction, &out) {
                    return Some(out);
                }
            }
        }
        None
    }
}

fn permutations4() -> Vec<[usize; 4]> {
    let mut out = vec![];
    for a in 0..4 {
        for b in 0..4 {
            for c in 0..4 {
                if a != b && a != c && b != c {
                    out.push([a, b, c, 6 - a - b - c]);
                }
            }
        }
    }
    out
}

/// Colorful T(4): two lines (one parallel to `direction`) piercing some
/// family, or four sets in distinct quadrants with no line transversal.
pub fn t4_solve(families: &[Vec<ConvexPolygon>], direction: Point2, schedule: &Schedule) -> Result<T4Outcome> {
    validate(families)?;
    let norm = Normalization::fit(families, direction)?;
    let scene = Scene {
        norm,
        families: families
            .iter()
            .map(|f| f.iter().map(|p| p.map(|v| norm.apply(v))).collect())
            .collect(),
    };
    let mut deepest = 0;
    let mut smallest = usize::MAX;
    for &m in schedule.resolutions() {
        let grid = Grid::new(4, m)?;
        if grid.vertex_count() > MAX_SCAN_VERTICES {
            break;
        }
        deepest = m;
        let mut blocked = false;
        for v in grid.vertices() {
            let cfg = two_lines_from(&v.point())?;
            for f in 0..4 {
                let labels = scene.labels(&cfg, f);
                smallest = smallest.min(labels.len());
                if labels.is_empty() {
                    match scene.piercing(&cfg, f, families, direction) {
                        Some(out) => return Ok(out),
                        // A member sits on a line within slack but not on it.
                        None => blocked = true,
                    }
                }
            }
        }
        if blocked {
            continue;
        }
        let oracle = FnOracle::new(4, 4, Mode::Primal, |f, x: &BarycentricPoint| {
            scene.labels(&two_lines_from(x).expect("four coordinates"), f)
        });
        let opts = SolveOptions::new(grid_diameter(4, m)).with_schedule(Schedule::new(vec![m])?);
        let cell = match solve_colorful_kkm(&oracle, &opts) {
            Ok(cell) => cell,
            Err(Error::ResolutionExceeded { .. }) => continue,
            Err(e) => return Err(e),
        };
        let candidates = std::iter::once(cell.witness.clone()).chain(cell.vertices.iter().map(|v| v.point()));
        for x in candidates {
            if let Some(out) = scene.witness(&two_lines_from(&x)?, families, direction) {
                return Ok(out);
            }
        }
    }
    Err(Error::ResolutionExceeded {
        max_resolution: deepest,
        diagnostics: format!("no certificate; smallest label set seen has size {smallest}"),
    })
}
