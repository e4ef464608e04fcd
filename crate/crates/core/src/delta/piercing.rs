use serde::{Deserialize, Serialize};

use super::{check_directions, dot, nested_partition, norm, Cut, NestedPartition, DELTA_EPS};
use crate::engine::{solve_dual_kkm, FnOracle, Mode, Schedule, SolveOptions};
use crate::error::{Error, Result};
use crate::simplex::{grid_diameter, BarycentricPoint, Grid};

pub const PIERCING_SCHEMA: &str = "hyperplane_piercing.v1";
/// Largest grid scanned for saturated points.
const MAX_SCAN_VERTICES: u64 = 2_000_000;

/// Convex bodies given by their vertices (`polytopes.v1`).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PolytopeFamily {
    pub dimension: usize,
    pub bodies: Vec<Vec<Vec<f64>>>,
}

impl PolytopeFamily {
    pub fn validate(&self) -> Result<()> {
        if !(2..=3).contains(&self.dimension) {
            return Err(Error::InvalidArgument(format!("dimension {} is not supported", self.dimension)));
        }
        for (i, b) in self.bodies.iter().enumerate() {
            if b.is_empty() || b.iter().any(|v| v.len() != self.dimension || v.iter().any(|c| !c.is_finite())) {
                return Err(Error::InvalidArgument(format!("body {i} has bad vertices")));
            }
        }
        Ok(())
    }
}

/// `n − 1` hyperplanes, one orthogonal to each direction, meeting every body.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PiercingCertificate {
    pub x: BarycentricPoint,
    pub cuts: Vec<Cut>,
    /// `hits[b]` is a cut meeting body `b`.
    pub hits: Vec<usize>,
}

/// A point where the interior of every region contains a body.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SaturationWitness {
    pub x: BarycentricPoint,
    /// `contained[i]` is a body inside the interior of region `i`.
    pub contained: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "outcome", rename_all = "snake_case")]
pub enum PiercingOutcome {
    Piercing {
        schema: String,
        certificate: PiercingCertificate,
    },
    Saturated {
        schema: String,
        witness: SaturationWitness,
    },
}

fn meets(body: &[Vec<f64>], direction: &[f64], offset: f64) -> bool {
    let (lo, hi) = body.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| {
        let p = dot(v, direction);
        (lo.min(p), hi.max(p))
    });
    let eps = DELTA_EPS * norm(direction);
    lo <= offset + eps && hi >= offset - eps
}

fn containing_body(part: &NestedPartition, region: usize, family: &PolytopeFamily) -> Option<usize> {
    family
        .bodies
        .iter()
        .position(|b| part.regions[region].interior_contains(b, DELTA_EPS))
}

/// Checks the certificate against the bodies and directions directly.
pub fn verify_piercing(family: &PolytopeFamily, directions: &[Vec<f64>], cert: &PiercingCertificate) -> bool {
    cert.cuts.len() == directions.len()
        && cert.cuts.iter().zip(directions).all(|(c, v)| &c.direction == v && c.offset.is_finite())
        && cert.hits.len() == family.bodies.len()
        && cert.hits.iter().zip(&family.bodies).all(|(&j, b)| {
            j < cert.cuts.len() && meets(b, &cert.cuts[j].direction, cert.cuts[j].offset)
        })
}

/// Rebuilds the partition at the witness and checks each containment.
pub fn verify_saturation(family: &PolytopeFamily, directions: &[Vec<f64>], w: &SaturationWitness) -> bool {
    let Ok(part) = nested_partition(&w.x, directions) else {
        return false;
    };
    w.contained.len() == part.regions.len()
        && w.contained.iter().enumerate().all(|(i, &b)| {
            b < family.bodies.len() && part.regions[i].interior_contains(&family.bodies[b], DELTA_EPS)
        })
}

fn piercing_at(family: &PolytopeFamily, directions: &[Vec<f64>], x: &BarycentricPoint) -> Option<PiercingCertificate> {
    let part = nested_partition(x, directions).ok()?;
    let hits = family
        .bodies
        .iter()
        .map(|b| part.cuts.iter().position(|c| meets(b, &c.direction, c.offset)))
        .collect::<Option<Vec<_>>>()?;
    let cert = PiercingCertificate {
        x: x.clone(),
        cuts: part.cuts,
        hits,
    };
    verify_piercing(family, directions, &cert).then_some(cert)
}

/// The simplex point whose cuts sit at `offsets` (all active).
fn point_with_offsets(offsets: &[f64]) -> Option<BarycentricPoint> {
    let n = offsets.len() + 1;
    let alpha = |t: f64| (1.0 + t / (1.0 + t.abs())) / 2.0;
    let mut x = vec![0.0; n];
    let mut rest = 1.0;
    for j in (1..n - 1).rev() {
        x[j + 1] = alpha(offsets[j]) * rest;
        rest -= x[j + 1];
    }
    x[0] = alpha(offsets[0]) * rest;
    x[1] = rest - x[0];
    BarycentricPoint::normalized(&x).ok()
}

/// Rounds a rainbow cell to an exact outcome.
///
/// Each cut's offset at the limit point lies between its extremes over the
/// cell's vertices. For piercing, the offsets that work for the bodies on
/// one cut form an interval bounded by body projection endpoints, so it
/// contains the window's midpoint or an endpoint near the window. For
/// saturation, the offsets that keep a body off a cut form gaps between
/// endpoints, so gap midpoints near the window are tried as well.
fn snapped_outcome(family: &PolytopeFamily, directions: &[Vec<f64>], points: &[BarycentricPoint]) -> Option<PiercingOutcome> {
    const MAX_CANDIDATES: usize = 48;
    const MAX_COMBINATIONS: usize = 200_000;
    let parts: Vec<NestedPartition> = points.iter().filter_map(|x| nested_partition(x, directions).ok()).collect();
    let candidates: Vec<Vec<f64>> = directions
        .iter()
        .enumerate()
        .map(|(j, v)| {
            let mut ends: Vec<f64> = family
                .bodies
                .iter()
                .flat_map(|b| {
                    let p: Vec<f64> = b.iter().map(|u| dot(u, v)).collect();
                    [p.iter().copied().fold(f64::INFINITY, f64::min), p.iter().copied().fold(f64::NEG_INFINITY, f64::max)]
                })
                .collect();
            ends.sort_by(f64::total_cmp);
            let gaps: Vec<f64> = ends.windows(2).filter(|w| w[1] > w[0]).map(|w| (w[0] + w[1]) / 2.0).collect();
            let active: Vec<f64> = parts.iter().map(|p| &p.cuts[j]).filter(|c| c.active).map(|c| c.offset).collect();
            let (lo, hi) = if active.is_empty() {
                (f64::NEG_INFINITY, f64::INFINITY)
            } else {
                (
                    active.iter().copied().fold(f64::INFINITY, f64::min),
                    active.iter().copied().fold(f64::NEG_INFINITY, f64::max),
                )
            };
            let mid = if active.is_empty() { 0.0 } else { (lo + hi) / 2.0 };
            let margin = if active.is_empty() { 0.0 } else { (hi - lo).max(1e-12) + DELTA_EPS * norm(v) };
            let mut near: Vec<f64> = ends
                .iter()
                .chain(&gaps)
                .copied()
                .filter(|e| *e >= lo - margin && *e <= hi + margin)
                .collect();
            near.sort_by(|a, b| (a - mid).abs().total_cmp(&(b - mid).abs()));
            near.truncate(MAX_CANDIDATES);
            if !active.is_empty() {
                near.insert(0, mid);
            }
            near
        })
        .collect();
    if candidates.iter().any(Vec::is_empty)
        || candidates.iter().map(Vec::len).try_fold(1usize, |a, l| a.checked_mul(l)).is_none_or(|c| c > MAX_COMBINATIONS)
    {
        return None;
    }
    let mut pick = vec![0; candidates.len()];
    loop {
        let offsets: Vec<f64> = pick.iter().zip(&candidates).map(|(&i, c)| c[i]).collect();
        if let Some(x) = point_with_offsets(&offsets) {
            if let Some(certificate) = piercing_at(family, directions, &x) {
                return Some(PiercingOutcome::Piercing {
                    schema: PIERCING_SCHEMA.into(),
                    certificate,
                });
            }
            if let Some(witness) = saturation_at(family, directions, x) {
                return Some(PiercingOutcome::Saturated {
                    schema: PIERCING_SCHEMA.into(),
                    witness,
                });
            }
        }
        let mut j = 0;
        loop {
            if j == pick.len() {
                return None;
            }
            pick[j] += 1;
            if pick[j] < candidates[j].len() {
                break;
            }
            pick[j] = 0;
            j += 1;
        }
    }
}

fn saturation_at(family: &PolytopeFamily, directions: &[Vec<f64>], x: BarycentricPoint) -> Option<SaturationWitness> {
    let part = nested_partition(&x, directions).ok()?;
    let contained = (0..part.regions.len()).map(|i| containing_body(&part, i, family)).collect::<Option<Vec<_>>>()?;
    let witness = SaturationWitness { x, contained };
    verify_saturation(family, directions, &witness).then_some(witness)
}

/// Either `n − 1` hyperplanes orthogonal to the directions piercing every
/// body, or a point where every region's interior contains a body.
///
/// Each resolution is scanned for a grid point whose regions are all
/// occupied (a saturation witness) or all free (its cuts pierce every body).
/// Otherwise the regions with no body inside form a dual cover, and the
/// rainbow cell of that cover is tried for piercing cuts. Every outcome is
/// verified before return.
pub fn hyperplane_piercing_search(
    family: &PolytopeFamily,
    directions: &[Vec<f64>],
    schedule: &Schedule,
) -> Result<PiercingOutcome> {
    family.validate()?;
    let n = directions.len() + 1;
    let d = check_directions(n, directions)?;
    if d != family.dimension {
        return Err(Error::InvalidArgument(format!(
            "directions live in dimension {d}, bodies in {}",
            family.dimension
        )));
    }
    let free = |x: &BarycentricPoint| -> Vec<usize> {
        let part = nested_partition(x, directions).expect("directions checked");
        (0..n).filter(|&i| containing_body(&part, i, family).is_none()).collect()
    };
    let mut scanned = None;
    for &m in schedule.resolutions() {
        let grid = Grid::new(n, m)?;
        if grid.vertex_count() > MAX_SCAN_VERTICES {
            break;
        }
        scanned = Some(m);
        for v in grid.vertices() {
            let x = v.point();
            let part = nested_partition(&x, directions)?;
            let found: Vec<Option<usize>> = (0..n).map(|i| containing_body(&part, i, family)).collect();
            if found.iter().all(Option::is_none) {
                if let Some(certificate) = piercing_at(family, directions, &x) {
                    return Ok(PiercingOutcome::Piercing {
                        schema: PIERCING_SCHEMA.into(),
                        certificate,
                    });
                }
            }
            if let Some(contained) = found.into_iter().collect::<Option<Vec<usize>>>() {
                let witness = SaturationWitness { x, contained };
                if !verify_saturation(family, directions, &witness) {
                    continue;
                }
                return Ok(PiercingOutcome::Saturated {
                    schema: PIERCING_SCHEMA.into(),
                    witness,
                });
            }
        }
        let oracle = FnOracle::new(n, 1, Mode::Dual, |_, x: &BarycentricPoint| free(x));
        let opts = SolveOptions::new(grid_diameter(n, m)).with_schedule(Schedule::new(vec![m])?);
        let cell = match solve_dual_kkm(&oracle, &opts) {
            Ok(cell) => cell,
            Err(Error::ResolutionExceeded { .. }) => continue,
            Err(e) => return Err(e),
        };
        let candidates: Vec<BarycentricPoint> =
            std::iter::once(cell.witness.clone()).chain(cell.vertices.iter().map(|v| v.point())).collect();
        if let Some(certificate) = candidates.iter().find_map(|x| piercing_at(family, directions, x)) {
            return Ok(PiercingOutcome::Piercing {
                schema: PIERCING_SCHEMA.into(),
                certificate,
            });
        }
        if let Some(out) = snapped_outcome(family, directions, &candidates) {
            return Ok(out);
        }
    }
    Err(Error::ResolutionExceeded {
        max_resolution: scanned.unwrap_or(0),
        diagnostics: "no verified piercing or saturation found".into(),
    })
}
