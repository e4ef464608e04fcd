//! Nested hyperplane partitions of `ℝ^d` indexed by the simplex, with the
//! piercing search and envy-free allocation built on them.

mod envy;
mod measure;
mod piercing;
mod poly3;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::simplex::BarycentricPoint;

pub use envy::{envy_free_nested_allocation, EnvyAllocation, EnvyCover, ENVY_ALLOCATION_SCHEMA};
pub use measure::{DMeasure, PreparedDMeasure};
pub use piercing::{
    hyperplane_piercing_search, verify_piercing, verify_saturation, PiercingCertificate, PiercingOutcome,
    PolytopeFamily, SaturationWitness, PIERCING_SCHEMA,
};
pub use poly3::Polytope3;

/// Slack for strict containment and incidence tests.
pub const DELTA_EPS: f64 = 1e-9;

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// `(2α − 1) / (1 − |2α − 1|)`, the offset of the hyperplane for `α ∈ (0, 1)`.
pub fn threshold(alpha: f64) -> f64 {
    let s = 2.0 * alpha - 1.0;
    s / (1.0 - s.abs())
}

/// `{y : ⟨y, normal⟩ ≥ offset}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HalfSpace {
    pub normal: Vec<f64>,
    pub offset: f64,
}

impl HalfSpace {
    pub fn complement(&self) -> Self {
        Self {
            normal: self.normal.iter().map(|v| -v).collect(),
            offset: -self.offset,
        }
    }

    pub fn eval(&self, y: &[f64]) -> f64 {
        dot(y, &self.normal) - self.offset
    }
}

/// An intersection of closed half-spaces, or the empty set.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Polyhedron {
    pub empty: bool,
    pub halfspaces: Vec<HalfSpace>,
}

impl Polyhedron {
    pub fn whole() -> Self {
        Self {
            empty: false,
            halfspaces: vec![],
        }
    }

    pub fn nothing() -> Self {
        Self {
            empty: true,
            halfspaces: vec![],
        }
    }

    pub fn contains(&self, y: &[f64], eps: f64) -> bool {
        !self.empty && self.halfspaces.iter().all(|h| h.eval(y) >= -eps * norm(&h.normal))
    }

    /// Whether every vertex lies strictly inside, by at least `eps`.
    pub fn interior_contains(&self, vertices: &[Vec<f64>], eps: f64) -> bool {
        !self.empty
            && self
                .halfspaces
                .iter()
                .all(|h| vertices.iter().all(|v| h.eval(v) > eps * norm(&h.normal)))
    }

    fn with(&self, h: &Side) -> Self {
        match h {
            Side::Empty => Self::nothing(),
            Side::Whole => self.clone(),
            Side::Half(h) if !self.empty => {
                let mut out = self.clone();
                out.halfspaces.push(h.clone());
                out
            }
            Side::Half(_) => self.clone(),
        }
    }
}

/// One side of a possibly degenerate cut.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Side {
    Empty,
    Whole,
    Half(HalfSpace),
}

/// `(H⁺(α, v), H⁻(α, v))`.
///
/// The cut is the hyperplane `⟨y, v⟩ = threshold(α)`. `H⁺` is the side that
/// grows with `α`, from `∅` at `α = 0` to `ℝ^d` at `α = 1`.
pub fn halfspace(alpha: f64, v: &[f64]) -> Result<(Side, Side)> {
    if !(norm(v) > 0.0) || v.iter().any(|c| !c.is_finite()) {
        return Err(Error::PreconditionFailed("direction must be a nonzero vector".into()));
    }
    if !(0.0..=1.0).contains(&alpha) {
        return Err(Error::InvalidArgument(format!("alpha {alpha} outside [0, 1]")));
    }
    Ok(if alpha == 0.0 {
        (Side::Empty, Side::Whole)
    } else if alpha == 1.0 {
        (Side::Whole, Side::Empty)
    } else {
        let below = HalfSpace {
            normal: v.iter().map(|c| -c).collect(),
            offset: -threshold(alpha),
        };
        let above = below.complement();
        (Side::Half(below), Side::Half(above))
    })
}

/// A cut of the partition: the hyperplane `⟨y, direction⟩ = offset`.
/// Inactive cuts (degenerate `α`) bound no region; their offset is 0.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Cut {
    pub direction: Vec<f64>,
    pub alpha: f64,
    pub offset: f64,
    pub active: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NestedPartition {
    pub dimension: usize,
    pub directions: Vec<Vec<f64>>,
    pub x: BarycentricPoint,
    pub regions: Vec<Polyhedron>,
    /// `cuts[j]` is orthogonal to `directions[j]`.
    pub cuts: Vec<Cut>,
}

fn check_directions(n: usize, directions: &[Vec<f64>]) -> Result<usize> {
    if n < 2 || directions.len() != n - 1 {
        return Err(Error::InvalidArgument(format!(
            "{n} parts need {} directions, got {}",
            n.saturating_sub(1),
            directions.len()
        )));
    }
    let d = directions[0].len();
    if d == 0 || directions.iter().any(|v| v.len() != d) {
        return Err(Error::InvalidArgument("directions must share a positive dimension".into()));
    }
    for v in directions {
        if !(norm(v) > 0.0) {
            return Err(Error::PreconditionFailed("direction must be a nonzero vector".into()));
        }
    }
    Ok(d)
}

/// Coordinate axes `e_1..e_{n−1}` cycled through `ℝ^d`.
pub fn default_directions(n: usize, d: usize) -> Vec<Vec<f64>> {
    (0..n.saturating_sub(1))
        .map(|j| {
            let mut v = vec![0.0; d];
            v[j % d] = 1.0;
            v
        })
        .collect()
}

pub fn nested_partition(x: &BarycentricPoint, directions: &[Vec<f64>]) -> Result<NestedPartition> {
    let n = x.dim();
    let d = check_directions(n, directions)?;
    let c = x.coords();
    let mut regions = vec![Polyhedron::nothing(); n];
    let mut cuts = vec![];
    // Constraints inherited from the levels above.
    let mut outer = Polyhedron::whole();
    let mut level = n;
    let mut done = false;
    while level >= 2 && !done {
        let v = &directions[level - 2];
        let prefix: f64 = c[..level].iter().sum();
        // The base level splits off its first part, the others their last.
        let (alpha, upper, lower) = if level == 2 {
            (c[0] / prefix, 0, 1)
        } else {
            (c[level - 1] / prefix, level - 1, usize::MAX)
        };
        let (plus, minus) = halfspace(alpha, v)?;
        cuts.push(Cut {
            direction: v.clone(),
            alpha,
            offset: if matches!(plus, Side::Half(_)) { threshold(alpha) } else { 0.0 },
            active: matches!(plus, Side::Half(_)),
        });
        regions[upper] = outer.with(&plus);
        if level == 2 {
            regions[lower] = outer.with(&minus);
        } else if alpha == 1.0 {
            // Everything below is empty; the remaining cuts bound nothing.
            done = true;
        }
        outer = outer.with(&minus);
        level -= 1;
    }
    while level >= 2 {
        cuts.push(Cut {
            direction: directions[level - 2].clone(),
            alpha: 0.0,
            offset: 0.0,
            active: false,
        });
        level -= 1;
    }
    cuts.reverse();
    Ok(NestedPartition {
        dimension: d,
        directions: directions.to_vec(),
        x: x.clone(),
        regions,
        cuts,
    })
}
