//! Lattice discretization of the standard simplex and its staircase (Kuhn)
//! triangulation.
//!
//! A grid vertex of resolution `m` is a vector of nonnegative counts summing to
//! `m`; its barycentric point is `counts / m`. A cell is a base vertex plus an
//! ordering of the `k - 1` elementary steps, where step `c` moves one count unit
//! from coordinate `c` to coordinate `c + 1`.

use std::fmt;

use itertools::Itertools;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance on the coordinate sum of a floating barycentric point.
pub const SUM_TOLERANCE: f64 = 1e-12;

/// A point of the standard simplex.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct BarycentricPoint(Vec<f64>);

impl BarycentricPoint {
    pub fn new(coords: Vec<f64>) -> Result<Self> {
        if coords.is_empty() {
            return Err(Error::InvalidArgument("empty barycentric point".into()));
        }
        if coords.iter().any(|c| !c.is_finite() || *c < 0.0) {
            return Err(Error::InvalidArgument(format!(
                "barycentric coordinates must be finite and nonnegative: {coords:?}"
            )));
        }
        let sum: f64 = coords.iter().sum();
        if (sum - 1.0).abs() > SUM_TOLERANCE {
            return Err(Error::InvalidArgument(format!(
                "barycentric coordinates sum to {sum}, not 1"
            )));
        }
        Ok(Self(coords))
    }

    /// Rescales nonnegative weights onto the simplex.
    pub fn normalized(weights: &[f64]) -> Result<Self> {
        let sum: f64 = weights.iter().sum();
        if !(sum > 0.0) || weights.iter().any(|w| *w < 0.0 || !w.is_finite()) {
            return Err(Error::InvalidArgument(format!("cannot normalize {weights:?}")));
        }
        Ok(Self(weights.iter().map(|w| w / sum).collect()))
    }

    pub fn barycenter(k: usize) -> Self {
        Self(vec![1.0 / k as f64; k])
    }

    pub fn vertex(k: usize, i: usize) -> Self {
        let mut coords = vec![0.0; k];
        coords[i] = 1.0;
        Self(coords)
    }

    pub fn coords(&self) -> &[f64] {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    /// Indices with a positive coordinate.
    pub fn carrier(&self) -> Vec<usize> {
        (0..self.0.len()).filter(|&i| self.0[i] > 0.0).collect()
    }

    pub fn l1_distance(&self, other: &Self) -> f64 {
        self.0.iter().zip(&other.0).map(|(a, b)| (a - b).abs()).sum()
    }
}

impl std::ops::Index<usize> for BarycentricPoint {
    type Output = f64;

    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

/// A lattice point of the simplex dilated by `resolution`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct GridVertex {
    pub counts: Vec<u32>,
    pub resolution: u32,
}

impl GridVertex {
    pub fn new(counts: Vec<u32>, resolution: u32) -> Result<Self> {
        let sum: u64 = counts.iter().map(|&c| c as u64).sum();
        if resolution == 0 || sum != resolution as u64 || counts.len() < 2 {
            return Err(Error::InvalidArgument(format!(
                "counts {counts:?} do not sum to resolution {resolution}"
            )));
        }
        Ok(Self { counts, resolution })
    }

    /// The simplex vertex `e_i` at resolution `m`.
    pub fn corner(k: usize, i: usize, m: u32) -> Self {
        let mut counts = vec![0; k];
        counts[i] = m;
        Self { counts, resolution: m }
    }

    pub fn k(&self) -> usize {
        self.counts.len()
    }

    pub fn point(&self) -> BarycentricPoint {
        let m = self.resolution as f64;
        BarycentricPoint(self.counts.iter().map(|&c| c as f64 / m).collect())
    }

    pub fn carrier(&self) -> Vec<usize> {
        (0..self.counts.len()).filter(|&i| self.counts[i] > 0).collect()
    }

    /// Cache key `a_1,…,a_k`.
    pub fn key(&self) -> String {
        self.counts.iter().join(",")
    }

    pub fn parse_key(key: &str, resolution: u32) -> Result<Self> {
        let counts = key
            .split(',')
            .map(|s| s.trim().parse::<u32>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|e| Error::Format(format!("bad vertex key {key:?}: {e}")))?;
        Self::new(counts, resolution)
    }

    /// The same point expressed at a multiple of the current resolution.
    pub fn rescaled(&self, resolution: u32) -> Option<Self> {
        if resolution % self.resolution != 0 {
            return None;
        }
        let f = resolution / self.resolution;
        Some(Self {
            counts: self.counts.iter().map(|c| c * f).collect(),
            resolution,
        })
    }

    fn stepped(&self, c: usize) -> Option<Self> {
        let mut next = self.clone();
        next.counts[c] = next.counts[c].checked_sub(1)?;
        next.counts[c + 1] += 1;
        Some(next)
    }

    fn unstepped(&self, c: usize) -> Option<Self> {
        let mut next = self.clone();
        next.counts[c + 1] = next.counts[c + 1].checked_sub(1)?;
        next.counts[c] += 1;
        Some(next)
    }
}

impl fmt::Display for GridVertex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({})/{}", self.key(), self.resolution)
    }
}

/// Owner (cover index, zero based) of a grid vertex under the residue coloring
/// `Σ_j j·a_j mod n`. Each staircase step raises the residue by one, so a cell
/// of the `k`-coordinate grid sees `k` consecutive residues.
pub fn owner_of(v: &GridVertex, n: usize) -> usize {
    if n <= 1 {
        return 0;
    }
    let n = n as u64;
    let residue = v
        .counts
        .iter()
        .enumerate()
        .fold(0u64, |acc, (j, &a)| (acc + (j as u64 % n) * (a as u64 % n)) % n);
    residue as usize
}

/// A staircase cell: `base` followed by the steps in `steps` order.
///
/// The same type represents lower-dimensional cells lying in the face
/// `conv(e_0, …, e_j)`, in which case `steps` is a permutation of `0..j`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Cell {
    pub base: GridVertex,
    pub steps: Vec<usize>,
}

impl Cell {
    /// Vertices in chain order, or `None` if some vertex leaves the simplex.
    pub fn try_vertices(&self) -> Option<Vec<GridVertex>> {
        let mut out = Vec::with_capacity(self.steps.len() + 1);
        let mut v = self.base.clone();
        out.push(v.clone());
        for &c in &self.steps {
            v = v.stepped(c)?;
            out.push(v.clone());
        }
        Some(out)
    }

    /// Vertices in chain order. Panics on a cell outside the simplex, which
    /// the constructors never produce.
    pub fn vertices(&self) -> Vec<GridVertex> {
        self.try_vertices().expect("cell leaves the simplex")
    }

    pub fn resolution(&self) -> u32 {
        self.base.resolution
    }

    pub fn centroid(&self) -> BarycentricPoint {
        let verts = self.vertices();
        let k = self.base.k();
        let denom = verts.len() as f64 * self.base.resolution as f64;
        let mut sums = vec![0u64; k];
        for v in &verts {
            for (s, &c) in sums.iter_mut().zip(&v.counts) {
                *s += c as u64;
            }
        }
        BarycentricPoint(sums.iter().map(|&s| s as f64 / denom).collect())
    }

    /// Largest L1 distance between two vertices, in barycentric units.
    pub fn diameter(&self) -> f64 {
        let verts = self.vertices();
        let mut best = 0u64;
        for (a, b) in verts.iter().tuple_combinations() {
            let d: u64 = a
                .counts
                .iter()
                .zip(&b.counts)
                .map(|(&x, &y)| (x as i64 - y as i64).unsigned_abs())
                .sum();
            best = best.max(d);
        }
        best as f64 / self.base.resolution as f64
    }

    /// Replaces vertex `t` by its reflection across the opposite facet
    /// (Freudenthal pivot). Returns the new cell and the index of the new
    /// vertex, or `None` if the new vertex leaves the simplex.
    pub fn pivot(&self, t: usize) -> Option<(Cell, usize)> {
        let len = self.steps.len();
        assert!(t <= len);
        if len == 0 {
            return None;
        }
        let mut steps = self.steps.clone();
        if t == 0 {
            let base = self.base.stepped(steps[0])?;
            steps.rotate_left(1);
            let cell = Cell { base, steps };
            cell.try_vertices()?;
            Some((cell, len))
        } else if t == len {
            let base = self.base.unstepped(steps[len - 1])?;
            steps.rotate_right(1);
            let cell = Cell { base, steps };
            Some((cell, 0))
        } else {
            steps.swap(t - 1, t);
            let cell = Cell {
                base: self.base.clone(),
                steps,
            };
            cell.try_vertices()?;
            Some((cell, t))
        }
    }
}

/// Worst-case L1 diameter of a cell at resolution `m` with `k` coordinates.
///
/// Two vertices of a cell differ by a set of steps; the count difference has
/// two nonzero entries per run of consecutive step indices, and at most
/// `⌈(k-1)/2⌉` runs fit in `k - 1` indices.
pub fn grid_diameter(k: usize, m: u32) -> f64 {
    let runs = k / 2; // = ceil((k - 1) / 2)
    (2 * runs) as f64 / m as f64
}

/// The lattice of resolution `m` on the `(k-1)`-simplex.
#[derive(Clone, Debug)]
pub struct Grid {
    pub k: usize,
    pub m: u32,
}

impl Grid {
    pub fn new(k: usize, m: u32) -> Result<Self> {
        if k < 2 {
            return Err(Error::InvalidArgument(format!("need k >= 2, got {k}")));
        }
        if m < 1 {
            return Err(Error::InvalidArgument("need resolution >= 1".into()));
        }
        Ok(Self { k, m })
    }

    /// All lattice points, in lexicographically decreasing order of counts.
    pub fn vertices(&self) -> Vec<GridVertex> {
        let mut out = Vec::new();
        let mut counts = vec![0u32; self.k];
        fill(&mut counts, 0, self.m, &mut |c| {
            out.push(GridVertex {
                counts: c.to_vec(),
                resolution: self.m,
            })
        });
        out
    }

    pub fn vertex_count(&self) -> u64 {
        // C(m + k - 1, k - 1)
        let (n, r) = (self.m as u64 + self.k as u64 - 1, self.k as u64 - 1);
        (1..=r).fold(1u64, |acc, i| acc * (n - r + i) / i)
    }

    pub fn cell_count(&self) -> u64 {
        (self.m as u64).saturating_pow(self.k as u32 - 1)
    }

    /// Every staircase cell whose vertices stay in the simplex.
    pub fn cells(&self) -> Vec<Cell> {
        let perms: Vec<Vec<usize>> = (0..self.k - 1).permutations(self.k - 1).collect();
        let mut out = Vec::with_capacity(self.cell_count() as usize);
        for base in self.vertices() {
            for steps in &perms {
                let cell = Cell {
                    base: base.clone(),
                    steps: steps.clone(),
                };
                if cell.try_vertices().is_some() {
                    out.push(cell);
                }
            }
        }
        out
    }

    pub fn diameter(&self) -> f64 {
        grid_diameter(self.k, self.m)
    }
}

fn fill(counts: &mut [u32], i: usize, remaining: u32, emit: &mut impl FnMut(&[u32])) {
    if i + 1 == counts.len() {
        counts[i] = remaining;
        emit(counts);
        return;
    }
    for a in (0..=remaining).rev() {
        counts[i] = a;
        fill(counts, i + 1, remaining - a, emit);
    }
}
