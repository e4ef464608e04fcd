use serde::{Deserialize, Serialize};

use crate::simplex::{BarycentricPoint, GridVertex};

/// Default slack used by the built-in oracles when evaluating set membership.
pub const DEFAULT_SLACK: f64 = 1e-9;

/// Which covering condition the oracle promises.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    /// KKM: every answer meets the carrier `{i : x_i > 0}`.
    Primal,
    /// Dual KKM: every answer contains each `i` with `x_i = 0`.
    Dual,
}

/// Membership interface for a (colorful) family of covers of the simplex.
///
/// `query(j, x)` lists the indices `i` with `x ∈ A^j_i`. Plain covers have
/// `covers() == 1`; colorful families have `covers() == arity()`.
pub trait CoverOracle {
    fn arity(&self) -> usize;

    fn covers(&self) -> usize {
        1
    }

    fn mode(&self) -> Mode {
        Mode::Primal
    }

    fn query(&self, cover: usize, x: &BarycentricPoint) -> Vec<usize>;

    /// Grid queries default to the vertex's barycentric point.
    fn query_vertex(&self, cover: usize, v: &GridVertex) -> Vec<usize> {
        self.query(cover, &v.point())
    }
}

impl<T: CoverOracle + ?Sized> CoverOracle for &T {
    fn arity(&self) -> usize {
        (**self).arity()
    }
    fn covers(&self) -> usize {
        (**self).covers()
    }
    fn mode(&self) -> Mode {
        (**self).mode()
    }
    fn query(&self, cover: usize, x: &BarycentricPoint) -> Vec<usize> {
        (**self).query(cover, x)
    }
    fn query_vertex(&self, cover: usize, v: &GridVertex) -> Vec<usize> {
        (**self).query_vertex(cover, v)
    }
}

/// Oracle backed by a closure, mostly for tests and quick experiments.
pub struct FnOracle<F> {
    k: usize,
    n: usize,
    mode: Mode,
    f: F,
}

impl<F> FnOracle<F>
where
    F: Fn(usize, &BarycentricPoint) -> Vec<usize>,
{
    pub fn new(k: usize, n: usize, mode: Mode, f: F) -> Self {
        Self { k, n, mode, f }
    }
}

impl<F> CoverOracle for FnOracle<F>
where
    F: Fn(usize, &BarycentricPoint) -> Vec<usize>,
{
    fn arity(&self) -> usize {
        self.k
    }
    fn covers(&self) -> usize {
        self.n
    }
    fn mode(&self) -> Mode {
        self.mode
    }
    fn query(&self, cover: usize, x: &BarycentricPoint) -> Vec<usize> {
        (self.f)(cover, x)
    }
}

/// Argmax cover `A_i = {x : x_i = max_t x_t}` (within `slack`), shared by all owners.
pub struct ArgmaxOracle {
    pub k: usize,
    pub n: usize,
    pub slack: f64,
}

impl ArgmaxOracle {
    pub fn plain(k: usize) -> Self {
        Self { k, n: 1, slack: DEFAULT_SLACK }
    }

    pub fn colorful(k: usize) -> Self {
        Self { k, n: k, slack: DEFAULT_SLACK }
    }
}

impl CoverOracle for ArgmaxOracle {
    fn arity(&self) -> usize {
        self.k
    }
    fn covers(&self) -> usize {
        self.n
    }
    fn query(&self, _cover: usize, x: &BarycentricPoint) -> Vec<usize> {
        let max = x.coords().iter().copied().fold(f64::MIN, f64::max);
        (0..self.k).filter(|&i| x[i] >= max - self.slack).collect()
    }
}

/// Argmin cover `A_i = {x : x_i = min_t x_t}`, a dual KKM cover.
pub struct ArgminOracle {
    pub k: usize,
    pub n: usize,
    pub slack: f64,
}

impl CoverOracle for ArgminOracle {
    fn arity(&self) -> usize {
        self.k
    }
    fn covers(&self) -> usize {
        self.n
    }
    fn mode(&self) -> Mode {
        Mode::Dual
    }
    fn query(&self, _cover: usize, x: &BarycentricPoint) -> Vec<usize> {
        let min = x.coords().iter().copied().fold(f64::MAX, f64::min);
        (0..self.k).filter(|&i| x[i] <= min + self.slack).collect()
    }
}

/// Picks the label of a vertex from an oracle answer.
///
/// Primal: the smallest returned index in the carrier. Dual: the returned
/// index with the smallest coordinate, ties to the smallest index. `None`
/// means the answer violates the covering condition at `v`.
pub fn choose_label(mode: Mode, v: &GridVertex, answer: &[usize]) -> Option<usize> {
    let k = v.k();
    match mode {
        Mode::Primal => answer
            .iter()
            .copied()
            .filter(|&i| i < k && v.counts[i] > 0)
            .min(),
        Mode::Dual => {
            let zeros_covered = (0..k)
                .filter(|&i| v.counts[i] == 0)
                .all(|i| answer.contains(&i));
            if !zeros_covered {
                return None;
            }
            answer
                .iter()
                .copied()
                .filter(|&i| i < k)
                .min_by_key(|&i| (v.counts[i], i))
        }
    }
}
