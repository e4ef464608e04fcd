//! Interval piercing through the Gallai construction: piercing sets are
//! points of the simplex, and the gaps between consecutive piercing points
//! label a KKM cover.

use serde::{Deserialize, Serialize};

use crate::engine::{solve_colorful_kkm, solve_kkm, CoverOracle, RainbowCell, Schedule, SolveOptions, DEFAULT_SLACK};
use crate::error::{Error, Result};
use crate::simplex::{grid_diameter, BarycentricPoint, GridVertex};

/// A closed interval `[lo, hi]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "(f64, f64)", into = "(f64, f64)")]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub fn new(lo: f64, hi: f64) -> Result<Self> {
        if !lo.is_finite() || !hi.is_finite() || lo > hi {
            return Err(Error::InvalidArgument(format!("bad interval [{lo}, {hi}]")));
        }
        Ok(Self { lo, hi })
    }

    pub fn contains(&self, p: f64) -> bool {
        self.lo <= p && p <= self.hi
    }

    pub fn disjoint(&self, other: &Self) -> bool {
        self.hi < other.lo || other.hi < self.lo
    }

    /// Does the interval sit inside the open gap `(a, b)` with `slack` to spare?
    pub fn fits_in(&self, a: f64, b: f64, slack: f64) -> bool {
        a + slack < self.lo && self.hi < b - slack
    }
}

impl TryFrom<(f64, f64)> for Interval {
    type Error = Error;

    fn try_from((lo, hi): (f64, f64)) -> Result<Self> {
        Self::new(lo, hi)
    }
}

impl From<Interval> for (f64, f64) {
    fn from(i: Interval) -> Self {
        (i.lo, i.hi)
    }
}

/// `intervals.v1`: `{"families": [[[lo, hi], …], …]}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IntervalInstance {
    pub families: Vec<Vec<Interval>>,
}

/// Affine map of all families into `[0.01, 0.99]`, so that every interval
/// lies strictly inside `(0, 1)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Normalization {
    pub shift: f64,
    pub scale: f64,
}

impl Normalization {
    pub fn fit<'a>(intervals: impl IntoIterator<Item = &'a Interval>) -> Self {
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for i in intervals {
            lo = lo.min(i.lo);
            hi = hi.max(i.hi);
        }
        if !lo.is_finite() {
            return Self { shift: 0.0, scale: 1.0 };
        }
        if hi - lo <= 0.0 {
            return Self { shift: 0.5 - lo, scale: 1.0 };
        }
        let scale = 0.98 / (hi - lo);
        Self {
            shift: 0.01 - lo * scale,
            scale,
        }
    }

    pub fn apply(&self, i: &Interval) -> Interval {
        Interval {
            lo: i.lo * self.scale + self.shift,
            hi: i.hi * self.scale + self.shift,
        }
    }
}

/// Minimum piercing set by the right-endpoint sweep.
pub fn piercing_set(family: &[Interval]) -> Vec<f64> {
    let mut sorted = family.to_vec();
    sorted.sort_by(|a, b| a.hi.total_cmp(&b.hi));
    let mut points: Vec<f64> = vec![];
    for i in sorted {
        if points.last().map_or(true, |&p| !i.contains(p)) {
            points.push(i.hi);
        }
    }
    points
}

pub fn brute_tau(family: &[Interval]) -> usize {
    piercing_set(family).len()
}

/// Maximum matching by the same sweep: keep every interval that starts
/// after the last kept right endpoint.
pub fn brute_nu(family: &[Interval]) -> usize {
    let mut sorted = family.to_vec();
    sorted.sort_by(|a, b| a.hi.total_cmp(&b.hi));
    let mut last = f64::NEG_INFINITY;
    let mut count = 0;
    for i in sorted {
        if i.lo > last {
            last = i.hi;
            count += 1;
        }
    }
    count
}

/// `u_i = x_1 + … + x_i` for `i = 1..k-1`.
pub fn piercing_points(x: &BarycentricPoint) -> Vec<f64> {
    let k = x.dim();
    let mut acc = 0.0;
    (0..k - 1)
        .map(|i| {
            acc += x[i];
            acc.min(1.0)
        })
        .collect()
}

/// Gap boundaries `0 = u_0 ≤ u_1 ≤ … ≤ u_k = 1`, exact on grid vertices.
fn gap_bounds_vertex(v: &GridVertex) -> Vec<f64> {
    let m = v.resolution as f64;
    let mut acc = 0u64;
    let mut out = vec![0.0];
    for &c in &v.counts[..v.k() - 1] {
        acc += c as u64;
        out.push(acc as f64 / m);
    }
    out.push(1.0);
    out
}

fn gap_bounds(x: &BarycentricPoint) -> Vec<f64> {
    let mut out = vec![0.0];
    out.extend(piercing_points(x));
    out.push(1.0);
    out
}

/// `A^j_i = {x : some interval of family j fits strictly inside gap i}`.
///
/// One family gives a plain cover; `k` families give a colorful one.
/// Families must already lie inside `(0, 1)`.
#[derive(Clone, Debug)]
pub struct GallaiOracle {
    pub families: Vec<Vec<Interval>>,
    pub k: usize,
    pub slack: f64,
}

impl GallaiOracle {
    fn labels(&self, cover: usize, bounds: &[f64]) -> Vec<usize> {
        let family = &self.families[cover.min(self.families.len() - 1)];
        (0..self.k)
            .filter(|&i| {
                let (a, b) = (bounds[i], bounds[i + 1]);
                b > a && family.iter().any(|f| f.fits_in(a, b, self.slack))
            })
            .collect()
    }

    /// Intervals of `cover`'s family fitting in gap `i` at `v`.
    pub fn fitting(&self, cover: usize, v: &GridVertex, i: usize) -> Vec<(usize, Interval)> {
        let b = gap_bounds_vertex(v);
        let family = &self.families[cover.min(self.families.len() - 1)];
        family
            .iter()
            .copied()
            .enumerate()
            .filter(|(_, f)| f.fits_in(b[i], b[i + 1], self.slack))
            .collect()
    }
}

impl CoverOracle for GallaiOracle {
    fn arity(&self) -> usize {
        self.k
    }

    fn covers(&self) -> usize {
        if self.families.len() > 1 {
            self.k
        } else {
            1
        }
    }

    fn query(&self, cover: usize, x: &BarycentricPoint) -> Vec<usize> {
        self.labels(cover, &gap_bounds(x))
    }

    fn query_vertex(&self, cover: usize, v: &GridVertex) -> Vec<usize> {
        self.labels(cover, &gap_bounds_vertex(v))
    }
}

/// The Gallai cover of a family already inside `(0, 1)`.
pub fn gallai_oracle(family: &[Interval], k: usize) -> GallaiOracle {
    GallaiOracle {
        families: vec![family.to_vec()],
        k,
        slack: DEFAULT_SLACK,
    }
}

/// An interval chosen for gap `gap`, from family `family` at position `index`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Pick {
    pub family: usize,
    pub index: usize,
    pub gap: usize,
    pub interval: Interval,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Matching {
    pub tau: usize,
    pub picks: Vec<Pick>,
    pub witness: Option<BarycentricPoint>,
    pub resolution: Option<u32>,
}

impl Matching {
    pub fn size(&self) -> usize {
        self.picks.len()
    }

    pub fn pairwise_disjoint(&self) -> bool {
        self.picks
            .iter()
            .enumerate()
            .all(|(a, p)| self.picks[a + 1..].iter().all(|q| p.interval.disjoint(&q.interval)))
    }
}

/// Walks the gaps left to right, taking from each labeled vertex the
/// interval with the smallest right endpoint that starts after the
/// previous pick.
fn extract(oracle: &GallaiOracle, cell: &RainbowCell, colorful: bool) -> Option<Vec<Pick>> {
    let mut picks = vec![];
    let mut last = f64::NEG_INFINITY;
    for gap in 0..oracle.k {
        let at = cell.vertex_with_label(gap);
        let owner = cell.owners[at];
        let best = oracle
            .fitting(owner, &cell.vertices[at], gap)
            .into_iter()
            .filter(|(_, f)| f.lo > last)
            .min_by(|a, b| a.1.hi.total_cmp(&b.1.hi))?;
        last = best.1.hi;
        picks.push(Pick {
            family: if colorful { owner } else { 0 },
            index: best.0,
            gap,
            interval: best.1,
        });
    }
    Some(picks)
}

/// Solves with a shrinking containment margin `η` and cells no wider than
/// `η`; once cells are that fine, intervals picked from adjacent gaps of a
/// rainbow cell are ordered and disjoint. Returns the original-coordinate
/// picks.
fn solve_gallai(families: &[Vec<Interval>], k: usize, colorful: bool) -> Result<(Vec<Pick>, RainbowCell)> {
    let norm = Normalization::fit(families.iter().flatten());
    let scaled: Vec<Vec<Interval>> = families
        .iter()
        .map(|f| f.iter().map(|i| norm.apply(i)).collect())
        .collect();
    let mut eta = 0.25 / k as f64;
    let mut last_err = String::new();
    while eta > 1e-12 {
        let oracle = GallaiOracle {
            families: scaled.clone(),
            k,
            slack: eta,
        };
        let m = (grid_diameter(k, 1) / eta).ceil().max(1.0) as u32;
        let opts = SolveOptions::new(grid_diameter(k, m)).with_schedule(Schedule::new(vec![m])?);
        let solved = if colorful {
            solve_colorful_kkm(&oracle, &opts)
        } else {
            solve_kkm(&oracle, &opts)
        };
        match solved {
            Ok(cell) => {
                if let Some(mut picks) = extract(&oracle, &cell, colorful) {
                    for p in &mut picks {
                        p.interval = families[p.family][p.index];
                    }
                    return Ok((picks, cell));
                }
                last_err = format!("extraction failed at margin {eta}");
            }
            Err(e @ (Error::AdmissibilityViolation { .. } | Error::ResolutionExceeded { .. })) => {
                last_err = e.to_string();
            }
            Err(e) => return Err(e),
        }
        eta /= 2.0;
    }
    Err(Error::ResolutionExceeded {
        max_resolution: (grid_diameter(k, 1) / eta).ceil() as u32,
        diagnostics: last_err,
    })
}

/// A maximum matching found through the KKM theorem at `k = τ`.
pub fn kkm_matching(family: &[Interval]) -> Result<Matching> {
    if family.is_empty() {
        return Err(Error::InvalidArgument("empty family".into()));
    }
    let tau = brute_tau(family);
    if tau == 1 {
        // Δ_0 is a point; any interval is a matching of size one.
        return Ok(Matching {
            tau,
            picks: vec![Pick {
                family: 0,
                index: 0,
                gap: 0,
                interval: family[0],
            }],
            witness: Some(BarycentricPoint::vertex(1, 0)),
            resolution: None,
        });
    }
    let (picks, cell) = solve_gallai(&[family.to_vec()], tau, false)?;
    Ok(Matching {
        tau,
        picks,
        witness: Some(cell.witness),
        resolution: Some(cell.resolution),
    })
}

/// One interval from each of `k` families, pairwise disjoint, provided every
/// family needs at least `k` piercing points.
pub fn colorful_matching(families: &[Vec<Interval>]) -> Result<Matching> {
    let k = families.len();
    if k == 0 {
        return Err(Error::InvalidArgument("no families".into()));
    }
    for (j, f) in families.iter().enumerate() {
        let tau = brute_tau(f);
        if tau < k {
            return Err(Error::PreconditionFailed(format!(
                "family {j} is pierced by {tau} < {k} points"
            )));
        }
    }
    if k == 1 {
        return Ok(Matching {
            tau: 1,
            picks: vec![Pick {
                family: 0,
                index: 0,
                gap: 0,
                interval: families[0][0],
            }],
            witness: None,
            resolution: None,
        });
    }
    let (mut picks, cell) = solve_gallai(families, k, true)?;
    picks.sort_by_key(|p| p.family);
    let m = Matching {
        tau: k,
        picks,
        witness: Some(cell.witness),
        resolution: Some(cell.resolution),
    };
    if !m.pairwise_disjoint() {
        return Err(Error::PreconditionFailed("extracted intervals overlap".into()));
    }
    Ok(m)
}

/// A union of at most `d` closed intervals; `None` marks an empty component.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct DInterval {
    pub components: Vec<Option<Interval>>,
}

impl DInterval {
    pub fn parts(&self) -> impl Iterator<Item = &Interval> {
        self.components.iter().flatten()
    }

    pub fn contains(&self, p: f64) -> bool {
        self.parts().any(|i| i.contains(p))
    }

    pub fn disjoint(&self, other: &Self) -> bool {
        self.parts().all(|a| other.parts().all(|b| a.disjoint(b)))
    }
}

/// Exact τ for a small family of d-intervals. Some minimum piercing set
/// uses only right endpoints of components, so a breadth-first search over
/// covered subsets settles it.
pub fn brute_tau_d(family: &[DInterval]) -> usize {
    let n = family.len();
    assert!(n <= 20, "brute force is limited to 20 members");
    let full = (1u32 << n) - 1;
    let masks: Vec<u32> = family
        .iter()
        .flat_map(|f| f.parts().map(|i| i.hi))
        .map(|p| {
            family
                .iter()
                .enumerate()
                .filter(|(_, f)| f.contains(p))
                .fold(0u32, |acc, (i, _)| acc | 1 << i)
        })
        .collect();
    let mut dist = vec![usize::MAX; 1 << n];
    dist[0] = 0;
    let mut frontier = vec![0u32];
    while !frontier.is_empty() {
        let mut next = vec![];
        for s in frontier {
            if s == full {
                return dist[s as usize];
            }
            for &m in &masks {
                let t = s | m;
                if dist[t as usize] == usize::MAX {
                    dist[t as usize] = dist[s as usize] + 1;
                    next.push(t);
                }
            }
        }
        frontier = next;
    }
    dist[full as usize]
}

/// Exact ν for a small family of d-intervals by subset enumeration.
pub fn brute_nu_d(family: &[DInterval]) -> usize {
    let n = family.len();
    assert!(n <= 20, "brute force is limited to 20 members");
    let conflicts: Vec<u32> = (0..n)
        .map(|i| {
            (0..n)
                .filter(|&j| j != i && !family[i].disjoint(&family[j]))
                .fold(0u32, |acc, j| acc | 1 << j)
        })
        .collect();
    let mut best = 0;
    for s in 0u32..(1 << n) {
        let size = s.count_ones() as usize;
        if size <= best {
            continue;
        }
        if (0..n).all(|i| s & (1 << i) == 0 || conflicts[i] & s == 0) {
            best = size;
        }
    }
    best
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub d: usize,
    pub instances: usize,
    pub bound: usize,
    pub max_ratio: f64,
    /// Indices of instances with τ > (d² − d + 1)·ν.
    pub violations: Vec<usize>,
}

/// Random d-interval families, checking τ ≤ (d² − d + 1)·ν by brute force.
pub fn d_interval_bound_harness(instances: usize, d: usize, max_size: usize, seed: u64) -> BoundReport {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let bound = d * d - d + 1;
    let mut max_ratio: f64 = 0.0;
    let mut violations = vec![];
    for t in 0..instances {
        let n = rng.gen_range(1..=max_size.max(1));
        let family: Vec<DInterval> = (0..n)
            .map(|_| {
                let parts = rng.gen_range(1..=d);
                DInterval {
                    components: (0..d)
                        .map(|c| {
                            (c < parts).then(|| {
                                let a: f64 = rng.gen();
                                let len: f64 = rng.gen_range(0.0..0.3);
                                Interval {
                                    lo: a,
                                    hi: a + len,
                                }
                            })
                        })
                        .collect(),
                }
            })
            .collect();
        let tau = brute_tau_d(&family);
        let nu = brute_nu_d(&family);
        max_ratio = max_ratio.max(tau as f64 / nu as f64);
        if tau > bound * nu {
            violations.push(t);
        }
    }
    BoundReport {
        d,
        instances,
        bound,
        max_ratio,
        violations,
    }
}
