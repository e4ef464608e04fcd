//! Rainbow-cell search over the staircase triangulation.

use std::collections::HashMap;

use itertools::Itertools;
use serde::{Deserialize, Serialize};

use super::oracle::{choose_label, CoverOracle, Mode};
use crate::error::{Error, Result};
use crate::simplex::{grid_diameter, owner_of, BarycentricPoint, Cell, Grid, GridVertex};

/// Increasing list of grid resolutions to try.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Schedule(Vec<u32>);

/// Largest resolution in the default schedule.
pub const DEFAULT_MAX_RESOLUTION: u32 = 1 << 16;

impl Schedule {
    pub fn new(mut resolutions: Vec<u32>) -> Result<Self> {
        resolutions.retain(|&m| m > 0);
        resolutions.sort_unstable();
        resolutions.dedup();
        if resolutions.is_empty() {
            return Err(Error::InvalidArgument("empty resolution schedule".into()));
        }
        Ok(Self(resolutions))
    }

    /// `start, 2·start, 4·start, …` up to and including `max` when reached.
    pub fn doubling(start: u32, max: u32) -> Self {
        let mut out = vec![];
        let mut m = start.max(1);
        while m <= max {
            out.push(m);
            match m.checked_mul(2) {
                Some(next) => m = next,
                None => break,
            }
        }
        if out.is_empty() {
            out.push(max.max(1));
        }
        Self(out)
    }

    pub fn resolutions(&self) -> &[u32] {
        &self.0
    }

    pub fn max(&self) -> u32 {
        *self.0.last().expect("schedule is nonempty")
    }

    /// The scheduled resolutions whose cells are no wider than `tolerance`.
    pub fn admissible(&self, k: usize, tolerance: f64) -> Vec<u32> {
        self.0
            .iter()
            .copied()
            .filter(|&m| grid_diameter(k, m) <= tolerance)
            .collect()
    }

    /// Coarsest schedule prefix with cells no wider than `tolerance`; the
    /// whole schedule when none qualifies.
    pub fn up_to_tolerance(&self, k: usize, tolerance: f64) -> Self {
        match self.0.iter().position(|&m| grid_diameter(k, m) <= tolerance) {
            Some(i) => Self(self.0[..=i].to_vec()),
            None => self.clone(),
        }
    }
}

impl Default for Schedule {
    fn default() -> Self {
        Self::doubling(8, DEFAULT_MAX_RESOLUTION)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    /// Door-to-door walk through nested faces; primal labelings only.
    PathFollowing,
    /// Label every vertex, then test every cell.
    Scan,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SolveOptions {
    /// Largest admissible L1 cell diameter.
    pub tolerance: f64,
    pub schedule: Schedule,
    /// Defaults to path following for primal covers and a scan for dual ones.
    pub strategy: Option<Strategy>,
}

impl SolveOptions {
    pub fn new(tolerance: f64) -> Self {
        Self {
            tolerance,
            schedule: Schedule::default(),
            strategy: None,
        }
    }

    pub fn with_schedule(mut self, schedule: Schedule) -> Self {
        self.schedule = schedule;
        self
    }

    pub fn with_strategy(mut self, strategy: Strategy) -> Self {
        self.strategy = Some(strategy);
        self
    }

    pub(crate) fn strategy_for(&self, mode: Mode) -> Strategy {
        match (mode, self.strategy) {
            (Mode::Dual, _) => Strategy::Scan,
            (Mode::Primal, Some(s)) => s,
            (Mode::Primal, None) => Strategy::PathFollowing,
        }
    }
}

/// A fully labeled cell together with the evidence that certifies it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RainbowCell {
    pub cell: Cell,
    pub vertices: Vec<GridVertex>,
    /// Label chosen at each vertex; pairwise distinct.
    pub labels: Vec<usize>,
    /// Cover queried at each vertex.
    pub owners: Vec<usize>,
    /// Raw oracle answer at each vertex.
    pub answers: Vec<Vec<usize>>,
    /// `permutation[owner] = label` when every owner appears in the cell.
    pub permutation: Option<Vec<usize>>,
    pub witness: BarycentricPoint,
    pub diameter: f64,
    pub resolution: u32,
}

impl RainbowCell {
    /// Vertex index carrying `label`.
    pub fn vertex_with_label(&self, label: usize) -> usize {
        self.labels
            .iter()
            .position(|&l| l == label)
            .expect("rainbow cells carry every label")
    }

    /// Vertex index owned by cover `owner`.
    pub fn vertex_with_owner(&self, owner: usize) -> Option<usize> {
        self.owners.iter().position(|&o| o == owner)
    }
}

/// Where the search obtains oracle answers.
pub(crate) trait AnswerSource {
    /// The answer for `(cover, v)`, or `None` while it is unknown.
    fn answer(&mut self, cover: usize, v: &GridVertex) -> Result<Option<Vec<usize>>>;
}

/// Answers straight from a programmatic oracle. Labels are memoized per
/// search, so nothing is cached here.
pub(crate) struct OracleSource<'a, O: ?Sized> {
    pub oracle: &'a O,
}

impl<'a, O: CoverOracle + ?Sized> OracleSource<'a, O> {
    pub fn new(oracle: &'a O) -> Self {
        Self { oracle }
    }
}

impl<O: CoverOracle + ?Sized> AnswerSource for OracleSource<'_, O> {
    fn answer(&mut self, cover: usize, v: &GridVertex) -> Result<Option<Vec<usize>>> {
        Ok(Some(self.oracle.query_vertex(cover, v)))
    }
}

pub(crate) enum SearchOutcome {
    Found(RainbowCell),
    /// Answers needed before the search can continue.
    Pending(Vec<(usize, GridVertex)>),
    /// The search ended without a rainbow cell at this resolution.
    Exhausted(String),
}

struct Labeler<'s, S: ?Sized> {
    source: &'s mut S,
    mode: Mode,
    covers: usize,
    labels: HashMap<GridVertex, (usize, usize, Vec<usize>)>,
}

impl<'s, S: AnswerSource + ?Sized> Labeler<'s, S> {
    fn new(source: &'s mut S, mode: Mode, covers: usize) -> Self {
        Self {
            source,
            mode,
            covers,
            labels: HashMap::new(),
        }
    }

    /// `(label, owner, answer)` of `v` without caching, `None` while its
    /// answer is pending.
    fn compute(&mut self, v: &GridVertex) -> Result<Option<(usize, usize, Vec<usize>)>> {
        let owner = owner_of(v, self.covers);
        let Some(answer) = self.source.answer(owner, v)? else {
            return Ok(None);
        };
        let label = choose_label(self.mode, v, &answer).ok_or_else(|| Error::AdmissibilityViolation {
            cover: owner,
            vertex: v.clone(),
            returned: answer.clone(),
        })?;
        Ok(Some((label, owner, answer)))
    }

    fn label(&mut self, v: &GridVertex) -> Result<Option<usize>> {
        if let Some((l, _, _)) = self.labels.get(v) {
            return Ok(Some(*l));
        }
        let Some(entry) = self.compute(v)? else {
            return Ok(None);
        };
        let l = entry.0;
        self.labels.insert(v.clone(), entry);
        Ok(Some(l))
    }

    fn certify(&self, cell: Cell) -> RainbowCell {
        let vertices = cell.vertices();
        let mut labels = vec![];
        let mut owners = vec![];
        let mut answers = vec![];
        for v in &vertices {
            let (l, o, a) = self.labels[v].clone();
            labels.push(l);
            owners.push(o);
            answers.push(a);
        }
        let k = vertices.len();
        let permutation = if self.covers == k && owners.iter().all_unique() {
            let mut perm = vec![0; k];
            for (&o, &l) in owners.iter().zip(&labels) {
                perm[o] = l;
            }
            Some(perm)
        } else {
            None
        };
        RainbowCell {
            witness: cell.centroid(),
            diameter: cell.diameter(),
            resolution: cell.resolution(),
            cell,
            vertices,
            labels,
            owners,
            answers,
            permutation,
        }
    }
}

macro_rules! known {
    ($e:expr, $pending:expr) => {
        match $e? {
            Some(l) => l,
            None => return Ok(SearchOutcome::Pending(vec![$pending])),
        }
    };
}

/// Door-to-door walk: starting from the corner `e_0`, follow cells whose
/// labels contain `{0, …, j-1}` inside the face `conv(e_0, …, e_j)`, moving
/// up a dimension whenever a cell of that face becomes fully labeled.
/// Requires a primal (Sperner) labeling.
fn path_follow<S: AnswerSource + ?Sized>(
    k: usize,
    m: u32,
    lab: &mut Labeler<'_, S>,
) -> Result<SearchOutcome> {
    let covers = lab.covers;
    let pend = |v: &GridVertex| (owner_of(v, covers), v.clone());

    let start = GridVertex::corner(k, 0, m);
    let l0 = known!(lab.label(&start), pend(&start));
    debug_assert_eq!(l0, 0);

    let mut j = 1usize;
    let mut cell = Cell {
        base: start,
        steps: vec![0],
    };
    let v1 = cell.vertices()[1].clone();
    let l1 = known!(lab.label(&v1), pend(&v1));
    let mut labels = vec![l0, l1];
    let mut new_idx = 1usize;

    let max_steps = Grid::new(k, m)?.cell_count().saturating_mul(4).max(1024);
    let mut steps = 0u64;

    loop {
        // `new_idx` just entered the cell through a door labeled {0..j-1}.
        if labels[new_idx] == j {
            // Fully labeled in the current face: climb while possible.
            loop {
                if j == k - 1 {
                    return Ok(SearchOutcome::Found(lab.certify(cell)));
                }
                let mut up = cell.vertices().pop().expect("nonempty");
                up.counts[j] -= 1;
                up.counts[j + 1] += 1;
                cell.steps.push(j);
                let l = known!(lab.label(&up), pend(&up));
                labels.push(l);
                j += 1;
                new_idx = j;
                if l != j {
                    break;
                }
            }
        }
        let mut drop = duplicate_of(&labels, new_idx);

        // Leave through the facet opposite `drop`, descending while that
        // facet lies in the face x_j = 0.
        loop {
            steps += 1;
            if steps > max_steps {
                return Ok(SearchOutcome::Exhausted(format!(
                    "path exceeded {max_steps} pivots at resolution {m}"
                )));
            }
            let descends =
                drop == j && cell.steps[j - 1] == j - 1 && cell.base.counts[j] == 0;
            if !descends {
                break;
            }
            if j == 1 {
                return Ok(SearchOutcome::Exhausted(
                    "path returned to its starting corner".into(),
                ));
            }
            cell.steps.pop();
            labels.pop();
            j -= 1;
            drop = labels
                .iter()
                .position(|&l| l == j)
                .expect("descended facet is fully labeled");
        }

        let Some((next, idx)) = cell.pivot(drop) else {
            return Ok(SearchOutcome::Exhausted(format!(
                "path left the simplex at resolution {m}; labeling is not admissible"
            )));
        };
        if drop == 0 {
            labels.remove(0);
            labels.push(usize::MAX);
        } else if drop == j {
            labels.pop();
            labels.insert(0, usize::MAX);
        }
        cell = next;
        let v = cell.vertices()[idx].clone();
        labels[idx] = known!(lab.label(&v), pend(&v));
        new_idx = idx;
    }
}

fn duplicate_of(labels: &[usize], idx: usize) -> usize {
    labels
        .iter()
        .enumerate()
        .position(|(u, &l)| u != idx && l == labels[idx])
        .expect("door cell has a repeated label")
}

/// Vertex labels indexed by the first `k - 1` counts in base `m + 1`.
enum LabelTable {
    Dense(Vec<u8>),
    Sparse(HashMap<u64, u8>),
}

const UNLABELED: u8 = u8::MAX;
const DENSE_LIMIT: u64 = 1 << 28;

impl LabelTable {
    fn new(size: Option<u64>) -> Self {
        match size {
            Some(n) if n <= DENSE_LIMIT => Self::Dense(vec![UNLABELED; n as usize]),
            _ => Self::Sparse(HashMap::new()),
        }
    }

    fn get(&self, i: u64) -> u8 {
        match self {
            Self::Dense(v) => v[i as usize],
            Self::Sparse(h) => h.get(&i).copied().unwrap_or(UNLABELED),
        }
    }

    fn set(&mut self, i: u64, l: u8) {
        match self {
            Self::Dense(v) => v[i as usize] = l,
            Self::Sparse(h) => {
                h.insert(i, l);
            }
        }
    }
}

/// Labels every vertex, then returns the first fully labeled cell in
/// enumeration order.
fn scan<S: AnswerSource + ?Sized>(k: usize, m: u32, lab: &mut Labeler<'_, S>) -> Result<SearchOutcome> {
    if k > UNLABELED as usize {
        return Err(Error::InvalidArgument(format!("scan supports at most 254 labels, got {k}")));
    }
    let grid = Grid::new(k, m)?;
    let radix = m as u64 + 1;
    let size = (0..k as u32 - 1).try_fold(1u64, |acc, _| acc.checked_mul(radix));
    let weights: Vec<u64> = (0..k - 1).map(|i| radix.pow(i as u32)).collect();
    let index = |counts: &[u32]| -> u64 { counts[..k - 1].iter().zip(&weights).map(|(&c, w)| c as u64 * w).sum() };

    let mut table = LabelTable::new(size);
    let mut pending = vec![];
    for v in grid.vertices() {
        match lab.compute(&v)? {
            Some((l, _, _)) => table.set(index(&v.counts), l as u8),
            None => pending.push((owner_of(&v, lab.covers), v)),
        }
    }
    if !pending.is_empty() {
        return Ok(SearchOutcome::Pending(pending));
    }

    let perms: Vec<Vec<usize>> = (0..k - 1).permutations(k - 1).collect();
    let mut counts = vec![0u32; k];
    let mut seen = vec![false; k];
    for base in grid.vertices() {
        let base_idx = index(&base.counts);
        'perm: for steps in &perms {
            counts.copy_from_slice(&base.counts);
            seen.iter_mut().for_each(|s| *s = false);
            let mut idx = base_idx;
            seen[table.get(idx) as usize] = true;
            for &c in steps {
                if counts[c] == 0 {
                    continue 'perm;
                }
                counts[c] -= 1;
                counts[c + 1] += 1;
                idx -= weights[c];
                if c + 1 < k - 1 {
                    idx += weights[c + 1];
                }
                let l = table.get(idx) as usize;
                if seen[l] {
                    continue 'perm;
                }
                seen[l] = true;
            }
            let cell = Cell {
                base: base.clone(),
                steps: steps.clone(),
            };
            for v in cell.vertices() {
                lab.label(&v)?;
            }
            return Ok(SearchOutcome::Found(lab.certify(cell)));
        }
    }
    Ok(SearchOutcome::Exhausted(format!(
        "no fully labeled cell at resolution {m}"
    )))
}

pub(crate) fn search_at<S: AnswerSource + ?Sized>(
    k: usize,
    covers: usize,
    mode: Mode,
    strategy: Strategy,
    m: u32,
    source: &mut S,
) -> Result<SearchOutcome> {
    let mut lab = Labeler::new(source, mode, covers);
    match strategy {
        Strategy::PathFollowing if mode == Mode::Primal => path_follow(k, m, &mut lab),
        _ => scan(k, m, &mut lab),
    }
}

pub(crate) fn check_shape(k: usize, covers: usize) -> Result<()> {
    if k < 2 {
        return Err(Error::InvalidArgument(format!("cover arity must be >= 2, got {k}")));
    }
    if covers != 1 && covers != k {
        return Err(Error::InvalidArgument(format!(
            "expected 1 or {k} covers, got {covers}"
        )));
    }
    Ok(())
}

/// Solves against a programmatic oracle, trying each admissible resolution.
pub fn solve<O: CoverOracle + ?Sized>(oracle: &O, opts: &SolveOptions) -> Result<RainbowCell> {
    let k = oracle.arity();
    let covers = oracle.covers();
    check_shape(k, covers)?;
    if !(opts.tolerance > 0.0) {
        return Err(Error::InvalidArgument("tolerance must be positive".into()));
    }
    let resolutions = opts.schedule.admissible(k, opts.tolerance);
    if resolutions.is_empty() {
        return Err(Error::ResolutionExceeded {
            max_resolution: opts.schedule.max(),
            diagnostics: format!(
                "cell diameter {} at the finest resolution exceeds tolerance {}",
                grid_diameter(k, opts.schedule.max()),
                opts.tolerance
            ),
        });
    }
    let strategy = opts.strategy_for(oracle.mode());
    let mut source = OracleSource::new(oracle);
    let mut last = String::new();
    for m in resolutions {
        match search_at(k, covers, oracle.mode(), strategy, m, &mut source)? {
            SearchOutcome::Found(cell) => return Ok(cell),
            SearchOutcome::Exhausted(why) => last = why,
            SearchOutcome::Pending(_) => unreachable!("oracle sources answer immediately"),
        }
    }
    let dual_note = if oracle.mode() == Mode::Dual {
        " (dual labeling is heuristic)"
    } else {
        ""
    };
    Err(Error::ResolutionExceeded {
        max_resolution: opts.schedule.max(),
        diagnostics: format!("{last}{dual_note}"),
    })
}

/// Rainbow cell for a colorful primal family (`covers() == arity()`).
pub fn solve_colorful_kkm<O: CoverOracle + ?Sized>(oracle: &O, opts: &SolveOptions) -> Result<RainbowCell> {
    if oracle.covers() != oracle.arity() || oracle.mode() != Mode::Primal {
        return Err(Error::InvalidArgument(
            "colorful solve needs one primal cover per index".into(),
        ));
    }
    solve(oracle, opts)
}

/// Rainbow cell for a single primal cover.
pub fn solve_kkm<O: CoverOracle + ?Sized>(oracle: &O, opts: &SolveOptions) -> Result<RainbowCell> {
    if oracle.covers() != 1 || oracle.mode() != Mode::Primal {
        return Err(Error::InvalidArgument("plain solve needs a single primal cover".into()));
    }
    solve(oracle, opts)
}

/// Rainbow cell for a dual cover (single or colorful).
pub fn solve_dual_kkm<O: CoverOracle + ?Sized>(oracle: &O, opts: &SolveOptions) -> Result<RainbowCell> {
    if oracle.mode() != Mode::Dual {
        return Err(Error::InvalidArgument("dual solve needs a dual-mode oracle".into()));
    }
    solve(oracle, opts)
}
