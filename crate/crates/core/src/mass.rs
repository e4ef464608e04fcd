//! Convex partitions of the disk by `k` chords and the colorful cover whose
//! rainbow cells give disproportionate mass partitions.

use std::f64::consts::{PI, TAU};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::engine::{solve_colorful_kkm, CoverOracle, Schedule, SolveOptions};
use crate::error::{Error, Result};
use crate::planar::{ConvexPolygon, DirectedLine, PlanarMeasure, Point2, PreparedMeasure, Region};
use crate::simplex::{grid_diameter, BarycentricPoint, SUM_TOLERANCE};

pub const MASS_PARTITION_SCHEMA: &str = "mass_partition_result.v1";
/// Vertex count of the polygon standing in for the unit disk.
pub const DISK_SIDES: usize = 16384;
const ALPHA_TOLERANCE: f64 = 1e-9;
const LIPSCHITZ_SAMPLES: usize = 48;
const LIPSCHITZ_STEP: f64 = 1e-3;

/// One of the half-planes `H_i^+`, with the degenerate cases kept exact.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum HalfPlane {
    Empty,
    Whole,
    Side { line: DirectedLine },
}

impl HalfPlane {
    /// The closed complement `H_i^-`.
    pub fn complement(&self) -> Self {
        match self {
            Self::Empty => Self::Whole,
            Self::Whole => Self::Empty,
            Self::Side { line } => Self::Side { line: line.flipped() },
        }
    }

    fn apply(&self, poly: ConvexPolygon) -> ConvexPolygon {
        match self {
            Self::Empty => ConvexPolygon::empty(),
            Self::Whole => poly,
            Self::Side { line } => poly.clip(line),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChordConfig {
    pub x: BarycentricPoint,
    /// Number of chords; `x` has `2k` coordinates.
    pub k: usize,
    /// `z_0..z_{2k}` on the unit circle, `z_{2k} = z_0`.
    pub points: Vec<Point2>,
    /// `H_0^+..H_{2k-1}^+`.
    pub halfplanes: Vec<HalfPlane>,
}

impl ChordConfig {
    pub fn new(x: &BarycentricPoint, k: usize) -> Result<Self> {
        let n = 2 * k;
        if k == 0 || x.dim() != n {
            return Err(Error::InvalidArgument(format!(
                "expected {n} coordinates for {k} chords, got {}",
                x.dim()
            )));
        }
        let c = x.coords();
        let mut prefix = Vec::with_capacity(n + 1);
        let mut acc = 0.0;
        prefix.push(0.0);
        for &v in c {
            acc += v;
            prefix.push(acc);
        }
        let mut points: Vec<Point2> = prefix.iter().map(|&t| Point2::polar(1.0, TAU * t)).collect();
        points[n] = points[0];
        let halfplanes = (0..n)
            .map(|i| {
                let s: f64 = (0..k).map(|d| c[(i + d) % n]).sum();
                if s <= SUM_TOLERANCE {
                    HalfPlane::Empty
                } else if s >= 1.0 - SUM_TOLERANCE {
                    HalfPlane::Whole
                } else {
                    // The arc of angular length 2πs starting at z_i is the cap
                    // beyond the chord, seen from its midpoint direction.
                    let mid = TAU * prefix[i] + PI * s;
                    HalfPlane::Side {
                        line: DirectedLine::with_normal_angle(mid, (PI * s).cos()),
                    }
                }
            })
            .collect();
        Ok(Self {
            x: x.clone(),
            k,
            points,
            halfplanes,
        })
    }

    /// `C_1..C_{2k}` clipped to `base`, returned in counterclockwise order.
    pub fn regions_within(&self, base: &ConvexPolygon) -> Vec<Region> {
        let (k, n) = (self.k, 2 * self.k);
        (0..n)
            .map(|r| {
                let start = if r < k { 0 } else { k };
                let mut poly = self.halfplanes[(r + 1) % n].complement().apply(base.clone());
                for h in &self.halfplanes[start..=r] {
                    if poly.is_empty() {
                        break;
                    }
                    poly = h.apply(poly);
                }
                poly
            })
            .collect()
    }
}

pub fn unit_disk() -> ConvexPolygon {
    ConvexPolygon::regular(Point2::new(0.0, 0.0), 1.0, DISK_SIDES)
}

/// The `2k` convex regions cut from the unit disk by the chords of `x`.
pub fn regions_from(x: &BarycentricPoint, k: usize) -> Result<Vec<Region>> {
    Ok(ChordConfig::new(x, k)?.regions_within(&unit_disk()))
}

/// Bounding square used while solving; all measures live in the disk, so the
/// masses agree with the disk-clipped regions.
fn solver_window() -> ConvexPolygon {
    ConvexPolygon::rectangle(-1.0, -1.0, 1.0, 1.0)
}

/// `A^i_j = {x : μ_i(C_j(x)) ≥ α_j}`, one cover per measure.
pub struct MassCover {
    measures: Vec<PreparedMeasure>,
    alphas: Vec<f64>,
    k: usize,
    window: ConvexPolygon,
    pub slack: f64,
}

impl MassCover {
    pub fn new(measures: &[PlanarMeasure], alphas: &[f64]) -> Result<Self> {
        if measures.len() != alphas.len() || measures.len() < 2 || measures.len() % 2 != 0 {
            return Err(Error::InvalidArgument(format!(
                "need an even number of measures and matching alphas, got {} and {}",
                measures.len(),
                alphas.len()
            )));
        }
        Ok(Self {
            measures: measures.iter().map(PreparedMeasure::new).collect(),
            alphas: alphas.to_vec(),
            k: measures.len() / 2,
            window: solver_window(),
            slack: ALPHA_TOLERANCE,
        })
    }

    /// `μ_i(C_j(x))` for every region `j`.
    pub fn masses(&self, measure: usize, x: &BarycentricPoint) -> Vec<f64> {
        let regions = ChordConfig::new(x, self.k)
            .expect("dimension checked by the engine")
            .regions_within(&self.window);
        regions.iter().map(|r| self.measures[measure].measure(r)).collect()
    }
}

impl CoverOracle for MassCover {
    fn arity(&self) -> usize {
        2 * self.k
    }

    fn covers(&self) -> usize {
        2 * self.k
    }

    fn query(&self, cover: usize, x: &BarycentricPoint) -> Vec<usize> {
        let masses = self.masses(cover, x);
        let hits: Vec<usize> = (0..masses.len())
            .filter(|&j| masses[j] >= self.alphas[j] - self.slack)
            .collect();
        if !hits.is_empty() {
            return hits;
        }
        // Rounding can push every mass a hair under its target; the largest
        // surplus is then still on a nonzero coordinate.
        let best = (0..masses.len())
            .max_by(|&a, &b| (masses[a] - self.alphas[a]).total_cmp(&(masses[b] - self.alphas[b])))
            .unwrap();
        vec![best]
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MassPartitionResult {
    pub schema: String,
    pub x: BarycentricPoint,
    /// `Q_1..Q_{2k}` in counterclockwise order.
    pub regions: Vec<Region>,
    /// `permutation[j]` is the measure assigned to region `j`.
    pub permutation: Vec<usize>,
    /// `masses[i][j] = μ_i(Q_j)`.
    pub masses: Vec<Vec<f64>>,
    pub alphas: Vec<f64>,
    /// Diameter of the rainbow cell.
    pub delta: f64,
    pub resolution: u32,
    /// Empirical Lipschitz constant of `x ↦ μ_i(C_j(x))`, per measure.
    pub lipschitz: Vec<f64>,
    /// `max_i lipschitz_i · delta`.
    pub epsilon: f64,
    /// `min_j μ_{π(j)}(Q_j) − α_j`.
    pub min_surplus: f64,
}

impl MassPartitionResult {
    pub fn assigned_mass(&self, region: usize) -> f64 {
        self.masses[self.permutation[region]][region]
    }
}

fn random_simplex_point(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    let w: Vec<f64> = (0..n).map(|_| -rng.gen::<f64>().max(1e-300).ln()).collect();
    let s: f64 = w.iter().sum();
    w.into_iter().map(|v| v / s).collect()
}

/// Largest observed `|Δμ(C_j)| / |Δx|_1` over random small moves.
pub fn estimate_lipschitz(cover: &MassCover, measure: usize, seed: u64) -> f64 {
    let n = cover.arity();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best: f64 = 0.0;
    for _ in 0..LIPSCHITZ_SAMPLES {
        let mut a = random_simplex_point(&mut rng, n);
        let (i, j) = (rng.gen_range(0..n), rng.gen_range(0..n));
        if i == j {
            continue;
        }
        let h = LIPSCHITZ_STEP.min(a[j]);
        if h <= 0.0 {
            continue;
        }
        let x = BarycentricPoint::new(a.clone()).expect("sampled on the simplex");
        a[i] += h;
        a[j] -= h;
        let y = BarycentricPoint::new(a).expect("moved within the simplex");
        let (mx, my) = (cover.masses(measure, &x), cover.masses(measure, &y));
        let diff = mx.iter().zip(&my).map(|(p, q)| (p - q).abs()).fold(0.0, f64::max);
        best = best.max(diff / (2.0 * h));
    }
    best
}

fn validate_alphas(alphas: &[f64]) -> Result<()> {
    if alphas.iter().any(|&a| !(a > 0.0) || !a.is_finite()) {
        return Err(Error::InvalidArgument("alphas must be positive".into()));
    }
    let s: f64 = alphas.iter().sum();
    if (s - 1.0).abs() > ALPHA_TOLERANCE {
        return Err(Error::InvalidArgument(format!("alphas sum to {s}, not 1")));
    }
    Ok(())
}

/// Partitions the disk into `2k` convex regions with `μ_{π(j)}(Q_j) ≥ α_j − tolerance`.
///
/// The cell diameter starts at `tolerance` and is halved until the surplus
/// measured at the witness meets the tolerance. `epsilon` reports the
/// continuity bound `L·δ` for the estimated Lipschitz constant `L`.
pub fn mass_partition_solve(
    measures: &[PlanarMeasure],
    alphas: &[f64],
    tolerance: f64,
    schedule: &Schedule,
) -> Result<MassPartitionResult> {
    if !(tolerance > 0.0) {
        return Err(Error::InvalidArgument("tolerance must be positive".into()));
    }
    validate_alphas(alphas)?;
    for m in measures {
        m.validate()?;
    }
    let cover = MassCover::new(measures, alphas)?;
    let n = cover.arity();
    let lipschitz: Vec<f64> = (0..n).map(|i| estimate_lipschitz(&cover, i, i as u64)).collect();
    let lmax = lipschitz.iter().copied().fold(1.0, f64::max);
    let finest = grid_diameter(n, schedule.max());
    let disk = unit_disk();
    let mut diameter = tolerance;
    let mut last = None;
    loop {
        let target = diameter.max(finest);
        let cell = solve_colorful_kkm(&cover, &SolveOptions::new(target).with_schedule(schedule.clone()))?;
        let perm = cell.permutation.as_ref().expect("colorful cells use every cover");
        // perm[measure] = region; invert it.
        let mut permutation = vec![0; n];
        for (measure, &region) in perm.iter().enumerate() {
            permutation[region] = measure;
        }
        let config = ChordConfig::new(&cell.witness, cover.k)?;
        let regions = config.regions_within(&disk);
        let masses: Vec<Vec<f64>> = cover
            .measures
            .iter()
            .map(|m| regions.iter().map(|r| m.measure(r)).collect())
            .collect();
        let min_surplus = (0..n)
            .map(|j| masses[permutation[j]][j] - alphas[j])
            .fold(f64::INFINITY, f64::min);
        let result = MassPartitionResult {
            schema: MASS_PARTITION_SCHEMA.into(),
            x: cell.witness.clone(),
            regions,
            permutation,
            masses,
            alphas: alphas.to_vec(),
            delta: cell.diameter,
            resolution: cell.resolution,
            epsilon: lmax * cell.diameter,
            lipschitz: lipschitz.clone(),
            min_surplus,
        };
        if min_surplus >= -tolerance {
            return Ok(result);
        }
        if target <= finest {
            let surplus = last.map_or(min_surplus, |s: f64| s.max(min_surplus));
            return Err(Error::ResolutionExceeded {
                max_resolution: schedule.max(),
                diagnostics: format!("best surplus {surplus} misses tolerance {tolerance}"),
            });
        }
        last = Some(min_surplus);
        diameter = target / 2.0;
    }
}
