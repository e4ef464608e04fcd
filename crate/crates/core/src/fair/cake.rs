use serde::{Deserialize, Serialize};

use crate::engine::{solve_colorful_kkm, CoverOracle, RainbowCell, Schedule, SolveOptions};
use crate::error::{Error, Result};
use crate::simplex::BarycentricPoint;

pub const CAKE_PLAYERS_SCHEMA: &str = "cake_players.v1";
pub const CAKE_ALLOCATION_SCHEMA: &str = "cake_allocation.v1";
const MASS_TOLERANCE: f64 = 1e-9;

/// Piecewise-constant density on `[0, 1]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CakeValuation {
    /// `0 = b_0 < b_1 < … < b_m = 1`.
    pub breakpoints: Vec<f64>,
    /// Density on `[b_i, b_{i+1}]`.
    pub densities: Vec<f64>,
}

impl CakeValuation {
    pub fn uniform() -> Self {
        Self {
            breakpoints: vec![0.0, 1.0],
            densities: vec![1.0],
        }
    }

    pub fn validate(&self) -> Result<()> {
        let b = &self.breakpoints;
        if b.len() != self.densities.len() + 1 || b.len() < 2 {
            return Err(Error::InvalidArgument("need one more breakpoint than densities".into()));
        }
        if b[0] != 0.0 || *b.last().unwrap() != 1.0 || b.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::InvalidArgument("breakpoints must increase from 0 to 1".into()));
        }
        if self.densities.iter().any(|d| !(*d >= 0.0) || !d.is_finite()) {
            return Err(Error::InvalidArgument("densities must be finite and nonnegative".into()));
        }
        let total = self.cdf(1.0);
        if (total - 1.0).abs() > MASS_TOLERANCE {
            return Err(Error::NormalizationError(format!("valuation integrates to {total}")));
        }
        Ok(())
    }

    pub fn normalized(mut self) -> Result<Self> {
        let total = self.cdf(1.0);
        if !(total > 0.0) || !total.is_finite() {
            return Err(Error::NormalizationError(format!("valuation integrates to {total}")));
        }
        self.densities.iter_mut().for_each(|d| *d /= total);
        Ok(self)
    }

    pub fn d_max(&self) -> f64 {
        self.densities.iter().copied().fold(0.0, f64::max)
    }

    /// `μ([0, t])`.
    pub fn cdf(&self, t: f64) -> f64 {
        let mut acc = 0.0;
        for (w, d) in self.breakpoints.windows(2).zip(&self.densities) {
            if t <= w[0] {
                break;
            }
            acc += d * (t.min(w[1]) - w[0]);
        }
        acc
    }

    pub fn value(&self, a: f64, b: f64) -> f64 {
        self.cdf(b) - self.cdf(a)
    }

    /// Smallest `x ≥ a` with `μ([a, x]) = target`, if the mass is there.
    pub fn first_hit(&self, a: f64, target: f64) -> Option<f64> {
        let mut acc = 0.0;
        for (w, &d) in self.breakpoints.windows(2).zip(&self.densities) {
            if w[1] <= a {
                continue;
            }
            let lo = w[0].max(a);
            let piece = d * (w[1] - lo);
            if d > 0.0 && acc + piece >= target {
                return Some((lo + (target - acc) / d).min(w[1]));
            }
            acc += piece;
        }
        (target <= 0.0).then_some(a)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CakePlayers {
    pub schema: String,
    pub players: Vec<CakeValuation>,
}

impl CakePlayers {
    pub fn new(players: Vec<CakeValuation>) -> Self {
        Self {
            schema: CAKE_PLAYERS_SCHEMA.into(),
            players,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.schema != CAKE_PLAYERS_SCHEMA {
            return Err(Error::Format(format!("expected schema {CAKE_PLAYERS_SCHEMA}, got {:?}", self.schema)));
        }
        if self.players.len() < 2 {
            return Err(Error::InvalidArgument("need at least two players".into()));
        }
        self.players.iter().try_for_each(CakeValuation::validate)
    }
}

/// Pieces `[u_{i−1}, u_i]` with `u_i = x_1 + … + x_i`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CakePartition {
    pub x: BarycentricPoint,
    /// Interior cut positions `u_1 … u_{n−1}`.
    pub cuts: Vec<f64>,
}

impl CakePartition {
    pub fn new(x: &BarycentricPoint) -> Self {
        let n = x.dim();
        let mut u = 0.0;
        let cuts = x.coords()[..n - 1]
            .iter()
            .map(|c| {
                u += c;
                u.min(1.0)
            })
            .collect();
        Self { x: x.clone(), cuts }
    }

    pub fn piece(&self, i: usize) -> (f64, f64) {
        let lo = if i == 0 { 0.0 } else { self.cuts[i - 1] };
        let hi = self.cuts.get(i).copied().unwrap_or(1.0);
        (lo, hi)
    }

    pub fn values(&self, v: &CakeValuation) -> Vec<f64> {
        (0..self.x.dim())
            .map(|i| {
                let (a, b) = self.piece(i);
                v.value(a, b)
            })
            .collect()
    }
}

/// `A^j_i`: player `j` prefers piece `i`; ties all included.
pub struct PlayerCover<'a> {
    players: &'a [CakeValuation],
}

impl<'a> PlayerCover<'a> {
    pub fn new(players: &'a [CakeValuation]) -> Self {
        Self { players }
    }
}

impl CoverOracle for PlayerCover<'_> {
    fn arity(&self) -> usize {
        self.players.len()
    }

    fn covers(&self) -> usize {
        self.players.len()
    }

    fn query(&self, cover: usize, x: &BarycentricPoint) -> Vec<usize> {
        let v = CakePartition::new(x).values(&self.players[cover]);
        let best = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        (0..v.len()).filter(|&i| v[i] == best).collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CakeAllocation {
    pub schema: String,
    pub partition: CakePartition,
    /// `allocation[j]` is the piece of player `j`.
    pub allocation: Vec<usize>,
    pub delta: f64,
    pub resolution: u32,
    /// Per-player piece values, present for valuation-backed players.
    pub values: Option<Vec<Vec<f64>>>,
    pub envy: Option<Vec<f64>>,
    /// `2·D_max·δ`.
    pub envy_bound: Option<f64>,
    pub d_max: Option<f64>,
}

impl CakeAllocation {
    pub fn max_envy(&self) -> Option<f64> {
        self.envy.as_ref().map(|e| e.iter().copied().fold(0.0, f64::max))
    }
}

/// Result for a rainbow cell, scored against `players` when known. For
/// black-box players, each player preferred their piece at a vertex within
/// `delta` of the reported partition.
pub fn cake_result_from_cell(cell: &RainbowCell, players: Option<&[CakeValuation]>) -> Result<CakeAllocation> {
    let allocation = cell
        .permutation
        .clone()
        .ok_or_else(|| Error::PreconditionFailed("cell does not carry a colorful permutation".into()))?;
    let partition = CakePartition::new(&cell.witness);
    let mut out = CakeAllocation {
        schema: CAKE_ALLOCATION_SCHEMA.into(),
        partition,
        allocation,
        delta: cell.diameter,
        resolution: cell.resolution,
        values: None,
        envy: None,
        envy_bound: None,
        d_max: None,
    };
    if let Some(players) = players {
        let values: Vec<Vec<f64>> = players.iter().map(|p| out.partition.values(p)).collect();
        let envy = values
            .iter()
            .zip(&out.allocation)
            .map(|(v, &own)| (v.iter().copied().fold(f64::NEG_INFINITY, f64::max) - v[own]).max(0.0))
            .collect();
        let d_max = players.iter().map(CakeValuation::d_max).fold(0.0, f64::max);
        out.values = Some(values);
        out.envy = Some(envy);
        out.envy_bound = Some(2.0 * d_max * cell.diameter);
        out.d_max = Some(d_max);
    }
    Ok(out)
}

/// Envy-free division for valuation-backed players; player `j` is the
/// owner-`j` cover.
pub fn envy_free_cake(players: &[CakeValuation], tolerance: f64, schedule: &Schedule) -> Result<CakeAllocation> {
    if players.len() < 2 {
        return Err(Error::InvalidArgument("need at least two players".into()));
    }
    players.iter().try_for_each(CakeValuation::validate)?;
    let oracle = PlayerCover::new(players);
    let cell = solve_colorful_kkm(&oracle, &SolveOptions::new(tolerance).with_schedule(schedule.clone()))?;
    cake_result_from_cell(&cell, Some(players))
}
