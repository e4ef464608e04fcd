use serde::{Deserialize, Serialize};

use crate::engine::{solve_dual_kkm, CoverOracle, Mode, RainbowCell, Schedule, SolveOptions};
use crate::error::{Error, Result};
use crate::simplex::{grid_diameter, BarycentricPoint};

pub const RENTAL_SCHEMA: &str = "rental.v1";
pub const RENTAL_RESULT_SCHEMA: &str = "rental_result.v1";
const TIE_SLACK: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RentalInstance {
    pub schema: String,
    /// `values[j][i]`: what player `j` would pay for room `i`.
    pub values: Vec<Vec<f64>>,
    #[serde(default = "one")]
    pub total_rent: f64,
}

fn one() -> f64 {
    1.0
}

impl RentalInstance {
    pub fn new(values: Vec<Vec<f64>>, total_rent: f64) -> Self {
        Self {
            schema: RENTAL_SCHEMA.into(),
            values,
            total_rent,
        }
    }

    pub fn rooms(&self) -> usize {
        self.values.len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.schema != RENTAL_SCHEMA {
            return Err(Error::Format(format!("expected schema {RENTAL_SCHEMA}, got {:?}", self.schema)));
        }
        let n = self.values.len();
        if n < 2 || self.values.iter().any(|r| r.len() != n) {
            return Err(Error::InvalidArgument("values must be a square matrix with n ≥ 2".into()));
        }
        if self.values.iter().flatten().any(|v| !(*v >= 0.0) || !v.is_finite()) {
            return Err(Error::InvalidArgument("values must be finite and nonnegative".into()));
        }
        if !(self.total_rent > 0.0) || !self.total_rent.is_finite() {
            return Err(Error::InvalidArgument("total rent must be positive".into()));
        }
        Ok(())
    }

    pub fn rents(&self, x: &BarycentricPoint) -> Vec<f64> {
        x.coords().iter().map(|c| c * self.total_rent).collect()
    }

    pub fn utilities(&self, player: usize, rents: &[f64]) -> Vec<f64> {
        self.values[player].iter().zip(rents).map(|(v, r)| v - r).collect()
    }
}

/// Rooms of best quasilinear utility, plus every free room.
pub struct QuasilinearCover<'a> {
    instance: &'a RentalInstance,
}

impl<'a> QuasilinearCover<'a> {
    pub fn new(instance: &'a RentalInstance) -> Self {
        Self { instance }
    }
}

impl CoverOracle for QuasilinearCover<'_> {
    fn arity(&self) -> usize {
        self.instance.rooms()
    }

    fn covers(&self) -> usize {
        self.instance.rooms()
    }

    fn mode(&self) -> Mode {
        Mode::Dual
    }

    fn query(&self, cover: usize, x: &BarycentricPoint) -> Vec<usize> {
        let u = self.instance.utilities(cover, &self.instance.rents(x));
        let best = u.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        (0..u.len()).filter(|&i| u[i] >= best - TIE_SLACK || x[i] == 0.0).collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RentalResult {
    pub schema: String,
    pub x: BarycentricPoint,
    pub rents: Vec<f64>,
    /// `assignment[j]` is the room of player `j`.
    pub assignment: Vec<usize>,
    pub delta: f64,
    pub resolution: u32,
    pub utilities: Option<Vec<Vec<f64>>>,
    pub envy: Option<Vec<f64>>,
    /// Players whose room is priced within one cell of zero and who hold it
    /// through the free-room rule rather than by utility.
    pub free_room: Option<Vec<bool>>,
}

impl RentalResult {
    pub fn max_envy(&self) -> Option<f64> {
        self.envy.as_ref().map(|e| e.iter().copied().fold(0.0, f64::max))
    }

    /// Largest envy among players not excused by the free-room rule.
    pub fn unexcused_envy(&self) -> Option<f64> {
        let (envy, free) = (self.envy.as_ref()?, self.free_room.as_ref()?);
        Some(envy.iter().zip(free).filter(|(_, &f)| !f).map(|(&e, _)| e).fold(0.0, f64::max))
    }
}

pub fn rent_result_from_cell(cell: &RainbowCell, total_rent: f64, instance: Option<&RentalInstance>) -> Result<RentalResult> {
    let assignment = cell
        .permutation
        .clone()
        .ok_or_else(|| Error::PreconditionFailed("cell does not carry a colorful permutation".into()))?;
    let rents: Vec<f64> = cell.witness.coords().iter().map(|c| c * total_rent).collect();
    let mut out = RentalResult {
        schema: RENTAL_RESULT_SCHEMA.into(),
        x: cell.witness.clone(),
        rents,
        assignment,
        delta: cell.diameter,
        resolution: cell.resolution,
        utilities: None,
        envy: None,
        free_room: None,
    };
    if let Some(inst) = instance {
        let utilities: Vec<Vec<f64>> = (0..inst.rooms()).map(|j| inst.utilities(j, &out.rents)).collect();
        let envy: Vec<f64> = utilities
            .iter()
            .zip(&out.assignment)
            .map(|(u, &own)| (u.iter().copied().fold(f64::NEG_INFINITY, f64::max) - u[own]).max(0.0))
            .collect();
        let near_free = cell.diameter * total_rent;
        out.free_room = Some(
            envy.iter()
                .zip(&out.assignment)
                .map(|(&e, &room)| e > 0.0 && out.rents[room] <= near_free)
                .collect(),
        );
        out.envy = Some(envy);
        out.utilities = Some(utilities);
    }
    Ok(out)
}

/// Rents and rooms such that every quasilinear player's own room is within
/// `tolerance` of their best, or is (nearly) free.
///
/// The cell diameter starts at `tolerance / total_rent` and is halved until
/// the envy measured at the witness is within `tolerance` for every player
/// not holding a free room.
pub fn rental_harmony(instance: &RentalInstance, tolerance: f64, schedule: &Schedule) -> Result<RentalResult> {
    instance.validate()?;
    if !(tolerance > 0.0) {
        return Err(Error::InvalidArgument("tolerance must be positive".into()));
    }
    let oracle = QuasilinearCover::new(instance);
    let n = instance.rooms();
    let finest = grid_diameter(n, schedule.max());
    let mut diameter = tolerance / instance.total_rent;
    loop {
        let target = diameter.max(finest);
        let cell = solve_dual_kkm(&oracle, &SolveOptions::new(target).with_schedule(schedule.clone()))?;
        let result = rent_result_from_cell(&cell, instance.total_rent, Some(instance))?;
        let envy = result.unexcused_envy().unwrap_or(0.0);
        if envy <= tolerance {
            return Ok(result);
        }
        if target <= finest {
            return Err(Error::ResolutionExceeded {
                max_resolution: schedule.max(),
                diagnostics: format!("envy {envy} exceeds tolerance {tolerance}"),
            });
        }
        diameter = target / 2.0;
    }
}
