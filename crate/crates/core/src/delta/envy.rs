use serde::{Deserialize, Serialize};

use super::{check_directions, nested_partition, Cut, DMeasure, Polyhedron, PreparedDMeasure};
use crate::engine::{solve_colorful_kkm, CoverOracle, Schedule, SolveOptions};
use crate::error::{Error, Result};
use crate::simplex::{grid_diameter, BarycentricPoint};

pub const ENVY_ALLOCATION_SCHEMA: &str = "envy_allocation.v1";

/// `A^j_i = {x : μ_j(C_i(x)) ≥ max_{i'} μ_j(C_{i'}(x)) − slack}`.
pub struct EnvyCover {
    measures: Vec<PreparedDMeasure>,
    directions: Vec<Vec<f64>>,
    pub slack: f64,
}

impl EnvyCover {
    pub fn new(measures: &[DMeasure], directions: &[Vec<f64>], slack: f64) -> Result<Self> {
        let d = check_directions(measures.len(), directions)?;
        let measures = measures.iter().map(PreparedDMeasure::new).collect::<Result<Vec<_>>>()?;
        if measures.iter().any(|m| m.dim() != d) {
            return Err(Error::InvalidArgument(format!("measures and directions must live in dimension {d}")));
        }
        Ok(Self {
            measures,
            directions: directions.to_vec(),
            slack,
        })
    }

    /// `μ_j(C_i(x))` for every region `i`.
    pub fn values(&self, measure: usize, x: &BarycentricPoint) -> Vec<f64> {
        let part = nested_partition(x, &self.directions).expect("directions checked");
        part.regions.iter().map(|r| self.measures[measure].measure(r)).collect()
    }
}

impl CoverOracle for EnvyCover {
    fn arity(&self) -> usize {
        self.measures.len()
    }

    fn covers(&self) -> usize {
        self.measures.len()
    }

    fn query(&self, cover: usize, x: &BarycentricPoint) -> Vec<usize> {
        let v = self.values(cover, x);
        let best = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        (0..v.len()).filter(|&i| v[i] >= best - self.slack).collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnvyAllocation {
    pub schema: String,
    pub x: BarycentricPoint,
    /// `permutation[j]` is the region allocated to measure `j`.
    pub permutation: Vec<usize>,
    pub regions: Vec<Polyhedron>,
    pub cuts: Vec<Cut>,
    /// `values[j][i] = μ_j(C_i)`.
    pub values: Vec<Vec<f64>>,
    /// `max_i μ_j(C_i) − μ_j(C_{π(j)})` per measure.
    pub envy: Vec<f64>,
    pub delta: f64,
    pub resolution: u32,
}

impl EnvyAllocation {
    pub fn max_envy(&self) -> f64 {
        self.envy.iter().copied().fold(0.0, f64::max)
    }
}

/// Allocates the regions of a nested partition so that no measure prefers
/// another region by more than `tolerance`.
///
/// Covers use slack `tolerance / 2`; the cell diameter starts at
/// `tolerance` and is halved until the envy measured at the witness is
/// within `tolerance`.
pub fn envy_free_nested_allocation(
    measures: &[DMeasure],
    directions: &[Vec<f64>],
    tolerance: f64,
    schedule: &Schedule,
) -> Result<EnvyAllocation> {
    if !(tolerance > 0.0) {
        return Err(Error::InvalidArgument("tolerance must be positive".into()));
    }
    let cover = EnvyCover::new(measures, directions, tolerance / 2.0)?;
    let n = cover.arity();
    let finest = grid_diameter(n, schedule.max());
    let mut diameter = tolerance;
    loop {
        let target = diameter.max(finest);
        let cell = solve_colorful_kkm(&cover, &SolveOptions::new(target).with_schedule(schedule.clone()))?;
        let permutation = cell.permutation.clone().expect("colorful cells use every cover");
        let part = nested_partition(&cell.witness, directions)?;
        let values: Vec<Vec<f64>> = cover
            .measures
            .iter()
            .map(|m| part.regions.iter().map(|r| m.measure(r)).collect())
            .collect();
        let envy: Vec<f64> = values
            .iter()
            .zip(&permutation)
            .map(|(v, &own)| v.iter().copied().fold(f64::NEG_INFINITY, f64::max) - v[own])
            .collect();
        let result = EnvyAllocation {
            schema: ENVY_ALLOCATION_SCHEMA.into(),
            x: cell.witness.clone(),
            permutation,
            regions: part.regions,
            cuts: part.cuts,
            values,
            envy,
            delta: cell.diameter,
            resolution: cell.resolution,
        };
        if result.max_envy() <= tolerance {
            return Ok(result);
        }
        if target <= finest {
            return Err(Error::ResolutionExceeded {
                max_resolution: schedule.max(),
                diagnostics: format!("envy {} exceeds tolerance {tolerance}", result.max_envy()),
            });
        }
        diameter = target / 2.0;
    }
}
