use serde::{Deserialize, Serialize};

use super::CakeValuation;
use crate::error::{Error, Result};

pub const GREEDY_SCHEMA: &str = "greedy_division.v1";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GreedyDivision {
    pub schema: String,
    /// Interior cuts, increasing.
    pub cuts: Vec<f64>,
    /// `intervals[i]` is the `i`-th piece from the left.
    pub intervals: Vec<(f64, f64)>,
    /// `permutation[i]` is the piece given to measure `i`.
    pub permutation: Vec<usize>,
    /// `μ_i` of its own piece.
    pub masses: Vec<f64>,
    /// Whether the forced last piece reaches its target.
    pub final_target_met: bool,
}

/// Knife sliding: on `[t, 1]`, cut at the first `x` where a remaining
/// measure reaches its target on `[t, x]` (lowest index on ties), hand that
/// piece over, and repeat. The last measure takes what is left.
pub fn greedy_division(measures: &[CakeValuation], alphas: &[f64]) -> Result<GreedyDivision> {
    let n = measures.len();
    if n == 0 || alphas.len() != n {
        return Err(Error::InvalidArgument(format!("{n} measures need {n} targets, got {}", alphas.len())));
    }
    measures.iter().try_for_each(CakeValuation::validate)?;
    if alphas.iter().any(|a| !(*a > 0.0)) || (alphas.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidArgument("targets must be positive and sum to 1".into()));
    }
    let mut left: Vec<usize> = (0..n).collect();
    let mut t = 0.0;
    let mut cuts = vec![];
    let mut permutation = vec![0; n];
    while left.len() > 1 {
        let hit = left
            .iter()
            .filter_map(|&i| measures[i].first_hit(t, alphas[i]).map(|x| (x, i)))
            .min_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        // Nobody can reach a target: the richest remaining measure takes the rest.
        let (x, i) = hit.unwrap_or_else(|| {
            let i = *left
                .iter()
                .max_by(|&&a, &&b| measures[a].value(t, 1.0).total_cmp(&measures[b].value(t, 1.0)).then(b.cmp(&a)))
                .unwrap();
            (1.0, i)
        });
        permutation[i] = cuts.len();
        cuts.push(x);
        left.retain(|&j| j != i);
        t = x;
    }
    permutation[left[0]] = cuts.len();
    let mut bounds = vec![0.0];
    bounds.extend(&cuts);
    bounds.push(1.0);
    let intervals: Vec<(f64, f64)> = bounds.windows(2).map(|w| (w[0], w[1])).collect();
    let masses: Vec<f64> = (0..n)
        .map(|i| {
            let (a, b) = intervals[permutation[i]];
            measures[i].value(a, b)
        })
        .collect();
    let last = left[0];
    Ok(GreedyDivision {
        schema: GREEDY_SCHEMA.into(),
        final_target_met: masses[last] >= alphas[last] - 1e-12,
        cuts,
        intervals,
        permutation,
        masses,
    })
}
