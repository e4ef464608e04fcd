use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::oracle::{CoverOracle, Mode};
use crate::simplex::BarycentricPoint;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub cover: usize,
    pub point: BarycentricPoint,
    pub returned: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoverReport {
    pub mode: Mode,
    pub samples: usize,
    pub violations: Vec<Violation>,
}

impl CoverReport {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Does `answer` satisfy the covering condition at `x`?
pub fn admissible(mode: Mode, x: &BarycentricPoint, answer: &[usize]) -> bool {
    match mode {
        Mode::Primal => answer.iter().any(|&i| i < x.dim() && x[i] > 0.0),
        Mode::Dual => {
            !answer.is_empty()
                && (0..x.dim()).filter(|&i| x[i] == 0.0).all(|i| answer.contains(&i))
        }
    }
}

/// Samples the simplex corners, then uniform points on random faces, and
/// queries every cover at each. A clean report is evidence, not proof.
pub fn verify_cover<O: CoverOracle + ?Sized>(oracle: &O, samples: usize, mode: Mode, seed: u64) -> CoverReport {
    let k = oracle.arity();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut violations = vec![];
    let samples = samples.max(1);
    for s in 0..samples {
        let x = if s < k {
            BarycentricPoint::vertex(k, s)
        } else {
            random_face_point(k, &mut rng)
        };
        for cover in 0..oracle.covers() {
            let answer = oracle.query(cover, &x);
            if !admissible(mode, &x, &answer) {
                violations.push(Violation {
                    cover,
                    point: x.clone(),
                    returned: answer,
                });
            }
        }
    }
    CoverReport {
        mode,
        samples,
        violations,
    }
}

fn random_face_point(k: usize, rng: &mut impl Rng) -> BarycentricPoint {
    loop {
        let face: Vec<bool> = (0..k).map(|_| rng.gen_bool(0.5)).collect();
        if !face.contains(&true) {
            continue;
        }
        // Normalized exponentials are uniform on the face.
        let w: Vec<f64> = face
            .iter()
            .map(|&on| if on { -rng.gen::<f64>().max(1e-300).ln() } else { 0.0 })
            .collect();
        if let Ok(x) = BarycentricPoint::normalized(&w) {
            return x;
        }
    }
}
