use serde::{Deserialize, Serialize};

/// A convex polytope in `ℝ³` stored as outward-oriented faces.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Polytope3 {
    pub faces: Vec<Vec<[f64; 3]>>,
}

fn sub(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

fn cross(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]]
}

fn dot3(a: [f64; 3], b: [f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

fn lerp(a: [f64; 3], b: [f64; 3], t: f64) -> [f64; 3] {
    [a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1]), a[2] + t * (b[2] - a[2])]
}

impl Polytope3 {
    pub fn cuboid(lo: [f64; 3], hi: [f64; 3]) -> Self {
        let p = |i: usize| {
            [
                if i & 1 == 0 { lo[0] } else { hi[0] },
                if i & 2 == 0 { lo[1] } else { hi[1] },
                if i & 4 == 0 { lo[2] } else { hi[2] },
            ]
        };
        // Counterclockwise seen from outside.
        let faces = [
            [0, 2, 3, 1],
            [4, 5, 7, 6],
            [0, 1, 5, 4],
            [2, 6, 7, 3],
            [0, 4, 6, 2],
            [1, 3, 7, 5],
        ];
        Self {
            faces: faces.iter().map(|f| f.iter().map(|&i| p(i)).collect()).collect(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.faces.is_empty()
    }

    pub fn volume(&self) -> f64 {
        let mut v = 0.0;
        for f in &self.faces {
            for i in 1..f.len().saturating_sub(1) {
                v += dot3(f[0], cross(f[i], f[i + 1]));
            }
        }
        v / 6.0
    }

    /// Keeps `⟨p, n⟩ ≥ c`.
    pub fn clip(&self, n: [f64; 3], c: f64) -> Self {
        let mut faces = Vec::with_capacity(self.faces.len() + 1);
        let mut cap: Vec<[f64; 3]> = vec![];
        for f in &self.faces {
            let mut out = Vec::with_capacity(f.len() + 1);
            for i in 0..f.len() {
                let (p, q) = (f[i], f[(i + 1) % f.len()]);
                let (dp, dq) = (dot3(p, n) - c, dot3(q, n) - c);
                if dp >= 0.0 {
                    out.push(p);
                    if dp == 0.0 {
                        cap.push(p);
                    }
                }
                if (dp > 0.0 && dq < 0.0) || (dp < 0.0 && dq > 0.0) {
                    let r = lerp(p, q, dp / (dp - dq));
                    out.push(r);
                    cap.push(r);
                }
            }
            if out.len() >= 3 {
                faces.push(out);
            }
        }
        if faces.is_empty() {
            return Self::default();
        }
        cap.sort_by(|a, b| a.partial_cmp(b).unwrap());
        cap.dedup_by(|a, b| sub(*a, *b).iter().all(|v| v.abs() < 1e-12));
        if cap.len() >= 3 {
            let m = cap.iter().fold([0.0; 3], |acc, p| [acc[0] + p[0], acc[1] + p[1], acc[2] + p[2]]);
            let k = cap.len() as f64;
            let m = [m[0] / k, m[1] / k, m[2] / k];
            // The cap faces outward along −n; order it counterclockwise about −n.
            let out = [-n[0], -n[1], -n[2]];
            let seed = if out[0].abs() < 0.9 { [1.0, 0.0, 0.0] } else { [0.0, 1.0, 0.0] };
            let u = cross(seed, out);
            let w = cross(out, u);
            cap.sort_by(|a, b| {
                let (da, db) = (sub(*a, m), sub(*b, m));
                let ta = dot3(da, w).atan2(dot3(da, u));
                let tb = dot3(db, w).atan2(dot3(db, u));
                ta.total_cmp(&tb)
            });
            faces.push(cap);
        }
        Self { faces }
    }
}
