//! One line per acceptance criterion. Oracles here are written against the
//! raw definitions, not the library's own checkers.

use std::f64::consts::{PI, TAU};
use std::io::{BufRead, BufReader};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::process::{Command, Stdio};
use std::time::Instant;

use kkmw_core::delta::{hyperplane_piercing_search, nested_partition, DMeasure, PiercingOutcome, PolytopeFamily, PreparedDMeasure};
use kkmw_core::engine::{solve_colorful_kkm, ArgmaxOracle, CoverOracle, Schedule, SolveOptions};
use kkmw_core::fair::{
    cake_result_from_cell, envy_free_cake, greedy_division, rental_harmony, CakeValuation, PlayerCover, RentalInstance,
};
use kkmw_core::interval::{brute_nu, brute_nu_d, brute_tau, brute_tau_d, colorful_matching, kkm_matching, DInterval, Interval};
use kkmw_core::lines::{t4_solve, verify_t4, T4Outcome};
use kkmw_core::mass::{mass_partition_solve, regions_from, unit_disk};
use kkmw_core::planar::{line_transversal_exists, measure_of, ConvexPolygon, DirectedLine, PlanarMeasure, Point2};
use kkmw_core::session::{log_path, Session, SessionKind, SessionResult, SessionSpec};
use kkmw_core::{owner_of, BarycentricPoint, Grid, SolveStatus};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

type Outcome = Result<String, String>;

macro_rules! ensure {
    ($cond:expr, $($fmt:tt)+) => {
        if !$cond {
            return Err(format!($($fmt)+));
        }
    };
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 12] = [
        ("gallai-equality", gallai_equality),
        ("colorful-gallai", colorful_gallai),
        ("engine-tiling-owners", engine_tiling),
        ("analytic-covers", analytic_covers),
        ("d-interval-bound", d_interval_bound),
        ("mass-partition", mass_partition),
        ("nested-partitions", nested_partitions),
        ("t4-line-piercing", t4_line_piercing),
        ("cake-cutting", cake_cutting),
        ("rental-harmony", rental),
        ("greedy-division", greedy),
        ("determinism-crash-safety", determinism),
    ];
    let mut failed = 0;
    for (name, check) in criteria {
        let start = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|p| {
            Err(p.downcast_ref::<String>().cloned().or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string())).unwrap_or_default())
        });
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("PASS {name} ({secs:.2} s): {detail}"),
            Err(why) => {
                failed += 1;
                println!("FAIL {name} ({secs:.2} s): {why}");
            }
        }
    }
    println!("{} of 12 criteria passed", 12 - failed);
    // Failures are reported, not fatal, unless asked for.
    if failed > 0 && std::env::var_os("KKMW_ACCEPTANCE_STRICT").is_some() {
        std::process::exit(1);
    }
}

fn random_family(rng: &mut ChaCha8Rng, n: usize, max_len: f64) -> Vec<Interval> {
    (0..n)
        .map(|_| {
            let a: f64 = rng.gen();
            Interval::new(a, a + rng.gen_range(0.0..max_len)).unwrap()
        })
        .collect()
}

/// Smallest subset of right endpoints that pierces every member.
fn subset_tau(covers: &[u32], full: u32) -> usize {
    (0u32..1 << covers.len())
        .filter(|s| (0..covers.len()).filter(|p| s & (1 << p) != 0).fold(0, |acc, p| acc | covers[p]) == full)
        .map(|s| s.count_ones() as usize)
        .min()
        .unwrap_or(0)
}

fn interval_tau(f: &[Interval]) -> usize {
    let covers: Vec<u32> = f
        .iter()
        .map(|p| f.iter().enumerate().filter(|(_, i)| i.lo <= p.hi && p.hi <= i.hi).fold(0, |a, (j, _)| a | 1 << j))
        .collect();
    subset_tau(&covers, (1u32 << f.len()) - 1)
}

fn subset_nu(n: usize, disjoint: impl Fn(usize, usize) -> bool) -> usize {
    (0u32..1 << n)
        .filter(|s| (0..n).all(|a| (a + 1..n).all(|b| s & (1 << a) == 0 || s & (1 << b) == 0 || disjoint(a, b))))
        .map(|s| s.count_ones() as usize)
        .max()
        .unwrap_or(0)
}

fn disjoint(a: &Interval, b: &Interval) -> bool {
    a.hi < b.lo || b.hi < a.lo
}

fn gallai_equality() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let start = Instant::now();
    for t in 0..500 {
        let n = rng.gen_range(1..=12);
        let f = random_family(&mut rng, n, 0.4);
        let m = kkm_matching(&f).map_err(|e| format!("instance {t}: {e}"))?;
        let (tau, nu) = (brute_tau(&f), brute_nu(&f));
        ensure!(m.size() == nu && nu == tau, "instance {t}: matching {} nu {nu} tau {tau}", m.size());
        ensure!(m.picks.iter().enumerate().all(|(i, a)| m.picks[i + 1..].iter().all(|b| disjoint(&a.interval, &b.interval))), "instance {t}: overlapping picks");
        let nu_ref = subset_nu(n, |a, b| disjoint(&f[a], &f[b]));
        ensure!(tau == interval_tau(&f) && nu == nu_ref, "instance {t}: sweeps disagree with subset enumeration");
    }
    let secs = start.elapsed().as_secs_f64();
    ensure!(secs < 30.0, "took {secs:.1} s");
    Ok(format!("500 families, matching = nu = tau, {secs:.2} s"))
}

fn colorful_gallai() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(102);
    for t in 0..100 {
        let families: Vec<Vec<Interval>> = (0..4)
            .map(|_| loop {
                let n = rng.gen_range(4..=10);
                let f = random_family(&mut rng, n, 0.15);
                if interval_tau(&f) >= 4 {
                    break f;
                }
            })
            .collect();
        let m = colorful_matching(&families).map_err(|e| format!("instance {t}: {e}"))?;
        let mut fams: Vec<usize> = m.picks.iter().map(|p| p.family).collect();
        fams.sort();
        ensure!(fams == [0, 1, 2, 3], "instance {t}: families {fams:?}");
        for (i, a) in m.picks.iter().enumerate() {
            ensure!(families[a.family][a.index] == a.interval, "instance {t}: pick not from its family");
            for b in &m.picks[i + 1..] {
                ensure!(disjoint(&a.interval, &b.interval), "instance {t}: {:?} meets {:?}", a.interval, b.interval);
            }
        }
    }
    Ok("100 instances with every tau >= 4, 4 disjoint picks each".into())
}

fn det(mut a: Vec<Vec<f64>>) -> f64 {
    let n = a.len();
    let mut d = 1.0;
    for c in 0..n {
        let p = (c..n).max_by(|&i, &j| a[i][c].abs().total_cmp(&a[j][c].abs())).unwrap();
        if a[p][c] == 0.0 {
            return 0.0;
        }
        if p != c {
            a.swap(p, c);
            d = -d;
        }
        d *= a[c][c];
        for r in c + 1..n {
            let f = a[r][c] / a[c][c];
            for cc in c..n {
                a[r][cc] -= f * a[c][cc];
            }
        }
    }
    d
}

fn engine_tiling() -> Outcome {
    let mut worst: f64 = 0.0;
    for k in 2..=5usize {
        for m in 1..=8u32 {
            let cells = Grid::new(k, m).map_err(|e| e.to_string())?.cells();
            ensure!(cells.len() as u64 == (m as u64).pow(k as u32 - 1), "k={k} m={m}: {} cells", cells.len());
            let fact: f64 = (1..k).map(|i| i as f64).product();
            let mut volume = 0.0;
            for c in &cells {
                let vs = c.vertices();
                let e: Vec<Vec<f64>> = (1..k)
                    .map(|r| (0..k - 1).map(|j| (vs[r].counts[j] as f64 - vs[0].counts[j] as f64) / m as f64).collect())
                    .collect();
                volume += det(e).abs() / fact;
                let mut owners: Vec<usize> = vs.iter().map(|v| owner_of(v, k)).collect();
                owners.sort();
                ensure!(owners == (0..k).collect::<Vec<_>>(), "k={k} m={m}: owners {owners:?}");
            }
            worst = worst.max((volume - 1.0 / fact).abs());
        }
    }
    ensure!(worst < 1e-9, "volume defect {worst:e}");
    Ok(format!("k <= 5, m <= 8, max volume defect {worst:.1e}, all cells owner-complete"))
}

fn analytic_covers() -> Outcome {
    let start = Instant::now();
    let cell = solve_colorful_kkm(&ArgmaxOracle::colorful(4), &SolveOptions::new(1e-3)).map_err(|e| e.to_string())?;
    let secs = start.elapsed().as_secs_f64();
    let d = cell.witness.coords().iter().map(|c| (c - 0.25).abs()).sum::<f64>();
    ensure!(d <= 1e-3, "argmax k=4 witness at L1 distance {d:e}");
    ensure!(secs < 5.0, "argmax k=4 took {secs:.2} s");
    let mut worst: f64 = d;
    for k in [2, 3] {
        let c = solve_colorful_kkm(&ArgmaxOracle::colorful(k), &SolveOptions::new(1e-3)).map_err(|e| e.to_string())?;
        let d = c.witness.coords().iter().map(|x| (x - 1.0 / k as f64).abs()).sum::<f64>();
        ensure!(d <= 1e-3, "argmax k={k} at distance {d:e}");
        worst = worst.max(d);
    }
    Ok(format!("argmax k=4 in {secs:.2} s; k = 2..4 within {worst:.1e} of the barycenter"))
}

fn d_interval_bound() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(105);
    let mut max_ratio: f64 = 0.0;
    for t in 0..1000 {
        let n = rng.gen_range(1..=8);
        let family: Vec<DInterval> = (0..n)
            .map(|_| DInterval {
                components: (0..2)
                    .map(|c| {
                        (c == 0 || rng.gen_bool(0.7)).then(|| {
                            let a: f64 = rng.gen();
                            Interval::new(a, a + rng.gen_range(0.0..0.3)).unwrap()
                        })
                    })
                    .collect(),
            })
            .collect();
        let points: Vec<f64> = family.iter().flat_map(|f| f.parts().map(|i| i.hi).collect::<Vec<_>>()).collect();
        let covers: Vec<u32> = points
            .iter()
            .map(|&p| family.iter().enumerate().filter(|(_, f)| f.parts().any(|i| i.lo <= p && p <= i.hi)).fold(0, |a, (j, _)| a | 1 << j))
            .collect();
        let tau = subset_tau(&covers, (1u32 << n) - 1);
        let nu = subset_nu(n, |a, b| family[a].parts().all(|x| family[b].parts().all(|y| disjoint(x, y))));
        ensure!(tau == brute_tau_d(&family) && nu == brute_nu_d(&family), "instance {t}: library tau/nu disagree");
        ensure!(tau <= 3 * nu, "instance {t}: tau {tau} > 3 nu = {}", 3 * nu);
        max_ratio = max_ratio.max(tau as f64 / nu as f64);
    }
    Ok(format!("1000 2-interval families, max tau/nu {max_ratio:.2} <= 3"))
}

fn bump_raster(cx: f64, cy: f64, sigma: f64, n: usize) -> PlanarMeasure {
    let h = 2.0 / n as f64;
    let grid = (0..n)
        .map(|r| {
            (0..n)
                .map(|c| {
                    let (x0, y0) = (-1.0 + c as f64 * h, -1.0 + r as f64 * h);
                    if [(0.0, 0.0), (h, 0.0), (0.0, h), (h, h)].iter().any(|(dx, dy)| (x0 + dx).hypot(y0 + dy) > 1.0) {
                        return 0.0;
                    }
                    let (x, y) = (x0 + h / 2.0 - cx, y0 + h / 2.0 - cy);
                    (-(x * x + y * y) / (2.0 * sigma * sigma)).exp()
                })
                .collect()
        })
        .collect();
    PlanarMeasure::Raster { origin: [-1.0, -1.0], cell: h, grid }.normalized().unwrap()
}

fn mass_partition() -> Outcome {
    let measures: Vec<PlanarMeasure> = (0..4)
        .map(|i| {
            let a = TAU * i as f64 / 4.0 + 0.3;
            bump_raster(0.45 * a.cos(), 0.45 * a.sin(), 0.15, 120)
        })
        .collect();
    let alphas = [0.1, 0.2, 0.3, 0.4];
    let start = Instant::now();
    let res = mass_partition_solve(&measures, &alphas, 1e-2, &Schedule::default()).map_err(|e| e.to_string())?;
    let secs = start.elapsed().as_secs_f64();
    ensure!(secs < 60.0, "solve took {secs:.1} s");
    let mut perm = res.permutation.clone();
    perm.sort();
    ensure!(perm == [0, 1, 2, 3], "permutation {:?}", res.permutation);
    let area: f64 = res.regions.iter().map(ConvexPolygon::area).sum();
    let defect = (area - unit_disk().area()).abs();
    ensure!(defect < 1e-6, "area defect {defect:e}");
    let mut slack = f64::INFINITY;
    for (j, r) in res.regions.iter().enumerate() {
        let got = measure_of(&measures[res.permutation[j]], r);
        ensure!(got >= alphas[j] - 1e-2, "region {j}: mass {got} < {} - 1e-2", alphas[j]);
        slack = slack.min(got - alphas[j]);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(106);
    let mut worst: f64 = 0.0;
    for t in 0..1000 {
        let mut w: Vec<f64> = (0..4).map(|_| rng.gen_range(0.01..1.0)).collect();
        w[rng.gen_range(0..4)] = 0.0;
        let x = BarycentricPoint::normalized(&w).unwrap();
        let regions = regions_from(&x, 2).map_err(|e| format!("x #{t}: {e}"))?;
        for (j, r) in regions.iter().enumerate() {
            if x[j] == 0.0 {
                for m in &measures {
                    worst = worst.max(measure_of(m, r));
                }
            }
        }
    }
    ensure!(worst < 1e-9, "zero coordinate region carries mass {worst:e}");
    Ok(format!("solve {secs:.1} s, area defect {defect:.1e}, min mass - alpha {slack:.1e}, degenerate mass {worst:.1e}"))
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Region of `y` by the recursive construction; `None` near a cut.
fn nested_region(x: &[f64], dirs: &[Vec<f64>], y: &[f64]) -> Option<usize> {
    let mut level = x.len();
    loop {
        let s: f64 = x[..level].iter().sum();
        let v = &dirs[level - 2];
        let a = if level == 2 { x[0] / s } else { x[level - 1] / s };
        let below = if a == 0.0 {
            false
        } else if a == 1.0 {
            true
        } else {
            let t = (2.0 * a - 1.0) / (1.0 - (2.0 * a - 1.0).abs());
            let g = dot(y, v) - t;
            if g.abs() < 1e-9 {
                return None;
            }
            g < 0.0
        };
        if level == 2 {
            return Some(if below { 0 } else { 1 });
        }
        if below {
            return Some(level - 1);
        }
        level -= 1;
    }
}

fn random_direction(rng: &mut ChaCha8Rng, d: usize) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..d).map(|_| rng.gen_range(-1.0..1.0)).collect();
        if dot(&v, &v) > 0.05 {
            return v;
        }
    }
}

fn random_simplex_point(rng: &mut ChaCha8Rng, n: usize, zeros: usize) -> BarycentricPoint {
    let mut w: Vec<f64> = (0..n).map(|_| -rng.gen::<f64>().ln()).collect();
    for _ in 0..zeros {
        w[rng.gen_range(0..n)] = 0.0;
    }
    if w.iter().all(|&v| v == 0.0) {
        w[n - 1] = 1.0;
    }
    BarycentricPoint::normalized(&w).unwrap()
}

fn d_measures(rng: &mut ChaCha8Rng, d: usize) -> Vec<DMeasure> {
    let points: Vec<Vec<f64>> = (0..12)
        .map(|_| {
            let mut p: Vec<f64> = (0..d).map(|_| rng.gen_range(-1.2..1.2)).collect();
            p.push(rng.gen_range(0.1..1.0));
            p
        })
        .collect();
    let n: usize = if d == 2 { 30 } else { 8 };
    vec![
        DMeasure::Points { points, radius: 0.1 }.normalized().unwrap(),
        DMeasure::Raster {
            origin: vec![-1.0; d],
            cell: 2.0 / n as f64,
            shape: vec![n; d],
            density: (0..n.pow(d as u32)).map(|_| rng.gen_range(0.0..1.0)).collect(),
        }
        .normalized()
        .unwrap(),
    ]
}

fn nested_partitions() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(107);
    let (mut additivity, mut degenerate, mut continuity): (f64, f64, f64) = (0.0, 0.0, 0.0);
    for d in [2, 3] {
        let measures: Vec<PreparedDMeasure> = d_measures(&mut rng, d).iter().map(|m| PreparedDMeasure::new(m).unwrap()).collect();
        for trial in 0..60 {
            let n = 2 + trial % 3;
            let dirs: Vec<Vec<f64>> = (0..n - 1).map(|_| random_direction(&mut rng, d)).collect();
            let x = random_simplex_point(&mut rng, n, trial % 2);
            let part = nested_partition(&x, &dirs).map_err(|e| e.to_string())?;
            for m in &measures {
                let masses: Vec<f64> = part.regions.iter().map(|r| m.measure(r)).collect();
                additivity = additivity.max((masses.iter().sum::<f64>() - 1.0).abs());
                for i in (0..n).filter(|&i| x[i] == 0.0) {
                    degenerate = degenerate.max(masses[i]);
                }
            }
            let mut c = random_simplex_point(&mut rng, n, 0).coords().to_vec();
            let (a, b) = (rng.gen_range(0..n), rng.gen_range(0..n));
            let before = BarycentricPoint::new(c.clone()).unwrap();
            let h = 5e-7f64.min(c[b]);
            c[a] += h;
            c[b] -= h;
            let after = BarycentricPoint::new(c).unwrap();
            let (p, q) = (nested_partition(&before, &dirs).unwrap(), nested_partition(&after, &dirs).unwrap());
            for m in &measures {
                for i in 0..n {
                    continuity = continuity.max((m.measure(&p.regions[i]) - m.measure(&q.regions[i])).abs());
                }
            }
        }
    }
    ensure!(additivity < 1e-9, "additivity defect {additivity:e}");
    ensure!(degenerate < 1e-9, "zero coordinate region mass {degenerate:e}");
    ensure!(continuity < 1e-3, "continuity delta {continuity:e}");

    let (mut pierced, mut saturated) = (0, 0);
    for t in 0..100 {
        let n = 2 + t % 2;
        let dirs: Vec<Vec<f64>> = (0..n - 1).map(|_| random_direction(&mut rng, 2)).collect();
        let bodies: Vec<Vec<Vec<f64>>> = (0..rng.gen_range(1..6))
            .map(|_| {
                let c = Point2::new(rng.gen_range(-1.5..1.5), rng.gen_range(-1.5..1.5));
                let pts: Vec<Point2> = (0..5).map(|_| c + Point2::new(rng.gen_range(-0.2..0.2), rng.gen_range(-0.2..0.2))).collect();
                ConvexPolygon::hull(&pts).vertices.iter().map(|p| vec![p.x, p.y]).collect()
            })
            .collect();
        let family = PolytopeFamily { dimension: 2, bodies };
        let out = hyperplane_piercing_search(&family, &dirs, &Schedule::doubling(8, 512)).map_err(|e| format!("instance {t}: {e}"))?;
        match &out {
            PiercingOutcome::Piercing { certificate, .. } => {
                pierced += 1;
                ensure!(certificate.cuts.len() == dirs.len(), "instance {t}: cut count");
                for b in &family.bodies {
                    let hit = certificate.cuts.iter().zip(&dirs).any(|(c, v)| {
                        let p: Vec<f64> = b.iter().map(|u| dot(u, v)).collect();
                        let lo = p.iter().copied().fold(f64::INFINITY, f64::min);
                        let hi = p.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                        &c.direction == v && lo <= c.offset + 1e-9 && hi >= c.offset - 1e-9
                    });
                    ensure!(hit, "instance {t}: a body misses every cut");
                }
            }
            PiercingOutcome::Saturated { witness, .. } => {
                saturated += 1;
                ensure!(witness.contained.len() == n, "instance {t}: {} contained bodies", witness.contained.len());
                for (i, &b) in witness.contained.iter().enumerate() {
                    let inside = family.bodies[b].iter().all(|v| nested_region(witness.x.coords(), &dirs, v) == Some(i));
                    ensure!(inside, "instance {t}: body {b} not inside region {i}");
                }
            }
        }
    }
    Ok(format!(
        "additivity {additivity:.1e}, degeneracy {degenerate:.1e}, continuity {continuity:.1e}; 100 piercing instances re-verified ({pierced} pierced, {saturated} saturated)"
    ))
}

fn ring(count: usize, radius: f64, phase: f64, size: f64) -> Vec<ConvexPolygon> {
    (0..count).map(|k| ConvexPolygon::regular(Point2::polar(radius, phase + TAU * k as f64 / count as f64), size, 4)).collect()
}

fn sampled_overlap(polys: &[ConvexPolygon]) -> f64 {
    let n = 100_000;
    (0..n)
        .map(|i| {
            let dir = Point2::polar(1.0, PI * i as f64 / n as f64);
            let (mut lo, mut hi) = (f64::NEG_INFINITY, f64::INFINITY);
            for p in polys {
                let (a, b) = p.projection(dir);
                lo = lo.max(a);
                hi = hi.min(b);
            }
            hi - lo
        })
        .fold(f64::NEG_INFINITY, f64::max)
}

fn t4_line_piercing() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(108);
    let schedule = Schedule::doubling(8, 128);
    for t in 0..10 {
        let v = Point2::polar(1.0, rng.gen_range(0.0..TAU));
        let base = Point2::new(rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0));
        let families: Vec<Vec<ConvexPolygon>> = (0..4)
            .map(|_| {
                (0..rng.gen_range(2..6))
                    .map(|_| ConvexPolygon::regular(base + v * rng.gen_range(-3.0..3.0), rng.gen_range(0.05..0.3), rng.gen_range(3..8)))
                    .collect()
            })
            .collect();
        let out = t4_solve(&families, v, &schedule).map_err(|e| format!("pierceable {t}: {e}"))?;
        let T4Outcome::Piercing { family, lines, hits, .. } = &out else {
            return Err(format!("pierceable {t}: got a witness"));
        };
        ensure!(lines[0].normal().dot(v).abs() < 1e-9, "pierceable {t}: first line not parallel to v");
        for (p, &h) in families[*family].iter().zip(hits) {
            ensure!(p.meets_line(&lines[h], 1e-9), "pierceable {t}: member misses line {h}");
        }
    }
    for f in 0..3 {
        let families: Vec<Vec<ConvexPolygon>> = (0..4).map(|i| ring(12, 0.35, 0.11 * i as f64 + 0.05 * f as f64, 0.02)).collect();
        let v = Point2::polar(1.0, 0.3 * f as f64 + 1.0);
        let out = t4_solve(&families, v, &schedule).map_err(|e| format!("ring {f}: {e}"))?;
        let T4Outcome::Witness { members, polygons, .. } = &out else {
            return Err(format!("ring {f}: no witness"));
        };
        let mut quads: Vec<usize> = members.iter().map(|m| m.quadrant).collect();
        quads.sort();
        ensure!(quads == [0, 1, 2, 3], "ring {f}: quadrants {quads:?}");
        ensure!(verify_t4(&families, v, &out), "ring {f}: quadrant separation fails");
        ensure!(!line_transversal_exists(polygons).unwrap().exists, "ring {f}: witness has a transversal");
        ensure!(sampled_overlap(polygons) < 1e-9, "ring {f}: sampling finds a transversal");
    }
    let (mut yes, mut no) = (0, 0);
    for t in 0..200 {
        let mut polys: Vec<ConvexPolygon> = (0..rng.gen_range(3..=6))
            .map(|_| {
                let c = Point2::new(rng.gen_range(-0.7..0.7), rng.gen_range(-0.7..0.7));
                let r = rng.gen_range(0.01..0.3);
                let pts: Vec<Point2> = (0..rng.gen_range(1..7)).map(|_| c + Point2::polar(r * rng.gen::<f64>().sqrt(), rng.gen_range(0.0..TAU))).collect();
                ConvexPolygon::hull(&pts)
            })
            .collect();
        if t % 2 == 0 {
            let l = DirectedLine::with_normal_angle(rng.gen_range(0.0..TAU), rng.gen_range(-0.8..0.8));
            for p in &mut polys {
                let off = l.normal() * (rng.gen_range(-0.05..0.05) - l.eval(p.centroid().unwrap()));
                *p = p.map(|u| u + off);
            }
        }
        let exact = line_transversal_exists(&polys).map_err(|e| e.to_string())?;
        let best = sampled_overlap(&polys);
        if exact.exists {
            yes += 1;
            ensure!(best >= -1e-4, "instance {t}: exact yes, sampled overlap {best:e}");
        } else {
            no += 1;
            ensure!(best < 1e-9, "instance {t}: exact no, sampled overlap {best:e}");
        }
    }
    Ok(format!("10 pierceable and 3 ring instances verified; transversal test agrees with sampling on 200 ({yes} yes, {no} no)"))
}

fn random_valuation(rng: &mut ChaCha8Rng) -> CakeValuation {
    let m = rng.gen_range(1..6);
    let mut b: Vec<f64> = (0..m - 1).map(|_| rng.gen_range(0.05..0.95)).collect();
    b.sort_by(f64::total_cmp);
    b.dedup();
    b.insert(0, 0.0);
    b.push(1.0);
    let densities = (0..b.len() - 1).map(|_| rng.gen_range(0.0..3.0)).collect();
    CakeValuation { breakpoints: b, densities }.normalized().unwrap()
}

fn integral(v: &CakeValuation, a: f64, b: f64) -> f64 {
    (0..v.densities.len())
        .map(|i| {
            let (lo, hi) = (v.breakpoints[i].max(a), v.breakpoints[i + 1].min(b));
            if hi > lo { v.densities[i] * (hi - lo) } else { 0.0 }
        })
        .sum()
}

fn cake_cutting() -> Outcome {
    let schedule = Schedule::doubling(8, 1 << 14);
    let out = envy_free_cake(&vec![CakeValuation::uniform(); 3], 1e-3, &schedule).map_err(|e| e.to_string())?;
    let cuts = &out.partition.cuts;
    ensure!((cuts[0] - 1.0 / 3.0).abs() < 1e-3 && (cuts[1] - 2.0 / 3.0).abs() < 1e-3, "uniform cuts {cuts:?}");
    let mut rng = ChaCha8Rng::seed_from_u64(109);
    let mut ratio: f64 = 0.0;
    for t in 0..50 {
        let players: Vec<CakeValuation> = (0..rng.gen_range(2..=4)).map(|_| random_valuation(&mut rng)).collect();
        let out = envy_free_cake(&players, 1e-3, &schedule).map_err(|e| format!("instance {t}: {e}"))?;
        let d_max = players.iter().flat_map(|p| p.densities.iter().copied()).fold(0.0, f64::max);
        let bound = 2.0 * d_max * out.delta;
        let mut ends = vec![0.0];
        ends.extend(&out.partition.cuts);
        ends.push(1.0);
        for (j, p) in players.iter().enumerate() {
            let vals: Vec<f64> = ends.windows(2).map(|w| integral(p, w[0], w[1])).collect();
            let envy = vals.iter().copied().fold(f64::NEG_INFINITY, f64::max) - vals[out.allocation[j]];
            ensure!(envy <= bound + 1e-12, "instance {t}, player {j}: envy {envy:e} > {bound:e}");
            if bound > 0.0 {
                ratio = ratio.max(envy / bound);
            }
        }
    }
    Ok(format!("uniform cuts {:.5}, {:.5}; 50 random instances, max envy / (2 D_max delta) = {ratio:.3}", cuts[0], cuts[1]))
}

/// Least achievable max envy on the rent grid of step `1/steps`, over all
/// assignments.
fn rent_grid_oracle(inst: &RentalInstance, steps: usize) -> f64 {
    let perms = [[0, 1, 2], [0, 2, 1], [1, 0, 2], [1, 2, 0], [2, 0, 1], [2, 1, 0]];
    let mut best = f64::INFINITY;
    for a in 0..=steps {
        for b in 0..=steps - a {
            let r = [a, b, steps - a - b].map(|c| c as f64 / steps as f64 * inst.total_rent);
            for p in &perms {
                let mut worst: f64 = 0.0;
                for j in 0..3 {
                    let u: Vec<f64> = (0..3).map(|i| inst.values[j][i] - r[i]).collect();
                    worst = worst.max(u.iter().copied().fold(f64::NEG_INFINITY, f64::max) - u[p[j]]);
                }
                best = best.min(worst);
            }
        }
    }
    best
}

fn rental() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let mut report = vec![];
    let mut failures = vec![];
    for t in 0..8 {
        let values: Vec<Vec<f64>> = (0..3).map(|_| (0..3).map(|_| rng.gen_range(0.0..1.0)).collect()).collect();
        let inst = RentalInstance::new(values, 1.0);
        let out = rental_harmony(&inst, 1e-2, &Schedule::doubling(8, 1024)).map_err(|e| format!("instance {t}: {e}"))?;
        // Envy recomputed from the raw values at the returned rents.
        let envy = (0..3)
            .map(|j| {
                let u: Vec<f64> = (0..3).map(|i| inst.values[j][i] - out.rents[i]).collect();
                u.iter().copied().fold(f64::NEG_INFINITY, f64::max) - u[out.assignment[j]]
            })
            .fold(0.0, f64::max);
        let grid = rent_grid_oracle(&inst, 1000);
        report.push(format!("{envy:.4}/{grid:.4}"));
        if envy > grid + 1e-2 {
            failures.push(format!("instance {t}: envy {envy:.4} vs grid best {grid:.4}"));
        }
    }
    ensure!(failures.is_empty(), "{} (envy/grid per instance: {})", failures.join("; "), report.join(" "));
    Ok(format!("8 instances within 1e-2 of the 1e-3 rent-grid optimum (envy/grid: {})", report.join(" ")))
}

fn greedy() -> Outcome {
    let u = CakeValuation::uniform();
    let out = greedy_division(&[u.clone(), u], &[0.3, 0.7]).map_err(|e| e.to_string())?;
    ensure!(out.cuts == [0.3], "uniform cuts {:?}", out.cuts);
    let mut rng = ChaCha8Rng::seed_from_u64(111);
    let mut worst: f64 = 0.0;
    for t in 0..500 {
        let n = rng.gen_range(2..=6);
        let ms: Vec<CakeValuation> = (0..n).map(|_| random_valuation(&mut rng)).collect();
        let w: Vec<f64> = (0..n).map(|_| rng.gen_range(0.05..1.0)).collect();
        let s: f64 = w.iter().sum();
        let alphas: Vec<f64> = w.iter().map(|x| x / s).collect();
        let out = greedy_division(&ms, &alphas).map_err(|e| format!("instance {t}: {e}"))?;
        ensure!(out.intervals.first().unwrap().0 == 0.0 && out.intervals.last().unwrap().1 == 1.0, "instance {t}: ends");
        ensure!(out.intervals.windows(2).all(|w| w[0].1 == w[1].0 && w[0].0 <= w[0].1), "instance {t}: pieces do not tile");
        for i in 0..n {
            if out.permutation[i] == n - 1 {
                continue;
            }
            let (a, b) = out.intervals[out.permutation[i]];
            let err = (integral(&ms[i], a, b) - alphas[i]).abs();
            ensure!(err < 1e-12, "instance {t}, measure {i}: mass error {err:e}");
            worst = worst.max(err);
        }
    }
    Ok(format!("uniform cut 0.3; 500 random instances tile [0,1], max first-piece error {worst:.1e}"))
}

fn session_players() -> Vec<CakeValuation> {
    vec![
        CakeValuation::uniform(),
        CakeValuation { breakpoints: vec![0.0, 0.4, 1.0], densities: vec![2.0, 1.0 / 3.0] },
        CakeValuation { breakpoints: vec![0.0, 0.7, 1.0], densities: vec![0.5, 13.0 / 6.0] },
    ]
}

fn determinism() -> Outcome {
    let players = session_players();
    let oracle = PlayerCover::new(&players);
    let spec = SessionSpec {
        kind: SessionKind::Cake,
        participants: vec!["a".into(), "b".into(), "c".into()],
        tolerance: 0.02,
        total_rent: 1.0,
        max_resolution: 1024,
    };
    let cell = solve_colorful_kkm(&oracle, &SolveOptions::new(0.02).with_schedule(Schedule::doubling(8, 1024))).map_err(|e| e.to_string())?;
    let headless = serde_json::to_string(&SessionResult::Cake(cake_result_from_cell(&cell, None).unwrap())).unwrap();

    // Scripted run, then a replay of the log it wrote.
    let dir = tempfile::tempdir().unwrap();
    let mut s = Session::create(dir.path(), "script", spec).map_err(|e| e.to_string())?;
    let mut script = vec![];
    while s.state.status == SolveStatus::Running {
        let q = s.state.next_pending()[0].clone();
        let answer = oracle.query(q.cover, &q.point);
        s.answer(q.id, &answer).map_err(|e| e.to_string())?;
        script.push((q.id, answer));
    }
    let live = serde_json::to_string(&s.result().unwrap().unwrap()).unwrap();
    let replayed = Session::replay(&log_path(dir.path(), "script")).map_err(|e| e.to_string())?;
    let again = serde_json::to_string(&replayed.result().unwrap().unwrap()).unwrap();
    ensure!(live == headless && again == headless, "scripted or replayed result differs from the headless solve");

    // The CLI twice on the same input.
    let players_file = dir.path().join("p.json");
    std::fs::write(&players_file, json!({"schema": "cake_players.v1", "players": players}).to_string()).unwrap();
    let run = || Command::new(env!("CARGO_BIN_EXE_kkmw")).arg("cake-cut").arg("--players").arg(&players_file).args(["--tol", "1e-3"]).output().unwrap();
    let (a, b) = (run(), run());
    ensure!(a.status.success() && a.stdout == b.stdout, "cake-cut output is not reproducible");

    let restarted = kill_and_restart(&oracle, dir.path().join("srv").as_path())?;
    ensure!(restarted == serde_json::from_str::<Value>(&headless).unwrap(), "result after kill and restart differs");
    Ok(format!("{} scripted answers replay byte-identically; CLI output stable; SIGKILL mid-session reproduces the result", script.len()))
}

fn start_server(data: &Path) -> Result<(std::process::Child, String), String> {
    let mut child = Command::new(env!("CARGO_BIN_EXE_kkmw"))
        .args(["serve", "--port", "0", "--max-resolution", "1024", "--data-dir"])
        .arg(data)
        .stdout(Stdio::piped())
        .stderr(Stdio::null())
        .spawn()
        .map_err(|e| e.to_string())?;
    let mut line = String::new();
    BufReader::new(child.stdout.take().unwrap()).read_line(&mut line).map_err(|e| e.to_string())?;
    let base = line.trim().strip_prefix("listening on ").ok_or("no address line")?.to_string();
    Ok((child, base))
}

fn answer_over_http(http: &reqwest::blocking::Client, base: &str, id: &str, oracle: &dyn CoverOracle, limit: usize) -> Result<(), String> {
    for _ in 0..limit {
        let qs: Vec<Value> = http.get(format!("{base}/api/v1/sessions/{id}/queries")).send().and_then(|r| r.json()).map_err(|e| e.to_string())?;
        let Some(q) = qs.first() else { return Ok(()) };
        let x = BarycentricPoint::new(serde_json::from_value(q["x"].clone()).unwrap()).unwrap();
        let player = q["participant"].as_u64().unwrap() as usize - 1;
        let choices: Vec<usize> = oracle.query(player, &x).iter().map(|c| c + 1).collect();
        let resp = http
            .post(format!("{base}/api/v1/sessions/{id}/answers"))
            .json(&json!({"query_id": q["id"], "choices": choices}))
            .send()
            .map_err(|e| e.to_string())?;
        ensure!(resp.status().is_success(), "answer rejected with {}", resp.status());
    }
    Ok(())
}

fn kill_and_restart(oracle: &dyn CoverOracle, data: &Path) -> Result<Value, String> {
    let http = reqwest::blocking::Client::new();
    let (mut child, base) = start_server(data)?;
    let created: Value = http
        .post(format!("{base}/api/v1/sessions"))
        .json(&json!({"kind": "cake", "participants": ["a", "b", "c"], "tolerance": 0.02}))
        .send()
        .and_then(|r| r.json())
        .map_err(|e| e.to_string())?;
    let id = created["id"].as_str().ok_or("no id")?.to_string();
    let first = answer_over_http(&http, &base, &id, oracle, 13);
    child.kill().ok();
    child.wait().ok();
    first?;
    let (mut child, base) = start_server(data)?;
    let rest = answer_over_http(&http, &base, &id, oracle, usize::MAX)
        .and_then(|()| http.get(format!("{base}/api/v1/sessions/{id}/result")).send().and_then(|r| r.json()).map_err(|e| e.to_string()));
    child.kill().ok();
    child.wait().ok();
    rest
}
