use kkmw_core::delta::{
    envy_free_nested_allocation, halfspace, hyperplane_piercing_search, nested_partition, threshold, DMeasure,
    NestedPartition, PiercingOutcome, PolytopeFamily, PreparedDMeasure, Side,
};
use kkmw_core::planar::{measure_of, ConvexPolygon, DirectedLine, PlanarMeasure, Point2};
use kkmw_core::{BarycentricPoint, Error, Schedule};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Region of `y` by walking the recursion top-down; `None` near a cut.
fn region_of(x: &[f64], dirs: &[Vec<f64>], y: &[f64]) -> Option<usize> {
    let mut level = x.len();
    loop {
        let s: f64 = x[..level].iter().sum();
        let v = &dirs[level - 2];
        let a = if level == 2 { x[0] / s } else { x[level - 1] / s };
        // The part that grows with α lies below the cut.
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

fn random_x(rng: &mut ChaCha8Rng, n: usize, zeros: usize) -> BarycentricPoint {
    let mut w: Vec<f64> = (0..n).map(|_| -rng.gen::<f64>().ln()).collect();
    for _ in 0..zeros {
        w[rng.gen_range(0..n)] = 0.0;
    }
    if w.iter().all(|&v| v == 0.0) {
        w[n - 1] = 1.0;
    }
    BarycentricPoint::normalized(&w).unwrap()
}

fn random_direction(rng: &mut ChaCha8Rng, d: usize) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..d).map(|_| rng.gen_range(-1.0..1.0)).collect();
        if dot(&v, &v) > 0.05 {
            return v;
        }
    }
}

fn bump_raster_2d(c: [f64; 2], sigma: f64, n: usize) -> DMeasure {
    let h = 3.0 / n as f64;
    let mut density = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            let (x, y) = (-1.5 + (i as f64 + 0.5) * h - c[0], -1.5 + (j as f64 + 0.5) * h - c[1]);
            density[i * n + j] = (-(x * x + y * y) / (2.0 * sigma * sigma)).exp();
        }
    }
    DMeasure::Raster {
        origin: vec![-1.5, -1.5],
        cell: h,
        shape: vec![n, n],
        density,
    }
    .normalized()
    .unwrap()
}

fn test_measures(rng: &mut ChaCha8Rng, d: usize) -> Vec<DMeasure> {
    let points: Vec<Vec<f64>> = (0..12)
        .map(|_| {
            let mut p: Vec<f64> = (0..d).map(|_| rng.gen_range(-1.2..1.2)).collect();
            p.push(rng.gen_range(0.1..1.0));
            p
        })
        .collect();
    let cloud = DMeasure::Points { points, radius: 0.1 }.normalized().unwrap();
    let n: usize = if d == 2 { 30 } else { 8 };
    let cells = n.pow(d as u32);
    let raster = DMeasure::Raster {
        origin: vec![-1.0; d],
        cell: 2.0 / n as f64,
        shape: vec![n; d],
        density: (0..cells).map(|_| rng.gen_range(0.0..1.0)).collect(),
    }
    .normalized()
    .unwrap();
    vec![cloud, raster]
}

#[test]
fn halfspace_examples() {
    assert_eq!(threshold(0.5), 0.0);
    assert_eq!(threshold(0.75), 1.0);
    assert!((threshold(1.0 / 3.0) + 0.5).abs() < 1e-15);
    let (plus, minus) = halfspace(0.0, &[1.0, 0.0]).unwrap();
    assert_eq!((plus, minus), (Side::Empty, Side::Whole));
    let (plus, minus) = halfspace(1.0, &[1.0, 0.0]).unwrap();
    assert_eq!((plus, minus), (Side::Whole, Side::Empty));
    let (Side::Half(p), Side::Half(m)) = halfspace(0.5, &[0.0, 2.0]).unwrap() else { panic!() };
    assert_eq!(p.offset, 0.0);
    assert_eq!(m.eval(&[5.0, 0.0]), 0.0);
    assert!(matches!(halfspace(0.3, &[0.0, 0.0]), Err(Error::PreconditionFailed(_))));
    let mut last = f64::NEG_INFINITY;
    for i in 1..1000 {
        let t = threshold(i as f64 / 1000.0);
        assert!(t > last);
        last = t;
    }
}

fn member(part: &NestedPartition, y: &[f64]) -> Vec<usize> {
    (0..part.regions.len()).filter(|&i| part.regions[i].contains(y, 0.0)).collect()
}

#[test]
fn small_partitions() {
    let e1 = vec![1.0, 0.0];
    let e2 = vec![0.0, 1.0];
    let p = nested_partition(&BarycentricPoint::barycenter(2), &[e1.clone()]).unwrap();
    assert_eq!(member(&p, &[-0.3, 7.0]), vec![0]);
    assert_eq!(member(&p, &[0.3, -7.0]), vec![1]);

    let p = nested_partition(&BarycentricPoint::barycenter(3), &[e1, e2]).unwrap();
    assert_eq!(member(&p, &[4.0, -0.6]), vec![2]);
    assert_eq!(member(&p, &[-0.1, -0.4]), vec![0]);
    assert_eq!(member(&p, &[0.1, 3.0]), vec![1]);
    assert!((p.cuts[1].offset + 0.5).abs() < 1e-15);
    assert_eq!(p.cuts[0].offset, 0.0);

    // A vertex of the simplex puts everything in one region.
    let p = nested_partition(&BarycentricPoint::vertex(3, 2), &[vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap();
    assert!(p.regions[0].empty && p.regions[1].empty && p.regions[2].halfspaces.is_empty());
}

#[test]
fn partitions_match_recursive_membership() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for trial in 0..500 {
        let d = 2 + trial % 2;
        let n = 2 + trial % 4;
        let dirs: Vec<Vec<f64>> = (0..n - 1).map(|_| random_direction(&mut rng, d)).collect();
        let x = random_x(&mut rng, n, trial % 3);
        let part = nested_partition(&x, &dirs).unwrap();
        for _ in 0..30 {
            let y: Vec<f64> = (0..d).map(|_| rng.gen_range(-3.0..3.0)).collect();
            if let Some(r) = region_of(x.coords(), &dirs, &y) {
                assert_eq!(member(&part, &y), vec![r], "trial {trial}");
            }
        }
    }
}

#[test]
fn additivity_degeneracy_and_continuity() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    for d in [2, 3] {
        let measures: Vec<PreparedDMeasure> = test_measures(&mut rng, d)
            .iter()
            .map(|m| PreparedDMeasure::new(m).unwrap())
            .collect();
        for trial in 0..60 {
            let n = 2 + trial % 3;
            let dirs: Vec<Vec<f64>> = (0..n - 1).map(|_| random_direction(&mut rng, d)).collect();
            let x = random_x(&mut rng, n, trial % 2);
            let part = nested_partition(&x, &dirs).unwrap();
            for m in &measures {
                let masses: Vec<f64> = part.regions.iter().map(|r| m.measure(r)).collect();
                let total: f64 = masses.iter().sum();
                assert!((total - 1.0).abs() < 1e-9, "d={d} trial {trial}: total {total}");
                for i in 0..n {
                    if x[i] == 0.0 {
                        assert!(masses[i] < 1e-9);
                    }
                }
            }
            // Continuity under a 1e-6 move between two positive coordinates.
            let mut c = random_x(&mut rng, n, 0).coords().to_vec();
            let (a, b) = (rng.gen_range(0..n), rng.gen_range(0..n));
            let before = BarycentricPoint::new(c.clone()).unwrap();
            let h = 5e-7f64.min(c[b]);
            c[a] += h;
            c[b] -= h;
            let after = BarycentricPoint::new(c).unwrap();
            let (p, q) = (nested_partition(&before, &dirs).unwrap(), nested_partition(&after, &dirs).unwrap());
            for m in &measures {
                for i in 0..n {
                    assert!((m.measure(&p.regions[i]) - m.measure(&q.regions[i])).abs() < 1e-3);
                }
            }
        }
    }
}

#[test]
fn planar_measures_agree_with_polygon_clipping() {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let dm = bump_raster_2d([0.2, -0.1], 0.3, 60);
    let DMeasure::Raster { density, .. } = &dm else { unreachable!() };
    // Same raster in the planar layout: rows along y.
    let planar = PlanarMeasure::Raster {
        origin: [-1.5, -1.5],
        cell: 3.0 / 60.0,
        grid: (0..60).map(|r| (0..60).map(|c| density[c * 60 + r]).collect()).collect(),
    };
    let prepared = PreparedDMeasure::new(&dm).unwrap();
    for _ in 0..100 {
        let dirs: Vec<Vec<f64>> = (0..2).map(|_| random_direction(&mut rng, 2)).collect();
        let x = random_x(&mut rng, 3, 0);
        let part = nested_partition(&x, &dirs).unwrap();
        for r in &part.regions {
            let mut poly = ConvexPolygon::rectangle(-5.0, -5.0, 5.0, 5.0);
            for h in &r.halfspaces {
                poly = poly.clip(&DirectedLine::new(h.normal[0], h.normal[1], h.offset).unwrap());
            }
            assert!((prepared.measure(r) - measure_of(&planar, &poly)).abs() < 1e-12);
        }
    }
}

fn square(c: [f64; 2], r: f64) -> Vec<Vec<f64>> {
    vec![
        vec![c[0] - r, c[1] - r],
        vec![c[0] + r, c[1] - r],
        vec![c[0] + r, c[1] + r],
        vec![c[0] - r, c[1] + r],
    ]
}

/// Piercing and saturation checks that only use the recursion above.
fn independently_verified(out: &PiercingOutcome, family: &PolytopeFamily, dirs: &[Vec<f64>]) -> bool {
    match out {
        PiercingOutcome::Piercing { certificate, .. } => {
            certificate.cuts.len() == dirs.len()
                && certificate.cuts.iter().zip(dirs).all(|(c, v)| &c.direction == v)
                && family.bodies.iter().all(|b| {
                    certificate.cuts.iter().any(|c| {
                        let p: Vec<f64> = b.iter().map(|v| dot(v, &c.direction)).collect();
                        let lo = p.iter().copied().fold(f64::INFINITY, f64::min);
                        let hi = p.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                        lo <= c.offset + 1e-9 && hi >= c.offset - 1e-9
                    })
                })
        }
        PiercingOutcome::Saturated { witness, .. } => {
            witness.contained.len() == dirs.len() + 1
                && witness.contained.iter().enumerate().all(|(i, &b)| {
                    family.bodies[b]
                        .iter()
                        .all(|v| region_of(witness.x.coords(), dirs, v) == Some(i))
                })
        }
    }
}

#[test]
fn single_body_is_pierced_near_the_middle() {
    let family = PolytopeFamily {
        dimension: 2,
        bodies: vec![square([0.0, 0.0], 0.05)],
    };
    let dirs = vec![vec![1.0, 0.0]];
    let out = hyperplane_piercing_search(&family, &dirs, &Schedule::default()).unwrap();
    let PiercingOutcome::Piercing { certificate, .. } = &out else { panic!("{out:?}") };
    assert!(certificate.cuts[0].offset.abs() <= 0.05);
    assert!((certificate.x[0] - 0.5).abs() < 0.03);
    assert!(independently_verified(&out, &family, &dirs));
}

#[test]
fn one_body_per_region_saturates() {
    let family = PolytopeFamily {
        dimension: 2,
        bodies: vec![square([-2.0, 0.0], 0.1), square([2.0, 0.0], 0.1), square([0.0, -3.0], 0.1)],
    };
    let dirs = vec![vec![1.0, 0.0], vec![0.0, 1.0]];
    let out = hyperplane_piercing_search(&family, &dirs, &Schedule::default()).unwrap();
    assert!(matches!(out, PiercingOutcome::Saturated { .. }), "{out:?}");
    assert!(independently_verified(&out, &family, &dirs));
}

#[test]
fn random_planar_instances_verify() {
    let mut rng = ChaCha8Rng::seed_from_u64(14);
    let (mut pierced, mut saturated) = (0, 0);
    for trial in 0..100 {
        let n = 2 + trial % 2;
        let dirs: Vec<Vec<f64>> = (0..n - 1).map(|_| random_direction(&mut rng, 2)).collect();
        let count = rng.gen_range(1..6);
        let bodies = (0..count)
            .map(|_| {
                let c = Point2::new(rng.gen_range(-1.5..1.5), rng.gen_range(-1.5..1.5));
                let pts: Vec<Point2> = (0..5)
                    .map(|_| c + Point2::new(rng.gen_range(-0.2..0.2), rng.gen_range(-0.2..0.2)))
                    .collect();
                ConvexPolygon::hull(&pts).vertices.iter().map(|p| vec![p.x, p.y]).collect()
            })
            .collect();
        let family = PolytopeFamily { dimension: 2, bodies };
        let out = hyperplane_piercing_search(&family, &dirs, &Schedule::doubling(8, 512))
            .unwrap_or_else(|e| panic!("trial {trial}: {e} {family:?} {dirs:?}"));
        assert!(independently_verified(&out, &family, &dirs), "trial {trial}: {out:?}");
        match out {
            PiercingOutcome::Piercing { .. } => pierced += 1,
            PiercingOutcome::Saturated { .. } => saturated += 1,
        }
    }
    assert!(pierced >= 10 && saturated >= 10, "{pierced} pierced, {saturated} saturated");
}

fn planar_value(m: &DMeasure, region: &kkmw_core::delta::Polyhedron) -> f64 {
    if region.empty {
        return 0.0;
    }
    let DMeasure::Raster { origin, cell, shape, density } = m else { unreachable!() };
    let planar = PlanarMeasure::Raster {
        origin: [origin[0], origin[1]],
        cell: *cell,
        grid: (0..shape[1]).map(|r| (0..shape[0]).map(|c| density[c * shape[1] + r]).collect()).collect(),
    };
    let mut poly = ConvexPolygon::rectangle(-10.0, -10.0, 10.0, 10.0);
    for h in &region.halfspaces {
        poly = poly.clip(&DirectedLine::new(h.normal[0], h.normal[1], h.offset).unwrap());
    }
    measure_of(&planar, &poly)
}

#[test]
fn identical_measures_split_evenly() {
    let m = bump_raster_2d([0.1, 0.2], 0.4, 60);
    let res = envy_free_nested_allocation(&[m.clone(), m.clone()], &[vec![1.0, 0.0]], 1e-3, &Schedule::default())
        .unwrap();
    for r in &res.regions {
        assert!((planar_value(&m, r) - 0.5).abs() <= 1e-3);
    }
}

#[test]
fn separated_measures_take_their_own_side() {
    let left = bump_raster_2d([-0.8, 0.0], 0.1, 60);
    let right = bump_raster_2d([0.8, 0.0], 0.1, 60);
    let res = envy_free_nested_allocation(&[left.clone(), right.clone()], &[vec![1.0, 0.0]], 1e-3, &Schedule::default())
        .unwrap();
    assert!(res.max_envy() <= 1e-3, "{res:?}");
    // Region 0 lies toward negative x.
    assert_eq!(res.permutation, vec![0, 1]);
    let own = |m: &DMeasure, mine: usize| planar_value(m, &res.regions[mine]) - planar_value(m, &res.regions[1 - mine]);
    assert!(own(&left, 0) >= -1e-3 && own(&right, 1) >= -1e-3);
}

#[test]
fn three_random_rasters_envy_free() {
    let mut rng = ChaCha8Rng::seed_from_u64(15);
    for _ in 0..5 {
        let measures: Vec<DMeasure> = (0..3)
            .map(|_| bump_raster_2d([rng.gen_range(-0.7..0.7), rng.gen_range(-0.7..0.7)], rng.gen_range(0.2..0.5), 60))
            .collect();
        let dirs: Vec<Vec<f64>> = (0..2).map(|_| random_direction(&mut rng, 2)).collect();
        let res = envy_free_nested_allocation(&measures, &dirs, 1e-2, &Schedule::default()).unwrap();
        let mut seen = res.permutation.clone();
        seen.sort();
        assert_eq!(seen, vec![0, 1, 2]);
        for (j, m) in measures.iter().enumerate() {
            let vals: Vec<f64> = res.regions.iter().map(|r| planar_value(m, r)).collect();
            let own = vals[res.permutation[j]];
            assert!(vals.iter().all(|&v| v - own <= 1e-2), "measure {j}: {vals:?} own {own}");
        }
    }
}

#[test]
fn thin_saturation_is_found_by_rounding() {
    // Projections are pairwise disjoint on both directions, so nothing
    // pierces; the saturated points lie in a gap of width 0.002, finer than
    // the grid.
    let family: PolytopeFamily = serde_json::from_str(
        r#"{"dimension":2,"bodies":[
            [[0.7605324362375129,0.7704983104193044],[0.8145402830896145,0.5943026584258991],[1.0695987189499352,0.653607351413947],[1.013407372224079,0.7963890328651002]],
            [[0.9721589685785706,-0.7510573531567739],[1.0509250777625034,-0.7993343437398325],[1.2750222329916796,-0.8171512786873303],[1.3192904790478954,-0.6387148996075499]],
            [[0.5972634484314211,-0.43699320850747025],[0.6014871115328189,-0.6197645548924887],[0.8751759099790234,-0.5668644208997364],[0.9527027123484358,-0.4268273079895265]]]}"#,
    )
    .unwrap();
    let dirs = vec![vec![-0.2222751013441755, 0.10661747031263946], vec![0.8341385494069358, -0.3630294418246507]];
    let out = hyperplane_piercing_search(&family, &dirs, &Schedule::doubling(8, 512)).unwrap();
    assert!(matches!(out, PiercingOutcome::Saturated { .. }), "{out:?}");
    assert!(independently_verified(&out, &family, &dirs), "{out:?}");
}
