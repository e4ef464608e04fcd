//! Deterministic instances shared by the benchmarks.

use std::f64::consts::TAU;

use kkmw_core::fair::CakeValuation;
use kkmw_core::interval::Interval;
use kkmw_core::planar::{ConvexPolygon, PlanarMeasure, Point2};

/// `n` intervals spread over `[0, 1]` with a golden-ratio stride.
pub fn interval_family(n: usize, len: f64) -> Vec<Interval> {
    (0..n)
        .map(|i| {
            let a = (i as f64 * 0.618_033_988_75).fract();
            Interval::new(a, a + len).unwrap()
        })
        .collect()
}

/// Piecewise-constant players with staggered bumps.
pub fn cake_players(n: usize) -> Vec<CakeValuation> {
    (0..n)
        .map(|j| {
            let c = (j as f64 + 0.5) / n as f64;
            let (a, b) = ((c - 0.15).max(0.0), (c + 0.15).min(1.0));
            CakeValuation {
                breakpoints: vec![0.0, a, b, 1.0],
                densities: vec![0.5, 3.0, 0.5],
            }
            .normalized()
            .unwrap()
        })
        .collect()
}

/// Gaussian bump rasterized on the disk's bounding square.
pub fn bump_raster(cx: f64, cy: f64, sigma: f64, n: usize) -> PlanarMeasure {
    let h = 2.0 / n as f64;
    let grid = (0..n)
        .map(|r| {
            (0..n)
                .map(|c| {
                    let (x, y) = (-1.0 + (c as f64 + 0.5) * h, -1.0 + (r as f64 + 0.5) * h);
                    if x.hypot(y) > 1.0 - h {
                        return 0.0;
                    }
                    let (dx, dy) = (x - cx, y - cy);
                    (-(dx * dx + dy * dy) / (2.0 * sigma * sigma)).exp()
                })
                .collect()
        })
        .collect();
    PlanarMeasure::Raster { origin: [-1.0, -1.0], cell: h, grid }.normalized().unwrap()
}

/// Four families of small squares on concentric rings: no two lines pierce
/// any of them.
pub fn ring_families() -> Vec<Vec<ConvexPolygon>> {
    (0..4)
        .map(|i| {
            (0..12)
                .map(|k| ConvexPolygon::regular(Point2::polar(0.35, 0.11 * i as f64 + TAU * k as f64 / 12.0), 0.02, 4))
                .collect()
        })
        .collect()
}
