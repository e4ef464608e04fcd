use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::{ConvexPolygon, DirectedLine, Point2, GEOM_EPS};
use crate::error::{Error, Result};

pub const MAX_TRANSVERSAL_SETS: usize = 8;

/// Two sets whose projections onto the normal at `angle` do not overlap.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Separation {
    pub angle: f64,
    pub first: usize,
    pub second: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Transversal {
    pub exists: bool,
    pub witness: Option<DirectedLine>,
    /// One separated pair per candidate direction when no transversal exists.
    pub refutation: Vec<Separation>,
}

/// Largest lower end and smallest upper end of the projections onto the
/// unit normal at `angle`, with the polygons attaining them.
fn overlap(polygons: &[ConvexPolygon], angle: f64) -> (f64, usize, f64, usize) {
    let dir = Point2::polar(1.0, angle);
    let mut best = (f64::NEG_INFINITY, 0, f64::INFINITY, 0);
    for (i, p) in polygons.iter().enumerate() {
        let (lo, hi) = p.projection(dir);
        if lo > best.0 {
            best.0 = lo;
            best.1 = i;
        }
        if hi < best.2 {
            best.2 = hi;
            best.3 = i;
        }
    }
    best
}

/// Decides whether some line meets every polygon.
///
/// A line with normal direction `θ` meets all sets iff their projections onto
/// that normal share a point. The overlap can only open or close at
/// directions where two vertices project to the same value, so those
/// directions plus one direction inside each gap between them are
/// sufficient.
pub fn line_transversal_exists(polygons: &[ConvexPolygon]) -> Result<Transversal> {
    if polygons.len() > MAX_TRANSVERSAL_SETS {
        return Err(Error::PreconditionFailed(format!(
            "at most {MAX_TRANSVERSAL_SETS} sets are supported, got {}",
            polygons.len()
        )));
    }
    if polygons.iter().any(ConvexPolygon::is_empty) {
        return Ok(Transversal {
            exists: false,
            witness: None,
            refutation: vec![],
        });
    }
    let verts: Vec<Point2> = polygons.iter().flat_map(|p| p.vertices.iter().copied()).collect();
    let mut angles = vec![0.0];
    for (i, &a) in verts.iter().enumerate() {
        for &b in &verts[i + 1..] {
            let d = b - a;
            if d.norm() > 0.0 {
                // The normal is perpendicular to the difference.
                angles.push(d.perp().y.atan2(d.perp().x).rem_euclid(PI));
            }
        }
    }
    angles.sort_by(f64::total_cmp);
    angles.dedup();
    let mut candidates = angles.clone();
    for (i, &a) in angles.iter().enumerate() {
        let b = angles.get(i + 1).copied().unwrap_or(angles[0] + PI);
        candidates.push(0.5 * (a + b));
    }

    let mut refutation = vec![];
    for &angle in &candidates {
        let (lo, first, hi, second) = overlap(polygons, angle);
        if lo <= hi + GEOM_EPS {
            return Ok(Transversal {
                exists: true,
                witness: Some(DirectedLine::with_normal_angle(angle, 0.5 * (lo + hi))),
                refutation: vec![],
            });
        }
        // `second` ends below where `first` starts.
        refutation.push(Separation {
            angle,
            first: second,
            second: first,
        });
    }
    Ok(Transversal {
        exists: false,
        witness: None,
        refutation,
    })
}
