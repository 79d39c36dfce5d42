//! Shared inputs for the benchmarks.

use std::sync::Arc;

use rbmo_core::{Cube, FiltrationFamily, Generator, LatticeParams, Point, PointMeasure};

pub fn uniform(points: usize, dim: usize) -> Arc<PointMeasure> {
    Arc::new(Generator::UniformCube { points, dim }.generate(1).expect("valid generator"))
}

pub fn relaxed_family(mu: &Arc<PointMeasure>) -> FiltrationFamily {
    FiltrationFamily::new(mu.clone(), LatticeParams::relaxed(mu.dim())).expect("relaxed parameters are legal")
}

/// Cubes of side `2^-k`, `k = 1..=levels`, centered at the first support points.
pub fn support_cubes(mu: &PointMeasure, count: usize, levels: i32) -> Vec<Cube> {
    let mut out = Vec::new();
    for x in mu.points().iter().take(count) {
        for k in 1..=levels {
            out.push(Cube::new(*x, 2f64.powi(-k)).expect("positive side"));
        }
    }
    out
}

pub fn shifted(x: &Point, by: f64) -> Point {
    let c: Vec<f64> = x.coords().iter().map(|v| v + by).collect();
    Point::new(&c).expect("finite coordinates")
}
