//! The scale-distance functional `δ(Q, R)`.
//!
//! For cubes, `δ(Q,R) = 1 + Σ_{y ∈ 2R \ 2Q} w(y) / |x_Q - y|^n`. For atoms of a
//! filtration the cubes are replaced by `α`-dilates of the associated balls and
//! the base point by the center of `B_Q`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Ball, Cube, Point, Region};
use crate::lattice::{AtomId, Filtration};
use crate::measure::PointMeasure;

/// A value of `δ`, optionally with its per-atom terms.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DeltaValue {
    pub value: f64,
    /// `(support index, w(y) / |x - y|^n)` in index order.
    pub terms: Option<Vec<(u32, f64)>>,
}

/// `1 + Σ w(y) / |base - y|^n` over support points in `outer \ inner`,
/// summed in index order so that enlarging `outer` never decreases the value.
fn kernel_sum(mu: &PointMeasure, base: &Point, outer: &Region, inner: &Region, audit: bool) -> Result<DeltaValue> {
    let n = mu.growth_exp();
    let pts = mu.points();
    let w = mu.weights();
    if outer.dim() != mu.dim() || inner.dim() != mu.dim() || base.dim() != mu.dim() {
        return Err(Error::DimensionMismatch {
            expected: mu.dim(),
            found: outer.dim(),
        });
    }
    let mut idx = Vec::new();
    mu.index().for_each_in(outer, Some(inner), |i| idx.push(i));
    idx.sort_unstable();
    let mut sum = 1.0;
    let mut terms = audit.then(Vec::new);
    for i in idx {
        let y = &pts[i];
        let dist = base.dist(y);
        if dist <= 0.0 {
            return Err(Error::InvariantBreach(format!(
                "support point {i} coincides with the base point"
            )));
        }
        let t = w[i] / dist.powf(n);
        sum += t;
        if let Some(v) = terms.as_mut() {
            v.push((i as u32, t));
        }
    }
    Ok(DeltaValue { value: sum, terms })
}

/// Whether `1 + Σ` over `outer \ inner` reaches `limit`, visiting the nearest
/// points first and stopping early.
fn kernel_reaches(mu: &PointMeasure, base: &Point, outer: &Region, inner: &Region, limit: f64) -> bool {
    if limit <= 1.0 {
        return true;
    }
    let n = mu.growth_exp();
    let w = mu.weights();
    mu.index()
        .nearest_first_sum(base, outer, inner, limit - 1.0, |i, d| w[i] / d.powf(n))
        .1
}

/// Whether `δ(Q, R) ≥ limit` for cubes, up to summation order.
pub(crate) fn cubes_reach(mu: &PointMeasure, q: &Cube, r: &Cube, limit: f64) -> Result<bool> {
    Ok(kernel_reaches(
        mu,
        &q.center(),
        &Region::Cube(r.dilate(2.0)?),
        &Region::Cube(q.dilate(2.0)?),
        limit,
    ))
}

/// Whether the ball form of `δ` reaches `limit`, up to summation order.
pub(crate) fn balls_reach(mu: &PointMeasure, bq: &Ball, br: &Ball, alpha: f64, limit: f64) -> Result<bool> {
    Ok(kernel_reaches(
        mu,
        &bq.center(),
        &Region::Ball(br.dilate(alpha)?),
        &Region::Ball(bq.dilate(alpha)?),
        limit,
    ))
}

/// `δ(Q, R)` for cubes with intersecting bodies.
pub fn delta_cubes(mu: &PointMeasure, q: &Cube, r: &Cube) -> Result<DeltaValue> {
    cubes(mu, q, r, false)
}

/// [`delta_cubes`] with the per-atom breakdown.
pub fn delta_cubes_audit(mu: &PointMeasure, q: &Cube, r: &Cube) -> Result<DeltaValue> {
    cubes(mu, q, r, true)
}

fn cubes(mu: &PointMeasure, q: &Cube, r: &Cube, audit: bool) -> Result<DeltaValue> {
    if q.dim() != r.dim() {
        return Err(Error::DimensionMismatch {
            expected: q.dim(),
            found: r.dim(),
        });
    }
    if !q.intersects(r) {
        return Err(Error::EmptyIntersection);
    }
    kernel_sum(
        mu,
        &q.center(),
        &Region::Cube(r.dilate(2.0)?),
        &Region::Cube(q.dilate(2.0)?),
        audit,
    )
}

/// `1 + Σ_{y ∈ αB_R \ αB_Q} w(y) / |x_{B_Q} - y|^n` for arbitrary balls.
pub fn delta_balls(mu: &PointMeasure, bq: &Ball, br: &Ball, alpha: f64) -> Result<DeltaValue> {
    kernel_sum(
        mu,
        &bq.center(),
        &Region::Ball(br.dilate(alpha)?),
        &Region::Ball(bq.dilate(alpha)?),
        false,
    )
}

/// `δ(Q, R)` for atoms `Q ⊂ R` of one filtration.
pub fn delta_dm(mu: &PointMeasure, f: &Filtration, q: AtomId, r: AtomId, alpha: f64) -> Result<DeltaValue> {
    let (aq, ar) = (f.atom(q)?, f.atom(r)?);
    if q.level < r.level || f.ancestor_or_self(q, (q.level - r.level) as usize)? != r {
        return Err(Error::NotNested);
    }
    if q == r {
        return Ok(DeltaValue {
            value: 1.0,
            terms: None,
        });
    }
    delta_balls(mu, &aq.ball, &ar.ball, alpha)
}

/// `δ(Q, parent(Q))` for every non-root atom, level by level.
pub fn parent_deltas(mu: &PointMeasure, f: &Filtration, alpha: f64) -> Result<Vec<(AtomId, f64)>> {
    let mut out = Vec::new();
    for (id, atom) in f.atoms() {
        if atom.parent.is_some() {
            let p = f.parent(id)?;
            out.push((id, delta_dm(mu, f, id, p, alpha)?.value));
        }
    }
    Ok(out)
}

/// Upper bound for `δ(Q, R)` when `Q ∩ R ≠ ∅`, `1 ≤ ℓ(R)/ℓ(Q) ≤ scale_ratio`
/// and `μ(B(y, s)) ≤ c_mu s^n` holds for support points `y` on a geometric
/// radius grid of ratio `grid_ratio` that reaches down to `ℓ(Q)`.
///
/// Points of `2R \ 2Q` sit at distance `ρ ∈ [ℓ, √d (1/2 + 3t/2) ℓ]` from
/// `x_Q`. Shell `j` (`2^j ℓ ≤ ρ < 2^{j+1} ℓ`) lies in `B(y₀, 2^{j+2} ℓ)` for any
/// of its points `y₀` and contributes at most `c_mu grid_ratio^n 4^n`.
pub fn comparable_scale_bound(dim: usize, n: f64, c_mu: f64, grid_ratio: f64, scale_ratio: f64) -> f64 {
    let reach = (dim as f64).sqrt() * (0.5 + 1.5 * scale_ratio);
    let shells = reach.log2().floor() + 1.0;
    1.0 + shells * c_mu * grid_ratio.powf(n) * 4f64.powf(n)
}
