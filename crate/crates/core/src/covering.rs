//! Vitali 5R covering with pre-seeded balls, and largest doubling balls on a radius grid.

use rustc_hash::FxHashMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Ball, Point, Region, MAX_DIM};
use crate::measure::PointMeasure;

/// Ball proposed for the point of `E` with index `point`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    pub point: usize,
    pub ball: Ball,
}

/// Where a selected ball came from.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Origin {
    /// Index into the pre-seeded family.
    Preseeded(usize),
    /// Index of the point of `E` that proposed the ball.
    Candidate(usize),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoverResult {
    pub selected: Vec<Ball>,
    pub origin: Vec<Origin>,
    /// For each point of `E`, the selected ball minimizing `|x - c| / r` among
    /// those whose 5-dilate contains it (ties to the lower index).
    pub witness: Vec<usize>,
    /// Rejected candidates as `(point, selected ball it meets)`.
    pub rejected: Vec<(usize, usize)>,
}

impl CoverResult {
    pub fn preseeded_flags(&self) -> Vec<bool> {
        self.origin
            .iter()
            .map(|o| matches!(o, Origin::Preseeded(_)))
            .collect()
    }
}

/// Uniform hash grid over ball centers.
struct BallGrid {
    dim: usize,
    cell: f64,
    buckets: FxHashMap<[i64; MAX_DIM], Vec<usize>>,
}

impl BallGrid {
    fn new(dim: usize, cell: f64) -> Self {
        Self {
            dim,
            cell,
            buckets: FxHashMap::default(),
        }
    }

    fn key(&self, p: &Point) -> [i64; MAX_DIM] {
        let mut k = [0i64; MAX_DIM];
        for (a, slot) in k.iter_mut().enumerate().take(self.dim) {
            *slot = (p.coords()[a] / self.cell).floor() as i64;
        }
        k
    }

    fn insert(&mut self, p: &Point, id: usize) {
        self.buckets.entry(self.key(p)).or_default().push(id);
    }

    /// Visit ids stored within `reach` cells of `p` along every axis until
    /// `f` returns `true`; returns that id.
    fn find_near(&self, p: &Point, reach: i64, mut f: impl FnMut(usize) -> bool) -> Option<usize> {
        let base = self.key(p);
        let span = (2 * reach + 1) as usize;
        for flat in 0..span.pow(self.dim as u32) {
            let mut key = base;
            let mut rem = flat;
            for slot in key.iter_mut().take(self.dim) {
                *slot += (rem % span) as i64 - reach;
                rem /= span;
            }
            if let Some(ids) = self.buckets.get(&key) {
                if let Some(&id) = ids.iter().find(|&&id| f(id)) {
                    return Some(id);
                }
            }
        }
        None
    }
}

/// Greedy disjoint selection: every pre-seeded ball first, then the candidates
/// of points outside `∪B₀` by decreasing radius (ties by point index).
///
/// Candidates attached to points already inside `∪B₀` are ignored.
pub fn vitali_preseeded(points: &[Point], b0: &[Ball], candidates: &[Candidate]) -> Result<CoverResult> {
    let all: Vec<usize> = (0..points.len()).collect();
    vitali_select(points, b0, candidates, &all)
}

/// [`vitali_preseeded`] reporting witnesses only for the points in `witness_for`,
/// in that order.
pub(crate) fn vitali_select(
    points: &[Point],
    b0: &[Ball],
    candidates: &[Candidate],
    witness_for: &[usize],
) -> Result<CoverResult> {
    let dim = match (points.first(), b0.first()) {
        (Some(p), _) => p.dim(),
        (None, Some(b)) => b.dim(),
        (None, None) => return Ok(CoverResult::default_empty()),
    };
    let dim_err = |found| Error::DimensionMismatch { expected: dim, found };
    for p in points {
        if p.dim() != dim {
            return Err(dim_err(p.dim()));
        }
    }
    for b in b0.iter().chain(candidates.iter().map(|c| &c.ball)) {
        if b.dim() != dim {
            return Err(dim_err(b.dim()));
        }
    }

    let big_r = b0.first().map(|b| b.radius());
    if let Some(r) = big_r {
        if let Some(b) = b0.iter().find(|b| b.radius() != r) {
            return Err(Error::CoveringPrecondition(format!(
                "pre-seeded radii differ: {} and {}",
                r,
                b.radius()
            )));
        }
        if let Some(c) = candidates.iter().find(|c| c.ball.radius() > r) {
            return Err(Error::CoveringPrecondition(format!(
                "candidate radius {} at point {} exceeds pre-seeded radius {}",
                c.ball.radius(),
                c.point,
                r
            )));
        }
    }
    if let Some(c) = candidates.iter().find(|c| c.point >= points.len()) {
        return Err(Error::CoveringPrecondition(format!(
            "candidate refers to missing point {}",
            c.point
        )));
    }

    let r_max = candidates
        .iter()
        .map(|c| c.ball.radius())
        .chain(big_r)
        .fold(0.0f64, f64::max);
    let cell = if r_max > 0.0 { 2.0 * r_max } else { 1.0 };
    let mut grid = BallGrid::new(dim, cell);
    let mut selected: Vec<Ball> = Vec::new();
    let mut origin = Vec::new();

    for (i, b) in b0.iter().enumerate() {
        if let Some(j) = grid.find_near(&b.center, 1, |j| selected[j].intersects(b)) {
            return Err(Error::CoveringPrecondition(format!(
                "pre-seeded balls {j} and {i} intersect"
            )));
        }
        grid.insert(&b.center, selected.len());
        selected.push(*b);
        origin.push(Origin::Preseeded(i));
    }

    let covered: Vec<bool> = if b0.is_empty() {
        vec![false; points.len()]
    } else {
        points
            .iter()
            .map(|x| grid.find_near(x, 1, |j| selected[j].contains_point(x)).is_some())
            .collect()
    };
    let mut seen = vec![false; points.len()];
    let mut order: Vec<&Candidate> = Vec::new();
    for c in candidates {
        if covered[c.point] {
            continue;
        }
        if std::mem::replace(&mut seen[c.point], true) {
            return Err(Error::CoveringPrecondition(format!(
                "point {} has two candidates",
                c.point
            )));
        }
        order.push(c);
    }
    if let Some(i) = (0..points.len()).find(|&i| !covered[i] && !seen[i]) {
        return Err(Error::CoveringPrecondition(format!(
            "point {i} lies outside the pre-seeded balls and has no candidate"
        )));
    }
    order.sort_by(|a, b| {
        b.ball
            .radius()
            .total_cmp(&a.ball.radius())
            .then(a.point.cmp(&b.point))
    });

    let mut rejected = Vec::new();
    for c in order {
        match grid.find_near(&c.ball.center, 1, |j| selected[j].intersects(&c.ball)) {
            Some(j) => rejected.push((c.point, j)),
            None => {
                grid.insert(&c.ball.center, selected.len());
                selected.push(c.ball);
                origin.push(Origin::Candidate(c.point));
            }
        }
    }

    let mut wgrid = BallGrid::new(dim, 5.0 * cell / 2.0);
    for (j, b) in selected.iter().enumerate() {
        wgrid.insert(&b.center, j);
    }
    let mut witness = Vec::with_capacity(witness_for.len());
    for &i in witness_for {
        let x = &points[i];
        let mut w: Option<(f64, usize)> = None;
        wgrid.find_near(x, 1, |j| {
            let b = &selected[j];
            let d = x.dist(&b.center);
            if d <= 5.0 * b.radius() {
                let ratio = d / b.radius();
                if w.map_or(true, |(r, k)| ratio < r || (ratio == r && j < k)) {
                    w = Some((ratio, j));
                }
            }
            false
        });
        let w = w.map(|(_, j)| j);
        match w {
            Some(j) => witness.push(j),
            None => {
                return Err(Error::InvariantBreach(format!(
                    "point {i} is outside every 5-dilate of the selected balls"
                )))
            }
        }
    }

    Ok(CoverResult {
        selected,
        origin,
        witness,
        rejected,
    })
}

impl CoverResult {
    fn default_empty() -> Self {
        Self {
            selected: Vec::new(),
            origin: Vec::new(),
            witness: Vec::new(),
            rejected: Vec::new(),
        }
    }
}

/// Result of a grid search for a doubling ball.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DoublingBall {
    pub ball: Ball,
    /// `false` when no grid radius was doubling and the ball is the `r_min` fallback.
    pub doubling: bool,
}

/// The ball `B(x, r)` with the largest grid radius `r ∈ [r_min, r_max]` that is
/// `(α, β)`-doubling, or `B(x, r_min)` when there is none.
pub fn largest_doubling_ball(
    mu: &PointMeasure,
    x: &Point,
    alpha: f64,
    beta: f64,
    r_min: f64,
    r_max: f64,
    radius_grid: &[f64],
) -> Result<DoublingBall> {
    if !(r_min > 0.0 && r_min <= r_max) {
        return Err(Error::InvalidParams(format!(
            "radius window [{r_min}, {r_max}] is empty"
        )));
    }
    let mut radii: Vec<f64> = radius_grid
        .iter()
        .copied()
        .filter(|r| (r_min..=r_max).contains(r))
        .collect();
    if radii.is_empty() {
        return Err(Error::InvalidParams(format!(
            "no grid radius in [{r_min}, {r_max}]"
        )));
    }
    radii.sort_by(|a, b| b.total_cmp(a));
    for r in radii {
        let ball = Ball::new(*x, r)?;
        if mu.is_doubling(&Region::Ball(ball), alpha, beta)? {
            return Ok(DoublingBall { ball, doubling: true });
        }
    }
    Ok(DoublingBall {
        ball: Ball::new(*x, r_min)?,
        doubling: false,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(c: f64) -> Point {
        Point::new(&[c]).unwrap()
    }

    fn ball(c: f64, r: f64) -> Ball {
        Ball::new(p(c), r).unwrap()
    }

    #[test]
    fn preseeded_only() {
        let b0 = [ball(0.0, 1.0), ball(5.0, 1.0)];
        let res = vitali_preseeded(&[p(0.0), p(5.0)], &b0, &[]).unwrap();
        assert_eq!(res.selected, b0);
        assert_eq!(res.witness, vec![0, 1]);
        assert_eq!(res.preseeded_flags(), vec![true, true]);
    }

    #[test]
    fn distant_candidate_is_kept() {
        let c = Candidate {
            point: 1,
            ball: ball(10.0, 1.0),
        };
        let res = vitali_preseeded(&[p(0.0), p(10.0)], &[ball(0.0, 1.0)], &[c]).unwrap();
        assert_eq!(res.selected.len(), 2);
        assert_eq!(res.origin[1], Origin::Candidate(1));
    }

    #[test]
    fn intersecting_candidate_is_rejected_but_covered() {
        let c = Candidate {
            point: 1,
            ball: ball(1.5, 1.0),
        };
        let res = vitali_preseeded(&[p(0.0), p(1.5)], &[ball(0.0, 1.0)], &[c]).unwrap();
        assert_eq!(res.selected.len(), 1);
        assert_eq!(res.rejected, vec![(1, 0)]);
        assert_eq!(res.witness, vec![0, 0]);

        // a candidate of a point already inside B0 is ignored
        let c = Candidate {
            point: 1,
            ball: ball(0.5, 1.0),
        };
        let res = vitali_preseeded(&[p(0.0), p(0.5)], &[ball(0.0, 1.0)], &[c]).unwrap();
        assert!(res.rejected.is_empty());

    }

    #[test]
    fn precondition_errors() {
        let overlapping = [ball(0.0, 1.0), ball(1.5, 1.0)];
        assert!(matches!(
            vitali_preseeded(&[], &overlapping, &[]),
            Err(Error::CoveringPrecondition(_))
        ));
        let unequal = [ball(0.0, 1.0), ball(5.0, 2.0)];
        assert!(vitali_preseeded(&[], &unequal, &[]).is_err());
        let big = Candidate {
            point: 0,
            ball: ball(9.0, 2.0),
        };
        assert!(vitali_preseeded(&[p(9.0)], &[ball(0.0, 1.0)], &[big]).is_err());
        assert!(vitali_preseeded(&[p(9.0)], &[ball(0.0, 1.0)], &[]).is_err());
    }

    #[test]
    fn largest_doubling_examples() {
        let mu = PointMeasure::new(1, 1.0, vec![p(0.0), p(3.0)], vec![1.0, 100.0]).unwrap();
        let b = largest_doubling_ball(&mu, &p(0.0), 2.0, 10.0, 1.0, 2.0, &[1.0, 2.0]).unwrap();
        assert_eq!(b.ball, ball(0.0, 1.0));
        assert!(b.doubling);

        let single = PointMeasure::new(1, 1.0, vec![p(0.0)], vec![1.0]).unwrap();
        let b = largest_doubling_ball(&single, &p(0.0), 2.0, 1.0, 0.5, 3.0, &[0.5, 1.0, 2.0, 4.0]).unwrap();
        assert_eq!(b.ball.radius(), 2.0);

        let b = largest_doubling_ball(&mu, &p(0.0), 4.0, 10.0, 1.0, 2.0, &[1.0, 2.0]).unwrap();
        assert!(!b.doubling);
        assert_eq!(b.ball, ball(0.0, 1.0));

        assert!(largest_doubling_ball(&mu, &p(0.0), 2.0, 10.0, 5.0, 6.0, &[1.0]).is_err());
    }
}
