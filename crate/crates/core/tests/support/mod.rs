//! Brute-force oracles shared by the integration tests. Nothing here calls
//! into the library's spatial index, δ engine or norm engines.
#![allow(dead_code)]

use std::collections::HashMap;

use rbmo_core::{Ball, Cube, DyadicSystem, Filtration, NormParams, Point, PointMeasure};

pub fn in_cube(q: &Cube, x: &Point) -> bool {
    let c = x.coords();
    (0..c.len()).all(|i| q.lo()[i] <= c[i] && c[i] < q.hi()[i])
}

pub fn in_ball(b: &Ball, x: &Point) -> bool {
    b.center().dist(x) <= b.radius()
}

pub fn cube_in_cube(inner: &Cube, outer: &Cube) -> bool {
    (0..inner.dim()).all(|i| outer.lo()[i] <= inner.lo()[i] && inner.hi()[i] <= outer.hi()[i])
}

pub fn mass_where(mu: &PointMeasure, keep: impl Fn(&Point) -> bool) -> f64 {
    mu.points()
        .iter()
        .zip(mu.weights())
        .filter(|(x, _)| keep(x))
        .map(|(_, w)| w)
        .sum()
}

pub fn doubling_cube(mu: &PointMeasure, q: &Cube, alpha: f64, beta: f64) -> bool {
    let m = mass_where(mu, |x| in_cube(q, x));
    let big = q.dilate(alpha).unwrap();
    m > 0.0 && mass_where(mu, |x| in_cube(&big, x)) <= beta * m
}

/// `(mass, average, mean oscillation)` of `f` over the points kept, in two passes.
pub fn stats(mu: &PointMeasure, f: &[f64], keep: impl Fn(usize) -> bool) -> Option<(f64, f64, f64)> {
    let w = mu.weights();
    let (mut m, mut s) = (0.0, 0.0);
    for i in (0..mu.len()).filter(|&i| keep(i)) {
        m += w[i];
        s += w[i] * f[i];
    }
    if m == 0.0 {
        return None;
    }
    let a = s / m;
    let dev: f64 = (0..mu.len()).filter(|&i| keep(i)).map(|i| w[i] * (f[i] - a).abs()).sum();
    Some((m, a, dev / m))
}

fn kernel(mu: &PointMeasure, base: &Point, keep: impl Fn(&Point) -> bool) -> f64 {
    let n = mu.growth_exp();
    1.0 + mu
        .points()
        .iter()
        .zip(mu.weights())
        .filter(|(y, _)| keep(y))
        .map(|(y, w)| w / base.dist(y).powf(n))
        .sum::<f64>()
}

pub fn delta_cubes(mu: &PointMeasure, q: &Cube, r: &Cube) -> f64 {
    let (q2, r2) = (q.dilate(2.0).unwrap(), r.dilate(2.0).unwrap());
    kernel(mu, &q.center(), |y| in_cube(&r2, y) && !in_cube(&q2, y))
}

pub fn delta_balls(mu: &PointMeasure, bq: &Ball, br: &Ball, alpha: f64) -> f64 {
    let (q, r) = (bq.dilate(alpha).unwrap(), br.dilate(alpha).unwrap());
    kernel(mu, &bq.center(), |y| in_ball(&r, y) && !in_ball(&q, y))
}

/// Oscillation sup and nested-pair quotient sup over the doubling cubes of
/// `cubes`, pairs being all `i ≠ j` with `cubes[i] ⊂ cubes[j]`.
pub fn cube_norm_parts(mu: &PointMeasure, f: &[f64], cubes: &[Cube], p: NormParams) -> (f64, f64) {
    let st: Vec<Option<(f64, f64, f64)>> = cubes
        .iter()
        .map(|q| {
            if doubling_cube(mu, q, p.alpha, p.beta) {
                stats(mu, f, |i| in_cube(q, &mu.points()[i]))
            } else {
                None
            }
        })
        .collect();
    let osc = st.iter().flatten().map(|s| s.2).fold(0.0, f64::max);
    let mut jump: f64 = 0.0;
    for (i, a) in st.iter().enumerate() {
        for (j, b) in st.iter().enumerate() {
            if let (Some(a), Some(b)) = (a, b) {
                if i != j && cube_in_cube(&cubes[i], &cubes[j]) {
                    jump = jump.max((a.1 - b.1).abs() / delta_cubes(mu, &cubes[i], &cubes[j]));
                }
            }
        }
    }
    (osc, jump)
}

/// Per-atom `(average, oscillation)` by level, from the member lists.
fn atom_stats(mu: &PointMeasure, f: &[f64], filt: &Filtration) -> Vec<Vec<(f64, f64)>> {
    let mut out = Vec::new();
    for l in 0..filt.depth() {
        let mut v = Vec::new();
        for i in 0..filt.levels()[l].atoms.len() {
            let mut inside = vec![false; mu.len()];
            for &p in filt.members(rbmo_core::AtomId::new(l, i)).unwrap() {
                inside[p as usize] = true;
            }
            let s = stats(mu, f, |k| inside[k]).expect("atoms carry mass");
            v.push((s.1, s.2));
        }
        out.push(v);
    }
    out
}

pub fn sigma_norm(mu: &PointMeasure, f: &[f64], filt: &Filtration) -> f64 {
    let st = atom_stats(mu, f, filt);
    let mut best: f64 = 0.0;
    for (l, level) in filt.levels().iter().enumerate() {
        for (i, a) in level.atoms.iter().enumerate() {
            let jump = a.parent.map_or(0.0, |p| (st[l][i].0 - st[l - 1][p as usize].0).abs());
            best = best.max(st[l][i].1 + jump);
        }
    }
    best
}

/// `(oscillation sup, ancestor quotient sup)`.
pub fn sigma_star_parts(mu: &PointMeasure, f: &[f64], filt: &Filtration) -> (f64, f64) {
    let st = atom_stats(mu, f, filt);
    let alpha = filt.params().alpha;
    let levels = filt.levels();
    let (mut osc, mut jump): (f64, f64) = (0.0, 0.0);
    for (l, level) in levels.iter().enumerate() {
        for (i, a) in level.atoms.iter().enumerate() {
            osc = osc.max(st[l][i].1);
            let (mut ul, mut ui) = (l, i);
            while let Some(p) = levels[ul].atoms[ui].parent {
                ul -= 1;
                ui = p as usize;
                let d = delta_balls(mu, &a.ball, &levels[ul].atoms[ui].ball, alpha);
                jump = jump.max((st[l][i].0 - st[ul][ui].0).abs() / d);
            }
        }
    }
    (osc, jump)
}

/// Doubling cubes of one dyadic system over `coarse..=fine` meeting the
/// support, found by locating every point at every generation.
pub fn dyadic_cubes(mu: &PointMeasure, sys: &DyadicSystem, p: NormParams, coarse: i32, fine: i32) -> Vec<(i32, Cube)> {
    let mut out = Vec::new();
    for g in coarse..=fine {
        let mut seen = HashMap::new();
        for x in mu.points() {
            let pos = sys.locate(x, g);
            seen.entry(pos).or_insert_with(|| sys.cube(g, &pos));
        }
        let mut cubes: Vec<_> = seen.into_iter().collect();
        cubes.sort_by_key(|(pos, _)| *pos);
        out.extend(cubes.into_iter().filter(|(_, q)| doubling_cube(mu, q, p.alpha, p.beta)).map(|(_, q)| (g, q)));
    }
    out
}

/// `(oscillation sup, nested-pair quotient sup)` for one dyadic system;
/// `R` is an ancestor of `Q` when it is the cube of its generation holding
/// the center of `Q`.
pub fn dyadic_parts(mu: &PointMeasure, f: &[f64], sys: &DyadicSystem, p: NormParams, coarse: i32, fine: i32) -> (f64, f64) {
    let cubes = dyadic_cubes(mu, sys, p, coarse, fine);
    let st: Vec<(f64, f64, f64)> = cubes
        .iter()
        .map(|(_, q)| stats(mu, f, |i| in_cube(q, &mu.points()[i])).unwrap())
        .collect();
    let osc = st.iter().map(|s| s.2).fold(0.0, f64::max);
    let mut jump: f64 = 0.0;
    for (i, (gi, q)) in cubes.iter().enumerate() {
        for (j, (gj, r)) in cubes.iter().enumerate() {
            if gj < gi && sys.cube_containing(&q.center(), *gj).1 == *r {
                jump = jump.max((st[i].1 - st[j].1).abs() / delta_cubes(mu, q, r));
            }
        }
    }
    (osc, jump)
}

/// Bucket grid over the support for range queries at large sizes.
pub struct Buckets<'a> {
    mu: &'a PointMeasure,
    cell: f64,
    map: HashMap<Vec<i64>, Vec<usize>>,
}

impl<'a> Buckets<'a> {
    pub fn new(mu: &'a PointMeasure, cell: f64) -> Self {
        let mut map: HashMap<Vec<i64>, Vec<usize>> = HashMap::new();
        for (i, x) in mu.points().iter().enumerate() {
            map.entry(Self::key(x.coords(), cell)).or_default().push(i);
        }
        Self { mu, cell, map }
    }

    fn key(c: &[f64], cell: f64) -> Vec<i64> {
        c.iter().map(|v| (v / cell).floor() as i64).collect()
    }

    /// Indices of support points in the closed box `[lo, hi]`, unsorted.
    pub fn in_box(&self, lo: &[f64], hi: &[f64]) -> Vec<usize> {
        let a = Self::key(lo, self.cell);
        let b = Self::key(hi, self.cell);
        let cells: f64 = a.iter().zip(&b).map(|(x, y)| (y - x + 1) as f64).product();
        let inside = |i: &usize| {
            let c = self.mu.points()[*i].coords();
            (0..c.len()).all(|k| lo[k] <= c[k] && c[k] <= hi[k])
        };
        if cells > self.map.len() as f64 {
            return self.map.values().flatten().copied().filter(inside).collect();
        }
        let mut out = Vec::new();
        let mut key = a.clone();
        loop {
            if let Some(v) = self.map.get(&key) {
                out.extend(v.iter().copied().filter(inside));
            }
            let mut k = 0;
            loop {
                if k == key.len() {
                    return out;
                }
                key[k] += 1;
                if key[k] <= b[k] {
                    break;
                }
                key[k] = a[k];
                k += 1;
            }
        }
    }

    pub fn in_ball(&self, ball: &Ball) -> Vec<usize> {
        let c = ball.center();
        let r = ball.radius();
        let lo: Vec<f64> = c.coords().iter().map(|v| v - r).collect();
        let hi: Vec<f64> = c.coords().iter().map(|v| v + r).collect();
        self.in_box(&lo, &hi)
            .into_iter()
            .filter(|&i| in_ball(ball, &self.mu.points()[i]))
            .collect()
    }

    pub fn mass_in_ball(&self, ball: &Ball) -> f64 {
        self.in_ball(ball).iter().map(|&i| self.mu.weights()[i]).sum()
    }
}

/// Every structural property of a filtration, checked from its member lists:
/// per-level partition, nesting, `B_T ∩ supp ⊂ T ⊂ 5 B_T`, the doubling
/// bound, disjointness of fresh balls and realization of `preseeds`.
/// Returns one message per violation.
pub fn filtration_violations(
    mu: &PointMeasure,
    grid: &Buckets,
    filt: &Filtration,
    preseeds: &[rbmo_core::DyadicTag],
) -> Vec<String> {
    let n = mu.len();
    let pts = mu.points();
    let alpha = filt.params().alpha;
    let c0 = filt.params().c0();
    let mut bad = Vec::new();
    let mut above: Option<Vec<usize>> = None;
    for (l, level) in filt.levels().iter().enumerate() {
        let mut owner = vec![usize::MAX; n];
        for i in 0..level.atoms.len() {
            for &p in filt.members(rbmo_core::AtomId::new(l, i)).unwrap() {
                if owner[p as usize] != usize::MAX {
                    bad.push(format!("level {l}: point {p} in two atoms"));
                }
                owner[p as usize] = i;
            }
        }
        if owner.iter().any(|&o| o == usize::MAX) {
            bad.push(format!("level {l}: support not covered"));
        }
        if let Some(up) = &above {
            for p in 0..n {
                let a = &level.atoms[owner[p]];
                if a.parent != Some(up[p] as u32) {
                    bad.push(format!("level {l}: point {p} leaves its parent atom"));
                    break;
                }
            }
        }
        let mut fresh = Vec::new();
        for (i, a) in level.atoms.iter().enumerate() {
            let five = a.ball.dilate(5.0).unwrap();
            for &p in filt.members(rbmo_core::AtomId::new(l, i)).unwrap() {
                if !in_ball(&five, &pts[p as usize]) {
                    bad.push(format!("level {l} atom {i}: member {p} outside 5B"));
                }
            }
            for p in grid.in_ball(&a.ball) {
                if owner[p] != i {
                    bad.push(format!("level {l} atom {i}: point {p} of B in another atom"));
                }
            }
            let m = grid.mass_in_ball(&a.ball);
            let big = grid.mass_in_ball(&a.ball.dilate(alpha).unwrap());
            if !(m > 0.0 && big <= c0 * m * (1.0 + 1e-12)) {
                bad.push(format!("level {l} atom {i}: ball not doubling ({big} vs {c0} x {m})"));
            }
            if !a.carried {
                fresh.push(a.ball);
            }
        }
        fresh.sort_by(|a, b| (a.center().coords()[0] - a.radius()).total_cmp(&(b.center().coords()[0] - b.radius())));
        for (i, a) in fresh.iter().enumerate() {
            for b in &fresh[i + 1..] {
                if b.center().coords()[0] - b.radius() > a.center().coords()[0] + a.radius() {
                    break;
                }
                if a.center().dist(&b.center()) <= a.radius() + b.radius() {
                    bad.push(format!("level {l}: fresh balls {a:?} and {b:?} meet"));
                }
            }
        }
        above = Some(owner);
    }
    for tag in preseeds {
        let sys = DyadicSystem::from_index(filt.dim(), tag.system as usize).unwrap();
        let q = sys.cube(tag.generation, &tag.position);
        let want = (filt.dim() as f64).sqrt() / 2.0 * q.side();
        let found = filt.levels().iter().flat_map(|lv| &lv.atoms).any(|a| {
            a.preseed == Some(*tag) && a.ball.center() == q.center() && (a.ball.radius() - want).abs() <= 1e-12 * want
        });
        if !found {
            bad.push(format!("pre-seeded cube {tag} not realized"));
        }
    }
    bad
}
