//! Bottom-up construction of one filtration.
//!
//! Each level at generation `k` pre-seeds the balls `5B(Q)` of the family's
//! doubling dyadic cubes of generation `k`, proposes `5B(x, r(x))` for the
//! remaining support points, where `r(x)` is the largest `(α, C₀)`-doubling
//! radius in `[R_k / C₀, R_k]`, and runs the pre-seeded Vitali selection. A
//! child of the finer level joins the selected ball `S` that minimizes
//! `|a - x_S| / r(S)` for its anchor `a`, provided `S` is doubling and holds
//! all of the child's members; otherwise the child is carried up unchanged.

use std::sync::{Arc, OnceLock};

use rayon::prelude::*;

use crate::covering::{vitali_select, Candidate, Origin};
use crate::error::{Error, Result};
use crate::geometry::{Ball, DyadicTag, Point, Region};
use crate::lattice::partition::FamilyLayout;
use crate::lattice::{ladder_radius, nearest_member, Atom, Filtration, LatticeParams, Level, Position};
use crate::measure::PointMeasure;
use crate::onethird::SystemFamily;

/// Shared, lazily filled tables for all filtrations of one measure.
pub(crate) struct BuildContext {
    pub mu: Arc<PointMeasure>,
    pub params: LatticeParams,
    pub dim: usize,
    pub layout: FamilyLayout,
    pub systems: SystemFamily,
    /// Coarsest generation at which one candidate ball holds the whole support.
    pub g_coarse: i32,
    /// Finest generation at which all selected balls are singletons.
    pub g_fine: i32,
    /// Generations whose doubling dyadic cubes are pre-seeded.
    pub seeded: Option<(i32, i32)>,
    rung_lo: i64,
    rungs: usize,
    words: usize,
    /// Bit `t` of point `x`: `B(x, ladder(rung_lo + t))` is `(α, C₀)`-doubling.
    doubling: Vec<u64>,
    preseeds: Vec<OnceLock<Vec<(u32, Position)>>>,
}

/// A node under construction.
struct Node {
    ball: Option<Ball>,
    anchor: u32,
    members: Vec<u32>,
    preseed: Option<DyadicTag>,
    carried: bool,
    children: Vec<u32>,
}

impl BuildContext {
    pub fn new(mu: Arc<PointMeasure>, params: LatticeParams) -> Result<Self> {
        let dim = mu.dim();
        params.validate(dim)?;
        let layout = FamilyLayout::new(dim, params.log2_a0)?;
        let systems = SystemFamily::new(dim)?;
        let a = params.log2_c0 as i64;
        let b = params.log2_a0 as i32;

        let extent = match mu.extent() {
            e if e > 0.0 => e,
            _ => 1.0,
        };
        let sep = mu.min_separation().unwrap_or(extent);

        // smallest candidate radius at least twice the extent
        let mut g_coarse = ((dim as f64).sqrt() / (4.0 * params.c0() * extent)).log2().floor() as i32;
        while ladder_radius(dim, 4 * g_coarse as i64 + 4 * a) < 2.0 * extent {
            g_coarse -= 1;
        }
        while ladder_radius(dim, 4 * (g_coarse as i64 + 1) + 4 * a) >= 2.0 * extent {
            g_coarse += 1;
        }
        let factor = (2.0 * params.alpha).max(16.0);
        let mut g_fine = g_coarse + 1;
        while ladder_radius(dim, 4 * g_fine as i64) * factor >= sep {
            g_fine += 1;
        }

        let seeded = match params.generation_window {
            None => Some((g_coarse, g_fine)),
            Some((lo, hi)) => {
                let (lo, hi) = (lo.max(g_coarse), hi.min(g_fine));
                (lo <= hi).then_some((lo, hi))
            }
        };

        let gen_lo = g_coarse - b + 1;
        let gen_hi = g_fine + b - 1;
        let rung_lo = 4 * gen_lo as i64;
        let rung_hi = 4 * gen_hi as i64 + 4 * a;
        let rungs = (rung_hi - rung_lo + 1) as usize;
        let words = rungs.div_ceil(64);
        let doubling = doubling_profile(&mu, params.alpha, params.c0(), rung_lo, rungs, words)?;

        let slots = seeded.map_or(0, |(lo, hi)| (hi - lo + 1) as usize * systems.len());
        Ok(Self {
            mu,
            params,
            dim,
            layout,
            systems,
            g_coarse,
            g_fine,
            seeded,
            rung_lo,
            rungs,
            words,
            doubling,
            preseeds: (0..slots).map(|_| OnceLock::new()).collect(),
        })
    }

    pub fn filtrations(&self) -> usize {
        self.systems.len() * self.layout.families()
    }

    /// Filtration id of family `j` in system `m`.
    pub fn id(&self, system: usize, family: usize) -> usize {
        system * self.layout.families() + family
    }

    pub fn split_id(&self, id: usize) -> (usize, usize) {
        (id / self.layout.families(), id % self.layout.families())
    }

    /// Coarsest and finest generation of the filtrations with residue `r`.
    pub fn generation_range(&self, residue: u32) -> (i32, i32) {
        let b = self.params.log2_a0 as i32;
        let r = residue as i32;
        let top = self.g_coarse - (self.g_coarse - r).rem_euclid(b);
        let bot = self.g_fine + (r - self.g_fine).rem_euclid(b);
        (top, bot)
    }

    fn is_doubling_rung(&self, point: usize, rung: i64) -> bool {
        let t = (rung - self.rung_lo) as usize;
        debug_assert!(t < self.rungs);
        self.doubling[point * self.words + t / 64] >> (t % 64) & 1 == 1
    }

    /// Rung of the largest doubling radius in `[R_k / C₀, R_k]`, or the
    /// smallest rung of the window and `false` when none is doubling.
    pub fn candidate_rung(&self, point: usize, generation: i32) -> (i64, bool) {
        let first = 4 * generation as i64;
        let last = first + 4 * self.params.log2_c0 as i64;
        (first..=last)
            .find(|&j| self.is_doubling_rung(point, j))
            .map_or((last, false), |j| (j, true))
    }

    /// Doubling cubes of system `m` at `generation`, as `(class, position)`
    /// sorted by class then position.
    pub fn preseed_table(&self, system: usize, generation: i32) -> &[(u32, Position)] {
        let Some((lo, hi)) = self.seeded else {
            return &[];
        };
        if generation < lo || generation > hi {
            return &[];
        }
        let slot = system * (hi - lo + 1) as usize + (generation - lo) as usize;
        self.preseeds[slot].get_or_init(|| {
            let sys = self.systems.systems()[system];
            let mut positions: Vec<Position> = self
                .mu
                .points()
                .iter()
                .map(|x| sys.locate(x, generation))
                .collect();
            positions.sort_unstable();
            positions.dedup();
            let alpha = self.params.preseed_alpha(self.dim);
            let c0 = self.params.c0();
            let mut out: Vec<(u32, Position)> = positions
                .into_iter()
                .filter(|p| {
                    let q = Region::Cube(sys.cube(generation, p));
                    self.mu.is_doubling(&q, alpha, c0).unwrap_or(false)
                })
                .map(|p| (self.layout.class(&p) as u32, p))
                .collect();
            out.sort_unstable();
            out
        })
    }

    /// Pre-seeded cubes of family class `class` at `generation`.
    pub fn preseeds_of(&self, system: usize, class: usize, generation: i32) -> Vec<DyadicTag> {
        let table = self.preseed_table(system, generation);
        let start = table.partition_point(|(c, _)| (*c as usize) < class);
        let end = table.partition_point(|(c, _)| (*c as usize) <= class);
        table[start..end]
            .iter()
            .map(|(_, p)| self.systems.systems()[system].tag(generation, *p))
            .collect()
    }

    /// Build filtration `id` from scratch.
    pub fn build(&self, id: usize) -> Result<Filtration> {
        if id >= self.filtrations() {
            return Err(Error::InvalidParams(format!("no filtration {id}")));
        }
        let (system, family) = self.split_id(id);
        let (residue, class) = self.layout.split(family);
        let (top, bottom) = self.generation_range(residue);
        let b = self.params.log2_a0 as i32;

        let mut current: Vec<Node> = (0..self.mu.len() as u32)
            .map(|i| Node {
                ball: None,
                anchor: i,
                members: vec![i],
                preseed: None,
                carried: false,
                children: Vec::new(),
            })
            .collect();
        // finest level first
        let mut built: Vec<(i32, Vec<Node>)> = Vec::new();
        let mut k = bottom;
        while k >= top {
            let next = self.build_level(system, class, k, &mut current)?;
            let done = std::mem::replace(&mut current, next);
            if k != bottom {
                built.push((k + b, done));
            }
            k -= b;
        }
        if current.len() != 1 {
            return Err(Error::InvariantBreach(format!(
                "coarsest level of filtration {id} has {} atoms",
                current.len()
            )));
        }
        built.push((k + b, current));
        built.reverse();
        let (levels, order) = self.finish(built)?;
        Filtration::from_parts(self.dim, self.params, system, family, levels, order)
    }

    fn build_level(&self, system: usize, class: usize, k: i32, children: &mut [Node]) -> Result<Vec<Node>> {
        let mu = &*self.mu;
        let pts = mu.points();
        let alpha = self.params.alpha;
        let c0 = self.params.c0();
        let rk = ladder_radius(self.dim, 4 * k as i64);

        let seeds = self.preseeds_of(system, class, k);
        let sys = self.systems.systems()[system];
        let mut inner_seed = Vec::with_capacity(seeds.len());
        let mut b0 = Vec::with_capacity(seeds.len());
        for tag in &seeds {
            let ball = Ball::new(sys.cube(k, &tag.position).center(), rk)?;
            if !mu.is_doubling(&Region::Ball(ball), alpha, c0)? {
                return Err(Error::InvariantBreach(format!(
                    "pre-seeded ball of {tag} is not ({alpha}, {c0})-doubling"
                )));
            }
            b0.push(ball.dilate(5.0)?);
            inner_seed.push(ball);
        }

        let mut inner = Vec::with_capacity(pts.len());
        let mut doubling = Vec::with_capacity(pts.len());
        let mut cands = Vec::with_capacity(pts.len());
        for (x, p) in pts.iter().enumerate() {
            let (rung, ok) = self.candidate_rung(x, k);
            let ball = Ball::new(*p, ladder_radius(self.dim, rung))?;
            cands.push(Candidate {
                point: x,
                ball: ball.dilate(5.0)?,
            });
            inner.push(ball);
            doubling.push(ok);
        }

        let anchors: Vec<usize> = children.iter().map(|c| c.anchor as usize).collect();
        let cover = vitali_select(pts, &b0, &cands, &anchors)?;

        let mut groups: Vec<Vec<u32>> = vec![Vec::new(); cover.selected.len()];
        let mut carried = Vec::new();
        for (ci, child) in children.iter().enumerate() {
            let s = cover.witness[ci];
            let absorbing = match cover.origin[s] {
                Origin::Preseeded(_) => true,
                Origin::Candidate(x) => doubling[x],
            };
            let sel = &cover.selected[s];
            if absorbing && child.members.iter().all(|&m| sel.contains_point(&pts[m as usize])) {
                groups[s].push(ci as u32);
            } else {
                carried.push(ci as u32);
            }
        }

        let mut out = Vec::with_capacity(groups.len() + carried.len());
        for (s, group) in groups.into_iter().enumerate() {
            let (ball, preseed) = match cover.origin[s] {
                Origin::Preseeded(i) => (inner_seed[i], Some(seeds[i])),
                Origin::Candidate(x) => (inner[x], None),
            };
            if group.is_empty() {
                if let Some(tag) = preseed {
                    return Err(Error::InvariantBreach(format!(
                        "pre-seeded ball of {tag} absorbed no child"
                    )));
                }
                continue;
            }
            let mut members = Vec::new();
            for &ci in &group {
                members.append(&mut children[ci as usize].members);
            }
            let anchor = match cover.origin[s] {
                Origin::Candidate(x) => x as u32,
                Origin::Preseeded(_) => nearest_member(pts, &members, &ball.center()),
            };
            out.push(Node {
                ball: Some(ball),
                anchor,
                members,
                preseed,
                carried: false,
                children: group,
            });
        }
        for ci in carried {
            let child = &mut children[ci as usize];
            let ball = child.ball.ok_or_else(|| {
                Error::InvariantBreach(format!(
                    "support point {} fits no ball at the finest generation {k}",
                    child.anchor
                ))
            })?;
            out.push(Node {
                ball: Some(ball),
                anchor: child.anchor,
                members: std::mem::take(&mut child.members),
                preseed: None,
                carried: true,
                children: vec![ci],
            });
        }
        Ok(out)
    }

    /// Order levels root first, make children and members contiguous.
    fn finish(&self, raw: Vec<(i32, Vec<Node>)>) -> Result<(Vec<Level>, Vec<u32>)> {
        let depth = raw.len();
        // new index of every node, level by level from the root
        let mut perm: Vec<Vec<u32>> = Vec::with_capacity(depth);
        perm.push(vec![0]);
        for l in 0..depth - 1 {
            let mut order = Vec::with_capacity(raw[l + 1].1.len());
            for &old in &perm[l] {
                order.extend_from_slice(&raw[l].1[old as usize].children);
            }
            if order.len() != raw[l + 1].1.len() {
                return Err(Error::InvariantBreach(format!(
                    "level {} has {} atoms but {} are reachable",
                    l + 1,
                    raw[l + 1].1.len(),
                    order.len()
                )));
            }
            perm.push(order);
        }
        // point order: children of the finest atoms are point indices
        let finest = &raw[depth - 1].1;
        let mut order = Vec::with_capacity(self.mu.len());
        for &old in &perm[depth - 1] {
            order.extend_from_slice(&finest[old as usize].children);
        }

        let mut levels: Vec<Level> = Vec::with_capacity(depth);
        for l in (0..depth).rev() {
            let (generation, nodes) = &raw[l];
            let mut atoms = Vec::with_capacity(nodes.len());
            let mut cursor = 0u32;
            for &old in &perm[l] {
                let node = &nodes[old as usize];
                let n_children = node.children.len() as u32;
                let (children, members) = if l == depth - 1 {
                    (cursor..cursor + n_children, cursor..cursor + n_children)
                } else {
                    let below: &Level = levels.last().expect("finer level built first");
                    let first = &below.atoms[cursor as usize];
                    let last = &below.atoms[(cursor + n_children - 1) as usize];
                    (cursor..cursor + n_children, first.members.start..last.members.end)
                };
                cursor += n_children;
                atoms.push(Atom {
                    ball: node.ball.ok_or_else(|| Error::InvariantBreach("atom without ball".into()))?,
                    anchor: node.anchor,
                    parent: None,
                    children: if l == depth - 1 { 0..0 } else { children },
                    members,
                    preseed: node.preseed,
                    carried: node.carried,
                });
            }
            if let Some(below) = levels.last_mut() {
                for (i, a) in atoms.iter().enumerate() {
                    for c in a.children.clone() {
                        below.atoms[c as usize].parent = Some(i as u32);
                    }
                }
            }
            levels.push(Level {
                generation: *generation,
                atoms,
            });
        }
        levels.reverse();
        Ok((levels, order))
    }
}

/// Doubling bits of every support point over the radius ladder.
///
/// Masses are exact fixed-point sums, so each bit agrees with
/// [`PointMeasure::is_doubling`] on the same ball.
fn doubling_profile(
    mu: &PointMeasure,
    alpha: f64,
    c0: f64,
    rung_lo: i64,
    rungs: usize,
    words: usize,
) -> Result<Vec<u64>> {
    let dim = mu.dim();
    let origin = Point::origin(dim)?;
    let mut rho = Vec::with_capacity(rungs);
    let mut arho = Vec::with_capacity(rungs);
    for t in 0..rungs {
        let b = Ball::new(origin, ladder_radius(dim, rung_lo + t as i64))?;
        rho.push(b.radius());
        arho.push(b.dilate(alpha)?.radius());
    }
    let scale = mu.index().scale();
    let fixed: Vec<i128> = mu.weights().iter().map(|&w| scale.quantize(w)).collect();
    let pts = mu.points();
    let rows: Vec<Vec<u64>> = pts
        .par_iter()
        .map(|x| {
            // hist[c]: mass of points inside exactly the first c rungs
            let mut hist_in = vec![0i128; rungs + 1];
            let mut hist_a = vec![0i128; rungs + 1];
            for (y, w) in pts.iter().zip(&fixed) {
                let d = x.dist(y);
                hist_in[rho.partition_point(|&r| r >= d)] += w;
                hist_a[arho.partition_point(|&r| r >= d)] += w;
            }
            let mut bits = vec![0u64; words];
            let (mut m_in, mut m_a) = (0i128, 0i128);
            for t in (0..rungs).rev() {
                m_in += hist_in[t + 1];
                m_a += hist_a[t + 1];
                let inner = scale.to_f64(m_in);
                if inner > 0.0 && scale.to_f64(m_a) <= c0 * inner {
                    bits[t / 64] |= 1 << (t % 64);
                }
            }
            bits
        })
        .collect();
    Ok(rows.concat())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn profile_agrees_with_direct_doubling() {
        let mu = crate::measure::Generator::UniformCube { points: 60, dim: 2 }
            .generate(5)
            .unwrap();
        let ctx = BuildContext::new(Arc::new(mu.clone()), LatticeParams::relaxed(2)).unwrap();
        for x in [0usize, 17, 59] {
            for t in 0..ctx.rungs {
                let rung = ctx.rung_lo + t as i64;
                let ball = Ball::new(mu.points()[x], ladder_radius(2, rung)).unwrap();
                let direct = mu
                    .is_doubling(&Region::Ball(ball), ctx.params.alpha, ctx.params.c0())
                    .unwrap();
                assert_eq!(ctx.is_doubling_rung(x, rung), direct, "point {x} rung {rung}");
            }
        }
    }

    #[test]
    fn ladder_rungs_match_cube_radii() {
        for d in 1..=3 {
            for k in -5..20 {
                let r = ladder_radius(d, 4 * k);
                assert_eq!(r, (d as f64).sqrt() / 2.0 * 2f64.powi(-(k as i32)));
            }
        }
    }
}
