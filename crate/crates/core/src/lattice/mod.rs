//! Doubling David–Mattila filtrations realizing every doubling dyadic cube.
//!
//! A filtration is a finite two-sided sequence of nested partitions of
//! `supp(μ)`. Level 0 is the single root; the last level consists of
//! singletons. Every atom `T` carries a ball `B_T` with
//! `B_T ∩ supp(μ) ⊂ T ⊂ 5 B_T` and `μ(α B_T) ≤ C₀ μ(B_T)`.

mod build;
mod family;
mod partition;
mod serial;
mod verify;

use std::collections::HashMap;
use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Ball, DyadicTag, Point, MAX_DIM};
use crate::measure::PointMeasure;

pub use family::{FiltrationFamily, Lookup};
pub use partition::{partition_families, FamilyLayout, FamilyPartition};
pub use verify::{
    small_boundary, verify_filtration, verify_theorem_a, BoundaryMeasurement, FiltrationReport,
    QueryOutcome, QueryRecord, TheoremAReport,
};

/// `2^(-i/4)` for `i = 0..4`.
const QUARTER_ROOTS: [f64; 4] = [
    1.0,
    0.840_896_415_253_714_5,
    std::f64::consts::FRAC_1_SQRT_2,
    0.594_603_557_501_360_5,
];

/// Radius `(√d / 2) · 2^(-j/4)` of the global radius ladder.
///
/// Rung `4k` is the radius of the ball `B(Q)` circumscribing a dyadic cube of
/// generation `k`; the power of two is applied last so equal rungs are equal
/// bit for bit however they are reached.
pub fn ladder_radius(dim: usize, j: i64) -> f64 {
    let half_diag = (dim as f64).sqrt() / 2.0;
    let q = j.div_euclid(4);
    half_diag * QUARTER_ROOTS[j.rem_euclid(4) as usize] * 2f64.powi(-(q as i32))
}

/// Which constants are active.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    /// `α > 60`, `C₀ > (6√d α)^d`, `A₀ > 5000 C₀`.
    PaperFaithful,
    /// Smaller desk-scale constants. The structural guarantees still hold;
    /// only the asymptotic constants differ.
    Relaxed,
}

/// Constants of the construction: `C₀ = 2^a`, `A₀ = 2^b`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LatticeParams {
    pub alpha: f64,
    pub log2_c0: u32,
    pub log2_a0: u32,
    /// Restricts the generations whose doubling dyadic cubes are pre-seeded.
    #[serde(default)]
    pub generation_window: Option<(i32, i32)>,
}

impl LatticeParams {
    /// Desk-scale defaults: `α = 8`, `C₀ = 2^(3d+1)`, `A₀ = 4 C₀`.
    pub fn relaxed(dim: usize) -> Self {
        let a = 3 * dim as u32 + 1;
        Self {
            alpha: 8.0,
            log2_c0: a,
            log2_a0: a + 2,
            generation_window: None,
        }
    }

    /// `α = 480√d`, the smallest `C₀ = 2^a > (6√d α)^d` and the smallest `A₀ = 2^b > 5000 C₀`.
    pub fn paper(dim: usize) -> Self {
        let alpha = 480.0 * (dim as f64).sqrt();
        let target = dim as f64 * (6.0 * (dim as f64).sqrt() * alpha).log2();
        let a = target.floor() as u32 + 1;
        Self {
            alpha,
            log2_c0: a,
            log2_a0: a + 13,
            generation_window: None,
        }
    }

    pub fn c0(&self) -> f64 {
        2f64.powi(self.log2_c0 as i32)
    }

    pub fn a0(&self) -> f64 {
        2f64.powi(self.log2_a0 as i32)
    }

    /// Dilation of the doubling condition on query cubes, `6√d α`.
    pub fn alpha0(&self, dim: usize) -> f64 {
        6.0 * (dim as f64).sqrt() * self.alpha
    }

    /// Dilation of the doubling condition on pre-seeded dyadic cubes, `√d α`.
    pub fn preseed_alpha(&self, dim: usize) -> f64 {
        (dim as f64).sqrt() * self.alpha
    }

    pub fn regime(&self, dim: usize) -> Regime {
        let c0_needed = self.alpha0(dim).powi(dim as i32);
        if self.alpha > 60.0 && self.c0() > c0_needed && self.a0() > 5000.0 * self.c0() {
            Regime::PaperFaithful
        } else {
            Regime::Relaxed
        }
    }

    /// Legality: `α ≥ 6` keeps `5 B_T ⊂ α₀ Q` for looked-up cubes, and
    /// `A₀ ≥ 4 C₀` lets every ball capture the children meeting it.
    pub fn validate(&self, dim: usize) -> Result<()> {
        crate::geometry::check_dim(dim)?;
        if !(self.alpha >= 6.0 && self.alpha.is_finite()) {
            return Err(Error::InvalidParams(format!("alpha = {} must be at least 6", self.alpha)));
        }
        if self.log2_c0 == 0 || self.log2_c0 > 60 {
            return Err(Error::InvalidParams(format!("log2 C0 = {} outside 1..=60", self.log2_c0)));
        }
        if self.log2_a0 < (self.log2_c0 + 2).max(4) || self.log2_a0 > 62 {
            return Err(Error::InvalidParams(format!(
                "log2 A0 = {} must be at least max(log2 C0 + 2, 4) = {}",
                self.log2_a0,
                (self.log2_c0 + 2).max(4)
            )));
        }
        if let Some((lo, hi)) = self.generation_window {
            if lo > hi {
                return Err(Error::InvalidParams(format!("empty generation window [{lo}, {hi}]")));
            }
        }
        Ok(())
    }
}

/// Position of an atom: level (0 = root) and index within the level.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct AtomId {
    pub level: u32,
    pub index: u32,
}

impl AtomId {
    pub fn new(level: usize, index: usize) -> Self {
        Self {
            level: level as u32,
            index: index as u32,
        }
    }
}

/// A cell of one level.
#[derive(Clone, Debug, PartialEq)]
pub struct Atom {
    pub ball: Ball,
    /// Support point used to place the atom inside coarser balls.
    pub anchor: u32,
    pub parent: Option<u32>,
    /// Children, as indices into the next finer level.
    pub children: Range<u32>,
    /// Members, as a range of [`Filtration::order`].
    pub members: Range<u32>,
    /// The dyadic cube `Q'` with `B_T = B(Q')`, for pre-seeded atoms.
    pub preseed: Option<DyadicTag>,
    /// Copied unchanged from the finer level because no ball of this
    /// level could absorb it.
    pub carried: bool,
}

/// One level of a filtration, built at dyadic generation `generation`.
#[derive(Clone, Debug, PartialEq)]
pub struct Level {
    pub generation: i32,
    pub atoms: Vec<Atom>,
}

/// A doubling filtration of the support.
#[derive(Clone, Debug)]
pub struct Filtration {
    dim: usize,
    params: LatticeParams,
    /// Index of the shifted dyadic system whose cubes were pre-seeded.
    pub system: usize,
    /// Family index `j` within the system.
    pub family: usize,
    levels: Vec<Level>,
    order: Vec<u32>,
    leaf: Vec<u32>,
    preseed_index: HashMap<DyadicTag, AtomId>,
}

impl Filtration {
    pub(crate) fn from_parts(
        dim: usize,
        params: LatticeParams,
        system: usize,
        family: usize,
        levels: Vec<Level>,
        order: Vec<u32>,
    ) -> Result<Self> {
        let n = order.len();
        let finest = levels
            .last()
            .ok_or_else(|| Error::InvariantBreach("filtration without levels".into()))?;
        let mut leaf = vec![u32::MAX; n];
        for (i, a) in finest.atoms.iter().enumerate() {
            for &p in &order[a.members.start as usize..a.members.end as usize] {
                leaf[p as usize] = i as u32;
            }
        }
        if leaf.iter().any(|&l| l == u32::MAX) {
            return Err(Error::InvariantBreach("finest level misses a support point".into()));
        }
        let mut preseed_index = HashMap::new();
        for (l, level) in levels.iter().enumerate() {
            for (i, a) in level.atoms.iter().enumerate() {
                if let Some(tag) = a.preseed {
                    preseed_index.insert(tag, AtomId::new(l, i));
                }
            }
        }
        Ok(Self {
            dim,
            params,
            system,
            family,
            levels,
            order,
            leaf,
            preseed_index,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn params(&self) -> &LatticeParams {
        &self.params
    }

    pub fn levels(&self) -> &[Level] {
        &self.levels
    }

    pub fn depth(&self) -> usize {
        self.levels.len()
    }

    pub fn root(&self) -> AtomId {
        AtomId::new(0, 0)
    }

    /// Support point indices in depth-first order; every atom's members are a
    /// contiguous slice of it.
    pub fn order(&self) -> &[u32] {
        &self.order
    }

    pub fn atom(&self, id: AtomId) -> Result<&Atom> {
        self.levels
            .get(id.level as usize)
            .and_then(|l| l.atoms.get(id.index as usize))
            .ok_or_else(|| Error::InvalidParams(format!("no atom {id:?}")))
    }

    pub fn atoms(&self) -> impl Iterator<Item = (AtomId, &Atom)> {
        self.levels.iter().enumerate().flat_map(|(l, level)| {
            level
                .atoms
                .iter()
                .enumerate()
                .map(move |(i, a)| (AtomId::new(l, i), a))
        })
    }

    pub fn members(&self, id: AtomId) -> Result<&[u32]> {
        let a = self.atom(id)?;
        Ok(&self.order[a.members.start as usize..a.members.end as usize])
    }

    pub fn parent(&self, id: AtomId) -> Result<AtomId> {
        self.ancestor(id, 1)
    }

    /// The atom `j ≥ 1` levels up that contains this one.
    pub fn ancestor(&self, id: AtomId, j: usize) -> Result<AtomId> {
        if j == 0 {
            return Err(Error::InvalidParams("ancestor depth must be positive".into()));
        }
        let mut cur = id;
        self.atom(cur)?;
        for _ in 0..j {
            let p = self.atom(cur)?.parent.ok_or(Error::BeyondRoot { depth: j })?;
            cur = AtomId::new(cur.level as usize - 1, p as usize);
        }
        Ok(cur)
    }

    /// Like [`ancestor`](Self::ancestor) but `j = 0` gives the atom itself.
    pub fn ancestor_or_self(&self, id: AtomId, j: usize) -> Result<AtomId> {
        if j == 0 {
            self.atom(id).map(|_| id)
        } else {
            self.ancestor(id, j)
        }
    }

    /// The atom of `level` containing support point `point`.
    pub fn atom_of_point(&self, level: usize, point: usize) -> Result<AtomId> {
        if level >= self.levels.len() || point >= self.leaf.len() {
            return Err(Error::InvalidParams(format!("no level {level} or point {point}")));
        }
        let mut id = AtomId::new(self.levels.len() - 1, self.leaf[point] as usize);
        while id.level as usize > level {
            id = self.parent(id)?;
        }
        Ok(id)
    }

    /// The atom realizing the pre-seeded dyadic cube `tag`.
    pub fn find_preseed(&self, tag: &DyadicTag) -> Option<AtomId> {
        self.preseed_index.get(tag).copied()
    }

    /// `μ(T)`, accumulated exactly.
    pub fn atom_mass(&self, mu: &PointMeasure, id: AtomId) -> Result<f64> {
        let scale = mu.index().scale();
        let m: i128 = self
            .members(id)?
            .iter()
            .map(|&p| scale.quantize(mu.weights()[p as usize]))
            .sum();
        Ok(scale.to_f64(m))
    }

    /// Radius window `[R_k / C₀, R_k]` of non-carried atoms at `generation`.
    pub fn radius_window(&self, generation: i32) -> (f64, f64) {
        let a = self.params.log2_c0 as i64;
        let k = generation as i64;
        (ladder_radius(self.dim, 4 * k + 4 * a), ladder_radius(self.dim, 4 * k))
    }
}

/// Split `members` among disjoint `balls`: each point goes to the ball
/// minimizing `|x - x_B| / r(B)` among those with `x ∈ 5B`, ties to the lower
/// ball index. Returns one (possibly empty) group per ball.
pub fn assign_points(points: &[Point], members: &[u32], balls: &[Ball]) -> Result<Vec<Vec<u32>>> {
    let mut groups = vec![Vec::new(); balls.len()];
    for &m in members {
        let x = points
            .get(m as usize)
            .ok_or_else(|| Error::InvalidParams(format!("no point {m}")))?;
        let mut best: Option<(f64, usize)> = None;
        for (i, b) in balls.iter().enumerate() {
            let ratio = x.dist(&b.center) / b.radius;
            if ratio <= 5.0 && best.map_or(true, |(r, _)| ratio < r) {
                best = Some((ratio, i));
            }
        }
        let (_, i) = best.ok_or_else(|| {
            Error::InvariantBreach(format!("point {m} lies in no 5-dilate of the selected balls"))
        })?;
        groups[i].push(m);
    }
    Ok(groups)
}

/// Nearest member of `members` to `center`, ties to the lower index.
pub(crate) fn nearest_member(points: &[Point], members: &[u32], center: &Point) -> u32 {
    let mut best = (f64::INFINITY, u32::MAX);
    for &m in members {
        let d = points[m as usize].dist(center);
        if d < best.0 || (d == best.0 && m < best.1) {
            best = (d, m);
        }
    }
    best.1
}

pub(crate) type Position = [i64; MAX_DIM];

#[cfg(test)]
mod tests;
