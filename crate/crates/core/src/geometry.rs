//! Axis-aligned cubes, closed balls, concentric dilation and shifted dyadic grids.
//!
//! Cubes are half-open, `[lo, hi)` on every axis, so the cubes of one dyadic
//! generation partition space exactly. Balls are closed. All distances are
//! Euclidean.

use std::fmt;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// Largest supported ambient dimension.
pub const MAX_DIM: usize = 3;

/// Coarsest generation scanned by [`DyadicSystem::smallest_containing`] unless
/// configured otherwise (cube side `2^10`).
pub const DEFAULT_COARSEST_GENERATION: i32 = -10;

pub(crate) fn check_dim(d: usize) -> Result<()> {
    if (1..=MAX_DIM).contains(&d) {
        Ok(())
    } else {
        Err(Error::UnsupportedDimension(d))
    }
}

fn check_scale(lambda: f64) -> Result<()> {
    if lambda > 0.0 && lambda.is_finite() {
        Ok(())
    } else {
        Err(Error::NonPositiveScale(lambda))
    }
}

/// A point of `R^d`, `d <= 3`.
#[derive(Clone, Copy, PartialEq)]
pub struct Point {
    dim: u8,
    coords: [f64; MAX_DIM],
}

impl Point {
    pub fn new(coords: &[f64]) -> Result<Self> {
        check_dim(coords.len())?;
        if coords.iter().any(|c| !c.is_finite()) {
            return Err(Error::InvalidMeasure(format!(
                "non-finite coordinate in {coords:?}"
            )));
        }
        let mut c = [0.0; MAX_DIM];
        c[..coords.len()].copy_from_slice(coords);
        Ok(Self {
            dim: coords.len() as u8,
            coords: c,
        })
    }

    /// The origin of `R^d`.
    pub fn origin(dim: usize) -> Result<Self> {
        check_dim(dim)?;
        Ok(Self {
            dim: dim as u8,
            coords: [0.0; MAX_DIM],
        })
    }

    pub(crate) fn from_array(dim: usize, coords: [f64; MAX_DIM]) -> Self {
        debug_assert!((1..=MAX_DIM).contains(&dim));
        Self {
            dim: dim as u8,
            coords,
        }
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim as usize
    }

    #[inline]
    pub fn coords(&self) -> &[f64] {
        &self.coords[..self.dim as usize]
    }

    #[inline]
    pub(crate) fn raw(&self) -> &[f64; MAX_DIM] {
        &self.coords
    }

    /// Euclidean distance. Every containment predicate in the crate goes
    /// through this function so that boundary decisions agree everywhere.
    #[inline]
    pub fn dist(&self, other: &Point) -> f64 {
        let mut s = 0.0;
        for i in 0..self.dim as usize {
            let t = self.coords[i] - other.coords[i];
            s += t * t;
        }
        s.sqrt()
    }
}

impl fmt::Debug for Point {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_list().entries(self.coords()).finish()
    }
}

impl Serialize for Point {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.coords().serialize(s)
    }
}

impl<'de> Deserialize<'de> for Point {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let v = Vec::<f64>::deserialize(d)?;
        Point::new(&v).map_err(serde::de::Error::custom)
    }
}

/// A half-open axis-aligned cube `[c - s/2, c + s/2)^d`.
///
/// Bounds are stored next to center and side: dyadic cubes take their bounds
/// from the lattice corners so that neighbouring cubes share bit-identical faces.
#[derive(Clone, Copy, PartialEq)]
pub struct Cube {
    center: Point,
    side: f64,
    lo: [f64; MAX_DIM],
    hi: [f64; MAX_DIM],
}

impl Cube {
    pub fn new(center: Point, side: f64) -> Result<Self> {
        check_scale(side)?;
        let d = center.dim();
        let mut lo = [0.0; MAX_DIM];
        let mut hi = [0.0; MAX_DIM];
        for i in 0..d {
            lo[i] = center.coords[i] - side / 2.0;
            hi[i] = center.coords[i] + side / 2.0;
        }
        Ok(Self {
            center,
            side,
            lo,
            hi,
        })
    }

    /// Cube `[lo, lo + side)` given its lower corner.
    pub fn from_corner(lo: &[f64], side: f64) -> Result<Self> {
        check_scale(side)?;
        let corner = Point::new(lo)?;
        let d = corner.dim();
        let mut l = [0.0; MAX_DIM];
        let mut h = [0.0; MAX_DIM];
        let mut c = [0.0; MAX_DIM];
        for i in 0..d {
            l[i] = lo[i];
            h[i] = lo[i] + side;
            c[i] = 0.5 * (l[i] + h[i]);
        }
        Ok(Self {
            center: Point::from_array(d, c),
            side,
            lo: l,
            hi: h,
        })
    }

    fn from_bounds(dim: usize, lo: [f64; MAX_DIM], hi: [f64; MAX_DIM], side: f64) -> Self {
        let mut c = [0.0; MAX_DIM];
        for i in 0..dim {
            c[i] = 0.5 * (lo[i] + hi[i]);
        }
        Self {
            center: Point::from_array(dim, c),
            side,
            lo,
            hi,
        }
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.center.dim()
    }

    #[inline]
    pub fn center(&self) -> Point {
        self.center
    }

    #[inline]
    pub fn side(&self) -> f64 {
        self.side
    }

    #[inline]
    pub fn lo(&self) -> &[f64] {
        &self.lo[..self.dim()]
    }

    #[inline]
    pub fn hi(&self) -> &[f64] {
        &self.hi[..self.dim()]
    }

    pub fn dilate(&self, lambda: f64) -> Result<Self> {
        check_scale(lambda)?;
        Cube::new(self.center, self.side * lambda)
    }

    #[inline]
    pub fn contains_point(&self, p: &Point) -> bool {
        (0..self.dim()).all(|i| self.lo[i] <= p.coords[i] && p.coords[i] < self.hi[i])
    }

    #[inline]
    pub fn contains_cube(&self, q: &Cube) -> bool {
        (0..self.dim()).all(|i| self.lo[i] <= q.lo[i] && q.hi[i] <= self.hi[i])
    }

    /// A closed ball sits inside a half-open cube iff it stays off the upper faces.
    #[inline]
    pub fn contains_ball(&self, b: &Ball) -> bool {
        (0..self.dim()).all(|i| {
            let c = b.center.coords[i];
            self.lo[i] <= c - b.radius && c + b.radius < self.hi[i]
        })
    }

    /// Nonempty intersection of the two half-open bodies.
    #[inline]
    pub fn intersects(&self, q: &Cube) -> bool {
        (0..self.dim()).all(|i| self.lo[i] < q.hi[i] && q.lo[i] < self.hi[i])
    }

    /// Distance from the center to the farthest corner of the closure.
    pub fn circumradius(&self) -> f64 {
        let mut far = self.center;
        for i in 0..self.dim() {
            let c = self.center.coords[i];
            far.coords[i] = if c - self.lo[i] > self.hi[i] - c {
                self.lo[i]
            } else {
                self.hi[i]
            };
        }
        self.center.dist(&far)
    }
}

impl fmt::Debug for Cube {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Cube(center {:?}, side {})", self.center, self.side)
    }
}

#[derive(Serialize, Deserialize)]
struct CubeRepr {
    center: Point,
    side: f64,
}

impl Serialize for Cube {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        CubeRepr {
            center: self.center,
            side: self.side,
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for Cube {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let r = CubeRepr::deserialize(d)?;
        Cube::new(r.center, r.side).map_err(serde::de::Error::custom)
    }
}

/// A closed Euclidean ball.
#[derive(Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Ball {
    pub(crate) center: Point,
    pub(crate) radius: f64,
}

impl Ball {
    pub fn new(center: Point, radius: f64) -> Result<Self> {
        check_scale(radius)?;
        Ok(Self { center, radius })
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.center.dim()
    }

    #[inline]
    pub fn center(&self) -> Point {
        self.center
    }

    #[inline]
    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn dilate(&self, lambda: f64) -> Result<Self> {
        check_scale(lambda)?;
        Ok(Self {
            center: self.center,
            radius: self.radius * lambda,
        })
    }

    #[inline]
    pub fn contains_point(&self, p: &Point) -> bool {
        self.center.dist(p) <= self.radius
    }

    #[inline]
    pub fn contains_ball(&self, b: &Ball) -> bool {
        self.center.dist(&b.center) + b.radius <= self.radius
    }

    /// Every corner of the closure within the radius.
    #[inline]
    pub fn contains_cube(&self, q: &Cube) -> bool {
        let mut far = q.center;
        for i in 0..q.dim() {
            let c = self.center.coords[i];
            far.coords[i] = if (q.lo[i] - c).abs() > (q.hi[i] - c).abs() {
                q.lo[i]
            } else {
                q.hi[i]
            };
        }
        self.center.dist(&far) <= self.radius
    }

    /// Closed balls intersect when they touch.
    #[inline]
    pub fn intersects(&self, b: &Ball) -> bool {
        self.center.dist(&b.center) <= self.radius + b.radius
    }
}

impl fmt::Debug for Ball {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Ball(center {:?}, radius {})", self.center, self.radius)
    }
}

/// A measurable region: the things one can take the mass of.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Region {
    Cube(Cube),
    Ball(Ball),
}

impl Region {
    pub fn dim(&self) -> usize {
        match self {
            Region::Cube(q) => q.dim(),
            Region::Ball(b) => b.dim(),
        }
    }

    pub fn center(&self) -> Point {
        match self {
            Region::Cube(q) => q.center(),
            Region::Ball(b) => b.center(),
        }
    }

    pub fn dilate(&self, lambda: f64) -> Result<Self> {
        Ok(match self {
            Region::Cube(q) => Region::Cube(q.dilate(lambda)?),
            Region::Ball(b) => Region::Ball(b.dilate(lambda)?),
        })
    }

    #[inline]
    pub fn contains_point(&self, p: &Point) -> bool {
        match self {
            Region::Cube(q) => q.contains_point(p),
            Region::Ball(b) => b.contains_point(p),
        }
    }

    /// Whether the axis box `[lo, hi]` (closed, as spanned by a point set)
    /// lies entirely inside the region.
    pub(crate) fn contains_box(&self, lo: &[f64; MAX_DIM], hi: &[f64; MAX_DIM]) -> bool {
        match self {
            Region::Cube(q) => (0..q.dim()).all(|i| q.lo[i] <= lo[i] && hi[i] < q.hi[i]),
            Region::Ball(b) => {
                let mut far = b.center;
                for i in 0..b.dim() {
                    let c = b.center.coords[i];
                    far.coords[i] = if c - lo[i] > hi[i] - c { lo[i] } else { hi[i] };
                }
                b.center.dist(&far) <= b.radius
            }
        }
    }

    /// Whether the closed axis box `[lo, hi]` misses the region entirely.
    pub(crate) fn misses_box(&self, lo: &[f64; MAX_DIM], hi: &[f64; MAX_DIM]) -> bool {
        match self {
            Region::Cube(q) => (0..q.dim()).any(|i| hi[i] < q.lo[i] || lo[i] >= q.hi[i]),
            Region::Ball(b) => {
                let mut near = b.center;
                for i in 0..b.dim() {
                    near.coords[i] = b.center.coords[i].clamp(lo[i], hi[i]);
                }
                b.center.dist(&near) > b.radius
            }
        }
    }
}

impl From<Cube> for Region {
    fn from(q: Cube) -> Self {
        Region::Cube(q)
    }
}

impl From<Ball> for Region {
    fn from(b: Ball) -> Self {
        Region::Ball(b)
    }
}

/// Anything that can sit inside a [`Region`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Shape {
    Point(Point),
    Cube(Cube),
    Ball(Ball),
}

impl Shape {
    pub fn dim(&self) -> usize {
        match self {
            Shape::Point(p) => p.dim(),
            Shape::Cube(q) => q.dim(),
            Shape::Ball(b) => b.dim(),
        }
    }
}

impl From<Point> for Shape {
    fn from(p: Point) -> Self {
        Shape::Point(p)
    }
}

impl From<Cube> for Shape {
    fn from(q: Cube) -> Self {
        Shape::Cube(q)
    }
}

impl From<Ball> for Shape {
    fn from(b: Ball) -> Self {
        Shape::Ball(b)
    }
}

/// Set-theoretic inclusion `inner ⊂ outer` under the half-open cube and
/// closed ball conventions.
pub fn contains(outer: &Region, inner: &Shape) -> Result<bool> {
    if outer.dim() != inner.dim() {
        return Err(Error::DimensionMismatch {
            expected: outer.dim(),
            found: inner.dim(),
        });
    }
    Ok(match (outer, inner) {
        (Region::Cube(o), Shape::Point(p)) => o.contains_point(p),
        (Region::Cube(o), Shape::Cube(q)) => o.contains_cube(q),
        (Region::Cube(o), Shape::Ball(b)) => o.contains_ball(b),
        (Region::Ball(o), Shape::Point(p)) => o.contains_point(p),
        (Region::Ball(o), Shape::Cube(q)) => o.contains_cube(q),
        (Region::Ball(o), Shape::Ball(b)) => o.contains_ball(b),
    })
}

/// Identifies one dyadic cube: system, generation and integer lattice position.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct DyadicTag {
    pub system: u16,
    pub generation: i32,
    pub position: [i64; MAX_DIM],
}

impl fmt::Display for DyadicTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "D{}[k={}, pos={:?}]",
            self.system, self.generation, self.position
        )
    }
}

/// One of the `3^d` shifted dyadic systems.
///
/// Generation `k` consists of the half-open cubes of side `2^-k` whose corners
/// lie on `2^-k (Z^d + (-1)^k shift)`, with `shift ∈ {0, 1/3, 2/3}^d`. The sign
/// alternation keeps every generation nested inside the previous one.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct DyadicSystem {
    dim: u8,
    /// Shift numerators in thirds, each in `0..3`.
    thirds: [u8; MAX_DIM],
}

impl DyadicSystem {
    pub fn new(dim: usize, thirds: &[u8]) -> Result<Self> {
        check_dim(dim)?;
        if thirds.len() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: thirds.len(),
            });
        }
        if thirds.iter().any(|&t| t > 2) {
            return Err(Error::InvalidParams(format!(
                "shift numerators must be 0, 1 or 2 thirds, got {thirds:?}"
            )));
        }
        let mut t = [0u8; MAX_DIM];
        t[..dim].copy_from_slice(thirds);
        Ok(Self {
            dim: dim as u8,
            thirds: t,
        })
    }

    /// The unshifted standard dyadic grid.
    pub fn standard(dim: usize) -> Result<Self> {
        Self::new(dim, &vec![0; dim])
    }

    /// The system with base-3 digits of `index` as shift numerators.
    pub fn from_index(dim: usize, index: usize) -> Result<Self> {
        check_dim(dim)?;
        if index >= 3usize.pow(dim as u32) {
            return Err(Error::InvalidParams(format!(
                "system index {index} out of range for d = {dim}"
            )));
        }
        let mut t = vec![0u8; dim];
        let mut r = index;
        for digit in t.iter_mut() {
            *digit = (r % 3) as u8;
            r /= 3;
        }
        Self::new(dim, &t)
    }

    pub fn index(&self) -> usize {
        self.thirds[..self.dim()]
            .iter()
            .rev()
            .fold(0, |acc, &t| acc * 3 + t as usize)
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim as usize
    }

    /// Shift vector in `{0, 1/3, 2/3}^d`.
    pub fn shift(&self) -> Vec<f64> {
        self.thirds[..self.dim()]
            .iter()
            .map(|&t| t as f64 / 3.0)
            .collect()
    }

    #[inline]
    pub fn side(generation: i32) -> f64 {
        2f64.powi(-generation)
    }

    /// Signed shift numerator (in thirds) used on `axis` at `generation`.
    #[inline]
    fn signed_thirds(&self, axis: usize, generation: i32) -> i64 {
        let t = self.thirds[axis] as i64;
        if generation.rem_euclid(2) == 0 {
            t
        } else {
            -t
        }
    }

    /// Lattice corner `2^-k (j + (-1)^k t/3)`. The power of two is applied
    /// last so that corners of consecutive generations coincide bit for bit.
    #[inline]
    pub fn corner(&self, axis: usize, generation: i32, j: i64) -> f64 {
        let s = self.signed_thirds(axis, generation);
        ((3 * j + s) as f64 / 3.0) * Self::side(generation)
    }

    /// Lattice position of the generation-`k` cube containing `x`.
    pub fn locate(&self, x: &Point, generation: i32) -> [i64; MAX_DIM] {
        let mut pos = [0i64; MAX_DIM];
        let scale = 2f64.powi(generation);
        for (axis, slot) in pos.iter_mut().enumerate().take(self.dim()) {
            let xv = x.coords[axis];
            let s = self.signed_thirds(axis, generation) as f64 / 3.0;
            let mut j = (xv * scale - s).floor() as i64;
            while self.corner(axis, generation, j) > xv {
                j -= 1;
            }
            while self.corner(axis, generation, j + 1) <= xv {
                j += 1;
            }
            *slot = j;
        }
        pos
    }

    pub fn cube(&self, generation: i32, position: &[i64; MAX_DIM]) -> Cube {
        let d = self.dim();
        let mut lo = [0.0; MAX_DIM];
        let mut hi = [0.0; MAX_DIM];
        for axis in 0..d {
            lo[axis] = self.corner(axis, generation, position[axis]);
            hi[axis] = self.corner(axis, generation, position[axis] + 1);
        }
        Cube::from_bounds(d, lo, hi, Self::side(generation))
    }

    pub fn tag(&self, generation: i32, position: [i64; MAX_DIM]) -> DyadicTag {
        DyadicTag {
            system: self.index() as u16,
            generation,
            position,
        }
    }

    /// The generation-`k` cube containing `x`.
    pub fn cube_containing(&self, x: &Point, generation: i32) -> (DyadicTag, Cube) {
        let pos = self.locate(x, generation);
        (self.tag(generation, pos), self.cube(generation, &pos))
    }

    /// Position of the generation-`k - 1` parent of a generation-`k` cube.
    pub fn parent_position(&self, generation: i32, position: &[i64; MAX_DIM]) -> [i64; MAX_DIM] {
        // the lower corner of a cell lies in exactly one cell of the coarser generation
        let mut lo = [0.0; MAX_DIM];
        for (axis, v) in lo.iter_mut().enumerate().take(self.dim()) {
            *v = self.corner(axis, generation, position[axis]);
        }
        self.locate(&Point::from_array(self.dim(), lo), generation - 1)
    }

    /// The minimal-side cube of this system containing `q`, scanning from the
    /// first generation whose side is at least `side(q)` up to `coarsest`.
    pub fn smallest_containing(&self, q: &Cube, coarsest: i32) -> Option<(DyadicTag, Cube)> {
        if q.dim() != self.dim() {
            return None;
        }
        let mut k = (-q.side().log2()).floor() as i32;
        while Self::side(k) < q.side() {
            k -= 1;
        }
        while k > coarsest && Self::side(k + 1) >= q.side() {
            k += 1;
        }
        let lo_corner = Point::from_array(self.dim(), q.lo);
        while k >= coarsest {
            let (tag, cell) = self.cube_containing(&lo_corner, k);
            if cell.contains_cube(q) {
                return Some((tag, cell));
            }
            k -= 1;
        }
        None
    }
}
