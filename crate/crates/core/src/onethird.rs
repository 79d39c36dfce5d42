//! Covering arbitrary cubes by comparable cubes of finitely many shifted dyadic systems.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{check_dim, Cube, DyadicSystem, DyadicTag};

/// Dilation factor of the covering sandwich `Q ⊂ T ⊂ 6Q`.
pub const COVER_FACTOR: f64 = 6.0;

/// All `3^d` shifted dyadic systems, indexed `0..3^d` by the base-3 digits of
/// their shift numerators. Index 0 is the unshifted grid.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SystemFamily {
    dim: usize,
    systems: Vec<DyadicSystem>,
}

/// A successful cover: system index, its cube and the cube's tag.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Cover {
    pub system: usize,
    pub tag: DyadicTag,
    pub cube: Cube,
}

impl SystemFamily {
    pub fn new(dim: usize) -> Result<Self> {
        check_dim(dim)?;
        let systems = (0..3usize.pow(dim as u32))
            .map(|i| DyadicSystem::from_index(dim, i))
            .collect::<Result<_>>()?;
        Ok(Self { dim, systems })
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.systems.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.systems.is_empty()
    }

    pub fn systems(&self) -> &[DyadicSystem] {
        &self.systems
    }

    pub fn get(&self, index: usize) -> Option<&DyadicSystem> {
        self.systems.get(index)
    }

    fn check(&self, q: &Cube) -> Result<()> {
        if q.dim() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                found: q.dim(),
            });
        }
        Ok(())
    }

    /// The cube of system `index` covering `q` inside `6q`, if there is one.
    ///
    /// Only the smallest containing cube can work: any larger cube of the same
    /// system that contains `q` also contains the smallest one.
    pub fn cover_in(&self, index: usize, q: &Cube) -> Result<Option<Cover>> {
        self.check(q)?;
        let sys = self
            .systems
            .get(index)
            .ok_or_else(|| Error::InvalidParams(format!("no system with index {index}")))?;
        let outer = q.dilate(COVER_FACTOR)?;
        let coarsest = (-(COVER_FACTOR * q.side()).log2()).ceil() as i32;
        Ok(sys
            .smallest_containing(q, coarsest)
            .filter(|(_, t)| outer.contains_cube(t))
            .map(|(tag, cube)| Cover {
                system: index,
                tag,
                cube,
            }))
    }

    /// Indices of every system that covers `q` inside `6q`.
    pub fn valid_systems(&self, q: &Cube) -> Result<Vec<usize>> {
        let mut out = Vec::new();
        for i in 0..self.len() {
            if self.cover_in(i, q)?.is_some() {
                out.push(i);
            }
        }
        Ok(out)
    }

    /// `T` from the lowest-index system with `Q ⊂ T ⊂ 6Q`.
    pub fn cover_cube(&self, q: &Cube) -> Result<Cover> {
        for i in 0..self.len() {
            if let Some(c) = self.cover_in(i, q)? {
                return Ok(c);
            }
        }
        Err(Error::SearchExhausted(format!(
            "no shifted dyadic cube T with Q ⊂ T ⊂ 6Q for Q = {q:?}"
        )))
    }

    /// One system covering both cubes, lowest index first.
    pub fn cover_pair(&self, q1: &Cube, q2: &Cube) -> Result<(Cover, Cover)> {
        self.check(q2)?;
        for i in 0..self.len() {
            if let (Some(a), Some(b)) = (self.cover_in(i, q1)?, self.cover_in(i, q2)?) {
                return Ok((a, b));
            }
        }
        Err(Error::SearchExhausted(format!(
            "no common system covers Q1 = {q1:?} and Q2 = {q2:?}"
        )))
    }
}
