use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{DyadicTag, MAX_DIM};

/// Coloring of dyadic cubes into families.
///
/// Family `j = (k mod b) · M^d + Σ_i (p_i mod M) · M^i` for a cube of
/// generation `k` at lattice position `p`, with `M = ⌈5√d⌉ + 2`. Two cubes of
/// one generation in one family differ by a nonzero multiple of `M` along some
/// axis, so they are at least `(M - 1) 2^-k > 5√d 2^-k` apart; two generations
/// in one family differ by a multiple of `b`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FamilyLayout {
    pub dim: usize,
    pub log2_a0: u32,
    pub modulus: u32,
}

impl FamilyLayout {
    pub fn new(dim: usize, log2_a0: u32) -> Result<Self> {
        crate::geometry::check_dim(dim)?;
        if log2_a0 == 0 {
            return Err(Error::InvalidParams("A0 must be at least 2".into()));
        }
        let modulus = (5.0 * (dim as f64).sqrt()).ceil() as u32 + 2;
        Ok(Self {
            dim,
            log2_a0,
            modulus,
        })
    }

    /// Number of position classes, `M^d`.
    pub fn classes(&self) -> usize {
        (self.modulus as usize).pow(self.dim as u32)
    }

    /// `N₀ = b · M^d`.
    pub fn families(&self) -> usize {
        self.log2_a0 as usize * self.classes()
    }

    pub fn residue(&self, generation: i32) -> u32 {
        generation.rem_euclid(self.log2_a0 as i32) as u32
    }

    pub fn class(&self, position: &[i64; MAX_DIM]) -> usize {
        let m = self.modulus as i64;
        position[..self.dim]
            .iter()
            .rev()
            .fold(0usize, |acc, &p| acc * m as usize + p.rem_euclid(m) as usize)
    }

    pub fn family(&self, generation: i32, position: &[i64; MAX_DIM]) -> usize {
        self.residue(generation) as usize * self.classes() + self.class(position)
    }

    /// Residue and position class of family `j`.
    pub fn split(&self, family: usize) -> (u32, usize) {
        ((family / self.classes()) as u32, family % self.classes())
    }
}

/// Family assignment of a set of dyadic cubes of one system.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FamilyPartition {
    pub layout: FamilyLayout,
    pub system: u16,
    pub assignment: BTreeMap<DyadicTag, usize>,
}

impl FamilyPartition {
    pub fn family_of(&self, tag: &DyadicTag) -> Option<usize> {
        self.assignment.get(tag).copied()
    }

    /// Cubes of family `j`, in tag order.
    pub fn members(&self, family: usize) -> Vec<DyadicTag> {
        self.assignment
            .iter()
            .filter(|(_, &f)| f == family)
            .map(|(t, _)| *t)
            .collect()
    }
}

/// Split cubes of one dyadic system into `N₀` families with well separated
/// members of equal generation and generations `b` apart.
pub fn partition_families(dim: usize, cubes: &[DyadicTag], log2_a0: u32) -> Result<FamilyPartition> {
    let layout = FamilyLayout::new(dim, log2_a0)?;
    let system = cubes.first().map_or(0, |t| t.system);
    if cubes.iter().any(|t| t.system != system) {
        return Err(Error::MixedSystems);
    }
    let assignment = cubes
        .iter()
        .map(|t| (*t, layout.family(t.generation, &t.position)))
        .collect();
    Ok(FamilyPartition {
        layout,
        system,
        assignment,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tag(system: u16, generation: i32, p: i64) -> DyadicTag {
        DyadicTag {
            system,
            generation,
            position: [p, 0, 0],
        }
    }

    #[test]
    fn modulus_and_counts() {
        let l = FamilyLayout::new(1, 2).unwrap();
        assert_eq!(l.modulus, 7);
        assert_eq!(l.families(), 14);
        let l = FamilyLayout::new(2, 9).unwrap();
        assert_eq!(l.modulus, 10);
        assert_eq!(l.families(), 900);
    }

    #[test]
    fn nearby_cubes_are_separated() {
        let part = partition_families(1, &[tag(0, 0, 0), tag(0, 0, 2)], 2).unwrap();
        assert_ne!(
            part.family_of(&tag(0, 0, 0)),
            part.family_of(&tag(0, 0, 2))
        );
    }

    #[test]
    fn generations_b_apart_share_a_family() {
        let part = partition_families(1, &[tag(0, 1, 3), tag(0, 3, 3)], 2).unwrap();
        assert_eq!(part.family_of(&tag(0, 1, 3)), part.family_of(&tag(0, 3, 3)));
        let (r, c) = part.layout.split(part.family_of(&tag(0, 1, 3)).unwrap());
        assert_eq!((r, c), (1, 3));
    }

    #[test]
    fn negative_positions_wrap() {
        let l = FamilyLayout::new(1, 2).unwrap();
        assert_eq!(l.class(&[-1, 0, 0]), 6);
        assert_eq!(l.residue(-3), 1);
    }

    #[test]
    fn mixed_systems_rejected() {
        assert!(matches!(
            partition_families(1, &[tag(0, 0, 0), tag(1, 0, 0)], 2),
            Err(Error::MixedSystems)
        ));
    }
}
