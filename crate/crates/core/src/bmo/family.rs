use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::bmo::NormParams;
use crate::error::{Error, Result};
use crate::geometry::{Cube, DyadicSystem, DyadicTag, Region};
use crate::measure::{geometric_grid, PointMeasure};

/// How to lay out the support-centered part of a [`CubeFamily`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FamilySpec {
    /// At most this many support points serve as centers, sampled with `seed`.
    pub centers: usize,
    /// Side lengths; by default a ratio-2 grid from the minimal separation to
    /// twice the extent of the support.
    pub sides: Option<Vec<f64>>,
    pub seed: u64,
    /// Support indices that are always centers, on top of the sample.
    #[serde(default)]
    pub include: Vec<usize>,
}

impl Default for FamilySpec {
    fn default() -> Self {
        Self {
            centers: 200,
            sides: None,
            seed: 0,
            include: Vec::new(),
        }
    }
}

impl FamilySpec {
    pub fn default_sides(mu: &PointMeasure) -> Vec<f64> {
        let ext = mu.extent();
        match mu.min_separation() {
            None => vec![1.0],
            Some(sep) => geometric_grid(sep, 2.0 * ext.max(sep), 2.0),
        }
    }
}

/// A finite family of cubes with `(α, β)`-doubling flags and all nested pairs
/// of doubling cubes.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CubeFamily {
    pub params: NormParams,
    pub cubes: Vec<Cube>,
    pub doubling: Vec<bool>,
    /// `(inner, outer)` indices with `cubes[inner] ⊊ cubes[outer]`, both doubling.
    pub nested_pairs: Vec<(u32, u32)>,
    pub descriptor: String,
}

impl CubeFamily {
    /// Explicit cubes; exact duplicates are dropped.
    pub fn from_cubes(mu: &PointMeasure, params: NormParams, cubes: Vec<Cube>, descriptor: String) -> Result<Self> {
        let mut seen = std::collections::HashSet::new();
        let mut kept = Vec::with_capacity(cubes.len());
        for q in cubes {
            if q.dim() != mu.dim() {
                return Err(Error::DimensionMismatch {
                    expected: mu.dim(),
                    found: q.dim(),
                });
            }
            let key: Vec<u64> = q.lo().iter().chain(q.hi()).map(|v| v.to_bits()).collect();
            if seen.insert(key) {
                kept.push(q);
            }
        }
        let doubling = kept
            .iter()
            .map(|q| mu.is_doubling(&Region::Cube(*q), params.alpha, params.beta))
            .collect::<Result<Vec<_>>>()?;

        let mut by_side: Vec<u32> = (0..kept.len() as u32).filter(|&i| doubling[i as usize]).collect();
        by_side.sort_by(|&a, &b| kept[a as usize].side().total_cmp(&kept[b as usize].side()).then(a.cmp(&b)));
        let mut nested_pairs = Vec::new();
        for &i in &by_side {
            let q = &kept[i as usize];
            let start = by_side.partition_point(|&k| kept[k as usize].side() < q.side());
            for &j in &by_side[start..] {
                if j != i && kept[j as usize].contains_cube(q) {
                    nested_pairs.push((i, j));
                }
            }
        }
        Ok(Self {
            params,
            cubes: kept,
            doubling,
            nested_pairs,
            descriptor,
        })
    }

    /// Cubes centered at (sampled) support points with the spec's sides,
    /// followed by `extra`.
    pub fn build(mu: &PointMeasure, params: NormParams, spec: &FamilySpec, extra: &[Cube]) -> Result<Self> {
        let sides = spec.sides.clone().unwrap_or_else(|| FamilySpec::default_sides(mu));
        if let Some(&bad) = spec.include.iter().find(|&&i| i >= mu.len()) {
            return Err(Error::InvalidParams(format!("included center {bad} is not an atom")));
        }
        let mut centers: Vec<usize> = if mu.len() <= spec.centers {
            (0..mu.len()).collect()
        } else {
            let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
            sample(&mut rng, mu.len(), spec.centers).into_vec()
        };
        centers.extend_from_slice(&spec.include);
        centers.sort_unstable();
        centers.dedup();
        let mut cubes = Vec::with_capacity(centers.len() * sides.len() + extra.len());
        for &c in &centers {
            for &s in &sides {
                cubes.push(Cube::new(mu.points()[c], s)?);
            }
        }
        cubes.extend_from_slice(extra);
        let descriptor = format!(
            "{} support-centered cubes ({} centers x {} sides from {:.3e} to {:.3e}) + {} extra cubes; (alpha, beta) = ({}, {})",
            centers.len() * sides.len(),
            centers.len(),
            sides.len(),
            sides.first().copied().unwrap_or(0.0),
            sides.last().copied().unwrap_or(0.0),
            extra.len(),
            params.alpha,
            params.beta
        );
        Self::from_cubes(mu, params, cubes, descriptor)
    }

    pub fn len(&self) -> usize {
        self.cubes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cubes.is_empty()
    }

    pub fn doubling_count(&self) -> usize {
        self.doubling.iter().filter(|&&b| b).count()
    }
}

/// `(α, β)`-doubling cubes of `system` meeting the support, for generations
/// `coarse..=fine`, coarse to fine and by position within a generation.
pub fn dyadic_doubling_cubes(
    mu: &PointMeasure,
    system: &DyadicSystem,
    params: NormParams,
    coarse: i32,
    fine: i32,
) -> Result<Vec<(DyadicTag, Cube)>> {
    if system.dim() != mu.dim() {
        return Err(Error::DimensionMismatch {
            expected: mu.dim(),
            found: system.dim(),
        });
    }
    let mut out = Vec::new();
    for g in coarse..=fine {
        let mut positions: Vec<_> = mu.points().iter().map(|x| system.locate(x, g)).collect();
        positions.sort_unstable();
        positions.dedup();
        for p in positions {
            let q = system.cube(g, &p);
            if mu.is_doubling(&Region::Cube(q), params.alpha, params.beta)? {
                out.push((system.tag(g, p), q));
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Point;

    #[test]
    fn pairs_are_nested_and_doubling() {
        let mu = crate::measure::Generator::UniformCube { points: 40, dim: 2 }
            .generate(2)
            .unwrap();
        let fam = CubeFamily::build(&mu, NormParams::small(2), &FamilySpec::default(), &[]).unwrap();
        assert!(!fam.nested_pairs.is_empty());
        for &(i, j) in &fam.nested_pairs {
            assert!(fam.doubling[i as usize] && fam.doubling[j as usize]);
            assert!(fam.cubes[j as usize].contains_cube(&fam.cubes[i as usize]));
            assert_ne!(i, j);
        }
        let d = fam.cubes.len();
        let brute = (0..d)
            .flat_map(|i| (0..d).map(move |j| (i, j)))
            .filter(|&(i, j)| {
                i != j && fam.doubling[i] && fam.doubling[j] && fam.cubes[j].contains_cube(&fam.cubes[i])
            })
            .count();
        assert_eq!(brute, fam.nested_pairs.len());
    }

    #[test]
    fn dyadic_children_nest_in_parents() {
        let mu = crate::measure::Generator::UniformCube { points: 30, dim: 2 }
            .generate(8)
            .unwrap();
        let sys = DyadicSystem::from_index(2, 4).unwrap();
        let cubes = dyadic_doubling_cubes(&mu, &sys, NormParams::small(2), -1, 3).unwrap();
        for (tag, q) in &cubes {
            if tag.generation > -1 {
                let pp = sys.parent_position(tag.generation, &tag.position);
                assert!(sys.cube(tag.generation - 1, &pp).contains_cube(q));
            }
        }
        let one = PointMeasure::new(1, 1.0, vec![Point::new(&[0.3]).unwrap()], vec![1.0]).unwrap();
        let sys1 = DyadicSystem::standard(1).unwrap();
        assert_eq!(dyadic_doubling_cubes(&one, &sys1, NormParams::small(1), 0, 4).unwrap().len(), 5);
    }
}
