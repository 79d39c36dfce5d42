use std::io::{Read, Write};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Ball, DyadicTag};
use crate::lattice::{Atom, AtomId, Filtration, FiltrationFamily, LatticeParams, Level};
use crate::measure::PointMeasure;

#[derive(Serialize, Deserialize)]
struct AtomRecord {
    id: AtomId,
    level: u32,
    ball: Ball,
    anchor: u32,
    member_indices: Vec<u32>,
    parent_id: Option<AtomId>,
    preseed_tag: Option<DyadicTag>,
    carried: bool,
}

#[derive(Serialize, Deserialize)]
struct LevelRecord {
    level: u32,
    generation: i32,
    atoms: Vec<AtomRecord>,
}

/// On-disk filtration. Level 0 is the root; every level is a list of atoms
/// with explicit member indices.
#[derive(Serialize, Deserialize)]
struct FiltrationRecord {
    dim: usize,
    system: usize,
    family: usize,
    params: LatticeParams,
    level_convention: String,
    levels: Vec<LevelRecord>,
}

const LEVEL_CONVENTION: &str =
    "level 0 is the root; level l is built at dyadic generation `generation`; radii of non-carried atoms lie in [R_k / C0, R_k] with R_k = sqrt(d) 2^-k / 2";

impl Filtration {
    fn to_record(&self) -> FiltrationRecord {
        let levels = self
            .levels()
            .iter()
            .enumerate()
            .map(|(l, level)| LevelRecord {
                level: l as u32,
                generation: level.generation,
                atoms: level
                    .atoms
                    .iter()
                    .enumerate()
                    .map(|(i, a)| AtomRecord {
                        id: AtomId::new(l, i),
                        level: l as u32,
                        ball: a.ball,
                        anchor: a.anchor,
                        member_indices: self.order()[a.members.start as usize..a.members.end as usize].to_vec(),
                        parent_id: a.parent.map(|p| AtomId::new(l - 1, p as usize)),
                        preseed_tag: a.preseed,
                        carried: a.carried,
                    })
                    .collect(),
            })
            .collect();
        FiltrationRecord {
            dim: self.dim(),
            system: self.system,
            family: self.family,
            params: *self.params(),
            level_convention: LEVEL_CONVENTION.into(),
            levels,
        }
    }

    fn from_record(rec: FiltrationRecord) -> Result<Self> {
        let bad = |msg: String| Error::InvalidParams(format!("malformed filtration: {msg}"));
        let finest = rec.levels.last().ok_or_else(|| bad("no levels".into()))?;
        let order: Vec<u32> = finest
            .atoms
            .iter()
            .flat_map(|a| a.member_indices.iter().copied())
            .collect();
        let mut pos = vec![u32::MAX; order.len()];
        for (i, &p) in order.iter().enumerate() {
            let slot = pos
                .get_mut(p as usize)
                .ok_or_else(|| bad(format!("point {p} out of range")))?;
            if *slot != u32::MAX {
                return Err(bad(format!("point {p} repeated")));
            }
            *slot = i as u32;
        }

        let depth = rec.levels.len();
        let mut levels: Vec<Level> = Vec::with_capacity(depth);
        for (l, lr) in rec.levels.iter().enumerate() {
            let mut atoms = Vec::with_capacity(lr.atoms.len());
            for (i, ar) in lr.atoms.iter().enumerate() {
                if ar.id != AtomId::new(l, i) || ar.level as usize != l {
                    return Err(bad(format!("atom id {:?} at level {l} index {i}", ar.id)));
                }
                let first = *ar
                    .member_indices
                    .first()
                    .ok_or_else(|| bad(format!("atom {:?} has no members", ar.id)))?;
                let start = pos[first as usize];
                for (k, &p) in ar.member_indices.iter().enumerate() {
                    if pos.get(p as usize) != Some(&(start + k as u32)) {
                        return Err(bad(format!("members of {:?} are not a slice of the point order", ar.id)));
                    }
                }
                let parent = match (l, ar.parent_id) {
                    (0, None) => None,
                    (l, Some(p)) if p.level as usize + 1 == l => Some(p.index),
                    _ => return Err(bad(format!("bad parent of {:?}", ar.id))),
                };
                atoms.push(Atom {
                    ball: ar.ball,
                    anchor: ar.anchor,
                    parent,
                    children: 0..0,
                    members: start..start + ar.member_indices.len() as u32,
                    preseed: ar.preseed_tag,
                    carried: ar.carried,
                });
            }
            levels.push(Level {
                generation: lr.generation,
                atoms,
            });
        }
        for l in 0..depth.saturating_sub(1) {
            let (upper, lower) = levels.split_at_mut(l + 1);
            let parents = &mut upper[l].atoms;
            let mut cursor = 0u32;
            for (i, a) in parents.iter_mut().enumerate() {
                let start = cursor;
                while (cursor as usize) < lower[0].atoms.len()
                    && lower[0].atoms[cursor as usize].parent == Some(i as u32)
                {
                    cursor += 1;
                }
                a.children = start..cursor;
            }
            if cursor as usize != lower[0].atoms.len() {
                return Err(bad(format!("children of level {l} are not contiguous")));
            }
        }
        Filtration::from_parts(rec.dim, rec.params, rec.system, rec.family, levels, order)
    }

    pub fn to_json<W: Write>(&self, w: W) -> Result<()> {
        serde_json::to_writer(w, &self.to_record())?;
        Ok(())
    }

    pub fn from_json<R: Read>(r: R) -> Result<Self> {
        Self::from_record(serde_json::from_reader(r)?)
    }
}

#[derive(Serialize, Deserialize)]
struct FamilyRecord {
    params: LatticeParams,
    measure: PointMeasure,
    filtrations: Vec<FiltrationRecord>,
}

impl FiltrationFamily {
    /// Measure, parameters and the filtrations built so far. Filtrations left
    /// out are rebuilt deterministically on access after loading.
    pub fn to_json<W: Write>(&self, w: W) -> Result<()> {
        let mut filtrations = Vec::new();
        for id in self.built_ids() {
            filtrations.push(self.get(id)?.to_record());
        }
        let rec = FamilyRecord {
            params: *self.params(),
            measure: self.measure().clone(),
            filtrations,
        };
        serde_json::to_writer(w, &rec)?;
        Ok(())
    }

    pub fn from_json<R: Read>(r: R) -> Result<Self> {
        let rec: FamilyRecord = serde_json::from_reader(r)?;
        let mu = PointMeasure::new(
            rec.measure.dim(),
            rec.measure.growth_exp(),
            rec.measure.points().to_vec(),
            rec.measure.weights().to_vec(),
        )?;
        let fam = FiltrationFamily::new(Arc::new(mu), rec.params)?;
        for fr in rec.filtrations {
            let f = Filtration::from_record(fr)?;
            let id = fam.id_of(f.system, f.family);
            fam.insert(id, f)?;
        }
        Ok(fam)
    }
}
