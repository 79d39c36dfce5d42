use std::sync::{Arc, OnceLock};

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geometry::{Cube, DyadicTag, Region};
use crate::lattice::build::BuildContext;
use crate::lattice::partition::FamilyLayout;
use crate::lattice::{AtomId, Filtration, LatticeParams, Regime};
use crate::measure::PointMeasure;
use crate::onethird::{Cover, SystemFamily};

/// All `N = 3^d N₀` filtrations of one measure, built on first access.
pub struct FiltrationFamily {
    ctx: BuildContext,
    cache: Vec<OnceLock<Arc<Filtration>>>,
}

/// Where a doubling cube was found.
#[derive(Clone, Debug, PartialEq)]
pub struct Lookup {
    pub filtration: usize,
    pub atom: AtomId,
    /// The dyadic cube `Q'` with `Q ⊂ Q' ⊂ 6Q` whose ball is `B_T`.
    pub cover: Cover,
}

impl std::fmt::Debug for FiltrationFamily {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("FiltrationFamily")
            .field("dim", &self.ctx.dim)
            .field("params", &self.ctx.params)
            .field("filtrations", &self.cache.len())
            .field("generations", &(self.ctx.g_coarse, self.ctx.g_fine))
            .finish()
    }
}

impl FiltrationFamily {
    pub fn new(mu: Arc<PointMeasure>, params: LatticeParams) -> Result<Self> {
        let ctx = BuildContext::new(mu, params)?;
        let cache = (0..ctx.filtrations()).map(|_| OnceLock::new()).collect();
        Ok(Self { ctx, cache })
    }

    pub fn measure(&self) -> &PointMeasure {
        &self.ctx.mu
    }

    pub fn measure_arc(&self) -> &Arc<PointMeasure> {
        &self.ctx.mu
    }

    pub fn params(&self) -> &LatticeParams {
        &self.ctx.params
    }

    pub fn dim(&self) -> usize {
        self.ctx.dim
    }

    pub fn regime(&self) -> Regime {
        self.ctx.params.regime(self.ctx.dim)
    }

    pub fn layout(&self) -> &FamilyLayout {
        &self.ctx.layout
    }

    pub fn systems(&self) -> &SystemFamily {
        &self.ctx.systems
    }

    /// `N`.
    pub fn len(&self) -> usize {
        self.cache.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cache.is_empty()
    }

    /// `(system, family)` of filtration `id`.
    pub fn split_id(&self, id: usize) -> (usize, usize) {
        self.ctx.split_id(id)
    }

    pub fn id_of(&self, system: usize, family: usize) -> usize {
        self.ctx.id(system, family)
    }

    /// Coarsest and finest generation spanned by the construction.
    pub fn generation_bounds(&self) -> (i32, i32) {
        (self.ctx.g_coarse, self.ctx.g_fine)
    }

    /// Generations whose doubling dyadic cubes are pre-seeded.
    pub fn preseeded_generations(&self) -> Option<(i32, i32)> {
        self.ctx.seeded
    }

    /// Coarsest and finest generation of filtration `id`.
    pub fn filtration_generations(&self, id: usize) -> (i32, i32) {
        let (_, family) = self.split_id(id);
        self.ctx.generation_range(self.ctx.layout.split(family).0)
    }

    /// Filtration `id`, building it on first access.
    pub fn get(&self, id: usize) -> Result<Arc<Filtration>> {
        let slot = self
            .cache
            .get(id)
            .ok_or_else(|| Error::InvalidParams(format!("no filtration {id}")))?;
        if let Some(f) = slot.get() {
            return Ok(Arc::clone(f));
        }
        let built = Arc::new(self.ctx.build(id)?);
        Ok(Arc::clone(slot.get_or_init(|| built)))
    }

    pub fn is_built(&self, id: usize) -> bool {
        self.cache.get(id).is_some_and(|s| s.get().is_some())
    }

    /// Ids of the filtrations built so far.
    pub fn built_ids(&self) -> Vec<usize> {
        (0..self.len()).filter(|&i| self.is_built(i)).collect()
    }

    /// Build filtration `id` without caching it.
    pub fn build_uncached(&self, id: usize) -> Result<Filtration> {
        self.ctx.build(id)
    }

    /// Build and cache every filtration.
    pub fn build_all(&self) -> Result<()> {
        (0..self.len()).into_par_iter().try_for_each(|id| self.get(id).map(drop))
    }

    pub(crate) fn insert(&self, id: usize, filtration: Filtration) -> Result<()> {
        let slot = self
            .cache
            .get(id)
            .ok_or_else(|| Error::InvalidParams(format!("no filtration {id}")))?;
        slot.set(Arc::new(filtration))
            .map_err(|_| Error::InvalidParams(format!("filtration {id} loaded twice")))
    }

    /// Doubling dyadic cubes of system `m` at `generation` that are pre-seeded
    /// in some filtration.
    pub fn preseeded_cubes(&self, system: usize, generation: i32) -> Vec<DyadicTag> {
        let sys = self.ctx.systems.systems()[system];
        self.ctx
            .preseed_table(system, generation)
            .iter()
            .map(|(_, p)| sys.tag(generation, *p))
            .collect()
    }

    /// Pre-seeded cubes realized by filtration `id`, coarse to fine.
    pub fn preseeds_of(&self, id: usize) -> Vec<DyadicTag> {
        let (system, family) = self.split_id(id);
        let (residue, class) = self.ctx.layout.split(family);
        let (top, bottom) = self.ctx.generation_range(residue);
        let b = self.ctx.params.log2_a0 as usize;
        (top..=bottom)
            .step_by(b)
            .flat_map(|k| self.ctx.preseeds_of(system, class, k))
            .collect()
    }

    /// Filtration id and pre-seeded tag of a dyadic cube, if it is pre-seeded.
    pub fn locate_preseed(&self, tag: &DyadicTag) -> Option<usize> {
        let table = self.ctx.preseed_table(tag.system as usize, tag.generation);
        let class = self.ctx.layout.class(&tag.position) as u32;
        table
            .binary_search(&(class, tag.position))
            .ok()
            .map(|_| {
                self.ctx
                    .id(tag.system as usize, self.ctx.layout.family(tag.generation, &tag.position))
            })
    }

    /// The atom `T` with `Q ∩ supp(μ) ⊂ T` for an `(α₀, C₀)`-doubling cube `Q`.
    pub fn lookup_cube(&self, q: &Cube) -> Result<Lookup> {
        let mu = self.measure();
        let alpha0 = self.ctx.params.alpha0(self.ctx.dim);
        let c0 = self.ctx.params.c0();
        if !mu.is_doubling(&Region::Cube(*q), alpha0, c0)? {
            return Err(Error::NotDoubling {
                alpha: alpha0,
                beta: c0,
            });
        }
        let cover = self.ctx.systems.cover_cube(q)?;
        let id = self.locate_preseed(&cover.tag).ok_or_else(|| {
            Error::NotPreseeded(format!(
                "{} (pre-seeded generations {:?})",
                cover.tag, self.ctx.seeded
            ))
        })?;
        let filtration = self.get(id)?;
        let atom = filtration.find_preseed(&cover.tag).ok_or_else(|| {
            Error::InvariantBreach(format!("filtration {id} does not realize {}", cover.tag))
        })?;
        Ok(Lookup {
            filtration: id,
            atom,
            cover,
        })
    }
}
