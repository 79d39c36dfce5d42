//! Finite weighted point measures, polynomial growth and doubling predicates.

use std::io::{Read, Write};
use std::path::Path;
use std::sync::OnceLock;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Ball, Point, Region};
use crate::spatial::KdTree;

/// Default geometric ratio of radius grids.
pub const GRID_RATIO: f64 = 1.189_207_115_002_721; // 2^(1/4)

/// A finite measure `μ = Σ w_i δ_{x_i}` on `R^d` with declared growth exponent `n`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PointMeasure {
    dim: usize,
    #[serde(rename = "n")]
    growth_exp: f64,
    points: Vec<Point>,
    weights: Vec<f64>,
    #[serde(skip)]
    index: OnceLock<KdTree>,
}

/// Grid-restricted estimate of the growth constant `C_μ`.
///
/// Point masses violate `μ(B(x,r)) ≤ C r^n` as `r → 0`, so the estimate is
/// only meaningful over the radii listed in `radius_grid`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GrowthReport {
    pub c_mu_estimate: f64,
    pub witness_point: usize,
    pub witness_radius: f64,
    pub radius_grid: Vec<f64>,
    pub note: String,
}

impl PointMeasure {
    pub fn new(dim: usize, growth_exp: f64, points: Vec<Point>, weights: Vec<f64>) -> Result<Self> {
        if !(1..=crate::geometry::MAX_DIM).contains(&dim) {
            return Err(Error::UnsupportedDimension(dim));
        }
        if !(growth_exp > 0.0 && growth_exp <= dim as f64) {
            return Err(Error::InvalidMeasure(format!(
                "growth exponent {growth_exp} outside (0, {dim}]"
            )));
        }
        if points.len() != weights.len() {
            return Err(Error::InvalidMeasure(format!(
                "{} points but {} weights",
                points.len(),
                weights.len()
            )));
        }
        if points.is_empty() {
            return Err(Error::EmptyMeasure);
        }
        for p in &points {
            if p.dim() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    found: p.dim(),
                });
            }
        }
        if let Some(w) = weights.iter().find(|w| !(**w > 0.0 && w.is_finite())) {
            return Err(Error::InvalidMeasure(format!("non-positive weight {w}")));
        }
        let mut sorted: Vec<&Point> = points.iter().collect();
        sorted.sort_by(|a, b| {
            a.coords()
                .iter()
                .zip(b.coords())
                .map(|(x, y)| x.total_cmp(y))
                .find(|o| o.is_ne())
                .unwrap_or(std::cmp::Ordering::Equal)
        });
        if let Some(w) = sorted.windows(2).find(|w| w[0] == w[1]) {
            return Err(Error::InvalidMeasure(format!("repeated atom at {:?}", w[0])));
        }
        Ok(Self {
            dim,
            growth_exp,
            points,
            weights,
            index: OnceLock::new(),
        })
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn growth_exp(&self) -> f64 {
        self.growth_exp
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.points.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    #[inline]
    pub fn points(&self) -> &[Point] {
        &self.points
    }

    #[inline]
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn total_mass(&self) -> f64 {
        let idx = self.index();
        let total: i128 = self.weights.iter().map(|&w| idx.scale().quantize(w)).sum();
        idx.scale().to_f64(total)
    }

    /// The spatial index, built on first use.
    pub fn index(&self) -> &KdTree {
        self.index
            .get_or_init(|| KdTree::new(&self.points, &self.weights))
    }

    fn check_region(&self, region: &Region) -> Result<()> {
        if region.dim() == self.dim {
            Ok(())
        } else {
            Err(Error::DimensionMismatch {
                expected: self.dim,
                found: region.dim(),
            })
        }
    }

    /// `μ(region)`: total weight of the support points inside.
    pub fn mass(&self, region: &Region) -> Result<f64> {
        self.check_region(region)?;
        Ok(self.index().mass(region))
    }

    /// Same as [`mass`](Self::mass) for callers that already checked dimensions.
    #[inline]
    pub(crate) fn mass_unchecked(&self, region: &Region) -> f64 {
        self.index().mass(region)
    }

    /// Whether `μ(α·region) ≤ β μ(region)`. Zero-mass regions are never doubling.
    pub fn is_doubling(&self, region: &Region, alpha: f64, beta: f64) -> Result<bool> {
        self.check_region(region)?;
        let m = self.mass_unchecked(region);
        if m <= 0.0 {
            return Ok(false);
        }
        Ok(self.mass_unchecked(&region.dilate(alpha)?) <= beta * m)
    }

    /// Indices of support points inside `region`, in canonical order.
    pub fn support_in(&self, region: &Region) -> Result<Vec<usize>> {
        self.check_region(region)?;
        Ok(self.index().indices_in(region))
    }

    /// Smallest distance between two distinct atoms (`None` for one atom).
    pub fn min_separation(&self) -> Option<f64> {
        if self.len() < 2 {
            return None;
        }
        let idx = self.index();
        (0..self.len())
            .map(|i| idx.nearest_other(&self.points, i))
            .min_by(f64::total_cmp)
    }

    /// Diagonal of the bounding box of the support; an upper bound for its diameter.
    pub fn extent(&self) -> f64 {
        let mut lo = [f64::INFINITY; 3];
        let mut hi = [f64::NEG_INFINITY; 3];
        for p in &self.points {
            for (a, &c) in p.coords().iter().enumerate() {
                lo[a] = lo[a].min(c);
                hi[a] = hi[a].max(c);
            }
        }
        (0..self.dim)
            .map(|a| (hi[a] - lo[a]).powi(2))
            .sum::<f64>()
            .sqrt()
    }

    /// Geometric grid with ratio `2^(1/4)` spanning
    /// `[min separation / 4, 2 · extent]`.
    pub fn default_radius_grid(&self) -> Vec<f64> {
        match self.min_separation() {
            None => vec![1.0],
            Some(sep) => geometric_grid(sep / 4.0, 2.0 * self.extent(), GRID_RATIO),
        }
    }

    /// Largest `μ(B(x,r)) / r^n` over support points and grid radii.
    pub fn growth_constant(&self, radius_grid: &[f64]) -> Result<GrowthReport> {
        if radius_grid.is_empty() || radius_grid.iter().any(|r| !(*r > 0.0)) {
            return Err(Error::InvalidParams(
                "radius grid must be nonempty and positive".into(),
            ));
        }
        let idx = self.index();
        let mut best = (f64::NEG_INFINITY, 0usize, radius_grid[0]);
        for (i, x) in self.points.iter().enumerate() {
            for &r in radius_grid {
                let m = idx.mass(&Region::Ball(Ball { center: *x, radius: r }));
                let ratio = m / r.powf(self.growth_exp);
                if ratio > best.0 {
                    best = (ratio, i, r);
                }
            }
        }
        Ok(GrowthReport {
            c_mu_estimate: best.0,
            witness_point: best.1,
            witness_radius: best.2,
            radius_grid: radius_grid.to_vec(),
            note: "sup restricted to support centers and the listed radii".into(),
        })
    }

    /// Rescale so that the grid-restricted growth constant becomes 1.
    pub fn normalize_growth(&self, radius_grid: &[f64]) -> Result<Self> {
        let c = self.growth_constant(radius_grid)?.c_mu_estimate;
        if c == 1.0 {
            return Ok(self.clone());
        }
        let weights = self.weights.iter().map(|w| w / c).collect();
        Self::new(self.dim, self.growth_exp, self.points.clone(), weights)
    }

    pub fn to_json<W: Write>(&self, w: W) -> Result<()> {
        serde_json::to_writer(w, self)?;
        Ok(())
    }

    pub fn from_json<R: Read>(r: R) -> Result<Self> {
        let raw: PointMeasure = serde_json::from_reader(r)?;
        Self::new(raw.dim, raw.growth_exp, raw.points, raw.weights)
    }

    /// One row per atom: `d` coordinates then the weight. No header.
    pub fn from_csv<R: Read>(r: R, growth_exp: Option<f64>) -> Result<Self> {
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(false)
            .trim(csv::Trim::All)
            .comment(Some(b'#'))
            .from_reader(r);
        let mut points = Vec::new();
        let mut weights = Vec::new();
        let mut dim = None;
        for rec in reader.records() {
            let rec = rec?;
            let vals: Vec<f64> = rec
                .iter()
                .map(|s| {
                    s.parse::<f64>()
                        .map_err(|e| Error::InvalidMeasure(format!("bad number {s:?}: {e}")))
                })
                .collect::<Result<_>>()?;
            if vals.len() < 2 {
                return Err(Error::InvalidMeasure(
                    "csv rows need coordinates and a weight".into(),
                ));
            }
            let d = vals.len() - 1;
            if *dim.get_or_insert(d) != d {
                return Err(Error::DimensionMismatch {
                    expected: dim.unwrap_or(d),
                    found: d,
                });
            }
            points.push(Point::new(&vals[..d])?);
            weights.push(vals[d]);
        }
        let dim = dim.ok_or(Error::EmptyMeasure)?;
        Self::new(dim, growth_exp.unwrap_or(dim as f64), points, weights)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let file = std::fs::File::open(path)?;
        let reader = std::io::BufReader::new(file);
        if path.extension().is_some_and(|e| e.eq_ignore_ascii_case("csv")) {
            Self::from_csv(reader, None)
        } else {
            Self::from_json(reader)
        }
    }
}

/// Radii `r_min · ratio^i` up to the first one reaching `r_max`.
pub fn geometric_grid(r_min: f64, r_max: f64, ratio: f64) -> Vec<f64> {
    assert!(r_min > 0.0 && ratio > 1.0);
    let mut out = vec![r_min];
    let mut i = 1;
    while *out.last().unwrap() < r_max {
        out.push(r_min * ratio.powi(i));
        i += 1;
    }
    out
}

/// Measure families used in experiments.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Generator {
    /// Equal weights at uniform points of `[0,1)^d`; `n = d`.
    UniformCube { points: usize, dim: usize },
    /// Uniform points on a horizontal segment of the unit square; `n = 1`, `d = 2`.
    SegmentInPlane { points: usize },
    /// Uniform points with weight `max(|x - x0|, eps)^-exponent`, `x0` the
    /// center of the unit cube; `n = d`.
    PowerLawDensity {
        points: usize,
        dim: usize,
        exponent: f64,
        epsilon: f64,
    },
    /// Middle-thirds Cantor dust of the given depth, each split handing
    /// `split` of the mass to the left half; `n = d log 2 / log 3`.
    CantorProduct { depth: u32, split: f64, dim: usize },
    /// Atoms `ratio^k e_1` with weights `ratio^k`, `k = 0..points`; `n = 1`.
    AccumulatingAtoms { points: usize, ratio: f64, dim: usize },
}

impl Generator {
    pub fn name(&self) -> &'static str {
        match self {
            Generator::UniformCube { .. } => "uniform_cube",
            Generator::SegmentInPlane { .. } => "segment_in_plane",
            Generator::PowerLawDensity { .. } => "power_law_density",
            Generator::CantorProduct { .. } => "cantor_product",
            Generator::AccumulatingAtoms { .. } => "accumulating_atoms",
        }
    }

    /// Raw (unnormalized) atoms.
    pub fn raw(&self, seed: u64) -> Result<PointMeasure> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let jitter = |rng: &mut ChaCha8Rng, scale: f64| rng.gen_range(-1.0..1.0) * scale;
        match *self {
            Generator::UniformCube { points, dim } => {
                positive("points", points)?;
                let pts = (0..points)
                    .map(|_| {
                        let c: Vec<f64> = (0..dim).map(|_| rng.gen::<f64>()).collect();
                        Point::new(&c)
                    })
                    .collect::<Result<Vec<_>>>()?;
                PointMeasure::new(dim, dim as f64, pts, vec![1.0 / points as f64; points])
            }
            Generator::SegmentInPlane { points } => {
                positive("points", points)?;
                let pts = (0..points)
                    .map(|_| {
                        let t = rng.gen::<f64>();
                        Point::new(&[t, 0.5 + jitter(&mut rng, 1e-9)])
                    })
                    .collect::<Result<Vec<_>>>()?;
                PointMeasure::new(2, 1.0, pts, vec![1.0 / points as f64; points])
            }
            Generator::PowerLawDensity {
                points,
                dim,
                exponent,
                epsilon,
            } => {
                positive("points", points)?;
                if !(exponent >= 0.0 && exponent < dim as f64) {
                    return Err(Error::InvalidParams(format!(
                        "power-law exponent {exponent} must lie in [0, n = {dim})"
                    )));
                }
                if !(epsilon > 0.0) {
                    return Err(Error::InvalidParams("epsilon must be positive".into()));
                }
                let x0 = Point::new(&vec![0.5; dim])?;
                let mut pts = Vec::with_capacity(points);
                let mut w = Vec::with_capacity(points);
                for _ in 0..points {
                    let c: Vec<f64> = (0..dim).map(|_| rng.gen::<f64>()).collect();
                    let p = Point::new(&c)?;
                    w.push(p.dist(&x0).max(epsilon).powf(-exponent));
                    pts.push(p);
                }
                PointMeasure::new(dim, dim as f64, pts, w)
            }
            Generator::CantorProduct { depth, split, dim } => {
                if !(split > 0.0 && split < 1.0) {
                    return Err(Error::InvalidParams(format!("split {split} outside (0, 1)")));
                }
                if depth == 0 || depth * dim as u32 > 20 {
                    return Err(Error::InvalidParams(format!(
                        "cantor depth {depth} in d = {dim} gives too many atoms"
                    )));
                }
                let per_axis = 1usize << depth;
                let cell = 3f64.powi(-(depth as i32));
                let axis: Vec<(f64, f64)> = (0..per_axis)
                    .map(|word| {
                        let mut x = 0.0;
                        let mut w = 1.0;
                        for level in 0..depth {
                            let bit = (word >> (depth - 1 - level)) & 1;
                            x += 2.0 * bit as f64 * 3f64.powi(-(level as i32) - 1);
                            w *= if bit == 0 { split } else { 1.0 - split };
                        }
                        (x + 0.5 * cell, w)
                    })
                    .collect();
                let total = per_axis.pow(dim as u32);
                let mut pts = Vec::with_capacity(total);
                let mut weights = Vec::with_capacity(total);
                for flat in 0..total {
                    let mut rem = flat;
                    let mut c = Vec::with_capacity(dim);
                    let mut w = 1.0;
                    for _ in 0..dim {
                        let (x, wx) = axis[rem % per_axis];
                        rem /= per_axis;
                        c.push(x + jitter(&mut rng, 1e-3 * cell));
                        w *= wx;
                    }
                    pts.push(Point::new(&c)?);
                    weights.push(w);
                }
                let n = dim as f64 * 2f64.ln() / 3f64.ln();
                PointMeasure::new(dim, n, pts, weights)
            }
            Generator::AccumulatingAtoms { points, ratio, dim } => {
                positive("points", points)?;
                if !(ratio > 0.0 && ratio < 1.0) {
                    return Err(Error::InvalidParams(format!("ratio {ratio} outside (0, 1)")));
                }
                let mut pts = Vec::with_capacity(points);
                let mut w = Vec::with_capacity(points);
                for k in 0..points {
                    let q = ratio.powi(k as i32);
                    let mut c = vec![0.0; dim];
                    c[0] = q * (1.0 + jitter(&mut rng, 1e-6));
                    for v in c.iter_mut().skip(1) {
                        *v = 0.5 + jitter(&mut rng, 1e-9);
                    }
                    pts.push(Point::new(&c)?);
                    w.push(q);
                }
                PointMeasure::new(dim, 1.0, pts, w)
            }
        }
    }

    /// Generated atoms, rescaled to unit growth constant on the default grid.
    pub fn generate(&self, seed: u64) -> Result<PointMeasure> {
        let raw = self.raw(seed)?;
        let grid = raw.default_radius_grid();
        raw.normalize_growth(&grid)
    }
}

fn positive(name: &str, v: usize) -> Result<()> {
    if v == 0 {
        Err(Error::InvalidParams(format!("{name} must be positive")))
    } else {
        Ok(())
    }
}
