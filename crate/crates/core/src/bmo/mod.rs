//! RBMO-type norms over finite families of cubes and over filtrations.
//!
//! Every sup is taken over an explicit finite domain, so each value is a lower
//! bound for the corresponding continuum norm. The domain is recorded in the
//! report.

mod compare;
mod family;
mod norms;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Cube, Point, Region};
use crate::lattice::{AtomId, Filtration};
use crate::measure::PointMeasure;

pub use compare::{
    compare_norms, CompareConfig, ComparisonReport, ComparisonRow, ExactCheck, FiltrationSample, RatioRow,
};
pub use family::{dyadic_doubling_cubes, CubeFamily, FamilySpec};
pub use norms::{
    dbmo_norm, rbmo_d_norm, rbmo_dyadic_norm, rbmo_norm, rbmo_sigma_norm, rbmo_sigma_star_norm,
    sigma_parent_jumps, DyadicWindow,
};

/// A function on the support of a measure, one value per atom.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TestFunction {
    pub label: String,
    pub values: Vec<f64>,
}

impl TestFunction {
    pub fn new(label: impl Into<String>, values: Vec<f64>) -> Self {
        Self {
            label: label.into(),
            values,
        }
    }

    pub fn constant(mu: &PointMeasure, c: f64) -> Self {
        Self::new(format!("constant({c})"), vec![c; mu.len()])
    }

    /// Independent uniform values in `[0, 1)`.
    pub fn uniform(mu: &PointMeasure, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Self::new(
            format!("uniform(seed={seed})"),
            (0..mu.len()).map(|_| rng.gen::<f64>()).collect(),
        )
    }

    /// `1` at atom `i`, `0` elsewhere.
    pub fn indicator(mu: &PointMeasure, i: usize) -> Result<Self> {
        if i >= mu.len() {
            return Err(Error::InvalidParams(format!("no atom {i}")));
        }
        let mut v = vec![0.0; mu.len()];
        v[i] = 1.0;
        Ok(Self::new(format!("indicator({i})"), v))
    }

    /// `log(1 / max(|x - x₀|, ε))` with `ε` half the minimal separation.
    pub fn log_distance(mu: &PointMeasure, x0: &Point) -> Result<Self> {
        if x0.dim() != mu.dim() {
            return Err(Error::DimensionMismatch {
                expected: mu.dim(),
                found: x0.dim(),
            });
        }
        let eps = mu.min_separation().unwrap_or(1.0) / 2.0;
        let values = mu
            .points()
            .iter()
            .map(|x| -(x.dist(x0).max(eps)).ln())
            .collect();
        Ok(Self::new(format!("log_distance({x0:?})"), values))
    }

    /// Averages of a uniform random function over the atoms of `level`.
    pub fn martingale(mu: &PointMeasure, f: &Filtration, level: usize, seed: u64) -> Result<Self> {
        let base = Self::uniform(mu, seed);
        let lv = f
            .levels()
            .get(level)
            .ok_or_else(|| Error::InvalidParams(format!("no level {level}")))?;
        let mut values = vec![0.0; mu.len()];
        for i in 0..lv.atoms.len() {
            let members = f.members(AtomId::new(level, i))?;
            let s = Stats::of(mu.weights(), &base.values, members.iter().map(|&m| m as usize));
            for &m in members {
                values[m as usize] = s.avg;
            }
        }
        Ok(Self::new(format!("martingale(level={level}, seed={seed})"), values))
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self::new(
            format!("{c}*{}", self.label),
            self.values.iter().map(|v| c * v).collect(),
        )
    }

    pub fn shifted(&self, c: f64) -> Self {
        Self::new(
            format!("{}+{c}", self.label),
            self.values.iter().map(|v| v + c).collect(),
        )
    }

    pub(crate) fn check(&self, mu: &PointMeasure) -> Result<()> {
        if self.values.len() == mu.len() {
            Ok(())
        } else {
            Err(Error::FunctionLength {
                expected: mu.len(),
                found: self.values.len(),
            })
        }
    }

    /// Values relative to the first one. Norms only see differences, and
    /// constants become exactly zero.
    pub(crate) fn centered(&self) -> Vec<f64> {
        let c = self.values.first().copied().unwrap_or(0.0);
        self.values.iter().map(|v| v - c).collect()
    }
}

/// `⟨f⟩_region`, the `μ`-average of `f` over the support points inside.
pub fn avg(mu: &PointMeasure, f: &TestFunction, region: &Region) -> Result<f64> {
    f.check(mu)?;
    let idx = mu.support_in(region)?;
    if idx.is_empty() {
        return Err(Error::ZeroMass);
    }
    let mut idx = idx;
    idx.sort_unstable();
    let r = f.values[idx[0]];
    let rel: Vec<f64> = f.values.iter().map(|v| v - r).collect();
    Ok(r + Stats::of(mu.weights(), &rel, idx.into_iter()).avg)
}

/// Mass, average and mean oscillation over a set of support points.
#[derive(Clone, Copy, Debug, PartialEq)]
pub(crate) struct Stats {
    pub mass: f64,
    pub avg: f64,
    pub osc: f64,
}

impl Stats {
    pub fn of(weights: &[f64], values: &[f64], idx: impl Iterator<Item = usize> + Clone) -> Self {
        let mut mass = 0.0;
        let mut wf = 0.0;
        for i in idx.clone() {
            mass += weights[i];
            wf += weights[i] * values[i];
        }
        let avg = wf / mass;
        let mut dev = 0.0;
        for i in idx {
            dev += weights[i] * (values[i] - avg).abs();
        }
        Self {
            mass,
            avg,
            osc: dev / mass,
        }
    }
}

/// Parameters `(α, β)` of a doubling condition, checked against
/// `β > (6α)^d`, the stronger of the two standing hypotheses.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NormParams {
    pub alpha: f64,
    pub beta: f64,
}

impl NormParams {
    pub fn new(dim: usize, alpha: f64, beta: f64) -> Result<Self> {
        if !(alpha > 1.0 && alpha.is_finite()) {
            return Err(Error::InvalidParams(format!("alpha = {alpha} must exceed 1")));
        }
        let weak = alpha.powi(dim as i32);
        if !(beta > weak) {
            return Err(Error::InvalidParams(format!(
                "beta = {beta} must exceed alpha^d = {weak}"
            )));
        }
        let strong = (6.0 * alpha).powi(dim as i32);
        if !(beta > strong) {
            return Err(Error::InvalidParams(format!(
                "beta = {beta} must exceed (6 alpha)^d = {strong}"
            )));
        }
        Ok(Self { alpha, beta })
    }

    /// `(2, 12^d + 1)`.
    pub fn small(dim: usize) -> Self {
        Self::new(dim, 2.0, 12f64.powi(dim as i32) + 1.0).expect("valid preset")
    }

    /// `(8, 48^d + 1)`.
    pub fn large(dim: usize) -> Self {
        Self::new(dim, 8.0, 48f64.powi(dim as i32) + 1.0).expect("valid preset")
    }
}

/// Which norm a report holds.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NormKind {
    Dbmo,
    RbmoD,
    Rbmo,
    RbmoSigma,
    RbmoSigmaStar,
    RbmoDyadic,
    /// Oscillation part of a summed norm.
    Oscillation,
    /// Normalized jump part of a summed norm.
    Jump,
}

impl NormKind {
    pub fn name(&self) -> &'static str {
        match self {
            NormKind::Dbmo => "dbmo",
            NormKind::RbmoD => "rbmo_d",
            NormKind::Rbmo => "rbmo",
            NormKind::RbmoSigma => "rbmo_sigma",
            NormKind::RbmoSigmaStar => "rbmo_sigma_star",
            NormKind::RbmoDyadic => "rbmo_dyadic",
            NormKind::Oscillation => "oscillation",
            NormKind::Jump => "jump",
        }
    }
}

/// Where a sup is attained.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Witness {
    None,
    Cube { cube: Cube },
    CubePair { inner: Cube, outer: Cube },
    Atom { atom: AtomId },
    AtomPair { inner: AtomId, outer: AtomId },
}

/// A norm value with its witness and the finite domain it was taken over.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NormReport {
    pub kind: NormKind,
    pub value: f64,
    pub witness: Witness,
    pub domain: String,
    /// The domain held nothing to take a sup over; the value is 0.
    pub empty: bool,
    /// Parts of a max- or sum-combined norm.
    pub parts: Vec<NormReport>,
}

impl NormReport {
    pub(crate) fn leaf(kind: NormKind, best: Option<(f64, Witness)>, domain: String) -> Self {
        let empty = best.is_none();
        let (value, witness) = best.unwrap_or((0.0, Witness::None));
        Self {
            kind,
            value,
            witness,
            domain,
            empty,
            parts: Vec::new(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pt(c: &[f64]) -> Point {
        Point::new(c).unwrap()
    }

    #[test]
    fn averages() {
        let mu = PointMeasure::new(1, 1.0, vec![pt(&[0.0]), pt(&[1.0])], vec![1.0, 3.0]).unwrap();
        let f = TestFunction::new("f", vec![0.0, 4.0]);
        let all = Region::Cube(Cube::new(pt(&[0.5]), 4.0).unwrap());
        assert_eq!(avg(&mu, &f, &all).unwrap(), 3.0);
        let one = Region::Cube(Cube::new(pt(&[1.0]), 0.5).unwrap());
        assert_eq!(avg(&mu, &f, &one).unwrap(), 4.0);
        let c = TestFunction::constant(&mu, 0.7);
        assert_eq!(avg(&mu, &c, &all).unwrap(), 0.7);
        assert!((avg(&mu, &f.shifted(0.1), &all).unwrap() - 3.1).abs() < 1e-15);
        let none = Region::Cube(Cube::new(pt(&[9.0]), 0.5).unwrap());
        assert!(matches!(avg(&mu, &f, &none), Err(Error::ZeroMass)));
    }

    #[test]
    fn presets_satisfy_hypotheses() {
        for d in 1..=3 {
            NormParams::small(d);
            NormParams::large(d);
        }
        let err = NormParams::new(2, 2.0, 5.0).unwrap_err().to_string();
        assert!(err.contains("(6 alpha)^d"), "{err}");
        let err = NormParams::new(2, 2.0, 3.0).unwrap_err().to_string();
        assert!(err.contains("alpha^d"), "{err}");
    }
}
