use std::fs::File;
use std::io::BufReader;
use std::path::{Path, PathBuf};

use rbmo_core::bmo::FiltrationSample;
use rbmo_core::{Error, Generator, LatticeParams, NormParams, PointMeasure, Regime, Result};
use serde::{Deserialize, Serialize};

/// Everything a run needs. Every field has a default, so `{}` is a valid config.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub out: PathBuf,
    pub measure: MeasureSource,
    pub lattice: LatticeSection,
    /// Filtration file to read; `<out>/family.json` when absent.
    pub family: Option<PathBuf>,
    /// Filtrations to build, verify and use for norms.
    pub filtrations: FiltrationSample,
    pub norms: NormSection,
    pub verify: VerifySection,
    pub plot: PlotSection,
    /// Worker threads; all cores when absent.
    pub workers: Option<usize>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            out: PathBuf::from("out"),
            measure: MeasureSource::default(),
            lattice: LatticeSection::default(),
            family: None,
            filtrations: FiltrationSample::Evenly(16),
            norms: NormSection::default(),
            verify: VerifySection::default(),
            plot: PlotSection::default(),
            workers: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum MeasureSource {
    Generator(Generator),
    /// A JSON measure file, or CSV with `growth_exp` given.
    File { path: PathBuf, growth_exp: Option<f64> },
}

impl Default for MeasureSource {
    fn default() -> Self {
        MeasureSource::Generator(Generator::UniformCube { points: 100, dim: 2 })
    }
}

impl MeasureSource {
    pub fn load(&self, seed: u64) -> Result<PointMeasure> {
        match self {
            MeasureSource::Generator(g) => g.generate(seed),
            MeasureSource::File { path, growth_exp } => {
                if path.extension().is_some_and(|e| e == "csv") {
                    PointMeasure::from_csv(BufReader::new(File::open(path)?), *growth_exp)
                } else {
                    PointMeasure::load(path)
                }
            }
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    /// Constants must meet the theorem's hypotheses.
    Paper,
    /// Desk-scale constants, accepted explicitly.
    Relaxed,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LatticeSection {
    pub mode: Mode,
    pub alpha: Option<f64>,
    pub log2_c0: Option<u32>,
    pub log2_a0: Option<u32>,
    pub generation_window: Option<(i32, i32)>,
}

impl Default for LatticeSection {
    fn default() -> Self {
        Self {
            mode: Mode::Relaxed,
            alpha: None,
            log2_c0: None,
            log2_a0: None,
            generation_window: None,
        }
    }
}

impl LatticeSection {
    /// Preset of the mode with the overrides applied, checked for legality.
    pub fn params(&self, dim: usize) -> Result<LatticeParams> {
        let mut p = match self.mode {
            Mode::Paper => LatticeParams::paper(dim),
            Mode::Relaxed => LatticeParams::relaxed(dim),
        };
        if let Some(a) = self.alpha {
            p.alpha = a;
        }
        if let Some(c) = self.log2_c0 {
            p.log2_c0 = c;
        }
        if let Some(a) = self.log2_a0 {
            p.log2_a0 = a;
        }
        p.generation_window = self.generation_window;
        p.validate(dim)?;
        if self.mode == Mode::Paper && p.regime(dim) != Regime::PaperFaithful {
            return Err(Error::InvalidParams(format!(
                "alpha = {}, C0 = 2^{}, A0 = 2^{} miss the paper-faithful constraints (alpha > 60, C0 > (6 sqrt(d) alpha)^d, A0 > 5000 C0); set lattice.mode = \"relaxed\" to accept them",
                p.alpha, p.log2_c0, p.log2_a0
            )));
        }
        Ok(p)
    }
}

/// A test function on the support.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum FunctionSpec {
    Uniform { seed: u64 },
    LogDistance { point: usize },
    Indicator { atom: usize },
    Martingale { filtration: usize, level: usize, seed: u64 },
    Constant { value: f64 },
    Values { label: String, values: Vec<f64> },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NormSection {
    /// `(α, β)` of the main doubling condition; `(2, 12^d + 1)` when absent.
    pub small: Option<(f64, f64)>,
    /// Second `(α, β)` pair; `(8, 48^d + 1)` when absent.
    pub large: Option<(f64, f64)>,
    pub centers: usize,
    /// Atoms always used as cube centers; the atoms of `log_distance` and
    /// `indicator` functions are added automatically.
    pub include_centers: Vec<usize>,
    pub sides: Option<Vec<f64>>,
    pub dyadic_window: Option<(i32, i32)>,
    pub functions: Vec<FunctionSpec>,
    pub ratio_window: (f64, f64),
}

impl Default for NormSection {
    fn default() -> Self {
        Self {
            small: None,
            large: None,
            centers: 200,
            include_centers: Vec::new(),
            sides: None,
            dyadic_window: None,
            functions: vec![
                FunctionSpec::Uniform { seed: 1 },
                FunctionSpec::LogDistance { point: 0 },
                FunctionSpec::Indicator { atom: 0 },
            ],
            ratio_window: (0.01, 100.0),
        }
    }
}

impl NormSection {
    pub fn pairs(&self, dim: usize) -> Result<(NormParams, NormParams)> {
        let pick = |p: Option<(f64, f64)>, preset: NormParams| match p {
            Some((a, b)) => NormParams::new(dim, a, b),
            None => Ok(preset),
        };
        Ok((
            pick(self.small, NormParams::small(dim))?,
            pick(self.large, NormParams::large(dim))?,
        ))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VerifySection {
    /// Random query cubes for the lookup check.
    pub queries: usize,
    /// Random cube pairs for the δ checks.
    pub delta_pairs: usize,
    pub histogram_bins: usize,
}

impl Default for VerifySection {
    fn default() -> Self {
        Self {
            queries: 500,
            delta_pairs: 500,
            histogram_bins: 10,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PlotSection {
    pub filtration: usize,
    pub level: usize,
    /// Dilates of each ball drawn besides the ball itself.
    pub dilates: Vec<f64>,
    pub size: f64,
}

impl Default for PlotSection {
    fn default() -> Self {
        Self {
            filtration: 0,
            level: 1,
            dilates: vec![5.0, 30.0],
            size: 800.0,
        }
    }
}

impl RunConfig {
    pub fn read(path: &Path) -> Result<Self> {
        Ok(serde_json::from_reader(BufReader::new(File::open(path)?))?)
    }

    pub fn family_path(&self) -> PathBuf {
        self.family.clone().unwrap_or_else(|| self.out.join("family.json"))
    }
}
