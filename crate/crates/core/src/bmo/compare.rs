use std::collections::{HashMap, HashSet};
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::bmo::norms::{parent_jumps_above, rbmo_dyadic_norm, rbmo_norm, rbmo_sigma_norm, rbmo_sigma_star_norm};
use crate::bmo::{dyadic_doubling_cubes, CubeFamily, DyadicWindow, FamilySpec, NormParams, TestFunction};
use crate::error::Result;
use crate::geometry::{Cube, DyadicSystem, DyadicTag};
use crate::lattice::{FiltrationFamily, Regime};
use crate::measure::PointMeasure;

/// Which filtrations of a family enter `max_j`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "count", rename_all = "snake_case")]
pub enum FiltrationSample {
    All,
    /// This many ids spread evenly over `0..N`.
    Evenly(usize),
}

impl FiltrationSample {
    pub fn ids(&self, n: usize) -> Vec<usize> {
        match *self {
            FiltrationSample::All => (0..n).collect(),
            FiltrationSample::Evenly(k) if k >= n => (0..n).collect(),
            FiltrationSample::Evenly(k) => (0..k).map(|i| i * n / k).collect(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CompareConfig {
    pub instance: String,
    pub small: NormParams,
    pub large: NormParams,
    pub family: FamilySpec,
    /// Dyadic generations for the per-system norms; by default five
    /// generations starting where one cube spans the support.
    pub dyadic_window: Option<DyadicWindow>,
    pub filtrations: FiltrationSample,
    pub ratio_window: (f64, f64),
}

impl CompareConfig {
    pub fn new(dim: usize, instance: impl Into<String>) -> Self {
        Self {
            instance: instance.into(),
            small: NormParams::small(dim),
            large: NormParams::large(dim),
            family: FamilySpec::default(),
            dyadic_window: None,
            filtrations: FiltrationSample::All,
            ratio_window: (0.01, 100.0),
        }
    }

    pub fn window(&self, mu: &PointMeasure) -> DyadicWindow {
        self.dyadic_window.unwrap_or_else(|| {
            let coarse = -(2.0 * mu.extent().max(f64::MIN_POSITIVE)).log2().ceil() as i32;
            DyadicWindow {
                coarse,
                fine: coarse + 4,
            }
        })
    }
}

/// One norm value.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub instance: String,
    pub function: String,
    pub norm: String,
    /// `family`, `filtration:<id>`, `system:<m>`, or `ratio`.
    pub scope: String,
    pub value: Option<f64>,
    pub empty: bool,
}

/// A ratio of two norms; undefined when a side vanishes.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RatioRow {
    pub function: String,
    pub name: String,
    pub value: Option<f64>,
    pub window: (f64, f64),
    pub within: Option<bool>,
}

/// An inequality that holds exactly by construction of the domains.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExactCheck {
    pub name: String,
    pub function: String,
    pub checked: usize,
    pub violations: usize,
    pub worst: Option<String>,
}

impl ExactCheck {
    pub fn pass(&self) -> bool {
        self.violations == 0
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub instance: String,
    pub regime: Regime,
    pub note: String,
    pub cube_family: String,
    pub dyadic_window: DyadicWindow,
    pub filtrations: Vec<usize>,
    pub rows: Vec<ComparisonRow>,
    pub ratios: Vec<RatioRow>,
    pub exact: Vec<ExactCheck>,
}

const NOTE: &str = "all norms are sups over the finite domains named in each report and are lower bounds for the continuum norms; ratio windows test boundedness and stability only, no constant is claimed";

impl ComparisonReport {
    pub fn exact_pass(&self) -> bool {
        self.exact.iter().all(ExactCheck::pass)
    }

    pub fn ratios_within(&self) -> bool {
        self.ratios.iter().all(|r| r.within != Some(false))
    }

    pub fn to_json<W: Write>(&self, w: W) -> Result<()> {
        serde_json::to_writer_pretty(w, self)?;
        Ok(())
    }

    /// One row per norm per function, followed by the ratios.
    pub fn to_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["instance", "function", "norm", "scope", "value", "empty"])?;
        let fmt = |v: Option<f64>| v.map_or_else(|| "undefined".to_string(), |x| format!("{x:e}"));
        for r in &self.rows {
            out.write_record([
                r.instance.as_str(),
                &r.function,
                &r.norm,
                &r.scope,
                &fmt(r.value),
                if r.empty { "true" } else { "false" },
            ])?;
        }
        for r in &self.ratios {
            out.write_record([self.instance.as_str(), &r.function, &r.name, "ratio", &fmt(r.value), "false"])?;
        }
        out.flush()?;
        Ok(())
    }
}

fn ratio(a: f64, b: f64) -> Option<f64> {
    (a > 0.0 && b > 0.0).then(|| a / b)
}

/// All norms of every test function, the ratios between them and the exact
/// structural inequalities.
///
/// The cube family for `(α, β) = small` contains every doubling cube of every
/// shifted dyadic system in the dyadic window, so each dyadic nested pair is a
/// nested pair of the family.
pub fn compare_norms(
    mu: &PointMeasure,
    fam: &FiltrationFamily,
    functions: &[TestFunction],
    cfg: &CompareConfig,
) -> Result<ComparisonReport> {
    let dim = mu.dim();
    let window = cfg.window(mu);
    let systems: Vec<DyadicSystem> = (0..3usize.pow(dim as u32))
        .map(|m| DyadicSystem::from_index(dim, m))
        .collect::<Result<_>>()?;
    let mut dyadic = Vec::new();
    for sys in &systems {
        dyadic.extend(dyadic_doubling_cubes(mu, sys, cfg.small, window.coarse, window.fine)?);
    }
    let extra: Vec<Cube> = dyadic.iter().map(|(_, q)| *q).collect();
    let small = CubeFamily::build(mu, cfg.small, &cfg.family, &extra)?;
    let large = CubeFamily::build(mu, cfg.large, &cfg.family, &extra)?;
    let ids = cfg.filtrations.ids(fam.len());
    let filtrations = ids.iter().map(|&id| fam.get(id)).collect::<Result<Vec<_>>>()?;

    let mut rows = Vec::new();
    let mut ratios = Vec::new();
    let mut exact = Vec::new();
    let inclusion = dyadic_pairs_included(&small, &systems, &dyadic, window);
    exact.push(inclusion);

    for f in functions {
        let mut row = |norm: &str, scope: String, value: f64, empty: bool| {
            rows.push(ComparisonRow {
                instance: cfg.instance.clone(),
                function: f.label.clone(),
                norm: norm.to_string(),
                scope,
                value: Some(value),
                empty,
            })
        };
        let rbmo = rbmo_norm(mu, f, &small)?;
        row("dbmo", "family".into(), rbmo.parts[0].value, rbmo.parts[0].empty);
        row("rbmo_d", "family".into(), rbmo.parts[1].value, rbmo.parts[1].empty);
        row("rbmo", "family".into(), rbmo.value, rbmo.empty);
        let rbmo_large = rbmo_norm(mu, f, &large)?;
        row("rbmo_large_params", "family".into(), rbmo_large.value, rbmo_large.empty);

        let mut star_max: f64 = 0.0;
        let mut ineq1 = ExactCheck {
            name: "parent jump <= delta * S2".into(),
            function: f.label.clone(),
            checked: 0,
            violations: 0,
            worst: None,
        };
        for (filt, &id) in filtrations.iter().zip(&ids) {
            let sigma = rbmo_sigma_norm(mu, f, filt)?;
            let star = rbmo_sigma_star_norm(mu, f, filt)?;
            row("rbmo_sigma", format!("filtration:{id}"), sigma.value, sigma.empty);
            row("rbmo_sigma_star", format!("filtration:{id}"), star.value, star.empty);
            star_max = star_max.max(star.value);
            let s2 = star.parts[1].value;
            for (atom, jump, delta) in parent_jumps_above(mu, f, filt, s2)? {
                ineq1.checked += 1;
                if jump > s2 && jump / delta > s2 {
                    ineq1.violations += 1;
                    ineq1.worst = Some(format!("filtration {id} atom {atom:?}: {jump} / {delta} > {s2}"));
                }
            }
        }
        exact.push(ineq1);

        let mut dyadic_max: f64 = 0.0;
        let mut ineq2 = ExactCheck {
            name: "dyadic norm <= rbmo norm".into(),
            function: f.label.clone(),
            checked: 0,
            violations: 0,
            worst: None,
        };
        let mut parts = ExactCheck {
            name: "dyadic oscillation <= dbmo and dyadic jump <= rbmo_d".into(),
            function: f.label.clone(),
            checked: 0,
            violations: 0,
            worst: None,
        };
        for sys in &systems {
            let d = rbmo_dyadic_norm(mu, f, sys, cfg.small, window)?;
            parts.checked += 1;
            if d.parts[0].value > rbmo.parts[0].value || d.parts[1].value > rbmo.parts[1].value {
                parts.violations += 1;
                parts.worst = Some(format!(
                    "system {}: ({}, {}) vs ({}, {})",
                    sys.index(),
                    d.parts[0].value,
                    d.parts[1].value,
                    rbmo.parts[0].value,
                    rbmo.parts[1].value
                ));
            }
            row("rbmo_dyadic", format!("system:{}", sys.index()), d.value, d.empty);
            dyadic_max = dyadic_max.max(d.value);
            ineq2.checked += 1;
            if d.value > rbmo.value {
                ineq2.violations += 1;
                ineq2.worst = Some(format!(
                    "system {}: {} (oscillation {} + jump {}) > {}",
                    sys.index(),
                    d.value,
                    d.parts[0].value,
                    d.parts[1].value,
                    rbmo.value
                ));
            }
        }
        exact.push(ineq2);
        exact.push(parts);

        let mut add = |name: &str, value: Option<f64>| {
            ratios.push(RatioRow {
                function: f.label.clone(),
                name: name.to_string(),
                value,
                window: cfg.ratio_window,
                within: value.map(|v| cfg.ratio_window.0 <= v && v <= cfg.ratio_window.1),
            })
        };
        add("rbmo / max_j rbmo_sigma_star", ratio(rbmo.value, star_max));
        add("max_j rbmo_sigma_star / rbmo", ratio(star_max, rbmo.value));
        add("rbmo / rbmo_large_params", ratio(rbmo.value, rbmo_large.value));
        add("rbmo / max_m rbmo_dyadic", ratio(rbmo.value, dyadic_max));
    }

    Ok(ComparisonReport {
        instance: cfg.instance.clone(),
        regime: fam.regime(),
        note: NOTE.into(),
        cube_family: small.descriptor.clone(),
        dyadic_window: window,
        filtrations: ids,
        rows,
        ratios,
        exact,
    })
}

/// Every dyadic nested pair used by the per-system norms is a nested pair of
/// `fam`.
fn dyadic_pairs_included(fam: &CubeFamily, systems: &[DyadicSystem], dyadic: &[(DyadicTag, Cube)], window: DyadicWindow) -> ExactCheck {
    let key = |q: &Cube| -> Vec<u64> { q.lo().iter().chain(q.hi()).map(|v| v.to_bits()).collect() };
    let pos: HashMap<Vec<u64>, u32> = fam.cubes.iter().enumerate().map(|(i, q)| (key(q), i as u32)).collect();
    let pairs: HashSet<(u32, u32)> = fam.nested_pairs.iter().copied().collect();
    let tags: HashMap<DyadicTag, u32> = dyadic
        .iter()
        .filter_map(|(t, q)| pos.get(&key(q)).map(|&i| (*t, i)))
        .collect();
    let doubling: HashSet<DyadicTag> = dyadic.iter().map(|(t, _)| *t).collect();
    let mut check = ExactCheck {
        name: "dyadic pairs included in cube family".into(),
        function: "-".into(),
        checked: 0,
        violations: 0,
        worst: None,
    };
    for (tag, q) in dyadic {
        let sys = &systems[tag.system as usize];
        let mut p = tag.position;
        for gen in (window.coarse..tag.generation).rev() {
            p = sys.parent_position(gen + 1, &p);
            let up = sys.tag(gen, p);
            if !doubling.contains(&up) {
                continue;
            }
            let Some(&j) = tags.get(&up) else {
                check.checked += 1;
                check.violations += 1;
                check.worst = Some(format!("{up} missing from the cube family"));
                continue;
            };
            check.checked += 1;
            let ok = matches!(tags.get(tag), Some(&i) if pairs.contains(&(i, j)));
            if !ok {
                check.violations += 1;
                check.worst = Some(format!("{q:?} in {up}"));
            }
        }
    }
    check
}
