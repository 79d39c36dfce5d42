use std::cmp::Ordering;
use std::collections::{BinaryHeap, HashMap};

use serde::{Deserialize, Serialize};

use crate::bmo::{dyadic_doubling_cubes, CubeFamily, NormKind, NormParams, NormReport, Stats, TestFunction, Witness};
use crate::delta::{balls_reach, cubes_reach, delta_balls, delta_cubes};
use crate::error::Result;
use crate::geometry::{Cube, DyadicSystem, Region};
use crate::lattice::{AtomId, Filtration};
use crate::measure::PointMeasure;

/// Generations `coarse..=fine` of a dyadic system.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DyadicWindow {
    pub coarse: i32,
    pub fine: i32,
}

/// Margin on early-exit `δ` comparisons, far above summation-order rounding.
const PRUNE_SLACK: f64 = 1e-9;

/// `max |Δ| / δ` over `items`, visiting them by decreasing `|Δ|`. Since
/// `δ ≥ 1`, the scan stops once `|Δ|` drops to the best quotient, and a pair
/// is skipped when a partial `δ` sum already rules it out.
fn max_quotient<P: Copy>(
    items: Vec<(f64, P)>,
    mut reaches: impl FnMut(&P, f64) -> Result<bool>,
    mut delta: impl FnMut(&P) -> Result<f64>,
) -> Result<Option<(f64, P)>> {
    let mut heap: BinaryHeap<ByGap<P>> = items
        .into_iter()
        .enumerate()
        .map(|(k, (gap, p))| ByGap { gap, k, p })
        .collect();
    let mut best: Option<(f64, P)> = None;
    while let Some(ByGap { gap: d, p, .. }) = heap.pop() {
        if let Some((b, _)) = best {
            if d <= b {
                break;
            }
            if b > 0.0 && reaches(&p, d / b * (1.0 + PRUNE_SLACK))? {
                continue;
            }
        }
        let q = d / delta(&p)?;
        if best.map_or(true, |(b, _)| q > b) {
            best = Some((q, p));
        }
    }
    Ok(best)
}

/// Max-heap entry: larger gap first, then earlier item.
struct ByGap<P> {
    gap: f64,
    k: usize,
    p: P,
}

impl<P> PartialEq for ByGap<P> {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other).is_eq()
    }
}

impl<P> Eq for ByGap<P> {}

impl<P> PartialOrd for ByGap<P> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl<P> Ord for ByGap<P> {
    fn cmp(&self, other: &Self) -> Ordering {
        self.gap.total_cmp(&other.gap).then(other.k.cmp(&self.k))
    }
}

fn region_stats(mu: &PointMeasure, g: &[f64], region: &Region) -> Result<Stats> {
    let mut idx = mu.support_in(region)?;
    idx.sort_unstable();
    Ok(Stats::of(mu.weights(), g, idx.into_iter()))
}

fn family_stats(mu: &PointMeasure, g: &[f64], fam: &CubeFamily) -> Result<Vec<Option<Stats>>> {
    fam.cubes
        .iter()
        .zip(&fam.doubling)
        .map(|(q, &dbl)| {
            if dbl {
                region_stats(mu, g, &Region::Cube(*q)).map(Some)
            } else {
                Ok(None)
            }
        })
        .collect()
}

fn oscillation_sup(stats: &[Option<Stats>], cubes: &[Cube], kind: NormKind, domain: &str) -> NormReport {
    let mut best: Option<(f64, Witness)> = None;
    for (i, s) in stats.iter().enumerate() {
        if let Some(s) = s {
            if best.as_ref().map_or(true, |(b, _)| s.osc > *b) {
                best = Some((s.osc, Witness::Cube { cube: cubes[i] }));
            }
        }
    }
    NormReport::leaf(kind, best, domain.to_string())
}

fn cube_pair_sup(
    mu: &PointMeasure,
    stats: &[Option<Stats>],
    cubes: &[Cube],
    pairs: &[(u32, u32)],
    kind: NormKind,
    domain: &str,
) -> Result<NormReport> {
    let avg = |i: u32| stats[i as usize].expect("pairs join doubling cubes").avg;
    let items = pairs.iter().map(|&(i, j)| ((avg(i) - avg(j)).abs(), (i, j))).collect();
    let cube = |i: u32| &cubes[i as usize];
    let best = max_quotient(
        items,
        |&(i, j), limit| cubes_reach(mu, cube(i), cube(j), limit),
        |&(i, j)| Ok(delta_cubes(mu, cube(i), cube(j))?.value),
    )?;
    Ok(NormReport::leaf(
        kind,
        best.map(|(v, (i, j))| {
            (
                v,
                Witness::CubePair {
                    inner: *cube(i),
                    outer: *cube(j),
                },
            )
        }),
        domain.to_string(),
    ))
}

fn family_parts(mu: &PointMeasure, f: &TestFunction, fam: &CubeFamily) -> Result<(NormReport, NormReport)> {
    f.check(mu)?;
    let g = f.centered();
    let stats = family_stats(mu, &g, fam)?;
    let dbmo = oscillation_sup(&stats, &fam.cubes, NormKind::Dbmo, &fam.descriptor);
    let rbmo_d = cube_pair_sup(mu, &stats, &fam.cubes, &fam.nested_pairs, NormKind::RbmoD, &fam.descriptor)?;
    Ok((dbmo, rbmo_d))
}

/// `sup (1/μ(Q)) Σ_Q w |f - ⟨f⟩_Q|` over the doubling cubes of `fam`.
pub fn dbmo_norm(mu: &PointMeasure, f: &TestFunction, fam: &CubeFamily) -> Result<NormReport> {
    f.check(mu)?;
    let stats = family_stats(mu, &f.centered(), fam)?;
    Ok(oscillation_sup(&stats, &fam.cubes, NormKind::Dbmo, &fam.descriptor))
}

/// `sup |⟨f⟩_Q - ⟨f⟩_R| / δ(Q, R)` over the nested doubling pairs of `fam`.
pub fn rbmo_d_norm(mu: &PointMeasure, f: &TestFunction, fam: &CubeFamily) -> Result<NormReport> {
    Ok(family_parts(mu, f, fam)?.1)
}

/// The larger of [`dbmo_norm`] and [`rbmo_d_norm`].
pub fn rbmo_norm(mu: &PointMeasure, f: &TestFunction, fam: &CubeFamily) -> Result<NormReport> {
    let (dbmo, rbmo_d) = family_parts(mu, f, fam)?;
    let top = if rbmo_d.value > dbmo.value { &rbmo_d } else { &dbmo };
    Ok(NormReport {
        kind: NormKind::Rbmo,
        value: top.value,
        witness: top.witness.clone(),
        domain: fam.descriptor.clone(),
        empty: dbmo.empty && rbmo_d.empty,
        parts: vec![dbmo, rbmo_d],
    })
}

/// Per-atom statistics, indexed like the levels of `f`.
fn atom_stats(mu: &PointMeasure, g: &[f64], f: &Filtration) -> Result<Vec<Vec<Stats>>> {
    let mut out = Vec::with_capacity(f.depth());
    for (l, level) in f.levels().iter().enumerate() {
        let mut v = Vec::with_capacity(level.atoms.len());
        for i in 0..level.atoms.len() {
            let m = f.members(AtomId::new(l, i))?;
            v.push(Stats::of(mu.weights(), g, m.iter().map(|&x| x as usize)));
        }
        out.push(v);
    }
    Ok(out)
}

fn filtration_domain(f: &Filtration) -> String {
    format!(
        "filtration (system {}, family {}) with {} levels and {} atoms",
        f.system,
        f.family,
        f.depth(),
        f.levels().iter().map(|l| l.atoms.len()).sum::<usize>()
    )
}

/// `sup_T [osc_T f + |⟨f⟩_T - ⟨f⟩_{T̂}|]`, the root contributing its oscillation.
pub fn rbmo_sigma_norm(mu: &PointMeasure, f: &TestFunction, filt: &Filtration) -> Result<NormReport> {
    f.check(mu)?;
    let stats = atom_stats(mu, &f.centered(), filt)?;
    let mut best: Option<(f64, Witness)> = None;
    for (id, atom) in filt.atoms() {
        let s = stats[id.level as usize][id.index as usize];
        let jump = match atom.parent {
            Some(p) => (s.avg - stats[id.level as usize - 1][p as usize].avg).abs(),
            None => 0.0,
        };
        let v = s.osc + jump;
        if best.as_ref().map_or(true, |(b, _)| v > *b) {
            best = Some((v, Witness::Atom { atom: id }));
        }
    }
    Ok(NormReport::leaf(NormKind::RbmoSigma, best, filtration_domain(filt)))
}

/// `sup_T osc_T f + sup_{T, j ≥ 1} |⟨f⟩_T - ⟨f⟩_{T^(j)}| / δ(T, T^(j))`, with
/// `δ` in ball form at the filtration's `α`.
pub fn rbmo_sigma_star_norm(mu: &PointMeasure, f: &TestFunction, filt: &Filtration) -> Result<NormReport> {
    f.check(mu)?;
    let alpha = filt.params().alpha;
    let stats = atom_stats(mu, &f.centered(), filt)?;
    let avg = |id: AtomId| stats[id.level as usize][id.index as usize].avg;
    let domain = filtration_domain(filt);

    let mut osc: Option<(f64, Witness)> = None;
    let mut items = Vec::new();
    for (id, _) in filt.atoms() {
        let s = stats[id.level as usize][id.index as usize];
        if osc.as_ref().map_or(true, |(b, _)| s.osc > *b) {
            osc = Some((s.osc, Witness::Atom { atom: id }));
        }
        let mut up = id;
        for _ in 0..id.level {
            up = filt.parent(up)?;
            items.push(((avg(id) - avg(up)).abs(), (id, up)));
        }
    }
    let ball = |id: AtomId| filt.atom(id).map(|a| a.ball);
    let jump = max_quotient(
        items,
        |&(q, r), limit| balls_reach(mu, &ball(q)?, &ball(r)?, alpha, limit),
        |&(q, r)| Ok(delta_balls(mu, &ball(q)?, &ball(r)?, alpha)?.value),
    )?;
    let osc = NormReport::leaf(NormKind::Oscillation, osc, domain.clone());
    let jump = NormReport::leaf(
        NormKind::Jump,
        jump.map(|(v, (q, r))| (v, Witness::AtomPair { inner: q, outer: r })),
        domain.clone(),
    );
    Ok(summed(NormKind::RbmoSigmaStar, osc, jump, domain))
}

fn summed(kind: NormKind, osc: NormReport, jump: NormReport, domain: String) -> NormReport {
    let witness = if jump.value > osc.value {
        jump.witness.clone()
    } else {
        osc.witness.clone()
    };
    NormReport {
        kind,
        value: osc.value + jump.value,
        witness,
        domain,
        empty: osc.empty,
        parts: vec![osc, jump],
    }
}

/// `(T, |⟨f⟩_T - ⟨f⟩_{T̂}|, δ(T, T̂))` for every non-root atom.
pub fn sigma_parent_jumps(mu: &PointMeasure, f: &TestFunction, filt: &Filtration) -> Result<Vec<(AtomId, f64, f64)>> {
    parent_jumps_above(mu, f, filt, f64::NEG_INFINITY)
}

/// Like [`sigma_parent_jumps`], computing `δ` only for jumps above `floor`
/// (the others get `δ = 1`, a lower bound).
pub(crate) fn parent_jumps_above(
    mu: &PointMeasure,
    f: &TestFunction,
    filt: &Filtration,
    floor: f64,
) -> Result<Vec<(AtomId, f64, f64)>> {
    f.check(mu)?;
    let alpha = filt.params().alpha;
    let stats = atom_stats(mu, &f.centered(), filt)?;
    let mut out = Vec::new();
    for (id, atom) in filt.atoms() {
        if let Some(p) = atom.parent {
            let pid = AtomId::new(id.level as usize - 1, p as usize);
            let jump = (stats[id.level as usize][id.index as usize].avg - stats[pid.level as usize][p as usize].avg).abs();
            let d = if jump > floor {
                delta_balls(mu, &atom.ball, &filt.atom(pid)?.ball, alpha)?.value
            } else {
                1.0
            };
            out.push((id, jump, d));
        }
    }
    Ok(out)
}

/// Oscillation sup plus nested-pair sup over the `(α, β)`-doubling cubes of
/// one dyadic system inside `window`.
pub fn rbmo_dyadic_norm(
    mu: &PointMeasure,
    f: &TestFunction,
    system: &DyadicSystem,
    params: NormParams,
    window: DyadicWindow,
) -> Result<NormReport> {
    f.check(mu)?;
    let g = f.centered();
    let found = dyadic_doubling_cubes(mu, system, params, window.coarse, window.fine)?;
    let cubes: Vec<Cube> = found.iter().map(|(_, q)| *q).collect();
    let stats = cubes
        .iter()
        .map(|q| region_stats(mu, &g, &Region::Cube(*q)).map(Some))
        .collect::<Result<Vec<_>>>()?;
    let index: HashMap<_, u32> = found
        .iter()
        .enumerate()
        .map(|(i, (t, _))| ((t.generation, t.position), i as u32))
        .collect();
    let mut pairs = Vec::new();
    for (i, (tag, _)) in found.iter().enumerate() {
        let mut pos = tag.position;
        for gen in (window.coarse..tag.generation).rev() {
            pos = system.parent_position(gen + 1, &pos);
            if let Some(&j) = index.get(&(gen, pos)) {
                pairs.push((i as u32, j));
            }
        }
    }
    let domain = format!(
        "dyadic system {} generations {}..={}: {} doubling cubes, {} nested pairs; (alpha, beta) = ({}, {})",
        system.index(),
        window.coarse,
        window.fine,
        cubes.len(),
        pairs.len(),
        params.alpha,
        params.beta
    );
    let osc = oscillation_sup(&stats, &cubes, NormKind::Oscillation, &domain);
    let jump = cube_pair_sup(mu, &stats, &cubes, &pairs, NormKind::Jump, &domain)?;
    Ok(summed(NormKind::RbmoDyadic, osc, jump, domain))
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::bmo::FamilySpec;
    use crate::geometry::Point;
    use crate::lattice::{FiltrationFamily, LatticeParams};
    use crate::measure::Generator;

    #[test]
    fn constants_vanish() {
        let mu = Generator::UniformCube { points: 60, dim: 2 }.generate(1).unwrap();
        let fam = CubeFamily::build(&mu, NormParams::small(2), &FamilySpec::default(), &[]).unwrap();
        let c = TestFunction::constant(&mu, 0.3);
        assert_eq!(rbmo_norm(&mu, &c, &fam).unwrap().value, 0.0);
        let lat = FiltrationFamily::new(Arc::new(mu.clone()), LatticeParams::relaxed(2)).unwrap();
        let filt = lat.get(5).unwrap();
        assert_eq!(rbmo_sigma_norm(&mu, &c, &filt).unwrap().value, 0.0);
        assert_eq!(rbmo_sigma_star_norm(&mu, &c, &filt).unwrap().value, 0.0);
        let sys = DyadicSystem::standard(2).unwrap();
        let w = DyadicWindow { coarse: 0, fine: 4 };
        assert_eq!(rbmo_dyadic_norm(&mu, &c, &sys, NormParams::small(2), w).unwrap().value, 0.0);
    }

    #[test]
    fn indicator_oscillation() {
        let pts = vec![Point::new(&[0.1]).unwrap(), Point::new(&[0.6]).unwrap()];
        let mu = PointMeasure::new(1, 1.0, pts, vec![1.0, 3.0]).unwrap();
        let q = Cube::new(Point::new(&[0.5]).unwrap(), 1.0).unwrap();
        let fam = CubeFamily::from_cubes(&mu, NormParams::small(1), vec![q], "one cube".into()).unwrap();
        let f = TestFunction::indicator(&mu, 0).unwrap();
        let (w, m) = (1.0, 4.0);
        let want = 2.0 * w * (m - w) / (m * m);
        assert!((dbmo_norm(&mu, &f, &fam).unwrap().value - want).abs() < 1e-15);
    }

    #[test]
    fn pruned_scan_matches_full_scan() {
        let mu = Generator::PowerLawDensity {
            points: 120,
            dim: 2,
            exponent: 1.2,
            epsilon: 1e-3,
        }
        .generate(6)
        .unwrap();
        let fam = CubeFamily::build(&mu, NormParams::small(2), &FamilySpec::default(), &[]).unwrap();
        let f = TestFunction::uniform(&mu, 3);
        let fast = rbmo_d_norm(&mu, &f, &fam).unwrap().value;
        let mut slow: f64 = 0.0;
        for &(i, j) in &fam.nested_pairs {
            let (q, r) = (&fam.cubes[i as usize], &fam.cubes[j as usize]);
            let a = avg_of(&mu, &f, q) - avg_of(&mu, &f, r);
            slow = slow.max(a.abs() / delta_cubes(&mu, q, r).unwrap().value);
        }
        assert!((fast - slow).abs() < 1e-12, "{fast} vs {slow}");
    }

    fn avg_of(mu: &PointMeasure, f: &TestFunction, q: &Cube) -> f64 {
        crate::bmo::avg(mu, f, &Region::Cube(*q)).unwrap()
    }
}
