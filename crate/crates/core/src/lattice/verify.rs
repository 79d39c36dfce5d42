use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::geometry::{Ball, Cube, DyadicSystem, DyadicTag, Region};
use crate::lattice::{ladder_radius, AtomId, Filtration, FiltrationFamily};
use crate::measure::PointMeasure;

/// Structural checks of one filtration.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct FiltrationReport {
    pub levels: usize,
    pub atoms: usize,
    pub carried: usize,
    pub single_root: bool,
    pub singleton_leaves: bool,
    pub partition_violations: usize,
    pub nesting_violations: usize,
    /// Atoms with a support point of `B_T` outside `T`.
    pub inner_violations: usize,
    /// Atoms with a member outside `5 B_T`.
    pub outer_violations: usize,
    pub doubling_violations: usize,
    pub disjointness_violations: usize,
    pub radius_violations: usize,
    pub missing_preseeds: usize,
    /// Largest `|y - x_T| / r(B_T)` over members `y`.
    pub max_member_ratio: f64,
    pub messages: Vec<String>,
}

impl FiltrationReport {
    pub fn pass(&self) -> bool {
        self.single_root
            && self.singleton_leaves
            && self.partition_violations == 0
            && self.nesting_violations == 0
            && self.inner_violations == 0
            && self.outer_violations == 0
            && self.doubling_violations == 0
            && self.disjointness_violations == 0
            && self.radius_violations == 0
            && self.missing_preseeds == 0
    }

    fn note(&mut self, msg: String) {
        if self.messages.len() < 20 {
            self.messages.push(msg);
        }
    }
}

/// Check every structural invariant of `f` and that each tag in `preseeds`
/// is realized by an atom whose ball is `B(Q)`.
pub fn verify_filtration(mu: &PointMeasure, f: &Filtration, preseeds: &[DyadicTag]) -> FiltrationReport {
    let n = mu.len();
    let pts = mu.points();
    let params = f.params();
    let mut rep = FiltrationReport {
        levels: f.depth(),
        ..Default::default()
    };

    let mut seen = vec![false; n];
    for &p in f.order() {
        if (p as usize) < n && !seen[p as usize] {
            seen[p as usize] = true;
        } else {
            rep.partition_violations += 1;
        }
    }
    if f.order().len() != n || seen.iter().any(|s| !s) {
        rep.partition_violations += 1;
        rep.note("point order is not a permutation of the support".into());
    }

    rep.single_root = f.levels().first().is_some_and(|l| l.atoms.len() == 1);
    rep.singleton_leaves = f
        .levels()
        .last()
        .is_some_and(|l| l.atoms.iter().all(|a| a.members.len() == 1));

    // owner[p] = index of the atom of the current level holding point p
    let mut owner = vec![u32::MAX; n];
    for (l, level) in f.levels().iter().enumerate() {
        let mut cursor = 0u32;
        for (i, a) in level.atoms.iter().enumerate() {
            if a.members.start != cursor || a.members.is_empty() {
                rep.partition_violations += 1;
                rep.note(format!("level {l} atom {i}: members do not tile the support"));
            }
            cursor = a.members.end;
            for &p in &f.order()[a.members.start as usize..a.members.end as usize] {
                owner[p as usize] = i as u32;
            }
        }
        if cursor as usize != n {
            rep.partition_violations += 1;
            rep.note(format!("level {l} covers {cursor} of {n} points"));
        }

        if let Some(finer) = f.levels().get(l + 1) {
            let mut next = 0u32;
            for (i, a) in level.atoms.iter().enumerate() {
                let ok_range = a.children.start == next && !a.children.is_empty();
                next = a.children.end;
                let kids = &finer.atoms[a.children.start as usize..(a.children.end as usize).min(finer.atoms.len())];
                let tiles = kids.first().is_some_and(|c| c.members.start == a.members.start)
                    && kids.last().is_some_and(|c| c.members.end == a.members.end)
                    && kids.iter().all(|c| c.parent == Some(i as u32));
                if !(ok_range && tiles) {
                    rep.nesting_violations += 1;
                    rep.note(format!("level {l} atom {i}: children do not refine it"));
                }
            }
            if next as usize != finer.atoms.len() {
                rep.nesting_violations += 1;
            }
        }

        let (r_lo, r_hi) = f.radius_window(level.generation);
        let mut fresh: Vec<&Ball> = Vec::new();
        for (i, a) in level.atoms.iter().enumerate() {
            rep.atoms += 1;
            rep.carried += a.carried as usize;
            let outer = a.ball.dilate(5.0).expect("positive factor");
            let mut worst = 0.0f64;
            for &p in &f.order()[a.members.start as usize..a.members.end as usize] {
                let y = &pts[p as usize];
                worst = worst.max(a.ball.center().dist(y) / a.ball.radius());
                if !outer.contains_point(y) {
                    rep.outer_violations += 1;
                    rep.note(format!("level {l} atom {i}: member {p} outside 5B_T"));
                    break;
                }
            }
            rep.max_member_ratio = rep.max_member_ratio.max(worst);
            let stray = mu
                .index()
                .indices_in(&Region::Ball(a.ball))
                .into_iter()
                .find(|&p| owner[p] != i as u32);
            if let Some(p) = stray {
                rep.inner_violations += 1;
                rep.note(format!("level {l} atom {i}: point {p} of B_T lies in another atom"));
            }
            if !mu
                .is_doubling(&Region::Ball(a.ball), params.alpha, params.c0())
                .unwrap_or(false)
            {
                rep.doubling_violations += 1;
                rep.note(format!("level {l} atom {i}: B_T is not doubling"));
            }
            if !a.carried {
                let r = a.ball.radius();
                if r < r_lo || r > r_hi {
                    rep.radius_violations += 1;
                    rep.note(format!("level {l} atom {i}: radius {r} outside [{r_lo}, {r_hi}]"));
                }
                fresh.push(&a.ball);
            }
        }
        rep.disjointness_violations += count_intersections(&fresh);
    }

    for tag in preseeds {
        let ok = f.find_preseed(tag).is_some_and(|id| {
            let a = f.atom(id).expect("indexed atom exists");
            let sys = DyadicSystem::from_index(f.dim(), tag.system as usize).expect("valid system");
            let q = sys.cube(tag.generation, &tag.position);
            a.ball.center() == q.center()
                && a.ball.radius() == ladder_radius(f.dim(), 4 * tag.generation as i64)
        });
        if !ok {
            rep.missing_preseeds += 1;
            rep.note(format!("pre-seeded cube {tag} is not realized"));
        }
    }
    rep
}

/// Pairs of intersecting balls, by a sweep along the first axis.
fn count_intersections(balls: &[&Ball]) -> usize {
    let mut sorted: Vec<&Ball> = balls.to_vec();
    sorted.sort_by(|a, b| {
        (a.center().coords()[0] - a.radius()).total_cmp(&(b.center().coords()[0] - b.radius()))
    });
    let mut hits = 0;
    for (i, a) in sorted.iter().enumerate() {
        let right = a.center().coords()[0] + a.radius();
        for b in &sorted[i + 1..] {
            if b.center().coords()[0] - b.radius() > right {
                break;
            }
            hits += a.intersects(b) as usize;
        }
    }
    hits
}

/// `μ(N_ℓ(T))` against `μ(90 B_T)` with the threshold `R_k A₀^{-ℓ}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundaryMeasurement {
    pub ell: u32,
    pub threshold: f64,
    pub boundary_mass: f64,
    pub reference_mass: f64,
    pub ratio: f64,
}

/// Mass of the points within `R_k A₀^{-ℓ}` of the other side of `∂T`.
pub fn small_boundary(mu: &PointMeasure, f: &Filtration, id: AtomId, ell: u32) -> Result<BoundaryMeasurement> {
    let a = f.atom(id)?;
    let generation = f.levels()[id.level as usize].generation;
    let threshold = ladder_radius(f.dim(), 4 * generation as i64) * f.params().a0().powi(-(ell as i32));
    let members = f.members(id)?;
    let mut inside = vec![false; mu.len()];
    for &p in members {
        inside[p as usize] = true;
    }
    let mut near_boundary = vec![false; mu.len()];
    let pts = mu.points();
    for &p in members {
        let x = pts[p as usize];
        let probe = Region::Ball(Ball::new(x, threshold)?);
        mu.index().for_each_in(&probe, None, |q| {
            if !inside[q] && x.dist(&pts[q]) < threshold {
                near_boundary[q] = true;
                near_boundary[p as usize] = true;
            }
        });
    }
    let scale = mu.index().scale();
    let m: i128 = near_boundary
        .iter()
        .zip(mu.weights())
        .filter(|(b, _)| **b)
        .map(|(_, &w)| scale.quantize(w))
        .sum();
    let boundary_mass = scale.to_f64(m);
    let reference_mass = mu.mass(&Region::Ball(a.ball.dilate(90.0)?))?;
    Ok(BoundaryMeasurement {
        ell,
        threshold,
        boundary_mass,
        reference_mass,
        ratio: boundary_mass / reference_mass,
    })
}

/// Result of one lookup query.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum QueryOutcome {
    Checked {
        filtration: usize,
        atom: AtomId,
        preseed: DyadicTag,
        inclusion: bool,
        radius_ratio: f64,
        mass_ratio: f64,
        pass: bool,
    },
    Skipped {
        reason: String,
    },
    Failed {
        reason: String,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QueryRecord {
    pub cube: Cube,
    pub outcome: QueryOutcome,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TheoremAReport {
    pub records: Vec<QueryRecord>,
    pub checked: usize,
    pub skipped: usize,
    pub failed: usize,
    pub radius_ratio_range: Option<(f64, f64)>,
    pub mass_ratio_range: Option<(f64, f64)>,
    /// `[√d/2, 3√d]`.
    pub radius_window: (f64, f64),
    /// `[1, C₀]`.
    pub mass_window: (f64, f64),
    pub pass: bool,
}

/// Absolute slack on the radius ratio window.
pub const RADIUS_RATIO_TOL: f64 = 1e-9;

/// Run [`FiltrationFamily::lookup_cube`] on each cube and check
/// `Q ∩ supp(μ) ⊂ T`, `r(B_T)/ℓ(Q) ∈ [√d/2, 3√d]` and `μ(T)/μ(Q) ∈ [1, C₀]`.
/// Cubes that are not `(α₀, C₀)`-doubling are skipped.
pub fn verify_theorem_a(fam: &FiltrationFamily, cubes: &[Cube]) -> TheoremAReport {
    let mu = fam.measure();
    let d = fam.dim() as f64;
    let radius_window = (d.sqrt() / 2.0, 3.0 * d.sqrt());
    let mass_window = (1.0, fam.params().c0());
    let mut records = Vec::with_capacity(cubes.len());
    let (mut checked, mut skipped, mut failed) = (0, 0, 0);
    let mut r_range: Option<(f64, f64)> = None;
    let mut m_range: Option<(f64, f64)> = None;
    let widen = |range: &mut Option<(f64, f64)>, v: f64| {
        *range = Some(range.map_or((v, v), |(lo, hi)| (lo.min(v), hi.max(v))));
    };
    for q in cubes {
        let outcome = match fam.lookup_cube(q) {
            Err(crate::Error::NotDoubling { alpha, beta }) => {
                skipped += 1;
                QueryOutcome::Skipped {
                    reason: format!("not ({alpha}, {beta})-doubling"),
                }
            }
            Err(e) => {
                failed += 1;
                QueryOutcome::Failed { reason: e.to_string() }
            }
            Ok(hit) => match check_hit(fam, mu, q, &hit) {
                Ok((inclusion, radius_ratio, mass_ratio)) => {
                    checked += 1;
                    widen(&mut r_range, radius_ratio);
                    widen(&mut m_range, mass_ratio);
                    let pass = inclusion
                        && radius_ratio >= radius_window.0 - RADIUS_RATIO_TOL
                        && radius_ratio <= radius_window.1 + RADIUS_RATIO_TOL
                        && mass_ratio >= mass_window.0
                        && mass_ratio <= mass_window.1;
                    if !pass {
                        failed += 1;
                    }
                    QueryOutcome::Checked {
                        filtration: hit.filtration,
                        atom: hit.atom,
                        preseed: hit.cover.tag,
                        inclusion,
                        radius_ratio,
                        mass_ratio,
                        pass,
                    }
                }
                Err(e) => {
                    failed += 1;
                    QueryOutcome::Failed { reason: e.to_string() }
                }
            },
        };
        records.push(QueryRecord { cube: *q, outcome });
    }
    TheoremAReport {
        records,
        checked,
        skipped,
        failed,
        radius_ratio_range: r_range,
        mass_ratio_range: m_range,
        radius_window,
        mass_window,
        pass: failed == 0,
    }
}

fn check_hit(
    fam: &FiltrationFamily,
    mu: &PointMeasure,
    q: &Cube,
    hit: &crate::lattice::Lookup,
) -> Result<(bool, f64, f64)> {
    let f = fam.get(hit.filtration)?;
    let atom = f.atom(hit.atom)?;
    let members = f.members(hit.atom)?;
    let mut inside = vec![false; mu.len()];
    for &p in members {
        inside[p as usize] = true;
    }
    let inclusion = mu
        .index()
        .indices_in(&Region::Cube(*q))
        .into_iter()
        .all(|p| inside[p]);
    let radius_ratio = atom.ball.radius() / q.side();
    let mass_ratio = f.atom_mass(mu, hit.atom)? / mu.mass(&Region::Cube(*q))?;
    Ok((inclusion, radius_ratio, mass_ratio))
}
