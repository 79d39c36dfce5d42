use std::sync::Arc;

use super::*;
use crate::geometry::{DyadicSystem, Region};
use crate::measure::Generator;

fn pt(c: &[f64]) -> Point {
    Point::new(c).unwrap()
}

fn family(mu: PointMeasure) -> FiltrationFamily {
    let d = mu.dim();
    FiltrationFamily::new(Arc::new(mu), LatticeParams::relaxed(d)).unwrap()
}

fn check(fam: &FiltrationFamily, id: usize) -> Arc<Filtration> {
    let f = fam.get(id).unwrap();
    let report = verify_filtration(fam.measure(), &f, &fam.preseeds_of(id));
    assert!(report.pass(), "filtration {id}: {:?}", report.messages);
    f
}

#[test]
fn single_atom_gives_singletons_everywhere() {
    let mu = PointMeasure::new(1, 1.0, vec![pt(&[0.3])], vec![1.0]).unwrap();
    let fam = family(mu);
    for id in (0..fam.len()).step_by(5) {
        let f = check(&fam, id);
        for level in f.levels() {
            assert_eq!(level.atoms.len(), 1);
            assert_eq!(level.atoms[0].members, 0..1);
        }
    }
}

#[test]
fn two_atoms_split_exactly_once() {
    let mu = PointMeasure::new(1, 1.0, vec![pt(&[0.0]), pt(&[1.0])], vec![0.5, 0.5]).unwrap();
    let fam = family(mu);
    for id in (0..fam.len()).step_by(3) {
        let f = check(&fam, id);
        let sizes: Vec<usize> = f.levels().iter().map(|l| l.atoms.len()).collect();
        assert_eq!(sizes[0], 1);
        assert_eq!(*sizes.last().unwrap(), 2);
        assert!(sizes.windows(2).all(|w| w[0] <= w[1]), "{sizes:?}");
        let split = sizes.iter().position(|&s| s == 2).unwrap();
        for l in split..f.depth() {
            assert_ne!(f.atom_of_point(l, 0).unwrap(), f.atom_of_point(l, 1).unwrap());
        }
        for l in 0..split {
            assert_eq!(f.atom_of_point(l, 0).unwrap(), f.atom_of_point(l, 1).unwrap());
        }
    }
}

#[test]
fn assignment_by_ratio() {
    let balls = [
        Ball::new(pt(&[0.0]), 1.0).unwrap(),
        Ball::new(pt(&[3.0]), 1.0).unwrap(),
    ];
    let pts = [pt(&[1.4]), pt(&[0.5]), pt(&[2.2])];
    let groups = assign_points(&pts, &[0, 1, 2], &balls).unwrap();
    assert_eq!(groups, vec![vec![0, 1], vec![2]]);

    let one = assign_points(&pts, &[0, 1, 2], &balls[..1]).unwrap();
    assert_eq!(one, vec![vec![0, 1, 2]]);

    let far = [pt(&[40.0])];
    assert!(matches!(
        assign_points(&far, &[0], &balls),
        Err(Error::InvariantBreach(_))
    ));
}

#[test]
fn ancestors_compose() {
    let mu = Generator::UniformCube { points: 200, dim: 2 }.generate(3).unwrap();
    let fam = family(mu);
    let f = fam.get(17).unwrap();
    let deepest = f.depth() - 1;
    for point in [0, 99, 199] {
        let a = f.atom_of_point(deepest, point).unwrap();
        assert_eq!(f.ancestor(a, 1).unwrap(), f.parent(a).unwrap());
        if deepest >= 2 {
            let up = f.ancestor(f.ancestor(a, 1).unwrap(), 1).unwrap();
            assert_eq!(up, f.ancestor(a, 2).unwrap());
        }
        assert_eq!(f.ancestor(a, deepest).unwrap(), f.root());
        assert!(matches!(f.ancestor(a, deepest + 1), Err(Error::BeyondRoot { .. })));
    }
    assert!(f.parent(f.root()).is_err());
}

#[test]
fn dyadic_cube_finds_its_own_ball() {
    let mu = Generator::UniformCube { points: 300, dim: 2 }.generate(9).unwrap();
    let fam = family(mu);
    let (lo, hi) = fam.preseeded_generations().unwrap();
    let sys = DyadicSystem::new(2, &[0, 0]).unwrap();
    let alpha0 = fam.params().alpha0(2);
    let c0 = fam.params().c0();
    let mut hits = 0;
    for g in lo..=hi {
        let (tag, q) = sys.cube_containing(&fam.measure().points()[0], g);
        if !fam.measure().is_doubling(&Region::Cube(q), alpha0, c0).unwrap() {
            continue;
        }
        let found = fam.lookup_cube(&q).unwrap();
        assert_eq!(found.cover.tag, tag);
        let f = fam.get(found.filtration).unwrap();
        let atom = f.atom(found.atom).unwrap();
        assert_eq!(atom.preseed, Some(tag));
        let ratio = atom.ball.radius() / q.side();
        assert!((ratio - 2f64.sqrt() / 2.0).abs() < 1e-12, "ratio {ratio}");
        hits += 1;
    }
    assert!(hits > 0);
}

#[test]
fn cantor_dust_invariants() {
    let mu = Generator::CantorProduct {
        depth: 5,
        split: 1.0 / 3.0,
        dim: 2,
    }
    .generate(0)
    .unwrap();
    let fam = family(mu);
    for id in (0..fam.len()).step_by(97) {
        check(&fam, id);
    }
}

#[test]
fn json_round_trip_preserves_queries() {
    let mu = Generator::PowerLawDensity {
        points: 150,
        dim: 2,
        exponent: 1.0,
        epsilon: 1e-3,
    }
    .generate(4)
    .unwrap();
    let fam = family(mu);
    let f = fam.get(123).unwrap();
    let mut buf = Vec::new();
    f.to_json(&mut buf).unwrap();
    let g = Filtration::from_json(buf.as_slice()).unwrap();
    assert_eq!(g.levels(), f.levels());
    assert_eq!(g.order(), f.order());
    for l in 0..f.depth() {
        for x in 0..fam.measure().len() {
            assert_eq!(g.atom_of_point(l, x).unwrap(), f.atom_of_point(l, x).unwrap());
        }
    }

    let mut buf = Vec::new();
    fam.to_json(&mut buf).unwrap();
    let back = FiltrationFamily::from_json(buf.as_slice()).unwrap();
    assert_eq!(back.built_ids(), vec![123]);
    assert_eq!(back.get(123).unwrap().levels(), f.levels());
}
