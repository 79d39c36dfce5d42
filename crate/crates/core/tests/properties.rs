mod support;

use std::sync::Arc;

use proptest::prelude::*;
use rbmo_core::bmo::{rbmo_norm, rbmo_sigma_star_norm, FamilySpec};
use rbmo_core::{
    delta_cubes, Cube, CubeFamily, FiltrationFamily, LatticeParams, NormParams, Point, PointMeasure, Region,
    SystemFamily, TestFunction,
};

/// Distinct atoms on a 1/1024 grid of the unit cube with weights in `[1, 8]`.
fn measure(dim: usize, max: usize) -> impl Strategy<Value = PointMeasure> {
    let cells = prop::collection::hash_set(prop::collection::vec(0u32..1024, dim), 1..max);
    cells
        .prop_flat_map(|cells| {
            let n = cells.len();
            (Just(cells), prop::collection::vec(1u32..=8, n))
        })
        .prop_map(move |(cells, weights)| {
            let pts = cells
                .into_iter()
                .map(|c| Point::new(&c.iter().map(|&v| (v as f64 + 0.5) / 1024.0).collect::<Vec<_>>()).unwrap())
                .collect();
            PointMeasure::new(dim, dim as f64, pts, weights.into_iter().map(f64::from).collect()).unwrap()
        })
}

fn cube(dim: usize) -> impl Strategy<Value = Cube> {
    (prop::collection::vec(-0.2f64..1.2, dim), 0u32..10, 1.0f64..2.0)
        .prop_map(|(c, k, m)| Cube::new(Point::new(&c).unwrap(), m * 2f64.powi(-(k as i32))).unwrap())
}

/// `(Q, R)` with intersecting bodies.
fn meeting_pair(dim: usize) -> impl Strategy<Value = (Cube, Cube)> {
    (cube(dim), 0u32..6, 1.0f64..2.0, prop::collection::vec(-0.95f64..0.95, dim)).prop_map(|(q, k, m, u)| {
        let side = m * q.side() * 2f64.powi(k as i32 - 2);
        let reach = 0.5 * (q.side() + side);
        let c: Vec<f64> = q.center().coords().iter().zip(&u).map(|(x, t)| x + t * reach).collect();
        (q, Cube::new(Point::new(&c).unwrap(), side).unwrap())
    })
}

fn measure_and_pairs(count: usize) -> impl Strategy<Value = (PointMeasure, Vec<(Cube, Cube)>)> {
    (1usize..=2).prop_flat_map(move |d| (measure(d, 40), prop::collection::vec(meeting_pair(d), count)))
}

fn measure_and_cubes(count: usize) -> impl Strategy<Value = (PointMeasure, Vec<Cube>)> {
    (1usize..=2).prop_flat_map(move |d| (measure(d, 40), prop::collection::vec(cube(d), count)))
}

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-12 * a.abs().max(b.abs()).max(1.0)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn cube_and_ball_masses_match_a_scan((mu, cubes) in measure_and_cubes(8)) {
        for q in &cubes {
            let m = mu.mass(&Region::Cube(*q)).unwrap();
            prop_assert!(close(m, support::mass_where(&mu, |x| support::in_cube(q, x))));
            let b = rbmo_core::Ball::new(q.center(), 0.5 * q.side()).unwrap();
            let mb = mu.mass(&Region::Ball(b)).unwrap();
            prop_assert!(close(mb, support::mass_where(&mu, |x| support::in_ball(&b, x))));
        }
    }

    #[test]
    fn doubling_flags_match_a_scan((mu, cubes) in measure_and_cubes(8), alpha in 1.5f64..4.0, beta in 1.0f64..20.0) {
        for q in &cubes {
            let lib = mu.is_doubling(&Region::Cube(*q), alpha, beta).unwrap();
            let oracle = support::doubling_cube(&mu, q, alpha, beta);
            // Only exact ties may differ, from summation order.
            if lib != oracle {
                let m = support::mass_where(&mu, |x| support::in_cube(q, x));
                let big = support::mass_where(&mu, |x| support::in_cube(&q.dilate(alpha).unwrap(), x));
                prop_assert!(close(big, beta * m), "{q:?}: lib {lib} oracle {oracle}");
            }
        }
    }

    #[test]
    fn one_third_cover_contains_the_cube(q in cube(2)) {
        let systems = SystemFamily::new(2).unwrap();
        let cover = systems.cover_cube(&q).unwrap();
        prop_assert!(support::cube_in_cube(&q, &cover.cube));
        prop_assert!(cover.cube.side() <= 6.0 * q.side());
        let valid = systems.valid_systems(&q).unwrap();
        prop_assert_eq!(valid.first().copied(), Some(cover.system));
    }

    #[test]
    fn delta_matches_direct_sum((mu, pairs) in measure_and_pairs(6)) {
        for &(q, r) in &pairs {
            let lib = delta_cubes(&mu, &q, &r).unwrap().value;
            prop_assert!(close(lib, support::delta_cubes(&mu, &q, &r)), "{lib}");
            prop_assert!(lib >= 1.0);
        }
    }

    #[test]
    fn delta_grows_with_the_outer_cube((mu, pairs) in measure_and_pairs(1), grow in 1.0f64..8.0) {
        let (q, r) = pairs[0];
        let t = r.dilate(grow).unwrap();
        prop_assert!(delta_cubes(&mu, &q, &r).unwrap().value <= delta_cubes(&mu, &q, &t).unwrap().value);
    }

    #[test]
    fn rbmo_norm_is_a_seminorm(mu in measure(2, 30), seed in 0u64..1000, c in -5.0f64..5.0, shift in -10.0f64..10.0) {
        let f = TestFunction::uniform(&mu, seed);
        let fam = CubeFamily::build(&mu, NormParams::small(2), &FamilySpec::default(), &[]).unwrap();
        let base = rbmo_norm(&mu, &f, &fam).unwrap().value;
        let scaled = rbmo_norm(&mu, &f.scaled(c), &fam).unwrap().value;
        let shifted = rbmo_norm(&mu, &f.shifted(shift), &fam).unwrap().value;
        prop_assert!((scaled - c.abs() * base).abs() <= 1e-9 * (1.0 + base * c.abs()));
        prop_assert!((shifted - base).abs() <= 1e-9 * (1.0 + base));
        let constant = TestFunction::constant(&mu, shift);
        prop_assert_eq!(rbmo_norm(&mu, &constant, &fam).unwrap().value, 0.0);
    }

    #[test]
    fn filtrations_satisfy_every_invariant(mu in measure(2, 40), pick in 0.0f64..1.0) {
        let mu = Arc::new(mu);
        let lat = FiltrationFamily::new(mu.clone(), LatticeParams::relaxed(2)).unwrap();
        let id = ((lat.len() as f64 * pick) as usize).min(lat.len() - 1);
        let filt = lat.get(id).unwrap();
        let grid = support::Buckets::new(&mu, 1.0 / 16.0);
        let bad = support::filtration_violations(&mu, &grid, &filt, &lat.preseeds_of(id));
        prop_assert!(bad.is_empty(), "{:?}", bad);
        let f = TestFunction::uniform(&mu, 5);
        let (osc, jump) = support::sigma_star_parts(&mu, &f.values, &filt);
        let lib = rbmo_sigma_star_norm(&mu, &f, &filt).unwrap().value;
        prop_assert!(close(lib, osc + jump), "{lib} vs {osc} + {jump}");
    }

    #[test]
    fn measure_json_round_trips(mu in measure(2, 20)) {
        let mut buf = Vec::new();
        mu.to_json(&mut buf).unwrap();
        let back = PointMeasure::from_json(buf.as_slice()).unwrap();
        prop_assert_eq!(back.points(), mu.points());
        prop_assert_eq!(back.weights(), mu.weights());
    }
}
