use criterion::{black_box, criterion_group, criterion_main, BenchmarkId, Criterion};

use rbmo_bench::{relaxed_family, shifted, support_cubes, uniform};
use rbmo_core::bmo::{rbmo_norm, rbmo_sigma_star_norm, FamilySpec};
use rbmo_core::{delta_cubes, Cube, CubeFamily, NormParams, Region, SystemFamily, TestFunction};

fn mass_queries(c: &mut Criterion) {
    let mut g = c.benchmark_group("mass");
    for n in [1_000, 10_000] {
        let mu = uniform(n, 2);
        let cubes = support_cubes(&mu, 50, 8);
        g.bench_with_input(BenchmarkId::from_parameter(n), &cubes, |b, cubes| {
            b.iter(|| cubes.iter().map(|q| mu.mass(&Region::Cube(*q)).unwrap()).sum::<f64>())
        });
    }
    g.finish();
}

fn one_third_cover(c: &mut Criterion) {
    let mu = uniform(200, 2);
    let systems = SystemFamily::new(2).unwrap();
    let cubes = support_cubes(&mu, 200, 6);
    c.bench_function("cover_cube/d2", |b| {
        b.iter(|| cubes.iter().map(|q| systems.cover_cube(q).unwrap().tag.generation).sum::<i32>())
    });
}

fn filtration_build(c: &mut Criterion) {
    let mut g = c.benchmark_group("filtration");
    g.sample_size(10);
    for n in [1_000, 10_000] {
        let mu = uniform(n, 2);
        let fam = relaxed_family(&mu);
        g.bench_with_input(BenchmarkId::from_parameter(n), &fam, |b, fam| {
            b.iter(|| black_box(fam.build_uncached(black_box(fam.len() / 2)).unwrap()))
        });
    }
    g.finish();
}

fn delta(c: &mut Criterion) {
    let mu = uniform(10_000, 2);
    let pairs: Vec<(Cube, Cube)> = mu
        .points()
        .iter()
        .take(100)
        .map(|x| (Cube::new(*x, 1e-3).unwrap(), Cube::new(shifted(x, 0.01), 0.3).unwrap()))
        .collect();
    c.bench_function("delta_cubes/10000", |b| {
        b.iter(|| pairs.iter().map(|(q, r)| delta_cubes(&mu, q, r).unwrap().value).sum::<f64>())
    });
}

fn norms(c: &mut Criterion) {
    let mut g = c.benchmark_group("norms");
    g.sample_size(10);
    let mu = uniform(1_000, 2);
    let f = TestFunction::uniform(&mu, 1);
    let family = CubeFamily::build(&mu, NormParams::small(2), &FamilySpec::default(), &[]).unwrap();
    g.bench_function("rbmo/1000", |b| b.iter(|| rbmo_norm(&mu, &f, &family).unwrap().value));
    let filt = relaxed_family(&mu).build_uncached(0).unwrap();
    g.bench_function("rbmo_sigma_star/1000", |b| {
        b.iter(|| rbmo_sigma_star_norm(&mu, &f, &filt).unwrap().value)
    });
    g.finish();
}

criterion_group!(benches, mass_queries, one_third_cover, filtration_build, delta, norms);
criterion_main!(benches);
