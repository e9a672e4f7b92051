use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use rectify_core::cones::{classify_graph_rectifiable, default_alpha_grid, direction_grid, geometric_radii};
use rectify_core::curve::{build_curve, NetHierarchy, DEFAULT_EPSILON};
use rectify_core::jones::JonesEngine;
use rectify_core::measures::{generate, MeasureSpec};
use rectify_core::nets::{build_family, recommended_k0};
use rectify_core::DiscreteMeasure;

fn measure(kind: &str, n: usize) -> DiscreteMeasure {
    generate(&MeasureSpec::default_for(kind).unwrap(), n, 0).unwrap()
}

fn family(c: &mut Criterion) {
    let mut g = c.benchmark_group("build_family");
    for n in [1_000, 10_000] {
        let mu = measure("circle", n);
        let k0 = recommended_k0(mu.diameter());
        g.bench_with_input(BenchmarkId::from_parameter(n), &mu, |b, mu| {
            b.iter(|| build_family(black_box(mu), k0, 12, 1.1, 10).unwrap())
        });
    }
    g.finish();
}

fn beta_batch(c: &mut Criterion) {
    let mu = measure("lipschitz_graph", 4_000);
    let fam = build_family(&mu, recommended_k0(mu.diameter()), 10, 1.1, 10).unwrap();
    c.bench_function("beta2_batch_4000", |b| b.iter(|| JonesEngine::new(black_box(&mu), &fam).unwrap()));
}

fn curve(c: &mut Criterion) {
    let mu = measure("lipschitz_graph", 1_500);
    let h = NetHierarchy::from_points(mu.atoms(), 0.5, 9, None).unwrap();
    c.bench_function("build_curve_1500", |b| b.iter(|| build_curve(black_box(&h), DEFAULT_EPSILON).unwrap()));
}

fn cones(c: &mut Criterion) {
    let mu = measure("lipschitz_graph", 4_000);
    let planes = direction_grid(2, 8).unwrap();
    let radii = geometric_radii(0.5, 0.5, 8);
    let atoms: Vec<usize> = (0..mu.len()).step_by(40).collect();
    let alphas = default_alpha_grid();
    c.bench_function("cone_classify_100", |b| {
        b.iter(|| classify_graph_rectifiable(black_box(&mu), &atoms, &planes, &alphas, &radii, 0.01).unwrap())
    });
}

criterion_group! {
    name = kernels;
    config = Criterion::default().sample_size(10);
    targets = family, beta_batch, curve, cones
}
criterion_main!(kernels);
