use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use dirpoly::certificates::{directed_path_search, PercoGrid};
use dirpoly::disorder::build_block_covariance;
use dirpoly::geometry::confined_endpoint_prob;
use dirpoly::renewal::meet_probabilities;
use dirpoly::rng::{purpose, stream_rng};
use dirpoly::transfer::{pair_pinning_partition, quenched_partition};
use dirpoly::{CoarsePlan, Dim, DisorderSpec};
use dirpoly_bench::{dense, hashed};

fn transfer(c: &mut Criterion) {
    let spec = DisorderSpec::Gaussian;
    let mut g = c.benchmark_group("quenched_partition");
    for (d, n) in [(Dim::One, 2000usize), (Dim::Two, 200)] {
        let env = hashed(d, 1);
        g.bench_with_input(BenchmarkId::new(format!("hashed_d{}", d.as_usize()), n), &n, |b, &n| {
            b.iter(|| quenched_partition(&env, 0.7, &spec, black_box(n)).unwrap())
        });
        let field = dense(d, n as u64, 1);
        g.bench_with_input(BenchmarkId::new(format!("dense_d{}", d.as_usize()), n), &n, |b, &n| {
            b.iter(|| quenched_partition(&field, 0.7, &spec, black_box(n)).unwrap())
        });
    }
    g.finish();
}

fn renewal(c: &mut Criterion) {
    let mut g = c.benchmark_group("renewal");
    g.bench_function("pair_pinning_d1_5000", |b| {
        b.iter(|| pair_pinning_partition(black_box(5000), 0.2, Dim::One).unwrap())
    });
    g.bench_function("pair_pinning_d2_2000", |b| {
        b.iter(|| pair_pinning_partition(black_box(2000), 0.09, Dim::Two).unwrap())
    });
    g.bench_function("meet_probabilities_d2_1000", |b| b.iter(|| meet_probabilities(Dim::Two, black_box(1000))));
    g.bench_function("confined_endpoint_4096", |b| b.iter(|| confined_endpoint_prob(black_box(4096)).unwrap()));
    g.finish();
}

fn geometry(c: &mut Criterion) {
    let mut g = c.benchmark_group("geometry");
    g.sample_size(10);
    let plan = CoarsePlan::new(Dim::One, 64, 1, 0.5).unwrap();
    g.bench_function("block_covariance_d1_64", |b| b.iter(|| build_block_covariance(black_box(&plan)).unwrap()));
    let grid = PercoGrid::bernoulli(256, 256, 0.7, &mut stream_rng(1, 0, purpose::PERCOLATION));
    g.bench_function("directed_path_search_256", |b| b.iter(|| directed_path_search(black_box(&grid))));
    g.finish();
}

criterion_group!(benches, transfer, renewal, geometry);
criterion_main!(benches);
