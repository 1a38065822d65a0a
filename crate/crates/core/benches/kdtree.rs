use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use pointbrush_core::{KdTree, Vec3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::hint::black_box;

fn uniform(n: usize, seed: u64) -> Vec<Vec3> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| Vec3::new(rng.random(), rng.random(), rng.random()))
        .collect()
}

fn bench_queries(c: &mut Criterion) {
    let mut group = c.benchmark_group("kdtree");
    for n in [10_000usize, 100_000] {
        let tree = KdTree::from_positions(uniform(n, 1)).unwrap();
        let queries = uniform(256, 2);
        group.bench_with_input(BenchmarkId::new("knn8", n), &n, |b, _| {
            b.iter(|| {
                for q in &queries {
                    black_box(tree.knn(q, 8));
                }
            })
        });
        group.bench_with_input(BenchmarkId::new("radius_0.02", n), &n, |b, _| {
            b.iter(|| {
                for q in &queries {
                    black_box(tree.radius_query(q, 0.02).unwrap());
                }
            })
        });
        group.bench_with_input(BenchmarkId::new("build", n), &n, |b, _| {
            let pts = uniform(n, 3);
            b.iter(|| black_box(KdTree::from_positions(pts.clone()).unwrap()))
        });
    }
    group.finish();
}

criterion_group!(benches, bench_queries);
criterion_main!(benches);
