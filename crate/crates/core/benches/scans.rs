use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use std::hint::black_box;

use lipsub::embed::{embed_euclid2_circle, test_vectors, verify_isometry, VerifyOptions};
use lipsub::exec::Exec;
use lipsub::frag::szlenk_from;
use lipsub::metric::{make_model, pairwise_lip, ModelSpec};

const MODES: [(&str, Exec); 2] = [("sequential", Exec::Sequential), ("parallel", Exec::Parallel)];

fn bench_pairwise_lip(c: &mut Criterion) {
    let mut group = c.benchmark_group("pairwise_lip");
    for n in [500, 2000] {
        let model = make_model(&ModelSpec::IntervalGrid { n }).unwrap();
        let values: Vec<f64> = (0..n).map(|i| ((i * 7919) % 1013) as f64 / 1013.0).collect();
        for (name, exec) in MODES {
            group.bench_with_input(BenchmarkId::new(name, n), &n, |b, _| {
                b.iter(|| pairwise_lip(black_box(model.d()), black_box(&values), exec))
            });
        }
    }
    group.finish();
}

fn bench_szlenk(c: &mut Criterion) {
    let mut group = c.benchmark_group("szlenk");
    group.sample_size(20);
    let model = make_model(&ModelSpec::LqBall { q: 2.0, dim: 2, samples: 600, seed: 7 }).unwrap();
    let start: Vec<usize> = (0..model.len()).collect();
    for (name, exec) in MODES {
        group.bench_function(name, |b| b.iter(|| szlenk_from(&model, black_box(&start), 0.2, 0.05, exec).unwrap()));
    }
    group.finish();
}

fn bench_verify(c: &mut Criterion) {
    let mut group = c.benchmark_group("verify_isometry");
    group.sample_size(10);
    let (map, _) = embed_euclid2_circle(1000, &VerifyOptions { tests: 4, ..Default::default() }).unwrap();
    let tests = test_vectors(2, 64, 1);
    for (name, exec) in MODES {
        group.bench_function(name, |b| b.iter(|| verify_isometry(&map, black_box(&tests), None, exec).unwrap()));
    }
    group.finish();
}

criterion_group!(benches, bench_pairwise_lip, bench_szlenk, bench_verify);
criterion_main!(benches);
