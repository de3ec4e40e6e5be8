use criterion::{black_box, criterion_group, criterion_main, BenchmarkId, Criterion};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use propcov::mle::{fit, FitOptions};
use propcov::model::{GroupSample, SampleSet};
use propcov::montecarlo::sample_wishart;
use propcov::oracle::random_instance;

fn synthetic_data(p: usize, k: usize, n: usize, seed: u64) -> SampleSet {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (params, _, _) = random_instance(p, k, &mut rng);
    let sigma1 = propcov::model::sigma_from_a(&params.a);
    let groups = (0..k)
        .map(|g| {
            let s = sample_wishart(&sigma1.scaled(params.c.get(g)), n, &mut rng).unwrap();
            GroupSample::new(s, n).unwrap()
        })
        .collect();
    SampleSet::new(groups).unwrap()
}

fn bench_fit(c: &mut Criterion) {
    let mut group = c.benchmark_group("fit");
    for &(p, k) in &[(2usize, 2usize), (5, 3), (10, 4)] {
        let data = synthetic_data(p, k, 200, 7);
        group.bench_with_input(
            BenchmarkId::from_parameter(format!("p{p}_k{k}")),
            &data,
            |b, data| b.iter(|| fit(black_box(data), &FitOptions::default()).unwrap()),
        );
    }
    group.finish();
}

fn bench_wishart(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let (params, _, _) = random_instance(6, 1, &mut rng);
    let sigma = propcov::model::sigma_from_a(&params.a);
    c.bench_function("sample_wishart_p6_n100", |b| {
        b.iter(|| sample_wishart(black_box(&sigma), 100, &mut rng).unwrap())
    });
}

criterion_group!(benches, bench_fit, bench_wishart);
criterion_main!(benches);
