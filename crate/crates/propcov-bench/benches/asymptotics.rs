use criterion::{black_box, criterion_group, criterion_main, BenchmarkId, Criterion};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use propcov::asymptotics::{assemble_v, information_cb};
use propcov::inference::homogeneity_statistic;
use propcov::model::{Coefficients, Parametrization};
use propcov::oracle::random_instance;

fn bench_assemble(c: &mut Criterion) {
    let mut group = c.benchmark_group("assemble_v");
    for &p in &[3usize, 8, 15] {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let (params, weights, _) = random_instance(p, 3, &mut rng);
        for (tag, parametrization) in [
            ("b", Parametrization::CholInv),
            ("a", Parametrization::CholRoot),
            ("sigma", Parametrization::Cov),
        ] {
            group.bench_with_input(
                BenchmarkId::new(tag, p),
                &(&params, &weights),
                |bench, (params, weights)| {
                    bench.iter(|| {
                        assemble_v(black_box(params), weights, parametrization).unwrap()
                    })
                },
            );
        }
    }
    group.finish();
}

fn bench_information(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let (params, weights, _) = random_instance(10, 3, &mut rng);
    c.bench_function("information_cb_p10_k3", |b| {
        b.iter(|| information_cb(black_box(&params), &weights).unwrap())
    });
}

fn bench_homogeneity(c: &mut Criterion) {
    let coeffs = Coefficients::new(vec![1.0, 1.2, 0.8, 1.5]).unwrap();
    let weights = [0.25, 0.25, 0.25, 0.25];
    c.bench_function("homogeneity_statistic_k4", |b| {
        b.iter(|| homogeneity_statistic(black_box(&coeffs), &weights, 5, 1000.0).unwrap())
    });
}

criterion_group!(benches, bench_assemble, bench_information, bench_homogeneity);
criterion_main!(benches);
