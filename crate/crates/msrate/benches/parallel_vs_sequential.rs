use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use msrate::linalg::Matrix;
use msrate::model::SystemSpec;
use msrate::simulate::{monte_carlo, monte_carlo_sequential, SimConfig};

fn bench_system() -> (SystemSpec, Matrix) {
    let spec = SystemSpec::new(
        Matrix::from_rows(&[vec![0.88, 0.22], vec![-0.18, 0.86]]).unwrap(),
        Matrix::from_rows(&[vec![0.12, 0.04], vec![0.06, 0.10]]).unwrap(),
        Matrix::from_rows(&[vec![1.0], vec![0.7]]).unwrap(),
        Matrix::from_rows(&[vec![0.20], vec![0.25]]).unwrap(),
        2.0,
    )
    .unwrap();
    let k = Matrix::from_rows(&[vec![2.1167, -0.8840]]).unwrap();
    (spec, k)
}

fn monte_carlo_benches(c: &mut Criterion) {
    let (spec, k) = bench_system();
    let mut group = c.benchmark_group("monte_carlo");
    for &num_traj in &[1_000usize, 10_000] {
        let cfg = SimConfig {
            x0: vec![5.0, -4.0],
            k: k.clone(),
            horizon: 60,
            num_traj,
            seed: 42,
            fit_window: (10, 60),
        };
        group.bench_with_input(
            BenchmarkId::new("sequential", num_traj),
            &cfg,
            |b, cfg| b.iter(|| monte_carlo_sequential(&spec, cfg)),
        );
        group.bench_with_input(
            BenchmarkId::new("parallel", num_traj),
            &cfg,
            |b, cfg| b.iter(|| monte_carlo(&spec, cfg)),
        );
    }
    group.finish();
}

criterion_group!(benches, monte_carlo_benches);
criterion_main!(benches);
