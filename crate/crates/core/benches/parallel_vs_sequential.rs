//! Compares the data-parallel loss/gradient evaluation against the
//! sequential fallback on a realistic training-sized problem.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use nbeddyn_core::linalg::Mat;
use nbeddyn_core::nbeddyn::{init_latent, BilinearODEModel, ModelArch};
use nbeddyn_core::num_core::{
    loss_and_gradients_full, loss_and_gradients_full_sequential, IntegratorConfig, LossOptions,
};
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

fn setup(t_len: usize, d_e: usize) -> (BilinearODEModel, Mat, Mat, IntegratorConfig) {
    let n = 1;
    let model = BilinearODEModel::init_random(d_e, n, ModelArch::bilinear(), 0.05, 7).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut x = Mat::zeros(t_len, n);
    for v in x.data_mut() {
        *v = rng.gen_range(-1.0..1.0);
    }
    let y = init_latent(t_len, d_e - n, 0.1, 3).unwrap();
    let cfg = IntegratorConfig::new(0.01, 1).unwrap();
    (model, x, y, cfg)
}

fn bench_loss(c: &mut Criterion) {
    let mut group = c.benchmark_group("loss_and_gradients");
    for &t_len in &[1_000usize, 10_000] {
        let (model, x, y, cfg) = setup(t_len, 6);
        let opts = LossOptions {
            lambda: 1.0,
            mask: None,
        };
        group.bench_with_input(BenchmarkId::new("parallel", t_len), &t_len, |b, _| {
            b.iter(|| loss_and_gradients_full(&model, &x, &y, &cfg, &opts).unwrap())
        });
        group.bench_with_input(BenchmarkId::new("sequential", t_len), &t_len, |b, _| {
            b.iter(|| loss_and_gradients_full_sequential(&model, &x, &y, &cfg, &opts).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, bench_loss);
criterion_main!(benches);
