//! Hot-path benchmarks: per-message compression at realistic widths, the
//! stencil gradient sweep, keyed permutation sampling, and full method
//! rounds with communication metering.

use criterion::{criterion_group, criterion_main, BatchSize, Criterion, Throughput};
use std::hint::black_box;

use permlab_core::analysis::{ef21_params, marina_stepsize, Objective};
use permlab_core::compressors::{CompressorSpec, RoundContext};
use permlab_core::engine::{run_ef21, run_marina, RunSettings};
use permlab_core::problems::{DistributedTask, QuadraticTask};
use permlab_core::rng::{sample_permutation, KeyedStream, StreamDomain};

const D: u32 = 1000;
const N: u32 = 10;

fn gauss_vec(d: u32, seed: u64) -> Vec<f64> {
    let mut s = KeyedStream::derive(seed, StreamDomain::Empirical, 0, 0);
    (0..d).map(|_| s.gauss()).collect()
}

fn bench_compressors(c: &mut Criterion) {
    let x = gauss_vec(D, 7);
    let ctx = RoundContext {
        master_seed: 7,
        round: 3,
        worker_id: 2,
        n: N,
        d: D,
    };
    let mut group = c.benchmark_group("compress_d1000");
    group.throughput(Throughput::Elements(D as u64));
    for (name, spec) in [
        ("permk", CompressorSpec::PermKBigD),
        ("randk100", CompressorSpec::RandK { k: 100, shared: false }),
        ("randk100_shared", CompressorSpec::RandK { k: 100, shared: true }),
        ("topk100", CompressorSpec::TopK { k: 100 }),
    ] {
        group.bench_function(name, |b| {
            b.iter(|| spec.compress(black_box(&x), black_box(&ctx)).unwrap())
        });
    }
    group.finish();
}

fn bench_stencil_gradients(c: &mut Criterion) {
    let task = QuadraticTask::generate(N, D, 1e-6, 0.3, 21).unwrap();
    let x = gauss_vec(D, 9);
    let mut out: Vec<Vec<f64>> = vec![vec![0.0; D as usize]; N as usize];
    c.bench_function("quadratic_grad_all_d1000_n10", |b| {
        b.iter(|| task.grad_all(black_box(&x), &mut out))
    });
    c.bench_function("quadratic_value_d1000_n10", |b| {
        b.iter(|| black_box(task.value(black_box(&x))))
    });
}

fn bench_permutation_sampling(c: &mut Criterion) {
    c.bench_function("sample_permutation_1000", |b| {
        b.iter_batched(
            || KeyedStream::derive(5, StreamDomain::RoundShared, 1, 0),
            |mut s| sample_permutation(black_box(1000), &mut s),
            BatchSize::SmallInput,
        )
    });
}

fn bench_full_rounds(c: &mut Criterion) {
    let task = QuadraticTask::generate(N, D, 1e-6, 0.3, 21).unwrap();
    let constants = task.smoothness();
    let spec = CompressorSpec::PermKBigD;
    let ab = spec.ab_constants(N, D).unwrap();
    let p = 1.0 / N as f64;
    let gamma = marina_stepsize(&constants, &ab, p, Objective::Nonconvex).unwrap();
    let settings = RunSettings::new(10, 77);
    c.bench_function("marina_permk_10_rounds_d1000_n10", |b| {
        b.iter(|| run_marina(black_box(&task), &spec, p, gamma, &settings).unwrap())
    });

    let topk = CompressorSpec::TopK { k: 100 };
    let par = ef21_params(topk.contraction_alpha(D).unwrap(), &constants, Objective::Nonconvex)
        .unwrap();
    c.bench_function("ef21_topk100_10_rounds_d1000_n10", |b| {
        b.iter(|| run_ef21(black_box(&task), &topk, par.gamma, &settings).unwrap())
    });
}

criterion_group!(
    benches,
    bench_compressors,
    bench_stencil_gradients,
    bench_permutation_sampling,
    bench_full_rounds
);
criterion_main!(benches);
