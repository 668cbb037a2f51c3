use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion, Throughput};
use rand::Rng;
use std::hint::black_box;
use zerolab::tensor::{matmul_naive, matmul_seq, singular_values, Matrix};
use zerolab::{data, net, InitScheme, Network, NetworkSpec, Nonlinearity};

fn random(rows: usize, cols: usize, seed: u64) -> Matrix {
    let mut r = zerolab::rng::stream(seed, 0);
    Matrix::from_fn(rows, cols, |_, _| r.random::<f64>() - 0.5)
}

fn gemm(c: &mut Criterion) {
    let mut g = c.benchmark_group("matmul");
    for &(m, k, n) in &[(64, 784, 2048), (64, 2048, 2048), (256, 256, 256)] {
        let a = random(m, k, 1);
        let b = random(k, n, 2);
        g.throughput(Throughput::Elements((m * k * n) as u64));
        let id = format!("{m}x{k}x{n}");
        g.bench_with_input(BenchmarkId::new("sequential", &id), &(), |bn, _| {
            bn.iter(|| matmul_seq(black_box(&a), black_box(&b)).unwrap())
        });
        #[cfg(feature = "parallel")]
        g.bench_with_input(BenchmarkId::new("parallel", &id), &(), |bn, _| {
            bn.iter(|| zerolab::tensor::matmul_par(black_box(&a), black_box(&b)).unwrap())
        });
        if m * k * n <= 256 * 256 * 256 {
            g.bench_with_input(BenchmarkId::new("naive", &id), &(), |bn, _| {
                bn.iter(|| matmul_naive(black_box(&a), black_box(&b)).unwrap())
            });
        }
    }
    g.finish();
}

fn svd(c: &mut Criterion) {
    let mut g = c.benchmark_group("singular_values");
    g.sample_size(10);
    for &n in &[64, 128] {
        let a = random(n, n, 3);
        g.bench_with_input(BenchmarkId::from_parameter(n), &a, |bn, a| bn.iter(|| singular_values(black_box(a)).unwrap()));
    }
    g.finish();
}

fn train_step(c: &mut Criterion) {
    let spec = NetworkSpec::new(vec![64, 256, 256, 10], Nonlinearity::Relu, InitScheme::zero());
    let d = data::synthetic_teacher(4, 64, 10, 64, 0.1);
    let network = Network::build(spec).unwrap();
    c.bench_function("train_step_64x256x256x10_batch64", |bn| {
        bn.iter(|| network.loss_and_gradients(d.inputs(), d.targets(), net::LossReduction::Mean).unwrap())
    });
}

criterion_group!(benches, gemm, svd, train_step);
criterion_main!(benches);
