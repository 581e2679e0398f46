use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use ndarray::Array2;

use bpsim_bench::network;
use bpsim_core::gnn::{backward, forward, loss_grad, GnnConfig, GnnParams};

fn forward_and_backward(c: &mut Criterion) {
    let net = network(40, 3);
    let lap = net.conflicts.laplacian();
    let params = GnnParams::init(&GnnConfig::default(), 11);
    let m = lap.dim();
    // Flat target keeps the loss gradient dense everywhere.
    let target = Array2::from_elem((m, 2), 0.5);

    let mut group = c.benchmark_group("gnn-40-nodes");
    group.bench_function("forward", |b| {
        b.iter(|| forward(black_box(&params), black_box(&lap)))
    });
    let cache = forward(&params, &lap);
    group.bench_function("backward", |b| {
        b.iter(|| {
            let grad = loss_grad(&cache.output, &target);
            backward(black_box(&params), &lap, &cache, &grad)
        })
    });
    group.finish();
}

criterion_group!(benches, forward_and_backward);
criterion_main!(benches);
