use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};

use bpsim_bench::{episode, network};
use bpsim_core::{bias_table_for_policy, run_episode, DistancePolicy, SchedulerKind};

fn slot_loop(c: &mut Criterion) {
    let net = network(20, 2);
    let ep = episode(&net, 200, 4);
    let plain = bias_table_for_policy(&net.graph, DistancePolicy::None, None, None).unwrap();
    let biased =
        bias_table_for_policy(&net.graph, DistancePolicy::ScaledHop(10.0), None, None).unwrap();

    let mut group = c.benchmark_group("episode-20-nodes-200-slots");
    group.sample_size(20);
    group.bench_function("plain", |b| {
        b.iter(|| {
            run_episode(&net, &ep, black_box(&plain), SchedulerKind::Greedy, 200).unwrap()
        })
    });
    group.bench_function("biased", |b| {
        b.iter(|| {
            run_episode(&net, &ep, black_box(&biased), SchedulerKind::Greedy, 200).unwrap()
        })
    });
    group.finish();
}

criterion_group!(benches, slot_loop);
criterion_main!(benches);
