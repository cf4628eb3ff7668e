use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use rarobj_bench::{corpus, fan_out_mp, model};
use rarobj_core::explore::{explore, ExploreOptions};
use rarobj_core::fifo::check_fifo;
use rarobj_core::outline::check_outline;
use rarobj_core::refinement::{check_simulation, check_trace_inclusion, Instance, LockImpl};

fn corpus_exploration(c: &mut Criterion) {
    let mut g = c.benchmark_group("explore");
    for name in ["mp-relaxed.lit", "mp-relacq.lit", "queue-mp.lit", "lockmp.lit"] {
        let m = model(&corpus(name));
        g.bench_function(name, |b| {
            b.iter(|| explore(&m.system, &m.init, &m.observe, ExploreOptions::default()).unwrap())
        });
    }
    g.finish();
}

fn fan_out(c: &mut Criterion) {
    let mut g = c.benchmark_group("fan-out-mp");
    g.sample_size(10);
    for readers in 1..=3 {
        let m = model(&fan_out_mp(readers));
        for jobs in [1, 4] {
            let opts = ExploreOptions {
                jobs,
                ..ExploreOptions::default()
            };
            g.bench_with_input(BenchmarkId::new(format!("jobs{jobs}"), readers), &m, |b, m| {
                b.iter(|| explore(&m.system, &m.init, &m.observe, opts).unwrap())
            });
        }
    }
    g.finish();
}

fn outline(c: &mut Criterion) {
    let m = model(&corpus("lockmp.lit"));
    c.bench_function("outline/lockmp", |b| {
        b.iter(|| check_outline(&m.system, &m.init, &m.outline, ExploreOptions::default()).unwrap())
    });
}

fn refinement(c: &mut Criterion) {
    let client = corpus("lockmp.lit");
    let mut g = c.benchmark_group("refine");
    g.sample_size(10);
    for imp in [LockImpl::Seqlock, LockImpl::Ticketlock] {
        let inst = Instance::new(&client, &imp.implementation()).unwrap();
        g.bench_function(BenchmarkId::new("simulation", imp), |b| {
            b.iter(|| check_simulation(black_box(&inst), ExploreOptions::default()).unwrap())
        });
        g.bench_function(BenchmarkId::new("traces", imp), |b| {
            b.iter(|| check_trace_inclusion(black_box(&inst), ExploreOptions::default()).unwrap())
        });
    }
    g.finish();
}

fn fifo(c: &mut Criterion) {
    let mut g = c.benchmark_group("fifo-oracle");
    g.sample_size(10);
    g.bench_function("2x2", |b| b.iter(|| check_fifo(2, 2, ExploreOptions::default()).unwrap()));
    g.finish();
}

criterion_group!(benches, corpus_exploration, fan_out, outline, refinement, fifo);
criterion_main!(benches);
