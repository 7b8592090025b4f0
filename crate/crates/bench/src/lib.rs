//! Criterion benchmarks for the simulator.

use criterion::{black_box, BenchmarkId, Criterion};

use specsim_core::config::{ForwardingPolicy, SimConfig};
use specsim_core::scenarios::{bundled, run_benign, run_scenario, RunOptions, BUNDLED};

pub fn benchmarks(c: &mut Criterion) {
    let mut g = c.benchmark_group("benign");
    for p in ForwardingPolicy::ALL {
        let cfg = SimConfig::default().with_policy(p);
        g.bench_with_input(BenchmarkId::from_parameter(p.name()), &cfg, |b, cfg| {
            b.iter(|| {
                run_benign(black_box(cfg), &RunOptions::default())
                    .report
                    .cycles
            })
        });
    }
    g.finish();

    let mut g = c.benchmark_group("attack");
    let cfg = SimConfig::default();
    for name in BUNDLED {
        let s = bundled(name).expect("bundled scenario");
        g.bench_function(name, |b| {
            b.iter(|| {
                run_scenario(black_box(&s), &cfg, &RunOptions::default())
                    .report
                    .attack_success
            })
        });
    }
    g.finish();
}
