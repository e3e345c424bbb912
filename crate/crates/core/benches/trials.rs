use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use irrigation_core::mission::{run_trials, ExecMode, RobotConfig, TrialJob};
use irrigation_core::sim::{build_environment, BUILTIN_ENVIRONMENTS};

fn jobs(per_env: usize) -> Vec<TrialJob> {
    BUILTIN_ENVIRONMENTS
        .iter()
        .flat_map(|name| {
            let env = build_environment(name).unwrap();
            (0..per_env).map(move |i| TrialJob {
                environment: env.clone(),
                trial: i,
                seed: 42 + i as u64,
            })
        })
        .collect()
}

fn trials(c: &mut Criterion) {
    let cfg = RobotConfig::default();
    let gains = cfg.leveling.resolve_gains().unwrap();
    let mut group = c.benchmark_group("run_trials");
    group.sample_size(10);
    for per_env in [2, 10] {
        let batch = jobs(per_env);
        for (label, mode) in [("sequential", ExecMode::Sequential), ("parallel", ExecMode::Parallel)] {
            group.bench_with_input(BenchmarkId::new(label, batch.len()), &batch, |b, batch| {
                b.iter(|| run_trials(black_box(batch), &cfg, gains, mode).unwrap())
            });
        }
    }
    group.finish();
}

criterion_group!(benches, trials);
criterion_main!(benches);
