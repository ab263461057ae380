use std::hint::black_box;
use std::sync::Arc;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use awarerl_core::curriculum::{self, CurriculumConfig};
use awarerl_core::grpo::{objective_and_grad, GrpoHyper, Sample};
use awarerl_core::parallel::Execution;
use awarerl_core::policy::{PolicyParams, ToyPolicy};
use awarerl_core::rollout::{rollout_grid, RolloutConfig};

fn grid(c: &mut Criterion) {
    let tasks = curriculum::generate(8, 0, "b", &CurriculumConfig::default(), &[]);
    let vocab = curriculum::vocab(&tasks);
    let params = PolicyParams::random(vocab.clone(), vocab.len(), 0.3, 0);
    let policy = ToyPolicy::new(Arc::new(params.clone()));
    let cfg = RolloutConfig {
        temperature: 1.0,
        ..Default::default()
    };
    let mut group = c.benchmark_group("rollout_grid_8x8");
    group.sample_size(10);
    for exec in [Execution::Sequential, Execution::Parallel] {
        group.bench_with_input(BenchmarkId::from_parameter(format!("{exec:?}")), &exec, |b, &exec| {
            b.iter(|| rollout_grid(&policy, black_box(&tasks), 8, &cfg, 0, exec).unwrap())
        });
    }
    group.finish();

    let trajectories = rollout_grid(&policy, &tasks, 8, &cfg, 0, Execution::Parallel).unwrap();
    let samples: Vec<Sample> = trajectories
        .iter()
        .flatten()
        .enumerate()
        .map(|(i, t)| Sample::from_trajectory(t, if i % 2 == 0 { 1.0 } else { -1.0 }))
        .collect();
    let hyper = GrpoHyper::default();
    let mut group = c.benchmark_group("grpo_objective_64");
    group.sample_size(10);
    for exec in [Execution::Sequential, Execution::Parallel] {
        group.bench_with_input(BenchmarkId::from_parameter(format!("{exec:?}")), &exec, |b, &exec| {
            b.iter(|| objective_and_grad(&params, &params, black_box(&samples), &hyper, exec))
        });
    }
    group.finish();
}

criterion_group!(benches, grid);
criterion_main!(benches);
