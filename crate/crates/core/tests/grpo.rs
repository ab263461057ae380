mod common;

use std::sync::Arc;

use awarerl_core::curriculum::{self, CurriculumConfig};
use awarerl_core::grpo::*;
use awarerl_core::parallel::Execution;
use awarerl_core::policy::*;
use awarerl_core::rollout::{rollout_grid, RolloutConfig};
use awarerl_core::task::Task;
use common::*;

const ADV_1234: [f64; 4] = [-1.3416407864998738, -0.4472135954999579, 0.4472135954999579, 1.3416407864998738];
const KL_TWO_TOKEN: f64 = 0.14384103622589046;

#[test]
fn advantage_examples() {
    assert_eq!(normalize_advantages(&[0.0, 2.0], 1e-8).unwrap().advantages, vec![-1.0, 1.0]);
    assert_eq!(normalize_advantages(&[5.0; 3], 1e-8).unwrap().advantages, vec![0.0; 3]);
    let a = normalize_advantages(&[1.0, 2.0, 3.0, 4.0], 1e-8).unwrap();
    for (x, y) in a.advantages.iter().zip(ADV_1234) {
        assert!((x - y).abs() < 1e-12);
    }
    assert!(matches!(normalize_advantages(&[1.0], 1e-8), Err(GrpoError::Domain(_))));
}

#[test]
fn solver_gets_the_unique_positive_advantage() {
    let mut returns = vec![1.25];
    returns.extend((1..=7).map(|k| -0.05 * k as f64));
    let a = normalize_advantages(&returns, 1e-8).unwrap().advantages;
    assert!(a[0] > 0.0);
    assert!(a[1..].iter().all(|x| *x < 0.0));
}

#[test]
fn surrogate_examples() {
    assert_eq!(token_surrogate(0.0, 0.0, 1.0, 0.2), 1.0);
    assert!((token_surrogate(2f64.ln(), 0.0, 1.0, 0.2) - 1.2).abs() < 1e-12);
    assert!((token_surrogate(0.5f64.ln(), 0.0, -1.0, 0.2) + 0.8).abs() < 1e-12);
}

#[test]
fn kl_examples() {
    let mut lp = vec![0.0, 0.0];
    let mut lq = vec![0.0, 3f64.ln()];
    log_softmax(&mut lp);
    log_softmax(&mut lq);
    assert!((kl_and_grad(&lp, &lq).0 - KL_TWO_TOKEN).abs() < 1e-12);

    let (_, samples, p) = frozen_batch(6, 4);
    assert_eq!(kl_term(&p, &p, &samples), 0.0);
    for s in 0..5 {
        let q = PolicyParams::random(p.vocab.clone(), p.vocab.len(), 0.5, 100 + s);
        assert!(kl_term(&q, &p, &samples) > 0.0);
    }
}

/// Rollouts of a random policy on a few curriculum tasks, with returns
/// normalized per task.
fn frozen_batch(n_tasks: usize, group: usize) -> (Vec<Task>, Vec<Sample>, PolicyParams) {
    let tasks = curriculum::generate(n_tasks, 3, "g", &CurriculumConfig::default(), &[]);
    let vocab = curriculum::vocab(&tasks);
    let p = PolicyParams::random(vocab.clone(), vocab.len(), 0.3, 9);
    let policy = ToyPolicy::new(Arc::new(p.clone()));
    let rc = RolloutConfig {
        temperature: 1.0,
        ..Default::default()
    };
    let grid = rollout_grid(&policy, &tasks, group, &rc, 5, Execution::Parallel).unwrap();
    let samples = grid
        .iter()
        .flat_map(|g| {
            let ret: Vec<f64> = g.iter().map(|t| t.total_return).collect();
            let adv = normalize_advantages(&ret, 1e-8).unwrap().advantages;
            g.iter().zip(adv).map(|(t, a)| Sample::from_trajectory(t, a)).collect::<Vec<_>>()
        })
        .collect();
    (tasks, samples, p)
}

/// Two rollouts with fixed advantages ±1.
fn two_rollouts() -> (Vec<Sample>, PolicyParams) {
    let (_, mut samples, p) = frozen_batch(1, 2);
    samples[0].advantage = 1.0;
    samples[1].advantage = -1.0;
    (samples, p)
}

#[test]
fn objective_gradient_matches_finite_differences() {
    let hyper = GrpoHyper {
        kl_coef: 0.5,
        ..Default::default()
    };
    for seed in 0..5 {
        let (samples, params, reference) = synthetic_batch(seed);
        let (v, g) = objective_and_grad(&params, &reference, &samples, &hyper, Execution::Sequential);
        assert!(v.kl > 0.0);
        let coords = some_coords(g.data.len(), usize::MAX, seed);
        let err = max_fd_error(&params, &g.data, &coords, 1e-5, |q| {
            objective_and_grad(q, &reference, &samples, &hyper, Execution::Sequential).0.objective
        });
        assert!(err < 1e-4, "seed {seed}: {err}");
    }
}

#[test]
fn unclipped_objective_is_the_policy_gradient() {
    let (samples, p) = two_rollouts();
    let hyper = GrpoHyper {
        kl_coef: 0.0,
        clip_eps: 1e9,
        ..Default::default()
    };
    let (v, g) = objective_and_grad(&p, &p, &samples, &hyper, Execution::Sequential);
    assert!((v.mean_ratio - 1.0).abs() < 1e-12);
    assert_eq!(v.clip_frac, 0.0);
    let mut oracle = Gradient::zeros_like(&p);
    for s in &samples {
        let w = s.advantage / (samples.len() * s.num_tokens()) as f64;
        for seg in &s.segments {
            let (_, mut gs) = logprob_and_grad(&p, &p.prompt_bag(&seg.sections), &seg.tokens).unwrap();
            gs.scale(w);
            oracle.add(&gs);
        }
    }
    for (a, b) in g.data.iter().zip(&oracle.data) {
        assert!((a - b).abs() < 1e-12);
    }
}

#[test]
fn parallel_objective_matches_sequential() {
    let (_, samples, p) = frozen_batch(4, 4);
    let q = PolicyParams::random(p.vocab.clone(), p.vocab.len(), 0.3, 77);
    let hyper = GrpoHyper::default();
    let (a, ga) = objective_and_grad(&q, &p, &samples, &hyper, Execution::Sequential);
    let (b, gb) = objective_and_grad(&q, &p, &samples, &hyper, Execution::Parallel);
    assert!((a.objective - b.objective).abs() < 1e-12);
    assert!(ga.data.iter().zip(&gb.data).all(|(x, y)| (x - y).abs() < 1e-12));
}

fn delta_norm(a: &PolicyParams, b: &PolicyParams) -> f64 {
    a.weights.iter().zip(&b.weights).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
}

#[test]
fn large_kl_coefficient_points_back_to_the_reference() {
    let tasks = curriculum::generate(4, 3, "g", &CurriculumConfig::default(), &[]);
    let vocab = curriculum::vocab(&tasks);
    let reference = PolicyParams::random(vocab.clone(), vocab.len(), 0.3, 1);
    let rc = RolloutConfig {
        temperature: 1.0,
        ..Default::default()
    };
    let step = |params: &PolicyParams, beta: f64| {
        let hyper = GrpoHyper {
            kl_coef: beta,
            learning_rate: 1e-9,
            group_size: 4,
            batch_size: 4,
            ..Default::default()
        };
        grpo_iteration(params, &reference, &tasks, &hyper, &rc, 3, 1, Execution::Parallel).unwrap().0
    };
    // At the reference the KL gradient vanishes, so β does not change the step.
    let d0 = delta_norm(&step(&reference, 0.0), &reference);
    let d1 = delta_norm(&step(&reference, 1e6), &reference);
    assert!((d0 - d1).abs() <= 1e-9 * d0.max(1e-30));

    let mut away = reference.clone();
    let noise = PolicyParams::random(vocab.clone(), vocab.len(), 0.2, 2);
    for (w, n) in away.weights.iter_mut().zip(&noise.weights) {
        *w += n;
    }
    let kl_before = kl_term(&away, &reference, &frozen_batch(4, 2).1);
    let next = step(&away, 1e6);
    let kl_after = kl_term(&next, &reference, &frozen_batch(4, 2).1);
    assert!(kl_after < kl_before, "{kl_before} -> {kl_after}");
    let pure = step(&away, 0.0);
    assert!(delta_norm(&pure, &away) <= 1e-3 * delta_norm(&next, &away));
}

fn small_run() -> (Vec<Task>, PolicyParams, GrpoHyper, RolloutConfig) {
    let tasks = curriculum::generate(6, 3, "g", &CurriculumConfig::default(), &[]);
    let vocab = curriculum::vocab(&tasks);
    let p = PolicyParams::random(vocab.clone(), vocab.len(), 0.2, 4);
    let hyper = GrpoHyper {
        group_size: 4,
        batch_size: 3,
        iterations: 4,
        ..Default::default()
    };
    let rc = RolloutConfig {
        temperature: 1.0,
        ..Default::default()
    };
    (tasks, p, hyper, rc)
}

fn run(state: &mut Checkpoint, tasks: &[Task], hyper: &GrpoHyper, rc: &RolloutConfig) -> TrainReport {
    train(state, tasks, hyper, rc, Execution::Parallel, |_, _| Ok::<(), GrpoError>(())).unwrap()
}

#[test]
fn zero_iterations_is_identity() {
    let (tasks, p, mut hyper, rc) = small_run();
    hyper.iterations = 0;
    let mut ck = Checkpoint {
        iteration: 0,
        seed: 1,
        params: p.clone(),
        reference: p.clone(),
    };
    let rep = run(&mut ck, &tasks, &hyper, &rc);
    assert!(rep.iterations.is_empty());
    assert_eq!(ck.params, p);
}

#[test]
fn training_is_deterministic_and_resumable() {
    let (tasks, p, hyper, rc) = small_run();
    let fresh = || Checkpoint {
        iteration: 0,
        seed: 11,
        params: p.clone(),
        reference: p.clone(),
    };
    let mut a = fresh();
    let ra = run(&mut a, &tasks, &hyper, &rc);
    let mut b = fresh();
    let rb = run(&mut b, &tasks, &hyper, &rc);
    assert_eq!(a, b);
    assert_eq!(ra, rb);
    assert_eq!(ra.iterations.len(), 4);
    assert!(ra.iterations.iter().all(|r| r.max_steps <= rc.limits.max_actions));

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("ck.json");
    let mut c = fresh();
    let half = GrpoHyper { iterations: 2, ..hyper };
    run(&mut c, &tasks, &half, &rc);
    c.save(&path).unwrap();
    let mut resumed = Checkpoint::load(&path).unwrap();
    let rest = run(&mut resumed, &tasks, &hyper, &rc);
    assert_eq!(resumed, a);
    assert_eq!(rest.iterations[..], ra.iterations[2..]);
}

#[test]
fn invalid_hyper_is_rejected() {
    let (tasks, p, hyper, rc) = small_run();
    let bad = GrpoHyper { group_size: 1, ..hyper };
    assert!(matches!(
        grpo_iteration(&p, &p, &tasks, &bad, &rc, 0, 1, Execution::Sequential),
        Err(GrpoError::Domain(_))
    ));
}
