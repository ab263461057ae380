//! Group-relative policy optimization over the toy policy.
//!
//! Every trajectory of a group gets the normalized return of the group as
//! its advantage, shared by all of its tokens (awareness and action). The
//! objective is
//!
//! `J = mean_ℓ (1/|τ_ℓ|) Σ_t min(r_t Â_ℓ, clip(r_t, 1−ε, 1+ε) Â_ℓ) − β · mean KL`
//!
//! with `r_t = π_θ / π_old` per token and the KL averaged over every token
//! position of the batch.

use std::path::Path;
use std::sync::Arc;

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::parallel::Execution;
use crate::policy::{kl_and_grad, log_softmax, Gradient, PolicyParams, SegmentGrad, ToyPolicy};
use crate::rollout::{rollout_grid, RolloutConfig, RolloutError, Segment, Trajectory};
use crate::seed;
use crate::task::Task;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum GrpoError {
    #[error("domain error: {0}")]
    Domain(String),
    #[error(transparent)]
    Rollout(#[from] RolloutError),
    #[error("non-finite gradient at iteration {iteration} (objective {objective})")]
    NonFinite { iteration: usize, objective: f64 },
}

/// Which distribution the KL penalty pulls towards.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KlTarget {
    /// The frozen warm-start policy.
    #[default]
    Reference,
    /// The policy that sampled the batch.
    Old,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GrpoHyper {
    /// Rollouts per task, L.
    pub group_size: usize,
    /// Tasks per iteration.
    pub batch_size: usize,
    pub clip_eps: f64,
    pub kl_coef: f64,
    pub sigma_floor: f64,
    pub learning_rate: f64,
    pub iterations: usize,
    pub kl_target: KlTarget,
}

impl Default for GrpoHyper {
    fn default() -> Self {
        Self {
            group_size: 8,
            batch_size: 8,
            clip_eps: 0.2,
            kl_coef: 0.001,
            sigma_floor: 1e-8,
            learning_rate: 1.0,
            iterations: 200,
            kl_target: KlTarget::Reference,
        }
    }
}

/// False for NaN.
fn positive(x: f64) -> bool {
    x > 0.0
}

impl GrpoHyper {
    pub fn validate(&self) -> Result<(), GrpoError> {
        let bad = |m: &str| Err(GrpoError::Domain(m.to_string()));
        if self.group_size < 2 {
            return bad("group_size must be at least 2");
        }
        if self.batch_size == 0 {
            return bad("batch_size must be positive");
        }
        if !positive(self.clip_eps) {
            return bad("clip_eps must be positive");
        }
        if !(positive(self.kl_coef) || self.kl_coef == 0.0) {
            return bad("kl_coef must be non-negative");
        }
        if !positive(self.sigma_floor) {
            return bad("sigma_floor must be positive");
        }
        if !positive(self.learning_rate) {
            return bad("learning_rate must be positive");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdvantageBatch {
    pub returns: Vec<f64>,
    pub mean: f64,
    pub std: f64,
    pub advantages: Vec<f64>,
}

/// Population mean and standard deviation; all-zero advantages when the
/// standard deviation does not exceed `sigma_floor`.
pub fn normalize_advantages(returns: &[f64], sigma_floor: f64) -> Result<AdvantageBatch, GrpoError> {
    if returns.len() < 2 {
        return Err(GrpoError::Domain(format!(
            "advantage normalization needs at least 2 returns, got {}",
            returns.len()
        )));
    }
    let n = returns.len() as f64;
    let mean = returns.iter().sum::<f64>() / n;
    let std = (returns.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / n).sqrt();
    let advantages = if std > sigma_floor {
        returns.iter().map(|r| (r - mean) / std).collect()
    } else {
        vec![0.0; returns.len()]
    };
    Ok(AdvantageBatch {
        returns: returns.to_vec(),
        mean,
        std,
        advantages,
    })
}

pub fn token_surrogate(new_lp: f64, old_lp: f64, advantage: f64, eps: f64) -> f64 {
    let ratio = (new_lp - old_lp).exp();
    let clipped = ratio.clamp(1.0 - eps, 1.0 + eps);
    (ratio * advantage).min(clipped * advantage)
}

/// Token stream of one trajectory and its advantage.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub segments: Vec<Segment>,
    pub advantage: f64,
}

impl Sample {
    pub fn from_trajectory(t: &Trajectory, advantage: f64) -> Self {
        Self {
            segments: t.steps().flat_map(|s| s.segments.iter().cloned()).collect(),
            advantage,
        }
    }

    pub fn num_tokens(&self) -> usize {
        self.segments.iter().map(|s| s.tokens.len()).sum()
    }
}

/// Per-position log-probabilities of every token in `segments`.
fn for_each_position(
    params: &PolicyParams,
    seg: &Segment,
    mut f: impl FnMut(usize, [u32; 2], &[f64]),
) {
    let bag = params.prompt_bag(&seg.sections);
    let base = params.base_logits(&bag);
    let mut lp = vec![0.0; params.vocab_size()];
    for (t, prev) in crate::policy::toy_prev_pairs(params.vocab.bos(), &seg.tokens).enumerate() {
        params.position_logits(&base, prev, &mut lp);
        log_softmax(&mut lp);
        f(t, prev, &lp);
    }
}

/// Mean exact `KL(π_θ ‖ π_ref)` over every token position of `samples`.
pub fn kl_term(params: &PolicyParams, reference: &PolicyParams, samples: &[Sample]) -> f64 {
    let mut total = 0.0;
    let mut count = 0usize;
    for s in samples {
        for seg in &s.segments {
            let bag = reference.prompt_bag(&seg.sections);
            let base_ref = reference.base_logits(&bag);
            let mut lq = vec![0.0; reference.vocab_size()];
            for_each_position(params, seg, |_, prev, lp| {
                reference.position_logits(&base_ref, prev, &mut lq);
                log_softmax(&mut lq);
                total += kl_and_grad(lp, &lq).0;
                count += 1;
            });
        }
    }
    if count == 0 {
        0.0
    } else {
        total / count as f64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ObjectiveValue {
    pub objective: f64,
    pub surrogate: f64,
    pub kl: f64,
    pub clip_frac: f64,
    pub mean_ratio: f64,
    pub tokens: usize,
}

#[derive(Default)]
struct Partial {
    surrogate: f64,
    kl: f64,
    clipped: usize,
    ratio_sum: f64,
    tokens: usize,
}

/// The objective `J` and its exact gradient with respect to `params`.
pub fn objective_and_grad(
    params: &PolicyParams,
    kl_ref: &PolicyParams,
    samples: &[Sample],
    hyper: &GrpoHyper,
    exec: Execution,
) -> (ObjectiveValue, Gradient) {
    let n_traj = samples.len().max(1) as f64;
    let total_positions: usize = samples.iter().map(Sample::num_tokens).sum();
    let kl_scale = if total_positions == 0 {
        0.0
    } else {
        hyper.kl_coef / total_positions as f64
    };
    let eps = hyper.clip_eps;
    let parts = exec.map(samples, |_, s| {
        let mut grad = Gradient::zeros_like(params);
        let mut p = Partial::default();
        let len = s.num_tokens();
        if len == 0 {
            return (p, grad);
        }
        let w = 1.0 / (n_traj * len as f64);
        let a = s.advantage;
        let v = params.vocab_size();
        let mut lp = vec![0.0; v];
        let mut lq = vec![0.0; v];
        let mut d = vec![0.0; v];
        for seg in &s.segments {
            let bag = params.prompt_bag(&seg.sections);
            let base = params.base_logits(&bag);
            let base_ref = kl_ref.base_logits(&bag);
            let mut acc = SegmentGrad::new(params, &bag, &mut grad);
            for ((prev, &y), &old) in crate::policy::toy_prev_pairs(params.vocab.bos(), &seg.tokens)
                .zip(&seg.tokens)
                .zip(&seg.old_logprobs)
            {
                params.position_logits(&base, prev, &mut lp);
                log_softmax(&mut lp);
                let ratio = (lp[y as usize] - old).exp();
                let clipped = ratio.clamp(1.0 - eps, 1.0 + eps);
                let unclipped_active = ratio * a <= clipped * a;
                p.surrogate += w * (ratio * a).min(clipped * a);
                p.ratio_sum += ratio;
                p.tokens += 1;
                if !unclipped_active {
                    p.clipped += 1;
                }
                // ∂(r Â)/∂z = Â r (onehot(y) − p)
                let c = if unclipped_active { w * a * ratio } else { 0.0 };
                for (di, l) in d.iter_mut().zip(&lp) {
                    *di = -c * l.exp();
                }
                d[y as usize] += c;
                if hyper.kl_coef > 0.0 {
                    kl_ref.position_logits(&base_ref, prev, &mut lq);
                    log_softmax(&mut lq);
                    let (kl, g) = kl_and_grad(&lp, &lq);
                    p.kl += kl;
                    for (di, gi) in d.iter_mut().zip(&g) {
                        *di -= kl_scale * gi;
                    }
                }
                acc.add(prev, &d);
            }
            acc.finish();
        }
        (p, grad)
    });
    let mut total = Partial::default();
    let mut grad = Gradient::zeros_like(params);
    for (p, g) in parts {
        total.surrogate += p.surrogate;
        total.kl += p.kl;
        total.clipped += p.clipped;
        total.ratio_sum += p.ratio_sum;
        total.tokens += p.tokens;
        grad.add(&g);
    }
    let tokens = total.tokens.max(1) as f64;
    let kl = if hyper.kl_coef > 0.0 {
        total.kl / tokens
    } else {
        kl_term(params, kl_ref, samples)
    };
    (
        ObjectiveValue {
            objective: total.surrogate - hyper.kl_coef * kl,
            surrogate: total.surrogate,
            kl,
            clip_frac: total.clipped as f64 / tokens,
            mean_ratio: total.ratio_sum / tokens,
            tokens: total.tokens,
        },
        grad,
    )
}

/// Metrics of one iteration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationReport {
    /// 1-based.
    pub iteration: usize,
    pub mean_return: f64,
    pub success_rate: f64,
    pub kl: f64,
    pub clip_frac: f64,
    pub mean_ratio: f64,
    pub mean_steps: f64,
    pub max_steps: usize,
    pub objective: f64,
    pub grad_norm: f64,
}

/// Samples `batch_size` distinct task indices for `iteration`.
pub fn sample_batch(n_tasks: usize, batch_size: usize, seed: u64, iteration: usize) -> Vec<usize> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed::derive(seed, &[0xba7c, iteration as u64]));
    let k = batch_size.min(n_tasks);
    let mut idx = sample(&mut rng, n_tasks, k).into_vec();
    idx.sort_unstable();
    idx
}

/// One sampling-and-update round. The rollouts run under a frozen copy of
/// `params`; the update is a single ascent step on `J`.
#[allow(clippy::too_many_arguments)]
pub fn grpo_iteration(
    params: &PolicyParams,
    reference: &PolicyParams,
    tasks: &[Task],
    hyper: &GrpoHyper,
    rollout: &RolloutConfig,
    seed: u64,
    iteration: usize,
    exec: Execution,
) -> Result<(PolicyParams, IterationReport), GrpoError> {
    hyper.validate()?;
    let old = Arc::new(params.clone());
    let policy = ToyPolicy::new(old.clone());
    let grid = rollout_grid(&policy, tasks, hyper.group_size, rollout, seed, exec)?;

    let mut samples = Vec::new();
    let (mut ret_sum, mut solved, mut steps, mut max_steps, mut n) = (0.0, 0usize, 0usize, 0usize, 0usize);
    for (task, group) in tasks.iter().zip(&grid) {
        let returns: Vec<f64> = group.iter().map(|t| t.total_return).collect();
        let adv = normalize_advantages(&returns, hyper.sigma_floor)?;
        for (t, a) in group.iter().zip(&adv.advantages) {
            samples.push(Sample::from_trajectory(t, *a));
            ret_sum += t.total_return;
            solved += usize::from(t.solved(task.num_turns()));
            steps += t.num_steps();
            max_steps = max_steps.max(t.num_steps());
            n += 1;
        }
    }
    let kl_ref: &PolicyParams = match hyper.kl_target {
        KlTarget::Reference => reference,
        KlTarget::Old => &old,
    };
    let (value, grad) = objective_and_grad(params, kl_ref, &samples, hyper, exec);
    if !grad.is_finite() || !value.objective.is_finite() {
        return Err(GrpoError::NonFinite {
            iteration,
            objective: value.objective,
        });
    }
    let mut next = params.clone();
    next.add_scaled(&grad, hyper.learning_rate);
    let n = n.max(1) as f64;
    Ok((
        next,
        IterationReport {
            iteration,
            mean_return: ret_sum / n,
            success_rate: solved as f64 / n,
            kl: value.kl,
            clip_frac: value.clip_frac,
            mean_ratio: value.mean_ratio,
            mean_steps: steps as f64 / n,
            max_steps,
            objective: value.objective,
            grad_norm: grad.norm(),
        },
    ))
}

/// Everything needed to continue a run: all randomness is derived from
/// `seed` and the iteration counter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    /// Iterations completed.
    pub iteration: usize,
    pub seed: u64,
    pub params: PolicyParams,
    pub reference: PolicyParams,
}

impl Checkpoint {
    pub fn save(&self, path: &Path) -> std::io::Result<()> {
        crate::io::write_if_changed(path, &serde_json::to_vec(self)?)
    }

    pub fn load(path: &Path) -> std::io::Result<Self> {
        Ok(serde_json::from_slice(&std::fs::read(path)?)?)
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct TrainReport {
    pub iterations: Vec<IterationReport>,
}

/// Runs iterations `state.iteration + 1 ..= hyper.iterations`, calling
/// `on_iteration` with the updated checkpoint after each one. The callback
/// may persist it; an error from it stops training.
pub fn train<E>(
    state: &mut Checkpoint,
    tasks: &[Task],
    hyper: &GrpoHyper,
    rollout: &RolloutConfig,
    exec: Execution,
    mut on_iteration: impl FnMut(&Checkpoint, &IterationReport) -> Result<(), E>,
) -> Result<TrainReport, E>
where
    E: From<GrpoError>,
{
    let mut report = TrainReport::default();
    while state.iteration < hyper.iterations {
        let it = state.iteration + 1;
        let batch: Vec<Task> = sample_batch(tasks.len(), hyper.batch_size, state.seed, it)
            .into_iter()
            .map(|i| tasks[i].clone())
            .collect();
        let (next, rep) = grpo_iteration(
            &state.params,
            &state.reference,
            &batch,
            hyper,
            rollout,
            seed::derive(state.seed, &[it as u64]),
            it,
            exec,
        )?;
        state.params = next;
        state.iteration = it;
        on_iteration(state, &rep)?;
        report.iterations.push(rep);
    }
    Ok(report)
}
