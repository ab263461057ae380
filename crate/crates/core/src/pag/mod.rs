//! Progress awareness generation: trajectory segmentation, awareness
//! generation, model-aware verification, augmentation and the warm-up
//! dataset with its supervised loss.

mod augment;
mod doc;

use std::collections::HashSet;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub use augment::{augment, schema_perturb, word_mask, AugmentConfig, AugmentOp, Augmented, Rewrite};
pub use doc::{AwarenessDoc, HEADERS};

use crate::fc::{eq_lists, parse_call_list, CallList};
use crate::parallel::Execution;
use crate::policy::{
    logprob_and_grad, GenError, Generator, GeneratorRequest, Gradient, PolicyError, PolicyParams,
    Role,
};
use crate::prompts::{self, Sections};
use crate::reward::{ANSWER_CLOSE, ANSWER_OPEN, SUM_CLOSE, SUM_OPEN, THINK_CLOSE, THINK_OPEN};
use crate::rollout::{classify_action, DialoguePrefix, Message, Trajectory};
use crate::seed;
use crate::task::{Task, TaskMeta};
use crate::toolenv::{self, check_success, init_env};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum PagError {
    #[error("awareness section `{0}` missing")]
    SectionMissing(String),
    #[error("malformed trajectory: {0}")]
    MalformedTrajectory(String),
    #[error("no perturbable field: {0}")]
    NoPerturbableField(String),
    #[error(transparent)]
    Generator(#[from] GenError),
}

/// A trajectory split at one assistant call.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Instance {
    /// `task_id/global_index`.
    pub id: String,
    pub meta: TaskMeta,
    /// Everything before the split except the current query.
    pub history: DialoguePrefix,
    pub query: String,
    /// 1-based turn of the split.
    pub turn: usize,
    pub gold: CallList,
    /// Everything after the gold call and its observation.
    pub future: DialoguePrefix,
}

impl Instance {
    /// Calls and observations of the split turn before the gold call.
    pub fn turn_history(&self) -> DialoguePrefix {
        self.history.turn_actions(self.turn)
    }
}

/// `<think> use f </think> <answer> [..] </answer>`.
pub fn action_text(calls: &CallList) -> String {
    let names: Vec<&str> = calls.calls().iter().map(|c| c.name.as_str()).collect();
    format!(
        "{THINK_OPEN} use {} {THINK_CLOSE} {ANSWER_OPEN} {} {ANSWER_CLOSE}",
        names.join(" then "),
        calls.render()
    )
}

/// Replays a task's reference calls into a one-step-per-turn trajectory.
pub fn gold_trajectory(task: &Task) -> Result<Trajectory, PagError> {
    use crate::reward::{RewardWeights, StepReward};
    use crate::rollout::{ActionKind, Step, Turn};

    if task.gold.len() != task.num_turns() {
        return Err(PagError::MalformedTrajectory(format!(
            "task {} has no reference calls",
            task.id
        )));
    }
    let bad = |e: String| PagError::MalformedTrajectory(format!("task {}: {e}", task.id));
    let mut state = init_env(&task.env_config).map_err(|e| bad(e.to_string()))?;
    let w = RewardWeights::default();
    let mut turns = Vec::new();
    for (i, (q, calls)) in task.queries.iter().zip(&task.gold).enumerate() {
        let (next, observation) = toolenv::step(&state, calls);
        let ok = observation.all_ok() && check_success(&next, &task.env_config.turn_goals[i]);
        if !ok {
            return Err(bad(format!("reference calls of turn {} miss the goal", i + 1)));
        }
        state = next;
        state.advance_turn();
        let text = action_text(calls);
        turns.push(Turn {
            query: q.clone(),
            steps: vec![Step {
                turn_index: i + 1,
                step_index: 1,
                global_index: i,
                awareness: AwarenessDoc::default(),
                concat_tokens: crate::policy::TokenSequence::from_text(text.clone()),
                action_text: text,
                kind: ActionKind::Calls,
                parsed_calls: Some(calls.clone()),
                observation,
                reward: StepReward::from_indicators(true, true, true, true, &w),
                segments: Vec::new(),
            }],
            terminal_message: None,
            goal_reached: true,
        });
    }
    let mut traj = Trajectory {
        task_id: task.id.clone(),
        total_return: 0.0,
        turns,
        truncated: false,
    };
    traj.total_return = traj.steps().map(|s| s.reward.total).sum();
    Ok(traj)
}

/// One instance per call step; message and unparseable steps only enter
/// the surrounding context.
pub fn segment(dataset: &[(TaskMeta, Trajectory)]) -> Result<Vec<Instance>, PagError> {
    let mut out = Vec::new();
    for (meta, traj) in dataset {
        let mut messages: Vec<Message> = Vec::new();
        // (gold message index, its user message index, global step, calls)
        let mut splits: Vec<(usize, usize, usize, CallList)> = Vec::new();
        let mut expected = 0usize;
        for (ti, turn) in traj.turns.iter().enumerate() {
            let turn_no = ti + 1;
            let user_at = messages.len();
            messages.push(Message::User {
                turn: turn_no,
                text: turn.query.clone(),
            });
            for s in &turn.steps {
                if s.turn_index != turn_no || s.global_index != expected {
                    return Err(PagError::MalformedTrajectory(format!(
                        "{}: step {} out of order",
                        traj.task_id, s.global_index
                    )));
                }
                expected += 1;
                let calls = s.parsed_calls.clone().or_else(|| classify_action(&s.action_text).1);
                if let Some(c) = &calls {
                    splits.push((messages.len(), user_at, s.global_index, c.clone()));
                }
                messages.push(Message::Assistant {
                    turn: turn_no,
                    text: s.action_text.clone(),
                    calls: calls.clone(),
                });
                if calls.is_some() {
                    messages.push(Message::Observation {
                        turn: turn_no,
                        observation: s.observation.clone(),
                    });
                }
            }
        }
        for (at, user_at, g, gold) in splits {
            let Message::User { turn, text } = &messages[user_at] else {
                unreachable!()
            };
            let history = messages[..at]
                .iter()
                .enumerate()
                .filter(|(k, _)| *k != user_at)
                .map(|(_, m)| m.clone())
                .collect();
            out.push(Instance {
                id: format!("{}/{g}", traj.task_id),
                meta: meta.clone(),
                history: DialoguePrefix { messages: history },
                query: text.clone(),
                turn: *turn,
                gold,
                future: DialoguePrefix {
                    messages: messages[at + 2..].to_vec(),
                },
            });
        }
    }
    Ok(out)
}

fn strip_sum(text: &str) -> &str {
    let t = text.trim();
    let t = t
        .strip_prefix(SUM_OPEN)
        .or_else(|| t.strip_prefix("<summary>"))
        .unwrap_or(t);
    let t = t.trim_end();
    t.strip_suffix(SUM_CLOSE)
        .or_else(|| t.strip_suffix("</summary>"))
        .unwrap_or(t)
        .trim()
}

pub fn awareness_request(inst: &Instance, seed: u64) -> GeneratorRequest {
    GeneratorRequest::new(
        Role::AwarenessGen,
        prompts::pag_awareness(
            &inst.meta,
            &inst.history,
            &inst.turn_history(),
            &inst.query,
            &inst.gold.render(),
            &inst.future,
        ),
    )
    .seed(seed)
    .max_tokens(512)
}

pub fn gen_awareness(gen: &dyn Generator, inst: &Instance, seed: u64) -> Result<AwarenessDoc, PagError> {
    let out = gen.generate(&awareness_request(inst, seed))?;
    AwarenessDoc::parse(strip_sum(&out.text))
}

/// Asks the verifier to rebuild the calls from the note and metadata alone.
/// Output that does not parse counts as a rejection.
pub fn verify(ver: &dyn Generator, s: &AwarenessDoc, meta: &TaskMeta, gold: &CallList) -> Result<bool, PagError> {
    let req = GeneratorRequest::new(Role::Verifier, prompts::verify(meta, s)).max_tokens(256);
    let out = ver.generate(&req)?;
    Ok(match parse_call_list(out.text.trim()) {
        Ok(recovered) => eq_lists(&recovered, gold, &meta.schemas),
        Err(_) => false,
    })
}

/// Where a stage record came from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub stage: String,
    pub seed: u64,
    pub role: Option<Role>,
    pub op: Option<AugmentOp>,
    pub instance: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DocRecord {
    pub instance: Instance,
    pub doc: AwarenessDoc,
    pub provenance: Provenance,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RecordKind {
    Awareness,
    Coldstart,
}

/// One supervised pair: prompt sections and target text.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SftRecord {
    pub kind: RecordKind,
    pub sections: Sections,
    pub target: String,
    pub provenance: Provenance,
}

impl SftRecord {
    pub fn awareness(inst: &Instance, doc: &AwarenessDoc, provenance: Provenance) -> Self {
        Self {
            kind: RecordKind::Awareness,
            sections: prompts::awareness(&inst.meta, &inst.query, &inst.turn_history()),
            target: format!("{SUM_OPEN} {} {SUM_CLOSE}", doc.raw),
            provenance,
        }
    }

    pub fn coldstart(inst: &Instance, provenance: Provenance) -> Self {
        Self {
            kind: RecordKind::Coldstart,
            sections: prompts::raw_action(&inst.meta, &inst.history, &inst.query),
            target: action_text(&inst.gold),
            provenance,
        }
    }

    /// Hex SHA-256 over kind, prompt and target.
    pub fn content_hash(&self) -> String {
        let mut h = Sha256::new();
        h.update(serde_json::to_vec(&(self.kind, &self.sections, &self.target)).unwrap_or_default());
        hex::encode(h.finalize())
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct SftDataset {
    pub awareness_records: Vec<SftRecord>,
    pub coldstart_records: Vec<SftRecord>,
}

impl SftDataset {
    pub fn len(&self) -> usize {
        self.awareness_records.len() + self.coldstart_records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn records(&self) -> impl Iterator<Item = &SftRecord> {
        self.awareness_records.iter().chain(&self.coldstart_records)
    }

    pub fn from_records(records: Vec<SftRecord>) -> Self {
        let (a, c) = records.into_iter().partition(|r| r.kind == RecordKind::Awareness);
        Self {
            awareness_records: a,
            coldstart_records: c,
        }
    }
}

/// Union of awareness and cold-start records, deduplicated by content hash.
pub fn build_sft(aug_docs: &[DocRecord], coldstart: &[Instance]) -> SftDataset {
    let mut seen = HashSet::new();
    let mut ds = SftDataset::default();
    for r in aug_docs {
        let rec = SftRecord::awareness(&r.instance, &r.doc, r.provenance.clone());
        if seen.insert(rec.content_hash()) {
            ds.awareness_records.push(rec);
        }
    }
    for inst in coldstart {
        let rec = SftRecord::coldstart(
            inst,
            Provenance {
                stage: "coldstart".into(),
                seed: 0,
                role: None,
                op: None,
                instance: inst.id.clone(),
            },
        );
        if seen.insert(rec.content_hash()) {
            ds.coldstart_records.push(rec);
        }
    }
    ds
}

/// `−Σ log π(target | prompt)` over every record, and its gradient.
pub fn sft_loss(params: &PolicyParams, ds: &SftDataset) -> Result<(f64, Gradient), PolicyError> {
    sft_loss_with(params, ds, Execution::Sequential)
}

pub fn sft_loss_with(
    params: &PolicyParams,
    ds: &SftDataset,
    exec: Execution,
) -> Result<(f64, Gradient), PolicyError> {
    let records: Vec<&SftRecord> = ds.records().collect();
    let parts = exec.map(&records, |_, r| -> Result<(f64, Gradient), PolicyError> {
        let tokens = params.vocab.encode(&r.target)?;
        let bag = params.prompt_bag(&r.sections);
        let (lp, g) = logprob_and_grad(params, &bag, &tokens)?;
        Ok((-lp.iter().sum::<f64>(), g))
    });
    let mut loss = 0.0;
    let mut grad = Gradient::zeros_like(params);
    for p in parts {
        let (l, g) = p?;
        loss += l;
        grad.add(&g);
    }
    grad.scale(-1.0);
    Ok((loss, grad))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct WarmupConfig {
    pub learning_rate: f64,
    pub steps: usize,
}

impl Default for WarmupConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.5,
            steps: 400,
        }
    }
}

/// Fixed-step gradient descent on the per-record mean SFT loss. Returns the
/// loss before each step followed by the final loss.
pub fn warmup(
    params: &mut PolicyParams,
    ds: &SftDataset,
    cfg: &WarmupConfig,
    exec: Execution,
) -> Result<Vec<f64>, PolicyError> {
    let n = ds.len().max(1) as f64;
    let mut losses = Vec::with_capacity(cfg.steps + 1);
    for _ in 0..cfg.steps {
        let (loss, grad) = sft_loss_with(params, ds, exec)?;
        losses.push(loss / n);
        params.add_scaled(&grad, -cfg.learning_rate / n);
    }
    losses.push(sft_loss_with(params, ds, exec)?.0 / n);
    Ok(losses)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PagConfig {
    pub seed: u64,
    /// Share of instances routed to cold-start records instead of awareness.
    pub coldstart_fraction: f64,
    pub augment: AugmentConfig,
    /// Keep the unaugmented verified note next to its augmented copy.
    pub keep_verified: bool,
}

impl Default for PagConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            coldstart_fraction: 0.5,
            augment: AugmentConfig::default(),
            keep_verified: true,
        }
    }
}

/// Outputs of every stage, in order.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct PagOutput {
    pub instances: Vec<Instance>,
    pub raw: Vec<DocRecord>,
    pub verified: Vec<DocRecord>,
    pub augmented: Vec<DocRecord>,
    pub coldstart: Vec<Instance>,
    pub dataset: SftDataset,
    /// `(instance id, reason)` for every dropped instance.
    pub dropped: Vec<(String, String)>,
}

/// Splits instances into awareness sources and cold-start exemplars with a
/// seeded permutation.
pub fn split_coldstart(instances: &[Instance], fraction: f64, seed: u64) -> (Vec<Instance>, Vec<Instance>) {
    let mut keyed: Vec<(u64, &Instance)> = instances
        .iter()
        .enumerate()
        .map(|(i, inst)| (crate::seed::derive(seed, &[0x5f11, i as u64]), inst))
        .collect();
    keyed.sort_by_key(|(k, _)| *k);
    let n_cs = (fraction.clamp(0.0, 1.0) * instances.len() as f64).round() as usize;
    let cs_ids: HashSet<&str> = keyed.iter().take(n_cs).map(|(_, i)| i.id.as_str()).collect();
    instances
        .iter()
        .cloned()
        .partition(|i| !cs_ids.contains(i.id.as_str()))
}

/// Records a stage kept and `(instance id, reason)` for the rest.
pub type StageResult = Result<(Vec<DocRecord>, Vec<(String, String)>), PagError>;

/// Awareness generation over the awareness split.
pub fn stage_generate(
    gen: &dyn Generator,
    instances: &[Instance],
    seed: u64,
    exec: Execution,
) -> StageResult {
    let results = exec.map(instances, |i, inst| {
        let s = seed::derive(seed, &[1, i as u64]);
        (s, gen_awareness(gen, inst, s))
    });
    let mut raw = Vec::new();
    let mut dropped = Vec::new();
    for (inst, (s, r)) in instances.iter().zip(results) {
        match r {
            Ok(doc) => raw.push(DocRecord {
                instance: inst.clone(),
                doc,
                provenance: Provenance {
                    stage: "raw".into(),
                    seed: s,
                    role: Some(Role::AwarenessGen),
                    op: None,
                    instance: inst.id.clone(),
                },
            }),
            Err(PagError::SectionMissing(sec)) => {
                dropped.push((inst.id.clone(), format!("awareness section `{sec}` missing")))
            }
            Err(e) => return Err(e),
        }
    }
    Ok((raw, dropped))
}

/// Keeps the notes from which the verifier recovers the reference calls.
pub fn stage_verify(
    ver: &dyn Generator,
    raw: &[DocRecord],
    exec: Execution,
) -> StageResult {
    let verdicts = exec.map(raw, |_, r| verify(ver, &r.doc, &r.instance.meta, &r.instance.gold));
    let mut kept = Vec::new();
    let mut dropped = Vec::new();
    for (r, v) in raw.iter().zip(verdicts) {
        if v? {
            let mut r = r.clone();
            r.provenance.stage = "verified".into();
            r.provenance.role = Some(Role::Verifier);
            kept.push(r);
        } else {
            dropped.push((r.instance.id.clone(), "verifier could not recover the call".into()));
        }
    }
    Ok((kept, dropped))
}

/// One seeded augmentation per verified note.
pub fn stage_augment(
    aug: &dyn Generator,
    verified: &[DocRecord],
    cfg: &PagConfig,
    exec: Execution,
) -> StageResult {
    let results = exec.map(verified, |i, r| {
        let s = seed::derive(cfg.seed, &[3, i as u64]);
        let op = AugmentOp::ALL[(seed::derive(s, &[0]) % AugmentOp::ALL.len() as u64) as usize];
        (s, op, augment(aug, &r.doc, op, &r.instance, s, &cfg.augment))
    });
    let mut out = Vec::new();
    let mut notes = Vec::new();
    for (r, (s, op, res)) in verified.iter().zip(results) {
        if cfg.keep_verified {
            out.push(r.clone());
        }
        match res {
            Ok(a) => out.push(DocRecord {
                instance: a.instance,
                doc: a.doc,
                provenance: Provenance {
                    stage: "augmented".into(),
                    seed: s,
                    role: (op == AugmentOp::Paraphrase).then_some(Role::Augmenter),
                    op: Some(op),
                    instance: r.instance.id.clone(),
                },
            }),
            Err(e @ (PagError::NoPerturbableField(_) | PagError::SectionMissing(_))) => {
                notes.push((r.instance.id.clone(), format!("{op:?} skipped: {e}")));
            }
            Err(e) => return Err(e),
        }
    }
    Ok((out, notes))
}

/// The full pipeline from reference trajectories to the warm-up dataset.
pub fn run_pipeline(
    tasks: &[Task],
    awareness_gen: &dyn Generator,
    verifier: &dyn Generator,
    augmenter: &dyn Generator,
    cfg: &PagConfig,
    exec: Execution,
) -> Result<PagOutput, PagError> {
    let mut dataset = Vec::with_capacity(tasks.len());
    for t in tasks {
        dataset.push((t.meta.clone(), gold_trajectory(t)?));
    }
    let instances = segment(&dataset)?;
    let (aw_src, coldstart) = split_coldstart(&instances, cfg.coldstart_fraction, cfg.seed);
    let (raw, mut dropped) = stage_generate(awareness_gen, &aw_src, cfg.seed, exec)?;
    let (verified, d) = stage_verify(verifier, &raw, exec)?;
    dropped.extend(d);
    let (augmented, d) = stage_augment(augmenter, &verified, cfg, exec)?;
    dropped.extend(d);
    let dataset = build_sft(&augmented, &coldstart);
    Ok(PagOutput {
        instances,
        raw,
        verified,
        augmented,
        coldstart,
        dataset,
        dropped,
    })
}
