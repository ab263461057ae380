//! Awareness-guided multi-turn rollouts.
//!
//! Each step first asks the policy for an awareness note conditioned on the
//! task metadata, the current query and the current turn's history, then asks
//! for an action conditioned on metadata, query and note only. With
//! awareness disabled the action is conditioned on the full raw dialogue
//! prefix instead.

use serde::{Deserialize, Serialize};

use crate::fc::{parse_call_list, validate_call_list, CallList, ValidationReport};
use crate::pag::AwarenessDoc;
use crate::parallel::Execution;
use crate::policy::{GenError, Generator, GeneratorRequest, Role, TokenSequence};
use crate::prompts;
use crate::reward::{
    split_action, step_reward, trajectory_return, RewardError, RewardWeights, StepReward, ANSWER_CLOSE,
    SUM_CLOSE, SUM_OPEN,
};
use crate::seed;
use crate::task::{Task, TaskMeta};
use crate::toolenv::{self, check_success, init_env, EnvError, Observation};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum RolloutError {
    /// The generator could not be reached; the rollout can be retried.
    #[error("generator unavailable: {0}")]
    GeneratorUnavailable(String),
    #[error(transparent)]
    Env(#[from] EnvError),
    #[error(transparent)]
    Reward(#[from] RewardError),
    #[error("invalid rollout limits: {0}")]
    Limits(String),
    #[error("malformed trajectory records: {0}")]
    Records(String),
}

fn gen_err(e: GenError) -> RolloutError {
    match e {
        GenError::Unavailable(m) => RolloutError::GeneratorUnavailable(m),
        GenError::BudgetExceeded { .. } => unreachable!("budget errors are handled in place"),
    }
}

/// One entry of the dialogue prefix. `turn` is 1-based.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "role", rename_all = "snake_case")]
pub enum Message {
    User {
        turn: usize,
        text: String,
    },
    Assistant {
        turn: usize,
        text: String,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        calls: Option<CallList>,
    },
    Observation {
        turn: usize,
        observation: Observation,
    },
}

impl Message {
    pub fn turn(&self) -> usize {
        match self {
            Message::User { turn, .. }
            | Message::Assistant { turn, .. }
            | Message::Observation { turn, .. } => *turn,
        }
    }

    pub fn render(&self) -> String {
        match self {
            Message::User { text, .. } => format!("user : {text}"),
            Message::Assistant {
                calls: Some(c), ..
            } => format!("assistant : {}", c.render()),
            Message::Assistant { text, .. } => format!("assistant : {text}"),
            Message::Observation { observation, .. } => {
                format!("observation : {}", observation.render())
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct DialoguePrefix {
    pub messages: Vec<Message>,
}

impl DialoguePrefix {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, m: Message) {
        self.messages.push(m);
    }

    pub fn is_empty(&self) -> bool {
        self.messages.is_empty()
    }

    pub fn len(&self) -> usize {
        self.messages.len()
    }

    /// One message per line; `none` when empty.
    pub fn render(&self) -> String {
        if self.messages.is_empty() {
            return "none".to_string();
        }
        self.messages
            .iter()
            .map(Message::render)
            .collect::<Vec<_>>()
            .join("\n")
    }

    /// Assistant and observation messages of `turn`.
    pub fn turn_actions(&self, turn: usize) -> DialoguePrefix {
        DialoguePrefix {
            messages: self
                .messages
                .iter()
                .filter(|m| m.turn() == turn && !matches!(m, Message::User { .. }))
                .cloned()
                .collect(),
        }
    }

    /// Every observation directly follows an assistant call of the same turn.
    pub fn is_well_formed(&self) -> bool {
        let mut prev: Option<&Message> = None;
        for m in &self.messages {
            if let Message::Observation { turn, .. } = m {
                match prev {
                    Some(Message::Assistant {
                        turn: t,
                        calls: Some(_),
                        ..
                    }) if t == turn => {}
                    _ => return false,
                }
            }
            if let Some(p) = prev {
                if m.turn() < p.turn() {
                    return false;
                }
            }
            prev = Some(m);
        }
        true
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RolloutLimits {
    /// Global action budget H.
    pub max_actions: usize,
    pub gamma: f64,
    pub max_awareness_tokens: usize,
    pub max_action_tokens: usize,
}

impl Default for RolloutLimits {
    fn default() -> Self {
        Self {
            max_actions: 10,
            gamma: 1.0,
            max_awareness_tokens: 96,
            max_action_tokens: 48,
        }
    }
}

impl RolloutLimits {
    pub fn validate(&self, num_turns: usize) -> Result<(), RolloutError> {
        if self.max_actions == 0 || self.max_awareness_tokens == 0 || self.max_action_tokens == 0 {
            return Err(RolloutError::Limits("budgets must be positive".into()));
        }
        if !(self.gamma > 0.0 && self.gamma <= 1.0) {
            return Err(RolloutError::Limits(format!("gamma {} outside (0, 1]", self.gamma)));
        }
        if self.max_actions < num_turns {
            return Err(RolloutError::Limits(format!(
                "H = {} is smaller than the {num_turns} turns of the task",
                self.max_actions
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RolloutConfig {
    pub limits: RolloutLimits,
    pub weights: RewardWeights,
    pub temperature: f64,
    /// `false` skips awareness and conditions actions on raw history.
    pub awareness: bool,
}

impl Default for RolloutConfig {
    fn default() -> Self {
        Self {
            limits: RolloutLimits::default(),
            weights: RewardWeights::default(),
            temperature: 1.0,
            awareness: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ActionKind {
    Calls,
    Message,
    Unparseable,
}

/// Tokens produced under one prompt, with the log-probabilities of the
/// policy that sampled them.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Segment {
    pub sections: prompts::Sections,
    pub tokens: Vec<u32>,
    pub old_logprobs: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Step {
    /// 1-based.
    pub turn_index: usize,
    /// 1-based within the turn.
    pub step_index: usize,
    /// 0-based across the trajectory.
    pub global_index: usize,
    pub awareness: AwarenessDoc,
    pub action_text: String,
    pub kind: ActionKind,
    pub parsed_calls: Option<CallList>,
    pub observation: Observation,
    pub reward: StepReward,
    /// `<sum>…</sum><think>…</think><answer>…</answer>`.
    pub concat_tokens: TokenSequence,
    #[serde(skip)]
    pub segments: Vec<Segment>,
}

impl Step {
    pub fn num_tokens(&self) -> usize {
        self.segments.iter().map(|s| s.tokens.len()).sum()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Turn {
    pub query: String,
    pub steps: Vec<Step>,
    pub terminal_message: Option<String>,
    pub goal_reached: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub task_id: String,
    pub turns: Vec<Turn>,
    pub total_return: f64,
    pub truncated: bool,
}

impl Trajectory {
    pub fn steps(&self) -> impl Iterator<Item = &Step> {
        self.turns.iter().flat_map(|t| t.steps.iter())
    }

    pub fn num_steps(&self) -> usize {
        self.turns.iter().map(|t| t.steps.len()).sum()
    }

    /// Every one of the `num_turns` goals was reached.
    pub fn solved(&self, num_turns: usize) -> bool {
        self.turns.len() == num_turns && self.turns.iter().all(|t| t.goal_reached)
    }

    pub fn num_tokens(&self) -> usize {
        self.steps().map(Step::num_tokens).sum()
    }
}

/// Awareness emitted for one step.
#[derive(Debug, Clone, PartialEq)]
pub struct AwarenessOutput {
    pub doc: AwarenessDoc,
    /// Text as it enters the concatenated action, starting with `<sum>`.
    pub tagged: String,
    pub seq: TokenSequence,
    pub sections: prompts::Sections,
}

fn generate_bounded(
    policy: &dyn Generator,
    req: &GeneratorRequest,
) -> Result<(TokenSequence, bool), RolloutError> {
    match policy.generate(req) {
        Ok(s) => Ok((s, false)),
        Err(GenError::BudgetExceeded { partial }) => Ok((partial, true)),
        Err(e) => Err(gen_err(e)),
    }
}

fn strip_sum_tags(text: &str) -> (&str, bool) {
    let t = text.trim();
    let (t, opened) = match t.strip_prefix(SUM_OPEN).or_else(|| t.strip_prefix("<summary>")) {
        Some(r) => (r, true),
        None => (t, false),
    };
    let t = t.trim_end();
    let t = t
        .strip_suffix(SUM_CLOSE)
        .or_else(|| t.strip_suffix("</summary>"))
        .unwrap_or(t);
    (t.trim(), opened)
}

#[allow(clippy::too_many_arguments)]
pub fn emit_awareness(
    policy: &dyn Generator,
    meta: &TaskMeta,
    query: &str,
    turn_history: &DialoguePrefix,
    max_tokens: usize,
    temperature: f64,
    seed: u64,
) -> Result<AwarenessOutput, RolloutError> {
    let sections = prompts::awareness(meta, query, turn_history);
    let req = GeneratorRequest::new(Role::Policy, sections.clone())
        .temperature(temperature)
        .seed(seed)
        .max_tokens(max_tokens)
        .stop(SUM_CLOSE);
    let (mut seq, truncated) = generate_bounded(policy, &req)?;
    if !truncated && seq.tokens.is_empty() {
        let n = crate::policy::tokenize(&seq.text).len();
        if n > max_tokens {
            let kept: Vec<&str> = crate::policy::tokenize(&seq.text).into_iter().take(max_tokens).collect();
            seq.text = crate::policy::detokenize(&kept);
            return Ok(finish_awareness(seq, sections, true));
        }
    }
    Ok(finish_awareness(seq, sections, truncated))
}

fn finish_awareness(seq: TokenSequence, sections: prompts::Sections, truncated: bool) -> AwarenessOutput {
    let (inner, opened) = strip_sum_tags(&seq.text);
    let doc = match (truncated, AwarenessDoc::parse(inner)) {
        (false, Ok(d)) => d,
        _ => AwarenessDoc::degraded(inner),
    };
    let tagged = if opened {
        seq.text.trim().to_string()
    } else if truncated {
        format!("{SUM_OPEN} {inner}")
    } else {
        format!("{SUM_OPEN} {inner} {SUM_CLOSE}")
    };
    AwarenessOutput {
        doc,
        tagged,
        seq,
        sections,
    }
}

/// Classified action text.
#[derive(Debug, Clone, PartialEq)]
pub struct ActOutput {
    pub text: String,
    pub kind: ActionKind,
    pub calls: Option<CallList>,
    /// The answer body when `kind` is a user-facing message.
    pub message: Option<String>,
    pub seq: TokenSequence,
    pub sections: prompts::Sections,
}

/// Splits the tags and parses the answer. An answer that does not start with
/// `[` is a message for the user; a malformed call list or missing tags make
/// the action unparseable.
pub fn classify_action(text: &str) -> (ActionKind, Option<CallList>, Option<String>) {
    match split_action(text) {
        Some(parts) if parts.answer.starts_with('[') => match parse_call_list(parts.answer) {
            Ok(c) => (ActionKind::Calls, Some(c), None),
            Err(_) => (ActionKind::Unparseable, None, None),
        },
        Some(parts) => (ActionKind::Message, None, Some(parts.answer.to_string())),
        None => (ActionKind::Unparseable, None, None),
    }
}

fn run_action(
    policy: &dyn Generator,
    sections: prompts::Sections,
    max_tokens: usize,
    temperature: f64,
    seed: u64,
) -> Result<ActOutput, RolloutError> {
    let req = GeneratorRequest::new(Role::Policy, sections.clone())
        .temperature(temperature)
        .seed(seed)
        .max_tokens(max_tokens)
        .stop(ANSWER_CLOSE);
    let (seq, _) = generate_bounded(policy, &req)?;
    let text = seq.text.trim().to_string();
    let (kind, calls, message) = classify_action(&text);
    Ok(ActOutput {
        text,
        kind,
        calls,
        message,
        seq,
        sections,
    })
}

/// Action conditioned on metadata, query and awareness only.
pub fn act(
    policy: &dyn Generator,
    meta: &TaskMeta,
    query: &str,
    awareness: &AwarenessDoc,
    max_tokens: usize,
    temperature: f64,
    seed: u64,
) -> Result<ActOutput, RolloutError> {
    run_action(policy, prompts::action(meta, query, awareness), max_tokens, temperature, seed)
}

/// Action conditioned on the raw dialogue prefix.
pub fn act_raw(
    policy: &dyn Generator,
    meta: &TaskMeta,
    history: &DialoguePrefix,
    query: &str,
    max_tokens: usize,
    temperature: f64,
    seed: u64,
) -> Result<ActOutput, RolloutError> {
    run_action(policy, prompts::raw_action(meta, history, query), max_tokens, temperature, seed)
}

fn segment_of(seq: &TokenSequence, sections: &prompts::Sections) -> Option<Segment> {
    let lp = seq.logprobs.as_ref()?;
    (!seq.tokens.is_empty() && lp.len() == seq.tokens.len()).then(|| Segment {
        sections: sections.clone(),
        tokens: seq.tokens.clone(),
        old_logprobs: lp.clone(),
    })
}

fn concat(aw: Option<&AwarenessOutput>, act: &ActOutput) -> TokenSequence {
    let Some(aw) = aw else {
        return TokenSequence {
            tokens: act.seq.tokens.clone(),
            text: act.text.clone(),
            logprobs: act.seq.logprobs.clone(),
        };
    };
    let mut tokens = aw.seq.tokens.clone();
    tokens.extend(&act.seq.tokens);
    let logprobs = match (&aw.seq.logprobs, &act.seq.logprobs) {
        (Some(a), Some(b)) => Some(a.iter().chain(b).copied().collect()),
        _ => None,
    };
    TokenSequence {
        tokens,
        text: format!("{} {}", aw.tagged, act.text),
        logprobs,
    }
}

/// Runs one task to completion or until the action budget is spent.
pub fn run_rollout(
    policy: &dyn Generator,
    task: &Task,
    cfg: &RolloutConfig,
    seed: u64,
) -> Result<Trajectory, RolloutError> {
    let limits = &cfg.limits;
    limits.validate(task.num_turns())?;
    cfg.weights.validate()?;
    if task.queries.len() != task.env_config.turn_goals.len() {
        return Err(EnvError::Config("query count differs from goal count".into()).into());
    }
    let meta = &task.meta;
    let mut state = init_env(&task.env_config)?;
    let mut history = DialoguePrefix::new();
    let mut turns = Vec::with_capacity(task.num_turns());
    let mut global = 0usize;
    let mut truncated = false;

    'turns: for (i, query) in task.queries.iter().enumerate() {
        let turn_index = i + 1;
        let goal = &task.env_config.turn_goals[i];
        let mut turn = Turn {
            query: query.clone(),
            steps: Vec::new(),
            terminal_message: None,
            goal_reached: false,
        };
        history.push(Message::User {
            turn: turn_index,
            text: query.clone(),
        });
        loop {
            if global == limits.max_actions {
                truncated = true;
                turns.push(turn);
                break 'turns;
            }
            let aw_seed = seed::derive(seed, &[global as u64, 0]);
            let act_seed = seed::derive(seed, &[global as u64, 1]);
            let (aw, out) = if cfg.awareness {
                let aw = emit_awareness(
                    policy,
                    meta,
                    query,
                    &history.turn_actions(turn_index),
                    limits.max_awareness_tokens,
                    cfg.temperature,
                    aw_seed,
                )?;
                let out = act(
                    policy,
                    meta,
                    query,
                    &aw.doc,
                    limits.max_action_tokens,
                    cfg.temperature,
                    act_seed,
                )?;
                (Some(aw), out)
            } else {
                let prefix = DialoguePrefix {
                    messages: history
                        .messages
                        .iter()
                        .filter(|m| !matches!(m, Message::User { turn, .. } if *turn == turn_index))
                        .cloned()
                        .collect(),
                };
                let out = act_raw(
                    policy,
                    meta,
                    &prefix,
                    query,
                    limits.max_action_tokens,
                    cfg.temperature,
                    act_seed,
                )?;
                (None, out)
            };

            let (observation, validation, success) = match &out.calls {
                Some(calls) => {
                    let (next, obs) = toolenv::step(&state, calls);
                    let ok = obs.all_ok() && check_success(&next, goal);
                    state = next;
                    (obs, validate_call_list(calls, &meta.schemas), ok)
                }
                None => (
                    Observation::default(),
                    ValidationReport::unparseable(match out.kind {
                        ActionKind::Message => "user-facing message",
                        _ => "no call list",
                    }),
                    false,
                ),
            };
            let concat_tokens = concat(aw.as_ref(), &out);
            let reward = step_reward(
                &concat_tokens.text,
                &validation,
                success,
                out.kind != ActionKind::Message,
                &cfg.weights,
            );
            let mut segments = Vec::new();
            if let Some(a) = &aw {
                segments.extend(segment_of(&a.seq, &a.sections));
            }
            segments.extend(segment_of(&out.seq, &out.sections));

            history.push(Message::Assistant {
                turn: turn_index,
                text: out.text.clone(),
                calls: out.calls.clone(),
            });
            if out.calls.is_some() {
                history.push(Message::Observation {
                    turn: turn_index,
                    observation: observation.clone(),
                });
            }
            turn.steps.push(Step {
                turn_index,
                step_index: turn.steps.len() + 1,
                global_index: global,
                awareness: aw.map(|a| a.doc).unwrap_or_default(),
                action_text: out.text,
                kind: out.kind,
                parsed_calls: out.calls,
                observation,
                reward,
                concat_tokens,
                segments,
            });
            global += 1;

            if success {
                turn.goal_reached = true;
                state.advance_turn();
                break;
            }
            if out.kind == ActionKind::Message {
                turn.terminal_message = out.message;
                state.advance_turn();
                break;
            }
        }
        turns.push(turn);
    }

    let mut traj = Trajectory {
        task_id: task.id.clone(),
        turns,
        total_return: 0.0,
        truncated,
    };
    traj.total_return = trajectory_return(&traj, limits.gamma)?;
    Ok(traj)
}

/// Rollouts for every `(task, ℓ)` cell of the grid, ordered by task then ℓ.
/// The seed of cell `(k, ℓ)` is derived from `(base_seed, k, ℓ)`.
pub fn rollout_grid(
    policy: &dyn Generator,
    tasks: &[Task],
    group: usize,
    cfg: &RolloutConfig,
    base_seed: u64,
    exec: Execution,
) -> Result<Vec<Vec<Trajectory>>, RolloutError> {
    let flat = exec.map_range(tasks.len() * group, |c| {
        let (k, l) = (c / group, c % group);
        run_rollout(policy, &tasks[k], cfg, seed::derive(base_seed, &[k as u64, l as u64]))
    });
    let mut out: Vec<Vec<Trajectory>> = (0..tasks.len()).map(|_| Vec::with_capacity(group)).collect();
    for (c, r) in flat.into_iter().enumerate() {
        out[c / group].push(r?);
    }
    Ok(out)
}

/// One line of the trajectory log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "record", rename_all = "snake_case")]
pub enum TrajectoryRecord {
    Step {
        task_id: String,
        rollout: usize,
        step: Box<Step>,
    },
    Trailer {
        task_id: String,
        rollout: usize,
        turns: Vec<TurnSummary>,
        total_return: f64,
        truncated: bool,
        num_steps: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TurnSummary {
    pub query: String,
    pub terminal_message: Option<String>,
    pub goal_reached: bool,
}

impl Trajectory {
    /// Step records in order followed by one trailer.
    pub fn to_records(&self, rollout: usize) -> Vec<TrajectoryRecord> {
        let mut out: Vec<TrajectoryRecord> = self
            .steps()
            .map(|s| TrajectoryRecord::Step {
                task_id: self.task_id.clone(),
                rollout,
                step: Box::new(s.clone()),
            })
            .collect();
        out.push(TrajectoryRecord::Trailer {
            task_id: self.task_id.clone(),
            rollout,
            turns: self
                .turns
                .iter()
                .map(|t| TurnSummary {
                    query: t.query.clone(),
                    terminal_message: t.terminal_message.clone(),
                    goal_reached: t.goal_reached,
                })
                .collect(),
            total_return: self.total_return,
            truncated: self.truncated,
            num_steps: self.num_steps(),
        });
        out
    }

    /// Rebuilds trajectories from a record stream. Steps of a trajectory
    /// must precede its trailer.
    pub fn from_records(records: &[TrajectoryRecord]) -> Result<Vec<(usize, Trajectory)>, RolloutError> {
        let mut out = Vec::new();
        let mut pending: Vec<Step> = Vec::new();
        let mut key: Option<(String, usize)> = None;
        for r in records {
            match r {
                TrajectoryRecord::Step { task_id, rollout, step } => {
                    let k = (task_id.clone(), *rollout);
                    if key.as_ref().is_some_and(|x| *x != k) {
                        return Err(RolloutError::Records(format!(
                            "step of {task_id}/{rollout} interleaved with another trajectory"
                        )));
                    }
                    key = Some(k);
                    pending.push((**step).clone());
                }
                TrajectoryRecord::Trailer {
                    task_id,
                    rollout,
                    turns,
                    total_return,
                    truncated,
                    num_steps,
                } => {
                    if key.as_ref().is_some_and(|x| *x != (task_id.clone(), *rollout)) {
                        return Err(RolloutError::Records(format!("trailer of {task_id}/{rollout} out of place")));
                    }
                    if pending.len() != *num_steps {
                        return Err(RolloutError::Records(format!(
                            "{task_id}/{rollout}: trailer counts {num_steps} steps, found {}",
                            pending.len()
                        )));
                    }
                    let mut rebuilt: Vec<Turn> = turns
                        .iter()
                        .map(|t| Turn {
                            query: t.query.clone(),
                            steps: Vec::new(),
                            terminal_message: t.terminal_message.clone(),
                            goal_reached: t.goal_reached,
                        })
                        .collect();
                    for s in pending.drain(..) {
                        let slot = s
                            .turn_index
                            .checked_sub(1)
                            .and_then(|i| rebuilt.get_mut(i))
                            .ok_or_else(|| RolloutError::Records(format!("step with turn {}", s.turn_index)))?;
                        slot.steps.push(s);
                    }
                    out.push((
                        *rollout,
                        Trajectory {
                            task_id: task_id.clone(),
                            turns: rebuilt,
                            total_return: *total_return,
                            truncated: *truncated,
                        },
                    ));
                    key = None;
                }
            }
        }
        if !pending.is_empty() {
            return Err(RolloutError::Records("steps without a trailer".into()));
        }
        Ok(out)
    }
}

/// Re-executes the recorded calls of `traj` from the task's initial
/// configuration and reports, per turn, whether its goal holds once the
/// turn's steps are done.
pub fn replay(task: &Task, traj: &Trajectory) -> Result<Vec<bool>, RolloutError> {
    let mut state = init_env(&task.env_config)?;
    let mut reached = Vec::with_capacity(traj.turns.len());
    for (i, turn) in traj.turns.iter().enumerate() {
        let goal = task
            .env_config
            .turn_goals
            .get(i)
            .ok_or_else(|| RolloutError::Records(format!("trajectory has more turns than task {}", task.id)))?;
        let mut ok = false;
        for s in &turn.steps {
            if let Some(c) = &s.parsed_calls {
                let (next, obs) = toolenv::step(&state, c);
                ok = obs.all_ok() && check_success(&next, goal);
                state = next;
            } else {
                ok = false;
            }
        }
        state.advance_turn();
        reached.push(ok);
    }
    Ok(reached)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskEval {
    pub task_id: String,
    pub successes: usize,
    pub trials: usize,
    pub mean_steps: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialEval {
    pub trial: usize,
    pub success: f64,
    pub mean_steps: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub success: f64,
    pub mean_steps: f64,
    pub max_steps: usize,
    pub trials: Vec<TrialEval>,
    pub per_task: Vec<TaskEval>,
}

/// `trials` rollouts per task; success means every turn goal was reached.
pub fn evaluate(
    policy: &dyn Generator,
    tasks: &[Task],
    cfg: &RolloutConfig,
    trials: usize,
    base_seed: u64,
    exec: Execution,
) -> Result<EvalReport, RolloutError> {
    let grid = rollout_grid(policy, tasks, trials.max(1), cfg, base_seed, exec)?;
    let trials = trials.max(1);
    let n = tasks.len().max(1) as f64;
    let mut per_trial = vec![(0usize, 0usize); trials];
    let mut per_task = Vec::with_capacity(tasks.len());
    let mut max_steps = 0;
    for (task, runs) in tasks.iter().zip(&grid) {
        let mut successes = 0;
        let mut steps = 0;
        for (t, traj) in runs.iter().enumerate() {
            let solved = traj.solved(task.num_turns());
            successes += usize::from(solved);
            steps += traj.num_steps();
            max_steps = max_steps.max(traj.num_steps());
            per_trial[t].0 += usize::from(solved);
            per_trial[t].1 += traj.num_steps();
        }
        per_task.push(TaskEval {
            task_id: task.id.clone(),
            successes,
            trials,
            mean_steps: steps as f64 / trials as f64,
        });
    }
    let trials_out: Vec<TrialEval> = per_trial
        .iter()
        .enumerate()
        .map(|(i, (s, st))| TrialEval {
            trial: i,
            success: *s as f64 / n,
            mean_steps: *st as f64 / n,
        })
        .collect();
    Ok(EvalReport {
        success: trials_out.iter().map(|t| t.success).sum::<f64>() / trials as f64,
        mean_steps: trials_out.iter().map(|t| t.mean_steps).sum::<f64>() / trials as f64,
        max_steps,
        trials: trials_out,
        per_task,
    })
}
