//! Execution-verified task synthesis.
//!
//! A task starts from a generated initial configuration and grows one turn
//! at a time: a query, a majority-voted call list, and a verification step
//! run on a scratch copy of the environment. The first failed turn ends the
//! task. Turn goals are the stores reached after each verified turn, so
//! every retained task replays by construction.

use std::collections::BTreeMap;

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::Value as Json;

use crate::fc::{normalize_list, parse_call_list, CallList, ToolSchema};
use crate::parallel::Execution;
use crate::policy::{prompt_hash, Bindings, GenError, Generator, GeneratorRequest, Role};
use crate::prompts;
use crate::seed;
use crate::task::{Task, TaskMeta};
use crate::toolenv::{self, init_env, Domain, EnvConfig, EnvState, GoalState, InitialConfig};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SynthError {
    #[error("synthesis exhausted after {iterations} iterations: {last}")]
    SynthesisExhausted { iterations: usize, last: String },
    #[error("generator unavailable: {0}")]
    GeneratorUnavailable(String),
    #[error("config error: {0}")]
    Config(String),
}

fn unavailable(e: GenError) -> SynthError {
    SynthError::GeneratorUnavailable(e.to_string())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthConfig {
    pub domain: Domain,
    pub scenario: String,
    /// Empty means the domain's default schemas.
    pub schemas: Vec<ToolSchema>,
    pub min_turns: usize,
    pub max_turns: usize,
    pub vote_k: usize,
    pub vote_threshold: usize,
    pub judge_k: usize,
    pub judge_threshold: usize,
    pub max_config_iterations: usize,
    /// Exemplars shown per initial-config prompt.
    pub exemplars_per_prompt: usize,
    /// Keep the verified prefix of a task whose later turn failed.
    pub keep_partial: bool,
    pub temperature: f64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            domain: Domain::Filebox,
            scenario: "A file box holding named text files.".into(),
            schemas: Vec::new(),
            min_turns: 2,
            max_turns: 4,
            vote_k: 5,
            vote_threshold: 3,
            judge_k: 3,
            judge_threshold: 2,
            max_config_iterations: 4,
            exemplars_per_prompt: 2,
            keep_partial: false,
            temperature: 0.7,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<(), SynthError> {
        let bad = |m: String| Err(SynthError::Config(m));
        if self.min_turns == 0 || self.min_turns > self.max_turns {
            return bad(format!("turn range {}..={} is empty or starts at 0", self.min_turns, self.max_turns));
        }
        if self.vote_threshold == 0 || self.vote_threshold > self.vote_k {
            return bad(format!("vote threshold {} outside 1..={}", self.vote_threshold, self.vote_k));
        }
        if self.judge_threshold == 0 || self.judge_threshold > self.judge_k {
            return bad(format!("judge threshold {} outside 1..={}", self.judge_threshold, self.judge_k));
        }
        if self.max_config_iterations == 0 {
            return bad("max_config_iterations must be positive".into());
        }
        Ok(())
    }

    pub fn meta(&self) -> TaskMeta {
        let schemas = if self.schemas.is_empty() {
            self.domain.default_schemas()
        } else {
            self.schemas.clone()
        };
        TaskMeta::new(self.scenario.clone(), schemas)
    }
}

/// Normalized candidate call lists with their vote counts, most frequent
/// first and ties broken by rendered text.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VoteResult {
    pub candidates: Vec<(CallList, usize)>,
    pub winner: Option<CallList>,
    pub threshold: usize,
    /// Votes that did not parse as a call list.
    pub invalid: usize,
}

impl VoteResult {
    /// Tallies `votes` (already normalized); `None` entries are invalid.
    pub fn tally(votes: impl IntoIterator<Item = Option<CallList>>, threshold: usize) -> Self {
        let mut table: BTreeMap<String, (CallList, usize)> = BTreeMap::new();
        let mut invalid = 0;
        for v in votes {
            match v {
                Some(c) => table.entry(c.render()).or_insert((c, 0)).1 += 1,
                None => invalid += 1,
            }
        }
        let mut candidates: Vec<(String, (CallList, usize))> = table.into_iter().collect();
        candidates.sort_by(|a, b| b.1 .1.cmp(&a.1 .1).then_with(|| a.0.cmp(&b.0)));
        let candidates: Vec<(CallList, usize)> = candidates.into_iter().map(|(_, c)| c).collect();
        let winner = candidates
            .first()
            .filter(|(_, n)| *n >= threshold)
            .map(|(c, _)| c.clone());
        Self {
            candidates,
            winner,
            threshold,
            invalid,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "verdict", rename_all = "snake_case")]
pub enum Verdict {
    PassByTransition,
    PassByJudge { votes: usize },
    Fail { reason: String },
}

impl Verdict {
    pub fn passed(&self) -> bool {
        !matches!(self, Verdict::Fail { .. })
    }
}

/// Initial store as JSON text for prompts.
fn state_text(store: &Json) -> String {
    serde_json::to_string(store).unwrap_or_default()
}

/// Asks `gen` for a new initial configuration of `domain`, retrying up to
/// `max_iterations` times. Output must be a bare JSON object that validates
/// and differs from every exemplar. Returns the config and the iterations
/// used.
pub fn gen_initial_config(
    gen: &dyn Generator,
    exemplars: &[InitialConfig],
    domain: Domain,
    per_prompt: usize,
    max_iterations: usize,
    temperature: f64,
    seed: u64,
) -> Result<(InitialConfig, usize), SynthError> {
    let pool: Vec<&InitialConfig> = exemplars.iter().filter(|e| e.domain == domain).collect();
    if pool.is_empty() {
        return Err(SynthError::Config(format!("no {} exemplars", domain.as_str())));
    }
    let mut last = String::new();
    for it in 0..max_iterations {
        let s = seed::derive(seed, &[it as u64]);
        let mut rng = ChaCha8Rng::seed_from_u64(s);
        let n = per_prompt.clamp(1, pool.len());
        let shown: Vec<String> = sample(&mut rng, pool.len(), n)
            .into_iter()
            .map(|i| serde_json::to_string(pool[i]).unwrap_or_default())
            .collect();
        let req = GeneratorRequest::new(Role::SynthGen, prompts::initial_config(domain.as_str(), &shown))
            .temperature(temperature)
            .seed(s);
        let text = gen.generate(&req).map_err(unavailable)?.text;
        match check_config(text.trim(), domain, &pool) {
            Ok(c) => return Ok((c, it + 1)),
            Err(e) => last = e,
        }
    }
    Err(SynthError::SynthesisExhausted {
        iterations: max_iterations,
        last,
    })
}

fn check_config(text: &str, domain: Domain, exemplars: &[&InitialConfig]) -> Result<InitialConfig, String> {
    let c: InitialConfig = serde_json::from_str(text).map_err(|e| format!("not a JSON config: {e}"))?;
    if c.domain != domain {
        return Err(format!("domain {} instead of {}", c.domain.as_str(), domain.as_str()));
    }
    domain.validate_store(&c.initial_state).map_err(|e| e.to_string())?;
    let canon = domain.canonicalize(&c.initial_state);
    if exemplars
        .iter()
        .any(|e| domain.canonicalize(&e.initial_state) == canon)
    {
        return Err("initial state copies an exemplar".into());
    }
    Ok(c)
}

pub fn gen_query(
    gen: &dyn Generator,
    meta: &TaskMeta,
    state: &EnvState,
    prior: &[String],
    temperature: f64,
    seed: u64,
) -> Result<String, SynthError> {
    let req = GeneratorRequest::new(Role::SynthGen, prompts::query(meta, &state_text(&state.store), prior))
        .temperature(temperature)
        .seed(seed);
    Ok(gen.generate(&req).map_err(unavailable)?.text.trim().to_string())
}

/// Issues `k` action requests and votes over their normalized call lists.
/// Returns the vote and the prompt hash of every request.
#[allow(clippy::too_many_arguments)]
pub fn gen_action_voted(
    gen: &dyn Generator,
    meta: &TaskMeta,
    state: &EnvState,
    query: &str,
    k: usize,
    threshold: usize,
    temperature: f64,
    seed: u64,
    exec: Execution,
) -> (VoteResult, Vec<String>) {
    let store = state_text(&state.store);
    let outputs = exec.map_range(k, |j| {
        let sections = prompts::synth_action(meta, &store, query, j);
        let hash = prompt_hash(&sections);
        let req = GeneratorRequest::new(Role::SynthGen, sections)
            .temperature(temperature)
            .seed(seed::derive(seed, &[j as u64]));
        let vote = gen
            .generate(&req)
            .ok()
            .and_then(|t| parse_call_list(t.text.trim()).ok())
            .filter(|c| !c.is_empty())
            .map(|c| normalize_list(&c, &meta.schemas));
        (vote, hash)
    });
    let (votes, hashes): (Vec<_>, Vec<_>) = outputs.into_iter().unzip();
    (VoteResult::tally(votes, threshold), hashes)
}

/// Executes `calls` on a copy of `state`. A changed store passes; an
/// unchanged one goes to `judge_k` judge votes. On a pass the returned state
/// is the post-execution one; on a fail it is a copy of `state`.
#[allow(clippy::too_many_arguments)]
pub fn verify_turn(
    state: &EnvState,
    meta: &TaskMeta,
    query: &str,
    calls: &CallList,
    judge: &dyn Generator,
    judge_k: usize,
    judge_threshold: usize,
    seed: u64,
) -> (Verdict, EnvState) {
    let fail = |reason: String| (Verdict::Fail { reason }, state.clone());
    if !state.is_live() {
        return fail("environment is no longer live".into());
    }
    let (next, obs) = toolenv::step(state, calls);
    if !obs.all_ok() {
        return fail(format!("execution failed: {}", obs.render()));
    }
    if state.domain.canonicalize(&next.store) != state.domain.canonicalize(&state.store) {
        return (Verdict::PassByTransition, next);
    }
    let rendered_calls = calls.render();
    let rendered_obs = obs.render();
    let votes = (0..judge_k)
        .filter(|&v| {
            let req = GeneratorRequest::new(
                Role::Judge,
                prompts::judge(meta, query, &rendered_calls, &rendered_obs, v),
            )
            .seed(seed::derive(seed, &[v as u64]));
            judge
                .generate(&req)
                .map(|t| t.text.trim().to_ascii_lowercase().starts_with("valid"))
                .unwrap_or(false)
        })
        .count();
    if votes >= judge_threshold {
        (Verdict::PassByJudge { votes }, next)
    } else {
        fail(format!("judge approved {votes} of {judge_k}"))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthTurn {
    pub query: String,
    pub gold: CallList,
    pub goal: GoalState,
    pub verdict: Verdict,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthProvenance {
    pub seed: u64,
    pub config_iterations: usize,
    /// Vote counts per verified turn, most frequent first.
    pub tallies: Vec<Vec<(String, usize)>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthTask {
    pub id: String,
    pub meta: TaskMeta,
    pub env_config: InitialConfig,
    pub turns: Vec<SynthTurn>,
    pub provenance: SynthProvenance,
}

impl SynthTask {
    pub fn to_task(&self) -> Task {
        let goals = self.turns.iter().map(|t| t.goal.clone()).collect();
        let mut env_config = EnvConfig::new(self.env_config.clone(), goals);
        env_config.schemas = self.meta.schemas.clone();
        Task {
            id: self.id.clone(),
            meta: self.meta.clone(),
            env_config,
            queries: self.turns.iter().map(|t| t.query.clone()).collect(),
            gold: self.turns.iter().map(|t| t.gold.clone()).collect(),
        }
    }
}

/// Sidecar line for one attempted turn.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TurnProvenance {
    pub task_id: String,
    pub turn: usize,
    pub seed: u64,
    pub query: String,
    pub query_prompt: String,
    pub action_prompts: Vec<String>,
    pub tally: Vec<(String, usize)>,
    pub invalid_votes: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub winner: Option<CallList>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub verdict: Option<Verdict>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "outcome", rename_all = "snake_case")]
pub enum TaskOutcome {
    Retained { task: SynthTask },
    Dropped { verified_turns: usize, reason: String },
    Exhausted { iterations: usize, reason: String },
}

/// Synthesizes one task. Only a missing generator is an error.
pub fn synth_task(
    bindings: &Bindings,
    exemplars: &[InitialConfig],
    cfg: &SynthConfig,
    id: &str,
    task_seed: u64,
    exec: Execution,
) -> Result<(TaskOutcome, Vec<TurnProvenance>), SynthError> {
    let gen = bindings.get(Role::SynthGen);
    let judge = bindings.get(Role::Judge);
    let meta = cfg.meta();
    let (initial, iterations) = match gen_initial_config(
        gen.as_ref(),
        exemplars,
        cfg.domain,
        cfg.exemplars_per_prompt,
        cfg.max_config_iterations,
        cfg.temperature,
        seed::derive(task_seed, &[0]),
    ) {
        Ok(x) => x,
        Err(SynthError::SynthesisExhausted { iterations, last }) => {
            return Ok((TaskOutcome::Exhausted { iterations, reason: last }, Vec::new()))
        }
        Err(e) => return Err(e),
    };
    let target = ChaCha8Rng::seed_from_u64(seed::derive(task_seed, &[4])).random_range(cfg.min_turns..=cfg.max_turns);
    let mut env = EnvConfig::new(initial.clone(), vec![GoalState::new(initial.initial_state.clone()); target]);
    env.schemas = meta.schemas.clone();
    let mut state = init_env(&env).map_err(|e| SynthError::Config(e.to_string()))?;
    let mut turns: Vec<SynthTurn> = Vec::new();
    let mut tallies = Vec::new();
    let mut records = Vec::new();
    let mut stop_reason = None;
    for turn in 0..target {
        let t = turn as u64;
        let prior: Vec<String> = turns.iter().map(|x| x.query.clone()).collect();
        let query_seed = seed::derive(task_seed, &[1, t]);
        let query_prompt = prompt_hash(&prompts::query(&meta, &state_text(&state.store), &prior));
        let query = gen_query(gen.as_ref(), &meta, &state, &prior, cfg.temperature, query_seed)?;
        let (vote, action_prompts) = gen_action_voted(
            gen.as_ref(),
            &meta,
            &state,
            &query,
            cfg.vote_k,
            cfg.vote_threshold,
            cfg.temperature,
            seed::derive(task_seed, &[2, t]),
            exec,
        );
        let tally: Vec<(String, usize)> = vote.candidates.iter().map(|(c, n)| (c.render(), *n)).collect();
        let mut record = TurnProvenance {
            task_id: id.to_string(),
            turn: turn + 1,
            seed: query_seed,
            query: query.clone(),
            query_prompt,
            action_prompts,
            tally: tally.clone(),
            invalid_votes: vote.invalid,
            winner: vote.winner.clone(),
            verdict: None,
        };
        let Some(calls) = vote.winner else {
            records.push(record);
            stop_reason = Some(format!("turn {}: no call list reached {} votes", turn + 1, cfg.vote_threshold));
            break;
        };
        let (verdict, next) = verify_turn(
            &state,
            &meta,
            &query,
            &calls,
            judge.as_ref(),
            cfg.judge_k,
            cfg.judge_threshold,
            seed::derive(task_seed, &[3, t]),
        );
        record.verdict = Some(verdict.clone());
        records.push(record);
        if let Verdict::Fail { reason } = &verdict {
            stop_reason = Some(format!("turn {}: {reason}", turn + 1));
            break;
        }
        state = next;
        state.advance_turn();
        turns.push(SynthTurn {
            query,
            gold: calls,
            goal: GoalState::new(state.store.clone()),
            verdict,
        });
        tallies.push(tally);
    }
    let outcome = match stop_reason {
        Some(reason) if !cfg.keep_partial || turns.is_empty() => TaskOutcome::Dropped {
            verified_turns: turns.len(),
            reason,
        },
        _ => TaskOutcome::Retained {
            task: SynthTask {
                id: id.to_string(),
                meta,
                env_config: initial,
                turns,
                provenance: SynthProvenance {
                    seed: task_seed,
                    config_iterations: iterations,
                    tallies,
                },
            },
        },
    };
    Ok((outcome, records))
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct SynthReport {
    pub tasks: Vec<SynthTask>,
    pub attempted: usize,
    pub exhausted: usize,
    pub dropped: usize,
    pub provenance: Vec<TurnProvenance>,
}

impl SynthReport {
    pub fn exhaustion_rate(&self) -> f64 {
        if self.attempted == 0 {
            0.0
        } else {
            self.exhausted as f64 / self.attempted as f64
        }
    }

    pub fn bundle(&self) -> Vec<Task> {
        self.tasks.iter().map(SynthTask::to_task).collect()
    }
}

/// Attempts `n_tasks` independent syntheses with per-task seeds derived from
/// `seed`. Task `i` is named `{prefix}{i}`.
pub fn synth_dataset(
    bindings: &Bindings,
    exemplars: &[InitialConfig],
    cfg: &SynthConfig,
    n_tasks: usize,
    seed: u64,
    prefix: &str,
    exec: Execution,
) -> Result<SynthReport, SynthError> {
    cfg.validate()?;
    let results = exec.map_range(n_tasks, |i| {
        synth_task(
            bindings,
            exemplars,
            cfg,
            &format!("{prefix}{i}"),
            seed::derive(seed, &[i as u64]),
            Execution::Sequential,
        )
    });
    let mut report = SynthReport {
        attempted: n_tasks,
        ..Default::default()
    };
    for r in results {
        let (outcome, records) = r?;
        report.provenance.extend(records);
        match outcome {
            TaskOutcome::Retained { task } => report.tasks.push(task),
            TaskOutcome::Dropped { .. } => report.dropped += 1,
            TaskOutcome::Exhausted { .. } => report.exhausted += 1,
        }
    }
    Ok(report)
}
