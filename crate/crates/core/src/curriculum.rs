//! Seeded filebox curricula for the toy policy.
//!
//! Every task has two or three single-call turns (create, append or
//! delete), each naming a path and content from fixed pools. Consecutive
//! turns prefer literals the task has not used yet.

use std::collections::HashSet;

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::fc::{CallList, FunctionCall, Value};
use crate::mocks::template_doc;
use crate::pag::action_text;
use crate::policy::Vocab;
use crate::task::{Task, TaskMeta};
use crate::toolenv::{self, filebox, init_env, Domain, EnvConfig, GoalState, InitialConfig};

pub const PATHS: [&str; 6] = ["a.txt", "b.txt", "notes.txt", "todo.txt", "log.txt", "data.csv"];
pub const CONTENTS: [&str; 6] = ["alpha", "beta", "gamma", "delta", "omega", "sigma"];
pub const SCENARIO: &str = "A file box holding named text files.";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CurriculumConfig {
    pub min_turns: usize,
    pub max_turns: usize,
    /// Files present before the first turn, at most.
    pub max_initial_files: usize,
}

impl Default for CurriculumConfig {
    fn default() -> Self {
        Self {
            min_turns: 2,
            max_turns: 3,
            max_initial_files: 2,
        }
    }
}

pub fn meta() -> TaskMeta {
    TaskMeta::new(SCENARIO, filebox::schemas_with_pools(&PATHS, &CONTENTS))
}

fn s(v: &str) -> Value {
    Value::Str(v.to_string())
}

fn pick<'a>(rng: &mut ChaCha8Rng, pool: &[&'a str], avoid: &HashSet<String>) -> Option<&'a str> {
    let fresh: Vec<&str> = pool.iter().copied().filter(|p| !avoid.contains(*p)).collect();
    if fresh.is_empty() {
        pool.choose(rng).copied()
    } else {
        fresh.choose(rng).copied()
    }
}

/// One task; `None` when the sampled state admits no operation.
fn gen_task(id: String, rng: &mut ChaCha8Rng, cfg: &CurriculumConfig) -> Option<Task> {
    let meta = meta();
    let n_init = rng.random_range(0..=cfg.max_initial_files);
    let mut files: Vec<(String, String)> = Vec::new();
    for _ in 0..n_init {
        let taken: HashSet<String> = files.iter().map(|(p, _)| p.clone()).collect();
        let p = pick(rng, &PATHS, &taken)?;
        if taken.contains(p) {
            break;
        }
        let c = CONTENTS.choose(rng)?;
        files.push((p.to_string(), c.to_string()));
    }
    let init_pairs: Vec<(&str, &str)> = files.iter().map(|(a, b)| (a.as_str(), b.as_str())).collect();
    let initial = InitialConfig {
        domain: Domain::Filebox,
        initial_state: filebox::store(&init_pairs),
        seed: rng.random(),
    };
    let turns = rng.random_range(cfg.min_turns..=cfg.max_turns);
    let mut env_cfg = EnvConfig::new(initial.clone(), vec![GoalState::new(initial.initial_state.clone()); turns]);
    env_cfg.schemas = meta.schemas.clone();
    let mut state = init_env(&env_cfg).ok()?;
    let mut used: HashSet<String> = HashSet::new();
    let (mut queries, mut gold, mut goals) = (Vec::new(), Vec::new(), Vec::new());
    for _ in 0..turns {
        let existing: Vec<String> = state.store["files"]
            .as_object()?
            .keys()
            .cloned()
            .collect();
        let mut ops = vec!["create"];
        if !existing.is_empty() {
            ops.extend(["append", "delete"]);
        }
        let op = *ops.choose(rng)?;
        let content = pick(rng, &CONTENTS, &used)?;
        let (query, call) = match op {
            "create" => {
                let mut avoid = used.clone();
                avoid.extend(existing.iter().cloned());
                let free: Vec<&str> = PATHS.iter().copied().filter(|p| !existing.iter().any(|e| e == p)).collect();
                let p = pick(rng, &free, &avoid)?;
                (
                    format!("Create \"{p}\" containing \"{content}\" ."),
                    FunctionCall::new("create_file").arg("path", s(p)).arg("content", s(content)),
                )
            }
            "append" => {
                let ex: Vec<&str> = existing.iter().map(String::as_str).collect();
                let p = pick(rng, &ex, &used)?;
                (
                    format!("Append \"{content}\" to \"{p}\" ."),
                    FunctionCall::new("append").arg("path", s(p)).arg("content", s(content)),
                )
            }
            _ => {
                let ex: Vec<&str> = existing.iter().map(String::as_str).collect();
                let p = pick(rng, &ex, &used)?;
                (format!("Delete \"{p}\" ."), FunctionCall::new("delete_file").arg("path", s(p)))
            }
        };
        for v in call.args.values() {
            if let Value::Str(x) = v {
                used.insert(x.clone());
            }
        }
        let calls = CallList::from(call);
        let (next, obs) = toolenv::step(&state, &calls);
        if !obs.all_ok() {
            return None;
        }
        state = next;
        state.advance_turn();
        goals.push(GoalState::new(state.store.clone()));
        queries.push(query);
        gold.push(calls);
    }
    let mut env_config = EnvConfig::new(initial, goals);
    env_config.schemas = meta.schemas.clone();
    Some(Task {
        id,
        meta,
        env_config,
        queries,
        gold,
    })
}

fn key(t: &Task) -> String {
    format!("{:?}|{}", t.queries, t.env_config.initial_state)
}

/// `n` distinct tasks, none of which matches a task in `exclude`.
pub fn generate(n: usize, seed: u64, prefix: &str, cfg: &CurriculumConfig, exclude: &[Task]) -> Vec<Task> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut seen: HashSet<String> = exclude.iter().map(key).collect();
    let mut out = Vec::with_capacity(n);
    let mut attempts = 0;
    while out.len() < n && attempts < 100 * (n + 1) {
        attempts += 1;
        if let Some(t) = gen_task(format!("{prefix}{}", out.len()), &mut rng, cfg) {
            if seen.insert(key(&t)) {
                out.push(t);
            }
        }
    }
    out
}

/// Training tasks and held-out tasks built from new combinations of the
/// same pools.
pub fn split(n_train: usize, n_heldout: usize, seed: u64, cfg: &CurriculumConfig) -> (Vec<Task>, Vec<Task>) {
    let train = generate(n_train, seed, "train-", cfg, &[]);
    let heldout = generate(n_heldout, seed ^ 0x00c0_ffee, "heldout-", cfg, &train);
    (train, heldout)
}

/// Every text a filebox toy policy needs to read or write.
pub fn vocab_texts(tasks: &[Task]) -> Vec<String> {
    let mut out = vec![meta().render(), "so far : ; succeeded failed worked until now does what the user asked".into()];
    for t in tasks {
        for (q, g) in t.queries.iter().zip(&t.gold) {
            out.push(q.clone());
            out.push(action_text(g));
            out.push(template_doc(q, "none", g).raw);
        }
    }
    out
}

pub fn vocab(tasks: &[Task]) -> Vocab {
    let texts = vocab_texts(tasks);
    Vocab::build(texts.iter().map(String::as_str))
}
