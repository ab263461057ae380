//! Shared fixtures for the integration tests.
#![allow(dead_code)]

use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use awarerl_core::curriculum;
use awarerl_core::fc::{CallList, FunctionCall, ParamSpec, ParamType, ToolSchema, Value};
use awarerl_core::policy::{FnGenerator, GeneratorRequest, PolicyParams, Vocab, SPECIAL_TOKENS};
use awarerl_core::task::{Task, TaskMeta};
use awarerl_core::toolenv::{filebox, Domain, EnvConfig, GoalState, InitialConfig};

/// Denominator floor of [`rel_err`].
pub const REL_FLOOR: f64 = 1e-6;

pub fn rel_err(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(REL_FLOOR)
}

/// Largest relative error between `analytic[i]` and the central difference
/// of `f` along coordinate `i`, over `coords`.
pub fn max_fd_error(
    params: &PolicyParams,
    analytic: &[f64],
    coords: &[usize],
    h: f64,
    f: impl Fn(&PolicyParams) -> f64,
) -> f64 {
    let mut p = params.clone();
    let mut worst: f64 = 0.0;
    for &i in coords {
        let w = p.weights[i];
        p.weights[i] = w + h;
        let up = f(&p);
        p.weights[i] = w - h;
        let down = f(&p);
        p.weights[i] = w;
        worst = worst.max(rel_err(analytic[i], (up - down) / (2.0 * h)));
    }
    worst
}

/// `n` coordinates sampled without replacement, or all of them.
pub fn some_coords(len: usize, n: usize, seed: u64) -> Vec<usize> {
    if n >= len {
        return (0..len).collect();
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rand::seq::index::sample(&mut rng, len, n).into_vec()
}

/// Vocabulary of `n` tokens: the special tokens then `w0, w1, …`.
pub fn small_vocab(n: usize) -> Vocab {
    let words: Vec<String> = (0..n.saturating_sub(SPECIAL_TOKENS.len()))
        .map(|i| format!("w{i}"))
        .collect();
    Vocab::build(words.iter().map(String::as_str))
}

pub fn random_tokens(rng: &mut ChaCha8Rng, v: usize, len: usize) -> Vec<u32> {
    (0..len).map(|_| rng.random_range(0..v as u32)).collect()
}

// ---------------------------------------------------------------- calls

const WORDS: [&str; 8] = ["alpha", "beta", "gamma", "hi", "there", "a.txt", "x y", "z"];

/// Schema `f` with one parameter of every kind; `tags` is commutative.
pub fn wide_schema(name: &str) -> ToolSchema {
    ToolSchema::new(name, "")
        .param("s", ParamSpec::new(ParamType::String))
        .param("n", ParamSpec::new(ParamType::Integer))
        .param("x", ParamSpec::new(ParamType::Float))
        .param("b", ParamSpec::new(ParamType::Boolean))
        .param("tags", ParamSpec::new(ParamType::List).commutative())
        .param("seq", ParamSpec::new(ParamType::List))
}

pub fn wide_schemas() -> Vec<ToolSchema> {
    vec![wide_schema("f"), wide_schema("g_2")]
}

fn random_str(rng: &mut ChaCha8Rng) -> String {
    let n = rng.random_range(1..=3);
    (0..n)
        .map(|_| WORDS[rng.random_range(0..WORDS.len())])
        .collect::<Vec<_>>()
        .join(" ")
}

fn random_scalar(rng: &mut ChaCha8Rng) -> Value {
    match rng.random_range(0..3) {
        0 => Value::Int(rng.random_range(-50..50)),
        1 => Value::Str(random_str(rng)),
        _ => Value::Float((rng.random_range(-1000.0..1000.0f64) * 100.0).round() / 100.0),
    }
}

/// A random call against one of [`wide_schemas`], with a random subset of
/// its arguments in random order.
pub fn random_call(rng: &mut ChaCha8Rng) -> FunctionCall {
    let name = if rng.random_bool(0.5) { "f" } else { "g_2" };
    let mut keys = ["s", "n", "x", "b", "tags", "seq"];
    keys.shuffle(rng);
    let keep = rng.random_range(0..=keys.len());
    let mut call = FunctionCall::new(name);
    for k in &keys[..keep] {
        let v = match *k {
            "s" => Value::Str(random_str(rng)),
            "n" => Value::Int(rng.random_range(-1000..1000)),
            "x" => Value::Float((rng.random_range(-1e3..1e3f64) * 1e4).round() / 1e4),
            "b" => Value::Bool(rng.random()),
            _ => {
                let n = rng.random_range(0..5);
                Value::List((0..n).map(|_| random_scalar(rng)).collect())
            }
        };
        call.args.insert(k.to_string(), v);
    }
    call
}

pub fn schema_of<'a>(schemas: &'a [ToolSchema], call: &FunctionCall) -> &'a ToolSchema {
    schemas.iter().find(|s| s.name == call.name).unwrap()
}

pub fn permute_args(rng: &mut ChaCha8Rng, call: &FunctionCall) -> FunctionCall {
    let mut pairs: Vec<(String, Value)> = call.args.clone().into_iter().collect();
    pairs.shuffle(rng);
    FunctionCall {
        name: call.name.clone(),
        args: pairs.into_iter().collect(),
    }
}

fn respace(rng: &mut ChaCha8Rng, s: &str) -> String {
    let pad = |rng: &mut ChaCha8Rng| " ".repeat(rng.random_range(0..3));
    let words: Vec<String> = s
        .split_whitespace()
        .map(|w| format!("{w}{}", " ".repeat(rng.random_range(0..3))))
        .collect();
    format!("{}{}{}", pad(rng), words.join(" "), pad(rng))
}

fn respace_value(rng: &mut ChaCha8Rng, v: &Value) -> Value {
    match v {
        Value::Str(s) => Value::Str(respace(rng, s)),
        Value::List(items) => Value::List(items.iter().map(|x| respace_value(rng, x)).collect()),
        other => other.clone(),
    }
}

/// Extra whitespace inside every string value.
pub fn jitter_whitespace(rng: &mut ChaCha8Rng, call: &FunctionCall) -> FunctionCall {
    let mut out = call.clone();
    for v in out.args.values_mut() {
        *v = respace_value(rng, v);
    }
    out
}

/// The call rendered with random spacing around its punctuation.
pub fn spaced_text(rng: &mut ChaCha8Rng, call: &FunctionCall) -> String {
    let mut out = String::from("[ ");
    out.push_str(&call.name);
    out.push_str(" (");
    for (i, (k, v)) in call.args.iter().enumerate() {
        if i > 0 {
            out.push_str(&" ".repeat(rng.random_range(0..3)));
            out.push(',');
        }
        out.push_str(&" ".repeat(rng.random_range(0..3)));
        out.push_str(&format!("{k} = {v}"));
    }
    out.push_str(" ) ]");
    out
}

/// Commutative list arguments shuffled.
pub fn shuffle_commutative(rng: &mut ChaCha8Rng, call: &FunctionCall, schema: &ToolSchema) -> FunctionCall {
    let mut out = call.clone();
    for (k, v) in out.args.iter_mut() {
        if schema.params.get(k).is_some_and(|p| p.commutative) {
            if let Value::List(items) = v {
                items.shuffle(rng);
            }
        }
    }
    out
}

// ---------------------------------------------------------------- tasks

/// `(query, gold calls, files after the turn)`.
pub type TurnSpec<'a> = (&'a str, &'a str, &'a [(&'a str, &'a str)]);

pub fn filebox_task(id: &str, files: &[(&str, &str)], turns: &[TurnSpec]) -> Task {
    let meta = curriculum::meta();
    let initial = InitialConfig {
        domain: Domain::Filebox,
        initial_state: filebox::store(files),
        seed: 0,
    };
    let goals = turns.iter().map(|(_, _, g)| GoalState::new(filebox::store(g))).collect();
    let mut env_config = EnvConfig::new(initial, goals);
    env_config.schemas = meta.schemas.clone();
    Task {
        id: id.into(),
        meta,
        env_config,
        queries: turns.iter().map(|(q, _, _)| q.to_string()).collect(),
        gold: turns.iter().map(|(_, g, _)| g.parse().unwrap()).collect(),
    }
}

/// Two-turn task: create `a.txt`, then append to it.
pub fn two_turn_task() -> Task {
    filebox_task(
        "two",
        &[],
        &[
            (
                "Create \"a.txt\" containing \"alpha\" .",
                r#"[create_file(path="a.txt", content="alpha")]"#,
                &[("a.txt", "alpha")],
            ),
            (
                "Append \"beta\" to \"a.txt\" .",
                r#"[append(path="a.txt", content="beta")]"#,
                &[("a.txt", "alphabeta")],
            ),
        ],
    )
}

pub fn meta() -> TaskMeta {
    curriculum::meta()
}

/// Policy that reads the gold calls of `tasks` by query: awareness prompts
/// get a three-section note, action prompts get the matching call list.
pub fn optimal_policy(tasks: &[Task]) -> Arc<FnGenerator> {
    let table: Vec<(String, CallList)> = tasks
        .iter()
        .flat_map(|t| t.queries.iter().cloned().zip(t.gold.iter().cloned()))
        .collect();
    Arc::new(FnGenerator::text("optimal", move |r: &GeneratorRequest| {
        let q = r.section("query").unwrap_or_default();
        let gold = table.iter().find(|(k, _)| k == q).map(|(_, c)| c.clone()).unwrap_or_default();
        match r.section("mode") {
            Some("@awareness") => format!(
                "<sum> {} </sum>",
                awarerl_core::mocks::template_doc(q, "none", &gold).raw
            ),
            _ => awarerl_core::pag::action_text(&gold),
        }
    }))
}

// ---------------------------------------------------------------- batches

/// Two rollouts of random tokens over a 16-token vocabulary, with old
/// log-probabilities taken from a nearby policy and advantages ±1. Returns
/// the batch, the parameters to differentiate at and a KL reference.
pub fn synthetic_batch(seed: u64) -> (Vec<awarerl_core::grpo::Sample>, PolicyParams, PolicyParams) {
    use awarerl_core::policy::logprob_and_grad;
    use awarerl_core::rollout::Segment;
    let vocab = small_vocab(16);
    let v = vocab.len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let old = PolicyParams::random(vocab.clone(), v, 0.5, seed);
    let mut params = old.clone();
    for w in params.weights.iter_mut() {
        *w += rng.random_range(-0.05..0.05);
    }
    let reference = PolicyParams::random(vocab.clone(), v, 0.5, seed + 1000);
    let samples = [1.0, -1.0]
        .into_iter()
        .map(|advantage| {
            let segments = (0..2)
                .map(|_| {
                    let prompt: Vec<String> = random_tokens(&mut rng, v, 4)
                        .into_iter()
                        .map(|t| vocab.token(t).to_string())
                        .collect();
                    let sections = vec![("query".to_string(), prompt.join(" "))];
                    let len = rng.random_range(2..6);
                    let tokens = random_tokens(&mut rng, v, len);
                    let old_logprobs = logprob_and_grad(&old, &old.prompt_bag(&sections), &tokens).unwrap().0;
                    Segment {
                        sections,
                        tokens,
                        old_logprobs,
                    }
                })
                .collect();
            awarerl_core::grpo::Sample { segments, advantage }
        })
        .collect();
    (samples, params, reference)
}
