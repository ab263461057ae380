//! Deterministic tool environments.
//!
//! An environment is a value: [`step`] takes a state and returns a new one,
//! leaving its input untouched. Stores are JSON object trees so that goals
//! and don't-care masks can address any field by JSON pointer.

pub mod filebox;
pub mod kiosk;

use std::sync::Arc;

use serde::{Deserialize, Serialize};
use serde_json::Value as Json;

use crate::fc::{CallList, FunctionCall, ParamType, ToolSchema, Value};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum EnvError {
    #[error("config error: {0}")]
    Config(String),
    #[error("no schema for call `{0}`")]
    SchemaMismatch(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Domain {
    Filebox,
    Kiosk,
}

impl Domain {
    pub fn default_schemas(self) -> Vec<ToolSchema> {
        match self {
            Domain::Filebox => filebox::schemas(),
            Domain::Kiosk => kiosk::schemas(),
        }
    }

    pub fn validate_store(self, store: &Json) -> Result<(), EnvError> {
        match self {
            Domain::Filebox => filebox::validate_store(store),
            Domain::Kiosk => kiosk::validate_store(store),
        }
    }

    fn execute(self, store: &mut Json, call: &FunctionCall) -> Result<String, String> {
        match self {
            Domain::Filebox => filebox::execute(store, call),
            Domain::Kiosk => kiosk::execute(store, call),
        }
    }

    /// Sorts set-valued members so that structural equality is order-insensitive.
    pub fn canonicalize(self, store: &Json) -> Json {
        match self {
            Domain::Filebox => store.clone(),
            Domain::Kiosk => kiosk::canonicalize(store),
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Domain::Filebox => "filebox",
            Domain::Kiosk => "kiosk",
        }
    }
}

/// Target store for one user turn. Paths in `dont_care` are JSON pointers
/// (e.g. `/files/tmp.txt`) removed from both sides before comparison.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GoalState {
    pub target: Json,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub dont_care: Vec<String>,
}

impl GoalState {
    pub fn new(target: Json) -> Self {
        Self {
            target,
            dont_care: Vec::new(),
        }
    }
}

/// The seed-level description of an environment: domain and initial store.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InitialConfig {
    pub domain: Domain,
    pub initial_state: Json,
    #[serde(default)]
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnvConfig {
    pub domain: Domain,
    pub initial_state: Json,
    /// Empty means the domain's default schemas.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub schemas: Vec<ToolSchema>,
    pub turn_goals: Vec<GoalState>,
    /// Number of user turns K.
    pub num_turns: usize,
    #[serde(default)]
    pub seed: u64,
}

impl EnvConfig {
    pub fn new(initial: InitialConfig, turn_goals: Vec<GoalState>) -> Self {
        Self {
            domain: initial.domain,
            initial_state: initial.initial_state,
            schemas: Vec::new(),
            num_turns: turn_goals.len(),
            turn_goals,
            seed: initial.seed,
        }
    }

    pub fn initial(&self) -> InitialConfig {
        InitialConfig {
            domain: self.domain,
            initial_state: self.initial_state.clone(),
            seed: self.seed,
        }
    }

    pub fn effective_schemas(&self) -> Vec<ToolSchema> {
        if self.schemas.is_empty() {
            self.domain.default_schemas()
        } else {
            self.schemas.clone()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnvState {
    pub domain: Domain,
    pub store: Json,
    pub executed_count: usize,
    /// 1-based; `num_turns + 1` once every turn is done.
    pub current_turn: usize,
    pub num_turns: usize,
    #[serde(skip)]
    schemas: Arc<Vec<ToolSchema>>,
}

impl EnvState {
    pub fn is_live(&self) -> bool {
        self.current_turn <= self.num_turns
    }

    pub fn schemas(&self) -> &[ToolSchema] {
        &self.schemas
    }

    /// Marks the current turn as finished.
    pub fn advance_turn(&mut self) {
        self.current_turn += 1;
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CallResult {
    pub index: usize,
    pub ok: bool,
    /// Result payload on success, error text on failure.
    pub payload: String,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Observation {
    pub results: Vec<CallResult>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub halted_at: Option<usize>,
}

impl Observation {
    pub fn all_ok(&self) -> bool {
        self.halted_at.is_none()
    }

    /// Compact text used inside prompts.
    pub fn render(&self) -> String {
        if self.results.is_empty() {
            return "no calls".to_string();
        }
        self.results
            .iter()
            .map(|r| {
                if r.ok {
                    format!("ok {}", r.payload)
                } else {
                    format!("failed {}", r.payload)
                }
            })
            .collect::<Vec<_>>()
            .join(" ; ")
    }
}

pub fn init_env(config: &EnvConfig) -> Result<EnvState, EnvError> {
    if config.num_turns == 0 {
        return Err(EnvError::Config("task must have at least one turn".into()));
    }
    if config.turn_goals.len() != config.num_turns {
        return Err(EnvError::Config(format!(
            "{} turn goals for {} turns",
            config.turn_goals.len(),
            config.num_turns
        )));
    }
    config.domain.validate_store(&config.initial_state)?;
    for (i, g) in config.turn_goals.iter().enumerate() {
        config
            .domain
            .validate_store(&g.target)
            .map_err(|e| EnvError::Config(format!("turn goal {}: {e}", i + 1)))?;
    }
    Ok(EnvState {
        domain: config.domain,
        store: config.initial_state.clone(),
        executed_count: 0,
        current_turn: 1,
        num_turns: config.num_turns,
        schemas: Arc::new(config.effective_schemas()),
    })
}

/// Type and presence checks only; ranges are a reward-level concern.
fn check_call(call: &FunctionCall, schemas: &[ToolSchema]) -> Result<(), String> {
    let schema = schemas
        .iter()
        .find(|s| s.name == call.name)
        .ok_or_else(|| format!("unknown function {}", call.name))?;
    for req in schema.required_params() {
        if !call.args.contains_key(req) {
            return Err(format!("missing argument {req}"));
        }
    }
    for (k, v) in &call.args {
        let spec = schema
            .params
            .get(k)
            .ok_or_else(|| format!("unexpected argument {k}"))?;
        let ok = matches!(
            (spec.ty, v),
            (ParamType::String, Value::Str(_))
                | (ParamType::Integer, Value::Int(_))
                | (ParamType::Float, Value::Float(_) | Value::Int(_))
                | (ParamType::Boolean, Value::Bool(_))
                | (ParamType::List, Value::List(_))
        );
        if !ok {
            return Err(format!("argument {k} has wrong type"));
        }
    }
    Ok(())
}

/// Executes `calls` in order on a copy of `state`. The first failing call
/// halts execution; calls before it keep their effects.
pub fn step(state: &EnvState, calls: &CallList) -> (EnvState, Observation) {
    let mut next = state.clone();
    let mut obs = Observation::default();
    for (index, call) in calls.calls().iter().enumerate() {
        let outcome = check_call(call, &next.schemas)
            .and_then(|_| next.domain.execute(&mut next.store, call));
        next.executed_count += 1;
        match outcome {
            Ok(payload) => obs.results.push(CallResult {
                index,
                ok: true,
                payload,
            }),
            Err(payload) => {
                obs.results.push(CallResult {
                    index,
                    ok: false,
                    payload,
                });
                obs.halted_at = Some(index);
                break;
            }
        }
    }
    (next, obs)
}

fn remove_pointer(root: &mut Json, pointer: &str) {
    let Some((parent, last)) = pointer.rsplit_once('/') else {
        return;
    };
    let key = last.replace("~1", "/").replace("~0", "~");
    let parent = if parent.is_empty() {
        Some(root)
    } else {
        root.pointer_mut(parent)
    };
    match parent {
        Some(Json::Object(map)) => {
            map.remove(&key);
        }
        Some(Json::Array(items)) => {
            if let Ok(i) = key.parse::<usize>() {
                if i < items.len() {
                    items.remove(i);
                }
            }
        }
        _ => {}
    }
}

/// Masked deep equality between two stores of `domain`.
pub fn stores_match(domain: Domain, store: &Json, goal: &GoalState) -> bool {
    let mut a = domain.canonicalize(store);
    let mut b = domain.canonicalize(&goal.target);
    for p in &goal.dont_care {
        remove_pointer(&mut a, p);
        remove_pointer(&mut b, p);
    }
    a == b
}

pub fn check_success(state: &EnvState, goal: &GoalState) -> bool {
    stores_match(state.domain, &state.store, goal)
}

/// Whether `call`'s schema is declared non-mutating.
pub fn read_only(call: &FunctionCall, schemas: &[ToolSchema]) -> Result<bool, EnvError> {
    schemas
        .iter()
        .find(|s| s.name == call.name)
        .map(|s| s.read_only)
        .ok_or_else(|| EnvError::SchemaMismatch(call.name.clone()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fc::parse_call_list;
    use serde_json::json;

    fn config(files: Json) -> EnvConfig {
        EnvConfig::new(
            InitialConfig {
                domain: Domain::Filebox,
                initial_state: json!({ "files": files }),
                seed: 0,
            },
            vec![GoalState::new(json!({"files": {"a": "x"}}))],
        )
    }

    #[test]
    fn init_copies_store() {
        let s = init_env(&config(json!({"a.txt": "x"}))).unwrap();
        assert_eq!(s.store, json!({"files": {"a.txt": "x"}}));
        assert_eq!(s.executed_count, 0);
        assert_eq!(s.current_turn, 1);
        assert_eq!(s, init_env(&config(json!({"a.txt": "x"}))).unwrap());
    }

    #[test]
    fn init_rejects_goal_count_mismatch() {
        let mut c = config(json!({}));
        c.num_turns = 2;
        assert!(matches!(init_env(&c), Err(EnvError::Config(_))));
    }

    #[test]
    fn init_rejects_malformed_store() {
        let mut c = config(json!({}));
        c.initial_state = json!({"files": {"a": 3}});
        assert!(matches!(init_env(&c), Err(EnvError::Config(_))));
    }

    #[test]
    fn step_creates() {
        let s = init_env(&config(json!({}))).unwrap();
        let (n, obs) = step(&s, &parse_call_list(r#"[create_file(path="a", content="x")]"#).unwrap());
        assert_eq!(n.store, json!({"files": {"a": "x"}}));
        assert!(obs.results[0].ok);
        assert_eq!(s.store, json!({"files": {}}));
    }

    #[test]
    fn step_halts_on_first_failure() {
        let s = init_env(&config(json!({}))).unwrap();
        let calls =
            parse_call_list(r#"[delete_file(path="a"), create_file(path="b", content="y")]"#).unwrap();
        let (n, obs) = step(&s, &calls);
        assert_eq!(obs.halted_at, Some(0));
        assert_eq!(obs.results.len(), 1);
        assert_eq!(n.store, s.store);
    }

    #[test]
    fn step_empty_is_identity() {
        let s = init_env(&config(json!({"a": "x"}))).unwrap();
        let (n, obs) = step(&s, &CallList::default());
        assert_eq!(n, s);
        assert!(obs.results.is_empty());
    }

    #[test]
    fn success_checks() {
        let mut s = init_env(&config(json!({"a": "x"}))).unwrap();
        assert!(check_success(&s, &GoalState::new(json!({"files": {"a": "x"}}))));
        s.store = json!({"files": {"a": "x", "tmp": "t"}});
        let mut g = GoalState::new(json!({"files": {"a": "x"}}));
        assert!(!check_success(&s, &g));
        g.dont_care.push("/files/tmp".into());
        assert!(check_success(&s, &g));
        s.store = json!({"files": {}});
        assert!(!check_success(&s, &g));
    }

    #[test]
    fn read_only_flags() {
        let schemas = Domain::Filebox.default_schemas();
        let call = |t: &str| parse_call_list(t).unwrap().0.remove(0);
        assert!(read_only(&call(r#"[read_file(path="a")]"#), &schemas).unwrap());
        assert!(!read_only(&call(r#"[create_file(path="a")]"#), &schemas).unwrap());
        assert!(matches!(
            read_only(&call("[launch()]"), &schemas),
            Err(EnvError::SchemaMismatch(_))
        ));
    }
}
