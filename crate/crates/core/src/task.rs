//! Tasks and the task-bundle JSONL format.
//!
//! One line per task:
//!
//! ```json
//! {"id": "t0",
//!  "meta": {"scenario": "...", "schemas": [...]},
//!  "env_config": {"domain": "filebox", "initial_state": {...}, "seed": 0},
//!  "queries": ["...", "..."],
//!  "turn_goals": [{"target": {...}, "dont_care": ["/files/tmp"]}, ...],
//!  "gold": ["[create_file(path=\"a.txt\")]", ...]}
//! ```
//!
//! `env_config` holds only the initial configuration; the number of turns is
//! the number of queries and must equal the number of goals. `gold` is
//! optional and holds one reference call list per turn.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::fc::{CallList, ToolSchema};
use crate::toolenv::{EnvConfig, EnvError, GoalState, InitialConfig};

/// Tool schemas and scenario text shown to every model call.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskMeta {
    #[serde(default)]
    pub scenario: String,
    pub schemas: Vec<ToolSchema>,
}

impl TaskMeta {
    pub fn new(scenario: impl Into<String>, schemas: Vec<ToolSchema>) -> Self {
        Self {
            scenario: scenario.into(),
            schemas,
        }
    }

    /// Scenario line followed by one signature per tool.
    pub fn render(&self) -> String {
        let mut out = self.scenario.clone();
        for s in &self.schemas {
            out.push('\n');
            out.push_str(&s.signature());
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Task {
    pub id: String,
    pub meta: TaskMeta,
    pub env_config: EnvConfig,
    pub queries: Vec<String>,
    /// Reference call list per turn; empty when unknown.
    pub gold: Vec<CallList>,
}

impl Task {
    pub fn num_turns(&self) -> usize {
        self.queries.len()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskRecord {
    pub id: String,
    pub meta: TaskMeta,
    pub env_config: InitialConfig,
    pub queries: Vec<String>,
    pub turn_goals: Vec<GoalState>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub gold: Vec<CallList>,
}

impl TryFrom<TaskRecord> for Task {
    type Error = EnvError;

    fn try_from(r: TaskRecord) -> Result<Self, EnvError> {
        if r.meta.schemas.is_empty() {
            return Err(EnvError::Config(format!("task {}: empty schema set", r.id)));
        }
        if r.queries.len() != r.turn_goals.len() {
            return Err(EnvError::Config(format!(
                "task {}: {} queries but {} turn goals",
                r.id,
                r.queries.len(),
                r.turn_goals.len()
            )));
        }
        if !r.gold.is_empty() && r.gold.len() != r.queries.len() {
            return Err(EnvError::Config(format!(
                "task {}: {} gold call lists for {} queries",
                r.id,
                r.gold.len(),
                r.queries.len()
            )));
        }
        let mut env_config = EnvConfig::new(r.env_config, r.turn_goals);
        env_config.schemas = r.meta.schemas.clone();
        Ok(Task {
            id: r.id,
            meta: r.meta,
            env_config,
            queries: r.queries,
            gold: r.gold,
        })
    }
}

impl From<&Task> for TaskRecord {
    fn from(t: &Task) -> Self {
        TaskRecord {
            id: t.id.clone(),
            meta: t.meta.clone(),
            env_config: t.env_config.initial(),
            queries: t.queries.clone(),
            turn_goals: t.env_config.turn_goals.clone(),
            gold: t.gold.clone(),
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum BundleError {
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Env(#[from] EnvError),
}

pub fn read_bundle(path: &Path) -> Result<Vec<Task>, BundleError> {
    crate::io::read_jsonl::<TaskRecord>(path)?
        .into_iter()
        .map(|r| Task::try_from(r).map_err(BundleError::from))
        .collect()
}

pub fn write_bundle(path: &Path, tasks: &[Task]) -> std::io::Result<()> {
    let records: Vec<TaskRecord> = tasks.iter().map(TaskRecord::from).collect();
    crate::io::write_jsonl(path, &records)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::toolenv::{filebox, Domain};

    #[test]
    fn bundle_round_trip() {
        let t = Task {
            id: "t0".into(),
            meta: TaskMeta::new("files", filebox::schemas()),
            env_config: {
                let mut c = EnvConfig::new(
                    InitialConfig {
                        domain: Domain::Filebox,
                        initial_state: filebox::store(&[]),
                        seed: 3,
                    },
                    vec![GoalState::new(filebox::store(&[("a", "x")]))],
                );
                c.schemas = filebox::schemas();
                c
            },
            queries: vec!["make a".into()],
            gold: vec!["[create_file(path=\"a\", content=\"x\")]".parse().unwrap()],
        };
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("b.jsonl");
        write_bundle(&p, std::slice::from_ref(&t)).unwrap();
        assert_eq!(read_bundle(&p).unwrap(), vec![t]);
    }

    #[test]
    fn goal_count_must_match_queries() {
        let r = TaskRecord {
            id: "x".into(),
            meta: TaskMeta::new("", filebox::schemas()),
            env_config: InitialConfig {
                domain: Domain::Filebox,
                initial_state: filebox::store(&[]),
                seed: 0,
            },
            queries: vec!["a".into(), "b".into()],
            turn_goals: vec![GoalState::new(filebox::store(&[]))],
            gold: Vec::new(),
        };
        assert!(Task::try_from(r).is_err());
    }
}
