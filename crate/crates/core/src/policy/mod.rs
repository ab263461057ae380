//! Text generators and the toy differentiable policy.
//!
//! Every model call in the pipeline goes through [`Generator`]. A role may be
//! bound to the [`ToyPolicy`], a [`ScriptedMock`] table, a closure
//! ([`FnGenerator`]), or a remote chat endpoint (provided by the CLI crate).

mod toy;
mod vocab;

use std::collections::HashMap;
use std::fmt;
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub use toy::{
    kl_and_grad, log_softmax, logprob_and_grad, sample, Gradient, PolicyParams, PromptBag, SegmentGrad,
    ToyPolicy,
};
pub(crate) use toy::prev_pairs as toy_prev_pairs;
pub use vocab::{detokenize, tokenize, Vocab, BOS, MASK, SPECIAL_TOKENS};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum PolicyError {
    #[error("token `{0}` is not in the vocabulary")]
    UnknownToken(String),
    #[error("shape mismatch: {0}")]
    Shape(String),
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum GenError {
    #[error("generator unavailable: {0}")]
    Unavailable(String),
    #[error("token budget exhausted after {} tokens", partial.tokens.len().max(partial.text.len()))]
    BudgetExceeded { partial: TokenSequence },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    Policy,
    AwarenessGen,
    Verifier,
    Augmenter,
    SynthGen,
    Judge,
}

impl Role {
    pub const ALL: [Role; 6] = [
        Role::Policy,
        Role::AwarenessGen,
        Role::Verifier,
        Role::Augmenter,
        Role::SynthGen,
        Role::Judge,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Role::Policy => "policy",
            Role::AwarenessGen => "awareness_gen",
            Role::Verifier => "verifier",
            Role::Augmenter => "augmenter",
            Role::SynthGen => "synth_gen",
            Role::Judge => "judge",
        }
    }
}

impl fmt::Display for Role {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratorRequest {
    pub role: Role,
    /// Ordered `(section tag, text)` pairs.
    pub prompt_sections: Vec<(String, String)>,
    pub temperature: f64,
    pub seed: u64,
    pub max_tokens: usize,
    /// Generation stops after emitting this token; `None` means `</answer>`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stop: Option<String>,
}

impl GeneratorRequest {
    pub fn new(role: Role, prompt_sections: Vec<(String, String)>) -> Self {
        Self {
            role,
            prompt_sections,
            temperature: 0.0,
            seed: 0,
            max_tokens: 256,
            stop: None,
        }
    }

    pub fn temperature(mut self, t: f64) -> Self {
        self.temperature = t;
        self
    }

    pub fn seed(mut self, s: u64) -> Self {
        self.seed = s;
        self
    }

    pub fn max_tokens(mut self, n: usize) -> Self {
        self.max_tokens = n;
        self
    }

    pub fn stop(mut self, tok: impl Into<String>) -> Self {
        self.stop = Some(tok.into());
        self
    }

    pub fn section(&self, tag: &str) -> Option<&str> {
        self.prompt_sections
            .iter()
            .find(|(t, _)| t == tag)
            .map(|(_, s)| s.as_str())
    }

    /// Flat prompt text: `### tag` headers followed by section bodies.
    pub fn prompt_text(&self) -> String {
        render_sections(&self.prompt_sections)
    }

    /// Hex SHA-256 of [`Self::prompt_text`]; the key of scripted mock tables.
    pub fn prompt_hash(&self) -> String {
        prompt_hash(&self.prompt_sections)
    }
}

pub fn render_sections(sections: &[(String, String)]) -> String {
    let mut out = String::new();
    for (tag, text) in sections {
        out.push_str("### ");
        out.push_str(tag);
        out.push('\n');
        out.push_str(text);
        out.push('\n');
    }
    out
}

pub fn prompt_hash(sections: &[(String, String)]) -> String {
    hex::encode(Sha256::digest(render_sections(sections).as_bytes()))
}

/// Generated output. `tokens` and `logprobs` are only filled by generators
/// that work over the toy vocabulary.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct TokenSequence {
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub tokens: Vec<u32>,
    pub text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub logprobs: Option<Vec<f64>>,
}

impl TokenSequence {
    pub fn from_text(text: impl Into<String>) -> Self {
        Self {
            tokens: Vec::new(),
            text: text.into(),
            logprobs: None,
        }
    }
}

pub trait Generator: Send + Sync {
    fn generate(&self, req: &GeneratorRequest) -> Result<TokenSequence, GenError>;

    fn name(&self) -> &str {
        "generator"
    }
}

impl<G: Generator + ?Sized> Generator for Arc<G> {
    fn generate(&self, req: &GeneratorRequest) -> Result<TokenSequence, GenError> {
        (**self).generate(req)
    }

    fn name(&self) -> &str {
        (**self).name()
    }
}

/// Completion table keyed by prompt hash.
#[derive(Debug, Clone, Default)]
pub struct ScriptedMock {
    table: HashMap<String, String>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct ScriptEntry {
    pub prompt_hash: String,
    pub completion: String,
}

impl ScriptedMock {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert_hash(&mut self, hash: impl Into<String>, completion: impl Into<String>) {
        self.table.insert(hash.into(), completion.into());
    }

    pub fn insert(&mut self, sections: &[(String, String)], completion: impl Into<String>) {
        self.insert_hash(prompt_hash(sections), completion);
    }

    pub fn len(&self) -> usize {
        self.table.len()
    }

    pub fn is_empty(&self) -> bool {
        self.table.is_empty()
    }

    pub fn from_jsonl(path: &Path) -> std::io::Result<Self> {
        let mut mock = Self::new();
        for entry in crate::io::read_jsonl::<ScriptEntry>(path)? {
            mock.insert_hash(entry.prompt_hash, entry.completion);
        }
        Ok(mock)
    }
}

impl Generator for ScriptedMock {
    fn generate(&self, req: &GeneratorRequest) -> Result<TokenSequence, GenError> {
        let hash = req.prompt_hash();
        self.table
            .get(&hash)
            .map(TokenSequence::from_text)
            .ok_or_else(|| GenError::Unavailable(format!("no scripted completion for prompt {hash}")))
    }

    fn name(&self) -> &str {
        "scripted"
    }
}

type GenFn = dyn Fn(&GeneratorRequest) -> Result<TokenSequence, GenError> + Send + Sync;

/// Closure-backed generator for rule-based mocks.
pub struct FnGenerator {
    name: String,
    f: Box<GenFn>,
}

impl FnGenerator {
    pub fn new(
        name: impl Into<String>,
        f: impl Fn(&GeneratorRequest) -> Result<TokenSequence, GenError> + Send + Sync + 'static,
    ) -> Self {
        Self {
            name: name.into(),
            f: Box::new(f),
        }
    }

    /// Generator whose text output depends only on the request.
    pub fn text(
        name: impl Into<String>,
        f: impl Fn(&GeneratorRequest) -> String + Send + Sync + 'static,
    ) -> Self {
        Self::new(name, move |r| Ok(TokenSequence::from_text(f(r))))
    }
}

impl Generator for FnGenerator {
    fn generate(&self, req: &GeneratorRequest) -> Result<TokenSequence, GenError> {
        (self.f)(req)
    }

    fn name(&self) -> &str {
        &self.name
    }
}

/// Always fails; stands in for an unreachable endpoint.
pub struct Unavailable;

impl Generator for Unavailable {
    fn generate(&self, _: &GeneratorRequest) -> Result<TokenSequence, GenError> {
        Err(GenError::Unavailable("no generator bound".into()))
    }
}

/// Role → generator routing.
#[derive(Clone)]
pub struct Bindings {
    map: HashMap<Role, Arc<dyn Generator>>,
}

impl Bindings {
    pub fn new() -> Self {
        Self { map: HashMap::new() }
    }

    pub fn bind(mut self, role: Role, g: Arc<dyn Generator>) -> Self {
        self.map.insert(role, g);
        self
    }

    pub fn set(&mut self, role: Role, g: Arc<dyn Generator>) {
        self.map.insert(role, g);
    }

    pub fn get(&self, role: Role) -> Arc<dyn Generator> {
        self.map
            .get(&role)
            .cloned()
            .unwrap_or_else(|| Arc::new(Unavailable))
    }

    pub fn is_bound(&self, role: Role) -> bool {
        self.map.contains_key(&role)
    }
}

impl Default for Bindings {
    fn default() -> Self {
        Self::new()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sections(q: &str) -> Vec<(String, String)> {
        vec![("query".to_string(), q.to_string())]
    }

    #[test]
    fn scripted_lookup() {
        let mut m = ScriptedMock::new();
        m.insert(&sections("hello"), "X");
        let req = GeneratorRequest::new(Role::Policy, sections("hello"));
        assert_eq!(m.generate(&req).unwrap().text, "X");
        let miss = GeneratorRequest::new(Role::Policy, sections("other"));
        assert!(matches!(m.generate(&miss), Err(GenError::Unavailable(_))));
    }

    #[test]
    fn scripted_from_jsonl() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("mock.jsonl");
        let entry = ScriptEntry {
            prompt_hash: prompt_hash(&sections("q")),
            completion: "done".into(),
        };
        crate::io::write_jsonl(&path, [&entry]).unwrap();
        let m = ScriptedMock::from_jsonl(&path).unwrap();
        let req = GeneratorRequest::new(Role::Judge, sections("q"));
        assert_eq!(m.generate(&req).unwrap().text, "done");
    }

    #[test]
    fn unbound_role_is_unavailable() {
        let b = Bindings::new();
        let req = GeneratorRequest::new(Role::Judge, vec![]);
        assert!(matches!(b.get(Role::Judge).generate(&req), Err(GenError::Unavailable(_))));
    }
}
