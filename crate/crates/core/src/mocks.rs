//! Deterministic rule-based generators that stand in for large models.

use std::sync::OnceLock;

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use regex::Regex;
use serde_json::Value as Json;

use crate::curriculum::{CONTENTS, PATHS};
use crate::fc::{parse_call_list, CallList, FunctionCall, Value};
use crate::pag::AwarenessDoc;
use crate::policy::{GenError, Generator, GeneratorRequest, TokenSequence};
use crate::toolenv::{filebox, Domain, InitialConfig};

/// `call f with k = "v" , k2 = 3 then call g`.
pub fn plan_text(calls: &CallList) -> String {
    calls
        .calls()
        .iter()
        .map(|c| {
            if c.args.is_empty() {
                format!("call {}", c.name)
            } else {
                let args: Vec<String> = c.args.iter().map(|(k, v)| format!("{k} = {v}")).collect();
                format!("call {} with {}", c.name, args.join(" , "))
            }
        })
        .collect::<Vec<_>>()
        .join(" then ")
}

fn names(calls: &CallList) -> String {
    calls
        .calls()
        .iter()
        .map(|c| c.name.as_str())
        .collect::<Vec<_>>()
        .join(" and ")
}

/// Outcome lines of a rendered dialogue prefix: `f succeeded` or `f failed`.
pub fn call_outcomes(rendered_history: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut pending: Option<String> = None;
    for line in rendered_history.lines() {
        let line = line.trim();
        if let Some(rest) = line.strip_prefix("assistant :") {
            pending = parse_call_list(rest.trim()).ok().map(|c| names(&c));
        } else if let Some(rest) = line.strip_prefix("observation :") {
            if let Some(n) = pending.take() {
                let verdict = if rest.split(" ; ").any(|r| r.trim_start().starts_with("failed")) {
                    "failed"
                } else {
                    "succeeded"
                };
                out.push(format!("{n} {verdict}"));
            }
        }
    }
    out
}

/// Summary, plan and rationale built from the request, the current turn's
/// outcomes and the reference calls.
pub fn template_doc(query: &str, rendered_turn_history: &str, gold: &CallList) -> AwarenessDoc {
    let outcomes = call_outcomes(rendered_turn_history);
    let summary = if outcomes.is_empty() {
        query.to_string()
    } else {
        format!("{query} so far : {}", outcomes.join(" ; "))
    };
    AwarenessDoc::new(summary, plan_text(gold), format!("{} completes the request", names(gold)))
}

/// Awareness generator reading the `query`, `turn_history` and `gold`
/// sections of the awareness-generation prompt.
#[derive(Debug, Clone, Default)]
pub struct TemplateAwareness;

impl Generator for TemplateAwareness {
    fn generate(&self, req: &GeneratorRequest) -> Result<TokenSequence, GenError> {
        let query = req.section("query").unwrap_or_default();
        let history = req.section("turn_history").unwrap_or_default();
        let gold = req
            .section("gold")
            .and_then(|g| parse_call_list(g).ok())
            .ok_or_else(|| GenError::Unavailable("template awareness needs a gold section".into()))?;
        Ok(TokenSequence::from_text(template_doc(query, history, &gold).raw))
    }

    fn name(&self) -> &str {
        "template-awareness"
    }
}

fn call_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"\bcall\s+([A-Za-z_]\w*)(?:\s+with\b)?").unwrap())
}

fn arg_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r#"^\s*,?\s*([A-Za-z_]\w*)\s*=\s*("(?:[^"\\]|\\.)*"|[^\s,;]+)"#).unwrap())
}

fn bare_value(v: &str) -> Value {
    let v = v.strip_suffix('.').unwrap_or(v);
    if let Ok(i) = v.parse::<i64>() {
        Value::Int(i)
    } else if let Ok(f) = v.parse::<f64>() {
        Value::Float(f)
    } else {
        match v {
            "true" | "True" => Value::Bool(true),
            "false" | "False" => Value::Bool(false),
            _ => Value::Str(v.to_string()),
        }
    }
}

/// Calls spelled as `call f with k = v , …` in `text`.
pub fn extract_calls(text: &str) -> Vec<FunctionCall> {
    let mut out = Vec::new();
    let matches: Vec<_> = call_re().captures_iter(text).collect();
    for (i, m) in matches.iter().enumerate() {
        let whole = m.get(0).unwrap();
        let end = matches
            .get(i + 1)
            .map(|n| n.get(0).unwrap().start())
            .unwrap_or(text.len());
        let mut call = FunctionCall::new(&m[1]);
        if whole.as_str().ends_with("with") {
            let mut rest = &text[whole.end()..end];
            while let Some(a) = arg_re().captures(rest) {
                let raw = &a[2];
                let value = if raw.starts_with('"') {
                    match parse_call_list(&format!("[f(x={raw})]")) {
                        Ok(c) => c.calls()[0].args["x"].clone(),
                        Err(_) => Value::Str(raw.trim_matches('"').to_string()),
                    }
                } else {
                    bare_value(raw)
                };
                call.args.insert(a[1].to_string(), value);
                rest = &rest[a.get(0).unwrap().end()..];
            }
        }
        out.push(call);
    }
    out
}

/// Verifier that recovers calls by pattern extraction. The strict variant
/// reads only the plan of a well-formed three-section note; the lenient one
/// falls back to the whole text and to a literal call list.
#[derive(Debug, Clone, Default)]
pub struct ExtractionVerifier {
    pub strict: bool,
}

impl ExtractionVerifier {
    pub fn strict() -> Self {
        Self { strict: true }
    }

    pub fn recover(&self, note: &str) -> Option<CallList> {
        let doc = AwarenessDoc::parse(note).ok();
        if self.strict {
            let calls = extract_calls(&doc?.plan);
            return (!calls.is_empty()).then(|| CallList::new(calls));
        }
        if let Some(d) = &doc {
            let calls = extract_calls(&d.plan);
            if !calls.is_empty() {
                return Some(CallList::new(calls));
            }
        }
        let calls = extract_calls(note);
        if !calls.is_empty() {
            return Some(CallList::new(calls));
        }
        let (a, b) = (note.find('[')?, note.rfind(']')?);
        (a < b).then(|| parse_call_list(&note[a..=b]).ok()).flatten()
    }
}

impl Generator for ExtractionVerifier {
    fn generate(&self, req: &GeneratorRequest) -> Result<TokenSequence, GenError> {
        let note = req.section("awareness").unwrap_or_default();
        Ok(TokenSequence::from_text(
            self.recover(note).map(|c| c.render()).unwrap_or_default(),
        ))
    }

    fn name(&self) -> &str {
        "extraction-verifier"
    }
}

const SYNONYMS: [(&str, &str); 3] = [
    ("so far :", "until now :"),
    ("completes the request", "does what the user asked"),
    ("succeeded", "worked"),
];

/// Paraphraser that swaps fixed phrases in the summary and rationale and
/// leaves the plan untouched.
#[derive(Debug, Clone, Default)]
pub struct PhraseParaphraser;

impl Generator for PhraseParaphraser {
    fn generate(&self, req: &GeneratorRequest) -> Result<TokenSequence, GenError> {
        let note = req.section("awareness").unwrap_or_default();
        let Ok(doc) = AwarenessDoc::parse(note) else {
            return Ok(TokenSequence::from_text(note));
        };
        let swap = |s: &str| SYNONYMS.iter().fold(s.to_string(), |acc, (a, b)| acc.replace(a, b));
        Ok(TokenSequence::from_text(
            AwarenessDoc::new(swap(&doc.summary), doc.plan, swap(&doc.rationale)).raw,
        ))
    }

    fn name(&self) -> &str {
        "phrase-paraphraser"
    }
}

/// Synthesis generator for the filebox domain. Dispatches on the prompt
/// mode: initial configs hold up to two pool files, queries create, append
/// to or delete files, and actions translate the query literally.
#[derive(Debug, Clone)]
pub struct FileboxSynth {
    pub paths: Vec<String>,
    pub contents: Vec<String>,
}

impl Default for FileboxSynth {
    fn default() -> Self {
        Self {
            paths: PATHS.iter().map(|s| s.to_string()).collect(),
            contents: CONTENTS.iter().map(|s| s.to_string()).collect(),
        }
    }
}

fn create_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"^Create (\S+) containing '([^']*)'\.$").unwrap())
}

fn append_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"^Append '([^']*)' to (\S+)\.$").unwrap())
}

fn delete_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"^Delete (\S+)\.$").unwrap())
}

/// The call list a filebox synthesis query asks for.
pub fn filebox_calls(query: &str) -> Option<CallList> {
    let s = |v: &str| Value::Str(v.to_string());
    let call = if let Some(c) = create_re().captures(query) {
        FunctionCall::new("create_file").arg("path", s(&c[1])).arg("content", s(&c[2]))
    } else if let Some(c) = append_re().captures(query) {
        FunctionCall::new("append").arg("path", s(&c[2])).arg("content", s(&c[1]))
    } else {
        let c = delete_re().captures(query)?;
        FunctionCall::new("delete_file").arg("path", s(&c[1]))
    };
    Some(CallList::from(call))
}

impl FileboxSynth {
    fn initial_config(&self, rng: &mut ChaCha8Rng, seed: u64) -> String {
        let n = rng.random_range(0..=2usize.min(self.paths.len()));
        let chosen = rand::seq::index::sample(rng, self.paths.len(), n);
        let files: Vec<(&str, &str)> = chosen
            .into_iter()
            .map(|i| {
                let c = self.contents.choose(rng).map(String::as_str).unwrap_or("");
                (self.paths[i].as_str(), c)
            })
            .collect();
        let cfg = InitialConfig {
            domain: Domain::Filebox,
            initial_state: filebox::store(&files),
            seed,
        };
        serde_json::to_string(&cfg).unwrap_or_default()
    }

    fn query(&self, rng: &mut ChaCha8Rng, state: &str, prior: &str) -> String {
        let existing: Vec<String> = serde_json::from_str::<Json>(state)
            .ok()
            .and_then(|j| j.get("files").and_then(Json::as_object).map(|m| m.keys().cloned().collect()))
            .unwrap_or_default();
        let content = self.contents.choose(rng).cloned().unwrap_or_default();
        let free: Vec<&String> = self.paths.iter().filter(|p| !existing.contains(p)).collect();
        let follow_up = !prior.trim().is_empty() && !existing.is_empty();
        if follow_up || free.is_empty() {
            let path = existing.choose(rng).cloned().unwrap_or_default();
            if rng.random_bool(0.5) {
                format!("Append '{content}' to {path}.")
            } else {
                format!("Delete {path}.")
            }
        } else {
            let path = free.choose(rng).map(|p| p.as_str()).unwrap_or_default();
            format!("Create {path} containing '{content}'.")
        }
    }
}

impl Generator for FileboxSynth {
    fn generate(&self, req: &GeneratorRequest) -> Result<TokenSequence, GenError> {
        let mut rng = ChaCha8Rng::seed_from_u64(req.seed);
        let text = match req.section("mode").unwrap_or_default() {
            "@initial_config" => self.initial_config(&mut rng, req.seed),
            "@query" => self.query(
                &mut rng,
                req.section("state").unwrap_or_default(),
                req.section("prior").unwrap_or_default(),
            ),
            "@synth_action" => {
                let query = req.section("query").unwrap_or_default();
                let calls = filebox_calls(query).map(|c| c.render()).unwrap_or_default();
                // Odd samples list arguments in reverse order.
                let odd = req.section("sample").and_then(|s| s.parse::<usize>().ok()).unwrap_or(0) % 2 == 1;
                match (odd, filebox_calls(query)) {
                    (true, Some(c)) => {
                        let f = &c.calls()[0];
                        let args: Vec<String> = f.args.iter().rev().map(|(k, v)| format!("{k}={v}")).collect();
                        format!("[{}({})]", f.name, args.join(", "))
                    }
                    _ => calls,
                }
            }
            other => return Err(GenError::Unavailable(format!("filebox synth mock has no mode {other}"))),
        };
        Ok(TokenSequence::from_text(text))
    }

    fn name(&self) -> &str {
        "filebox-synth"
    }
}

/// Judge that always answers the same verdict.
#[derive(Debug, Clone, Copy)]
pub struct ConstantJudge {
    pub valid: bool,
}

impl Generator for ConstantJudge {
    fn generate(&self, _: &GeneratorRequest) -> Result<TokenSequence, GenError> {
        Ok(TokenSequence::from_text(if self.valid { "valid" } else { "invalid" }))
    }

    fn name(&self) -> &str {
        "constant-judge"
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn extraction_reads_bare_and_quoted_values() {
        let v = ExtractionVerifier::default();
        let c = v
            .recover("Summary: s\nPlan: call create_file with path=a.txt, content=hi\nRationale: r")
            .unwrap();
        assert_eq!(c.render(), r#"[create_file(path="a.txt", content="hi")]"#);
        let c = v.recover(r#"call f with n = 3 , s = "x y" then call g"#).unwrap();
        assert_eq!(c.render(), r#"[f(n=3, s="x y"), g()]"#);
    }

    #[test]
    fn plan_round_trips_through_extraction() {
        let gold: CallList = r#"[append(path="a.txt", content="beta")]"#.parse().unwrap();
        let doc = template_doc("q", "none", &gold);
        assert_eq!(ExtractionVerifier::strict().recover(&doc.raw), Some(gold));
    }

    #[test]
    fn outcomes_follow_observations() {
        let h = "assistant : [append(path=\"a\", content=\"x\")]\nobservation : failed no such file\n\
                 assistant : [create_file(path=\"a\")]\nobservation : ok created a";
        assert_eq!(call_outcomes(h), ["append failed", "create_file succeeded"]);
    }
}
