//! Diversity-preserving augmentation of verified awareness notes.

use std::collections::{BTreeMap, HashSet};

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::Value as Json;

use super::{AwarenessDoc, Instance, PagError, HEADERS};
use crate::fc::{Range, Value};
use crate::policy::{detokenize, tokenize, Generator, GeneratorRequest, Role, MASK, SPECIAL_TOKENS};
use crate::prompts;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AugmentOp {
    Paraphrase,
    SchemaPerturb,
    WordMask,
}

impl AugmentOp {
    pub const ALL: [AugmentOp; 3] = [AugmentOp::Paraphrase, AugmentOp::SchemaPerturb, AugmentOp::WordMask];
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AugmentConfig {
    pub mask_rate: f64,
    /// Mask schema names, parameter names and literals instead of the
    /// surrounding prose.
    pub mask_critical: bool,
}

impl Default for AugmentConfig {
    fn default() -> Self {
        Self {
            mask_rate: 0.15,
            mask_critical: false,
        }
    }
}

/// Literal substitutions applied by a schema perturbation.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Rewrite {
    pub values: BTreeMap<String, String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Augmented {
    pub doc: AwarenessDoc,
    /// The source instance, rewritten together with the note when needed.
    pub instance: Instance,
    pub rewrite: Option<Rewrite>,
}

pub fn augment(
    aug: &dyn Generator,
    s: &AwarenessDoc,
    op: AugmentOp,
    inst: &Instance,
    seed: u64,
    cfg: &AugmentConfig,
) -> Result<Augmented, PagError> {
    match op {
        AugmentOp::Paraphrase => {
            let req = GeneratorRequest::new(Role::Augmenter, prompts::paraphrase(s))
                .seed(seed)
                .max_tokens(512);
            let out = aug.generate(&req)?;
            Ok(Augmented {
                doc: AwarenessDoc::parse(&out.text)?,
                instance: inst.clone(),
                rewrite: None,
            })
        }
        AugmentOp::SchemaPerturb => schema_perturb(s, inst, seed),
        AugmentOp::WordMask => Ok(Augmented {
            doc: word_mask(s, inst, cfg, seed)?,
            instance: inst.clone(),
            rewrite: None,
        }),
    }
}

fn is_boundary(c: Option<char>) -> bool {
    c.is_none_or(|c| !(c.is_alphanumeric() || matches!(c, '_' | '.' | '-' | '/')))
}

/// Replaces whole-literal occurrences of `old`.
pub(crate) fn replace_literal(text: &str, old: &str, new: &str) -> String {
    let mut out = String::with_capacity(text.len());
    let mut rest = text;
    while let Some(pos) = rest.find(old) {
        let before = rest[..pos].chars().next_back();
        let after = rest[pos + old.len()..].chars().next();
        out.push_str(&rest[..pos]);
        if is_boundary(before) && is_boundary(after) {
            out.push_str(new);
        } else {
            out.push_str(old);
        }
        rest = &rest[pos + old.len()..];
    }
    out.push_str(rest);
    out
}

fn contains_literal(text: &str, lit: &str) -> bool {
    replace_literal(text, lit, "\u{0}") != text
}

fn rewrite_json(v: &mut Json, map: &BTreeMap<String, String>) {
    match v {
        Json::String(s) => {
            // Two passes through placeholders keep swaps like a→b, b→a intact.
            let mut t = s.clone();
            for (i, old) in map.keys().enumerate() {
                t = replace_literal(&t, old, &format!("\u{1}{i}\u{1}"));
            }
            for (i, new) in map.values().enumerate() {
                t = t.replace(&format!("\u{1}{i}\u{1}"), new);
            }
            *s = t;
        }
        Json::Array(xs) => xs.iter_mut().for_each(|x| rewrite_json(x, map)),
        Json::Object(m) => m.values_mut().for_each(|x| rewrite_json(x, map)),
        _ => {}
    }
}

fn apply<T: Serialize + serde::de::DeserializeOwned>(x: &T, map: &BTreeMap<String, String>) -> Result<T, PagError> {
    let mut j = serde_json::to_value(x).map_err(|e| PagError::NoPerturbableField(e.to_string()))?;
    rewrite_json(&mut j, map);
    serde_json::from_value(j).map_err(|e| PagError::NoPerturbableField(e.to_string()))
}

/// Rewrites every string argument of the reference calls whose parameter
/// declares a finite value set to another member of that set, consistently
/// across note, query, dialogue context and reference calls. Replacement
/// values never collide with literals already present in the instance.
pub fn schema_perturb(s: &AwarenessDoc, inst: &Instance, seed: u64) -> Result<Augmented, PagError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let corpus = serde_json::to_string(&(&inst.history, &inst.query, &inst.gold, &inst.future, s)).unwrap_or_default();
    let mut map: BTreeMap<String, String> = BTreeMap::new();
    let mut taken: HashSet<String> = HashSet::new();
    for call in inst.gold.calls() {
        let Some(schema) = inst.meta.schemas.iter().find(|sc| sc.name == call.name) else {
            continue;
        };
        for (k, v) in &call.args {
            let (Some(spec), Value::Str(old)) = (schema.params.get(k), v) else {
                continue;
            };
            if map.contains_key(old) {
                continue;
            }
            let Some(Range::OneOf(options)) = &spec.range else {
                continue;
            };
            let candidates: Vec<&str> = options
                .iter()
                .filter_map(Value::as_str)
                .filter(|c| *c != old && !taken.contains(*c) && !contains_literal(&corpus, c))
                .collect();
            if candidates.is_empty() {
                continue;
            }
            let new = candidates[rng.random_range(0..candidates.len())].to_string();
            taken.insert(new.clone());
            map.insert(old.clone(), new);
        }
    }
    if map.is_empty() {
        return Err(PagError::NoPerturbableField(format!(
            "no ranged string argument in {}",
            inst.gold.render()
        )));
    }
    let mut instance: Instance = apply(inst, &map)?;
    instance.meta = inst.meta.clone();
    let doc: AwarenessDoc = apply(s, &map)?;
    Ok(Augmented {
        doc,
        instance,
        rewrite: Some(Rewrite { values: map }),
    })
}

const PLAN_WORDS: [&str; 3] = ["call", "with", "then"];

fn critical_words(inst: &Instance) -> HashSet<String> {
    let mut out = HashSet::new();
    for sc in &inst.meta.schemas {
        out.insert(sc.name.clone());
        out.extend(sc.params.keys().cloned());
    }
    out
}

fn is_word(tok: &str) -> bool {
    tok.chars().any(char::is_alphanumeric) && !SPECIAL_TOKENS.contains(&tok)
}

fn is_literal(tok: &str) -> bool {
    tok.starts_with('"') || tok.parse::<f64>().is_ok() || matches!(tok, "true" | "false" | "True" | "False")
}

/// Replaces a seeded `round(rate · n)` sample of the `n` eligible tokens with
/// `<mask>`. Eligible tokens are prose words; with `mask_critical` they are
/// schema names, parameter names and literals instead. Headers are never
/// masked.
pub fn word_mask(s: &AwarenessDoc, inst: &Instance, cfg: &AugmentConfig, seed: u64) -> Result<AwarenessDoc, PagError> {
    let critical = critical_words(inst);
    let tokens = tokenize(&s.raw);
    let eligible: Vec<usize> = tokens
        .iter()
        .enumerate()
        .filter(|(_, t)| {
            if HEADERS.contains(t) {
                return false;
            }
            let crit = critical.contains(**t) || is_literal(t) || PLAN_WORDS.contains(t);
            if cfg.mask_critical {
                crit && !PLAN_WORDS.contains(t)
            } else {
                is_word(t) && !crit
            }
        })
        .map(|(i, _)| i)
        .collect();
    let k = (cfg.mask_rate.clamp(0.0, 1.0) * eligible.len() as f64).round() as usize;
    if k == 0 {
        return Ok(s.clone());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out: Vec<&str> = tokens.clone();
    for j in sample(&mut rng, eligible.len(), k) {
        out[eligible[j]] = MASK;
    }
    AwarenessDoc::parse(&detokenize(&out))
}
