//! The bracketed function-call language: `[name(k=v, ...), ...]`.
//!
//! Parsing, canonical rendering, schema validation and the normalized
//! equivalence predicate used by verification, voting and reward scoring.

mod parse;
mod schema;

use std::cmp::Ordering;
use std::fmt;

use indexmap::IndexMap;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

pub use parse::{parse_call, parse_call_list, ParseError, MAX_LIST_DEPTH};
pub use schema::{
    schema_validate, validate_call_list, ParamSpec, ParamType, Range, ToolSchema, ValidationReport,
    Violation,
};

/// Relative tolerance for float comparison inside [`eq`].
pub const FLOAT_REL_TOL: f64 = 1e-9;

#[derive(Debug, thiserror::Error, Clone, PartialEq)]
pub enum FcError {
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error("call `{call}` does not match schema `{schema}`")]
    SchemaMismatch { call: String, schema: String },
    #[error("invalid identifier `{0}`")]
    InvalidIdentifier(String),
    #[error("duplicate argument `{0}`")]
    DuplicateArgument(String),
    #[error("non-finite float argument")]
    NonFinite,
}

/// An argument value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Value {
    Bool(bool),
    Int(i64),
    Float(f64),
    Str(String),
    List(Vec<Value>),
}

impl Value {
    fn rank(&self) -> u8 {
        match self {
            Value::Bool(_) => 0,
            Value::Int(_) | Value::Float(_) => 1,
            Value::Str(_) => 2,
            Value::List(_) => 3,
        }
    }

    pub fn as_f64(&self) -> Option<f64> {
        match self {
            Value::Int(i) => Some(*i as f64),
            Value::Float(f) => Some(*f),
            _ => None,
        }
    }

    pub fn as_str(&self) -> Option<&str> {
        match self {
            Value::Str(s) => Some(s),
            _ => None,
        }
    }

    pub fn type_name(&self) -> &'static str {
        match self {
            Value::Bool(_) => "boolean",
            Value::Int(_) => "integer",
            Value::Float(_) => "float",
            Value::Str(_) => "string",
            Value::List(_) => "list",
        }
    }

    /// Total order used to sort commutative collections.
    pub fn canonical_cmp(&self, other: &Value) -> Ordering {
        match (self, other) {
            (Value::Bool(a), Value::Bool(b)) => a.cmp(b),
            (Value::Int(a), Value::Int(b)) => a.cmp(b),
            (Value::Str(a), Value::Str(b)) => a.cmp(b),
            (Value::List(a), Value::List(b)) => {
                for (x, y) in a.iter().zip(b) {
                    let o = x.canonical_cmp(y);
                    if o != Ordering::Equal {
                        return o;
                    }
                }
                a.len().cmp(&b.len())
            }
            (a, b) if a.rank() == 1 && b.rank() == 1 => {
                let (x, y) = (a.as_f64().unwrap(), b.as_f64().unwrap());
                x.total_cmp(&y).then_with(|| {
                    // ints sort before floats of the same magnitude
                    matches!(a, Value::Float(_)).cmp(&matches!(b, Value::Float(_)))
                })
            }
            (a, b) => a.rank().cmp(&b.rank()),
        }
    }

    /// Structural equality with relative float tolerance.
    pub fn approx_eq(&self, other: &Value) -> bool {
        match (self, other) {
            (Value::Bool(a), Value::Bool(b)) => a == b,
            (Value::Int(a), Value::Int(b)) => a == b,
            (Value::Str(a), Value::Str(b)) => a == b,
            (Value::List(a), Value::List(b)) => {
                a.len() == b.len() && a.iter().zip(b).all(|(x, y)| x.approx_eq(y))
            }
            (a, b) if a.rank() == 1 && b.rank() == 1 => {
                let (x, y) = (a.as_f64().unwrap(), b.as_f64().unwrap());
                x == y || (x - y).abs() <= FLOAT_REL_TOL * x.abs().max(y.abs())
            }
            _ => false,
        }
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Bool(b) => write!(f, "{b}"),
            Value::Int(i) => write!(f, "{i}"),
            // Debug gives the shortest representation that parses back exactly.
            Value::Float(x) => write!(f, "{x:?}"),
            Value::Str(s) => {
                f.write_str("\"")?;
                for c in s.chars() {
                    match c {
                        '"' => f.write_str("\\\"")?,
                        '\\' => f.write_str("\\\\")?,
                        '\n' => f.write_str("\\n")?,
                        '\t' => f.write_str("\\t")?,
                        '\r' => f.write_str("\\r")?,
                        c => write!(f, "{c}")?,
                    }
                }
                f.write_str("\"")
            }
            Value::List(items) => {
                f.write_str("[")?;
                for (i, v) in items.iter().enumerate() {
                    if i > 0 {
                        f.write_str(", ")?;
                    }
                    write!(f, "{v}")?;
                }
                f.write_str("]")
            }
        }
    }
}

pub(crate) fn is_identifier(s: &str) -> bool {
    let mut chars = s.chars();
    match chars.next() {
        Some(c) if c.is_ascii_alphabetic() || c == '_' => {}
        _ => return false,
    }
    chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
}

/// One keyword-argument function call.
#[derive(Debug, Clone, PartialEq)]
pub struct FunctionCall {
    pub name: String,
    pub args: IndexMap<String, Value>,
}

impl FunctionCall {
    pub fn new(name: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            args: IndexMap::new(),
        }
    }

    pub fn arg(mut self, key: impl Into<String>, value: Value) -> Self {
        self.args.insert(key.into(), value);
        self
    }

    /// Checks the identifier grammar and float finiteness.
    pub fn check(&self) -> Result<(), FcError> {
        if !is_identifier(&self.name) {
            return Err(FcError::InvalidIdentifier(self.name.clone()));
        }
        for (k, v) in &self.args {
            if !is_identifier(k) {
                return Err(FcError::InvalidIdentifier(k.clone()));
            }
            check_finite(v)?;
        }
        Ok(())
    }
}

fn check_finite(v: &Value) -> Result<(), FcError> {
    match v {
        Value::Float(x) if !x.is_finite() => Err(FcError::NonFinite),
        Value::List(items) => items.iter().try_for_each(check_finite),
        _ => Ok(()),
    }
}

impl fmt::Display for FunctionCall {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}(", self.name)?;
        for (i, (k, v)) in self.args.iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            write!(f, "{k}={v}")?;
        }
        f.write_str(")")
    }
}

/// An ordered list of calls; the environment executes them in sequence.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct CallList(pub Vec<FunctionCall>);

impl CallList {
    pub fn new(calls: Vec<FunctionCall>) -> Self {
        Self(calls)
    }

    pub fn calls(&self) -> &[FunctionCall] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Canonical text, e.g. `[f(a=1, b="x"), g()]`.
    pub fn render(&self) -> String {
        self.to_string()
    }
}

impl From<FunctionCall> for CallList {
    fn from(c: FunctionCall) -> Self {
        CallList(vec![c])
    }
}

impl fmt::Display for CallList {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("[")?;
        for (i, c) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            write!(f, "{c}")?;
        }
        f.write_str("]")
    }
}

impl std::str::FromStr for CallList {
    type Err = ParseError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        parse_call_list(s)
    }
}

impl Serialize for CallList {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.render())
    }
}

impl<'de> Deserialize<'de> for CallList {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let text = String::deserialize(d)?;
        parse_call_list(&text).map_err(serde::de::Error::custom)
    }
}

impl Serialize for FunctionCall {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for FunctionCall {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let text = String::deserialize(d)?;
        parse_call(&text).map_err(serde::de::Error::custom)
    }
}

fn collapse_whitespace(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ")
}

fn normalize_value(v: &Value, spec: Option<&ParamSpec>) -> Value {
    match v {
        Value::Str(s) => Value::Str(collapse_whitespace(s)),
        Value::Int(i) if matches!(spec.map(|p| p.ty), Some(ParamType::Float)) => {
            Value::Float(*i as f64)
        }
        Value::List(items) => {
            let elem_spec = spec.filter(|p| p.ty == ParamType::Float);
            let mut out: Vec<Value> = items.iter().map(|x| normalize_value(x, elem_spec)).collect();
            if spec.is_some_and(|p| p.commutative) {
                out.sort_by(|a, b| a.canonical_cmp(b));
            }
            Value::List(out)
        }
        other => other.clone(),
    }
}

fn normalize_with(call: &FunctionCall, schema: Option<&ToolSchema>) -> FunctionCall {
    let mut args: Vec<(String, Value)> = call
        .args
        .iter()
        .map(|(k, v)| {
            let spec = schema.and_then(|s| s.params.get(k));
            (k.clone(), normalize_value(v, spec))
        })
        .collect();
    args.sort_by(|a, b| a.0.cmp(&b.0));
    FunctionCall {
        name: call.name.clone(),
        args: args.into_iter().collect(),
    }
}

/// Canonical form of `call` under `schema`: arguments sorted by name, strings
/// whitespace-collapsed, commutative lists sorted.
pub fn normalize(call: &FunctionCall, schema: &ToolSchema) -> Result<FunctionCall, FcError> {
    if call.name != schema.name {
        return Err(FcError::SchemaMismatch {
            call: call.name.clone(),
            schema: schema.name.clone(),
        });
    }
    Ok(normalize_with(call, Some(schema)))
}

/// Normalizes against the matching schema in `schemas`, falling back to
/// schema-free normalization (no commutative sorting) for unknown names.
pub fn normalize_in(call: &FunctionCall, schemas: &[ToolSchema]) -> FunctionCall {
    normalize_with(call, schemas.iter().find(|s| s.name == call.name))
}

pub fn normalize_list(calls: &CallList, schemas: &[ToolSchema]) -> CallList {
    CallList(calls.0.iter().map(|c| normalize_in(c, schemas)).collect())
}

fn calls_equal(a: &FunctionCall, b: &FunctionCall) -> bool {
    a.name == b.name
        && a.args.len() == b.args.len()
        && a
            .args
            .iter()
            .zip(&b.args)
            .all(|((ka, va), (kb, vb))| ka == kb && va.approx_eq(vb))
}

/// Schema-level equivalence of two calls.
pub fn eq(a: &FunctionCall, b: &FunctionCall, schema: &ToolSchema) -> bool {
    if a.name != b.name {
        return false;
    }
    let s = (a.name == schema.name).then_some(schema);
    calls_equal(&normalize_with(a, s), &normalize_with(b, s))
}

/// Pairwise, in-order [`eq`] over two call lists.
pub fn eq_lists(a: &CallList, b: &CallList, schemas: &[ToolSchema]) -> bool {
    a.len() == b.len()
        && a.0.iter().zip(&b.0).all(|(x, y)| {
            x.name == y.name && calls_equal(&normalize_in(x, schemas), &normalize_in(y, schemas))
        })
}
