use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

use super::{CallList, FunctionCall, Value};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ParamType {
    String,
    Integer,
    Float,
    Boolean,
    List,
}

impl ParamType {
    fn accepts(self, v: &Value) -> bool {
        matches!(
            (self, v),
            (ParamType::String, Value::Str(_))
                | (ParamType::Integer, Value::Int(_))
                | (ParamType::Float, Value::Float(_) | Value::Int(_))
                | (ParamType::Boolean, Value::Bool(_))
                | (ParamType::List, Value::List(_))
        )
    }

    fn name(self) -> &'static str {
        match self {
            ParamType::String => "string",
            ParamType::Integer => "integer",
            ParamType::Float => "float",
            ParamType::Boolean => "boolean",
            ParamType::List => "list",
        }
    }
}

/// Permissible values for a parameter. For list parameters the range applies
/// to each element.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Range {
    OneOf(Vec<Value>),
    Between { min: f64, max: f64 },
}

impl Range {
    pub fn contains(&self, v: &Value) -> bool {
        match (self, v) {
            (r, Value::List(items)) => items.iter().all(|x| r.contains(x)),
            (Range::OneOf(options), v) => options.iter().any(|o| o.approx_eq(v)),
            (Range::Between { min, max }, v) => v.as_f64().is_some_and(|x| x >= *min && x <= *max),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamSpec {
    #[serde(rename = "type")]
    pub ty: ParamType,
    #[serde(default)]
    pub required: bool,
    #[serde(default)]
    pub commutative: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub range: Option<Range>,
}

impl ParamSpec {
    pub fn new(ty: ParamType) -> Self {
        Self {
            ty,
            required: false,
            commutative: false,
            range: None,
        }
    }

    pub fn required(mut self) -> Self {
        self.required = true;
        self
    }

    pub fn commutative(mut self) -> Self {
        self.commutative = true;
        self
    }

    pub fn range(mut self, r: Range) -> Self {
        self.range = Some(r);
        self
    }
}

/// A tool description: name, typed parameters, and whether calling it can
/// change environment state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToolSchema {
    pub name: String,
    #[serde(default)]
    pub description: String,
    #[serde(default)]
    pub params: IndexMap<String, ParamSpec>,
    #[serde(default)]
    pub read_only: bool,
}

impl ToolSchema {
    pub fn new(name: impl Into<String>, description: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            description: description.into(),
            params: IndexMap::new(),
            read_only: false,
        }
    }

    pub fn param(mut self, name: impl Into<String>, spec: ParamSpec) -> Self {
        self.params.insert(name.into(), spec);
        self
    }

    pub fn read_only(mut self) -> Self {
        self.read_only = true;
        self
    }

    pub fn required_params(&self) -> impl Iterator<Item = &str> {
        self.params
            .iter()
            .filter(|(_, p)| p.required)
            .map(|(k, _)| k.as_str())
    }

    /// One-line signature used in prompts, e.g. `create_file(path: string, content?: string)`.
    pub fn signature(&self) -> String {
        let params: Vec<String> = self
            .params
            .iter()
            .map(|(k, p)| format!("{k}{}: {}", if p.required { "" } else { "?" }, p.ty.name()))
            .collect();
        format!("{}({})", self.name, params.join(", "))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Violation {
    UnknownFunction { name: String },
    MissingRequired { param: String },
    UnknownParam { param: String },
    TypeMismatch { param: String, expected: ParamType, found: String },
    OutOfRange { param: String },
    /// The answer could not be parsed at all.
    Unparseable { detail: String },
    EmptyCallList,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn pass(&self) -> bool {
        self.violations.is_empty()
    }

    /// Failing report for text that did not parse.
    pub fn unparseable(detail: impl Into<String>) -> Self {
        Self {
            violations: vec![Violation::Unparseable {
                detail: detail.into(),
            }],
        }
    }
}

pub fn schema_validate(call: &FunctionCall, schemas: &[ToolSchema]) -> ValidationReport {
    let mut violations = Vec::new();
    let Some(schema) = schemas.iter().find(|s| s.name == call.name) else {
        violations.push(Violation::UnknownFunction {
            name: call.name.clone(),
        });
        return ValidationReport { violations };
    };
    for req in schema.required_params() {
        if !call.args.contains_key(req) {
            violations.push(Violation::MissingRequired {
                param: req.to_string(),
            });
        }
    }
    for (k, v) in &call.args {
        let Some(spec) = schema.params.get(k) else {
            violations.push(Violation::UnknownParam { param: k.clone() });
            continue;
        };
        if !spec.ty.accepts(v) {
            violations.push(Violation::TypeMismatch {
                param: k.clone(),
                expected: spec.ty,
                found: v.type_name().to_string(),
            });
            continue;
        }
        if let Some(range) = &spec.range {
            if !range.contains(v) {
                violations.push(Violation::OutOfRange { param: k.clone() });
            }
        }
    }
    ValidationReport { violations }
}

/// Validates every call; an empty list fails with [`Violation::EmptyCallList`].
pub fn validate_call_list(calls: &CallList, schemas: &[ToolSchema]) -> ValidationReport {
    if calls.is_empty() {
        return ValidationReport {
            violations: vec![Violation::EmptyCallList],
        };
    }
    ValidationReport {
        violations: calls
            .calls()
            .iter()
            .flat_map(|c| schema_validate(c, schemas).violations)
            .collect(),
    }
}
