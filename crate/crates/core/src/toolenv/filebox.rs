//! Flat file store: `{"files": {path: content}}`.

use serde_json::{json, Value as Json};

use super::EnvError;
use crate::fc::{FunctionCall, ParamSpec, ParamType, Range, ToolSchema, Value};

pub fn schemas() -> Vec<ToolSchema> {
    let s = || ParamSpec::new(ParamType::String);
    vec![
        ToolSchema::new("create_file", "Create a new file with optional content.")
            .param("path", s().required())
            .param("content", s()),
        ToolSchema::new("delete_file", "Delete an existing file.").param("path", s().required()),
        ToolSchema::new("append", "Append text to an existing file.")
            .param("path", s().required())
            .param("content", s().required()),
        ToolSchema::new("read_file", "Return the content of a file.")
            .param("path", s().required())
            .read_only(),
        ToolSchema::new("list_files", "List file names.").read_only(),
    ]
}

/// Default schemas with `path` and `content` restricted to the given pools.
pub fn schemas_with_pools(paths: &[&str], contents: &[&str]) -> Vec<ToolSchema> {
    let one_of = |xs: &[&str]| Range::OneOf(xs.iter().map(|x| Value::Str(x.to_string())).collect());
    schemas()
        .into_iter()
        .map(|mut schema| {
            for (name, spec) in schema.params.iter_mut() {
                match name.as_str() {
                    "path" => spec.range = Some(one_of(paths)),
                    "content" => spec.range = Some(one_of(contents)),
                    _ => {}
                }
            }
            schema
        })
        .collect()
}

pub fn validate_store(store: &Json) -> Result<(), EnvError> {
    let files = store
        .get("files")
        .and_then(Json::as_object)
        .ok_or_else(|| EnvError::Config("filebox store needs a `files` object".into()))?;
    for (k, v) in files {
        if !v.is_string() {
            return Err(EnvError::Config(format!("file `{k}` content must be a string")));
        }
    }
    Ok(())
}

pub fn store(files: &[(&str, &str)]) -> Json {
    let map: serde_json::Map<String, Json> = files
        .iter()
        .map(|(k, v)| (k.to_string(), Json::String(v.to_string())))
        .collect();
    json!({ "files": map })
}

fn str_arg<'a>(call: &'a FunctionCall, key: &str) -> Option<&'a str> {
    call.args.get(key).and_then(Value::as_str)
}

pub(super) fn execute(store: &mut Json, call: &FunctionCall) -> Result<String, String> {
    let files = store
        .get_mut("files")
        .and_then(Json::as_object_mut)
        .ok_or("corrupt store")?;
    let path = str_arg(call, "path").unwrap_or_default().to_string();
    match call.name.as_str() {
        "create_file" => {
            if files.contains_key(&path) {
                return Err(format!("{path} already exists"));
            }
            let content = str_arg(call, "content").unwrap_or_default();
            files.insert(path.clone(), Json::String(content.to_string()));
            Ok(format!("created {path}"))
        }
        "delete_file" => files
            .remove(&path)
            .map(|_| format!("deleted {path}"))
            .ok_or_else(|| format!("{path} not found")),
        "append" => {
            let content = str_arg(call, "content").unwrap_or_default();
            match files.get_mut(&path) {
                Some(Json::String(existing)) => {
                    existing.push_str(content);
                    Ok(format!("appended to {path}"))
                }
                _ => Err(format!("{path} not found")),
            }
        }
        "read_file" => match files.get(&path) {
            Some(Json::String(s)) => Ok(s.clone()),
            _ => Err(format!("{path} not found")),
        },
        "list_files" => {
            let names: Vec<&str> = files.keys().map(String::as_str).collect();
            Ok(names.join(" "))
        }
        other => Err(format!("unknown function {other}")),
    }
}
