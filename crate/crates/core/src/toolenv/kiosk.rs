//! Users and reservations, in the style of airline/retail customer-service
//! benchmarks.
//!
//! ```json
//! {"users": {"7": {"name": "Ada", "reservations": ["Z"]}},
//!  "reservations": {"Z": {"user_id": 7, "status": "active", "seat": "12A"}}}
//! ```
//!
//! `users.*.reservations` is set-valued.

use serde_json::Value as Json;

use super::EnvError;
use crate::fc::{FunctionCall, ParamSpec, ParamType, ToolSchema, Value};

pub fn schemas() -> Vec<ToolSchema> {
    let s = || ParamSpec::new(ParamType::String);
    let i = || ParamSpec::new(ParamType::Integer);
    vec![
        ToolSchema::new("get_user", "Look up a user by id.")
            .param("id", i().required())
            .read_only(),
        ToolSchema::new("get_reservation", "Look up a reservation owned by a user.")
            .param("id", i().required())
            .param("code", s().required())
            .read_only(),
        ToolSchema::new("update_reservation", "Change the seat of an active reservation.")
            .param("code", s().required())
            .param("seat", s().required()),
        ToolSchema::new("cancel_reservation", "Cancel an active reservation.")
            .param("code", s().required()),
    ]
}

pub fn validate_store(store: &Json) -> Result<(), EnvError> {
    let bad = |m: &str| EnvError::Config(format!("kiosk store: {m}"));
    let users = store
        .get("users")
        .and_then(Json::as_object)
        .ok_or_else(|| bad("needs a `users` object"))?;
    let reservations = store
        .get("reservations")
        .and_then(Json::as_object)
        .ok_or_else(|| bad("needs a `reservations` object"))?;
    for (id, u) in users {
        if id.parse::<i64>().is_err() {
            return Err(bad(&format!("user id `{id}` is not an integer")));
        }
        let codes = u
            .get("reservations")
            .and_then(Json::as_array)
            .ok_or_else(|| bad(&format!("user {id} lacks a reservations list")))?;
        if codes.iter().any(|c| !c.is_string()) {
            return Err(bad(&format!("user {id} has a non-string reservation code")));
        }
    }
    for (code, r) in reservations {
        if r.get("user_id").and_then(Json::as_i64).is_none()
            || r.get("status").and_then(Json::as_str).is_none()
        {
            return Err(bad(&format!("reservation {code} needs user_id and status")));
        }
    }
    Ok(())
}

pub(super) fn canonicalize(store: &Json) -> Json {
    let mut out = store.clone();
    if let Some(users) = out.get_mut("users").and_then(Json::as_object_mut) {
        for u in users.values_mut() {
            if let Some(codes) = u.get_mut("reservations").and_then(Json::as_array_mut) {
                codes.sort_by(|a, b| a.as_str().cmp(&b.as_str()));
            }
        }
    }
    out
}

fn arg_str<'a>(call: &'a FunctionCall, k: &str) -> &'a str {
    call.args.get(k).and_then(Value::as_str).unwrap_or_default()
}

fn arg_int(call: &FunctionCall, k: &str) -> i64 {
    match call.args.get(k) {
        Some(Value::Int(i)) => *i,
        _ => i64::MIN,
    }
}

fn active_reservation<'a>(store: &'a mut Json, code: &str) -> Result<&'a mut Json, String> {
    let r = store
        .get_mut("reservations")
        .and_then(|rs| rs.get_mut(code))
        .ok_or_else(|| format!("reservation {code} not found"))?;
    if r.get("status").and_then(Json::as_str) != Some("active") {
        return Err(format!("reservation {code} is not active"));
    }
    Ok(r)
}

pub(super) fn execute(store: &mut Json, call: &FunctionCall) -> Result<String, String> {
    match call.name.as_str() {
        "get_user" => {
            let id = arg_int(call, "id");
            store
                .get("users")
                .and_then(|u| u.get(id.to_string()))
                .map(|u| u.to_string())
                .ok_or_else(|| format!("user {id} not found"))
        }
        "get_reservation" => {
            let id = arg_int(call, "id");
            let code = arg_str(call, "code");
            let r = store
                .get("reservations")
                .and_then(|rs| rs.get(code))
                .ok_or_else(|| format!("reservation {code} not found"))?;
            if r.get("user_id").and_then(Json::as_i64) != Some(id) {
                return Err(format!("reservation {code} does not belong to user {id}"));
            }
            Ok(r.to_string())
        }
        "update_reservation" => {
            let code = arg_str(call, "code");
            let seat = arg_str(call, "seat");
            let r = active_reservation(store, code)?;
            r["seat"] = Json::String(seat.to_string());
            Ok(format!("reservation {code} seat {seat}"))
        }
        "cancel_reservation" => {
            let code = arg_str(call, "code");
            let r = active_reservation(store, code)?;
            r["status"] = Json::String("cancelled".into());
            Ok(format!("reservation {code} cancelled"))
        }
        other => Err(format!("unknown function {other}")),
    }
}
