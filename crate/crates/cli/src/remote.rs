//! Chat-completion client for remotely served generator roles.
//!
//! Request: `POST <endpoint>` with
//! `{"model", "messages": [{"role": "user", "content": <rendered prompt>}],
//! "temperature", "seed", "max_tokens", "stop"}` and an optional
//! `Authorization: Bearer <key>` header. Response: the text at
//! `choices[0].message.content`. Any transport or shape failure surfaces as
//! an unavailable generator.

use std::time::Duration;

use serde_json::{json, Value};

use awarerl_core::policy::{GenError, Generator, GeneratorRequest, Role, TokenSequence};

pub struct RemoteGenerator {
    role: Role,
    endpoint: String,
    model: String,
    api_key: Option<String>,
    agent: ureq::Agent,
}

impl RemoteGenerator {
    pub fn new(role: Role, endpoint: String, model: String, api_key: Option<String>) -> Self {
        let agent = ureq::Agent::config_builder()
            .timeout_global(Some(Duration::from_secs(120)))
            .build()
            .into();
        Self {
            role,
            endpoint,
            model,
            api_key,
            agent,
        }
    }

    pub fn request_body(&self, req: &GeneratorRequest) -> Value {
        json!({
            "model": self.model,
            "messages": [{"role": "user", "content": req.prompt_text()}],
            "temperature": req.temperature,
            "seed": req.seed,
            "max_tokens": req.max_tokens,
            "stop": [req.stop.clone().unwrap_or_else(|| "</answer>".into())],
        })
    }
}

/// The completion text of a chat-completion response.
pub fn completion_text(body: &Value) -> Option<&str> {
    body.get("choices")?.get(0)?.get("message")?.get("content")?.as_str()
}

impl Generator for RemoteGenerator {
    fn generate(&self, req: &GeneratorRequest) -> Result<TokenSequence, GenError> {
        let unavailable = |e: String| GenError::Unavailable(format!("{} ({}): {e}", self.endpoint, self.role));
        let mut call = self.agent.post(&self.endpoint);
        if let Some(key) = &self.api_key {
            call = call.header("Authorization", &format!("Bearer {key}"));
        }
        let mut resp = call.send_json(self.request_body(req)).map_err(|e| unavailable(e.to_string()))?;
        let body: Value = resp.body_mut().read_json().map_err(|e| unavailable(e.to_string()))?;
        let text = completion_text(&body).ok_or_else(|| unavailable("response has no choices[0].message.content".into()))?;
        Ok(TokenSequence::from_text(text))
    }

    fn name(&self) -> &str {
        &self.model
    }
}
