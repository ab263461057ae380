//! The three-section awareness document.

use std::sync::OnceLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

use super::PagError;

pub const HEADERS: [&str; 3] = ["Summary", "Plan", "Rationale"];

#[derive(Debug, Clone, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub struct AwarenessDoc {
    pub summary: String,
    pub plan: String,
    pub rationale: String,
    pub raw: String,
    /// Set when the text was truncated or could not be split into sections.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub degraded: bool,
}

fn sections_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| {
        Regex::new(r"(?s)^\s*Summary\s*:(.*?)\bPlan\s*:(.*?)\bRationale\s*:(.*)$").unwrap()
    })
}

impl AwarenessDoc {
    pub fn new(
        summary: impl Into<String>,
        plan: impl Into<String>,
        rationale: impl Into<String>,
    ) -> Self {
        let (summary, plan, rationale) = (summary.into(), plan.into(), rationale.into());
        let raw = format!("Summary: {summary}\nPlan: {plan}\nRationale: {rationale}");
        Self {
            summary,
            plan,
            rationale,
            raw,
            degraded: false,
        }
    }

    /// Splits `raw` at the fixed headers, which must appear in order.
    pub fn parse(raw: &str) -> Result<Self, PagError> {
        match sections_re().captures(raw) {
            Some(c) => Ok(Self {
                summary: c[1].trim().to_string(),
                plan: c[2].trim().to_string(),
                rationale: c[3].trim().to_string(),
                raw: raw.trim().to_string(),
                degraded: false,
            }),
            None => {
                let mut rest = raw;
                for h in HEADERS {
                    match find_header(rest, h) {
                        Some(end) => rest = &rest[end..],
                        None => return Err(PagError::SectionMissing(h.to_lowercase())),
                    }
                }
                Err(PagError::SectionMissing("summary".into()))
            }
        }
    }

    /// Unstructured text kept verbatim as the summary.
    pub fn degraded(raw: &str) -> Self {
        Self {
            summary: raw.trim().to_string(),
            raw: raw.trim().to_string(),
            degraded: true,
            ..Self::default()
        }
    }

    pub fn is_empty(&self) -> bool {
        self.raw.is_empty()
    }
}

fn find_header(text: &str, header: &str) -> Option<usize> {
    let re = Regex::new(&format!(r"\b{header}\s*:")).ok()?;
    re.find(text).map(|m| m.end())
}
