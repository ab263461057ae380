use std::collections::{BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use super::PolicyError;

pub const BOS: &str = "<bos>";
pub const MASK: &str = "<mask>";

/// Tokens every vocabulary carries, in this order.
pub const SPECIAL_TOKENS: [&str; 8] = [
    BOS, MASK, "<sum>", "</sum>", "<think>", "</think>", "<answer>", "</answer>",
];

const PUNCT: &[char] = &['[', ']', '(', ')', ',', '=', ':', ';', '.', '?', '!', '{', '}'];

/// Splits text into toy-vocabulary pieces: whitespace separates words,
/// punctuation stands alone, a double-quoted string is one token (quotes
/// included) and `<tag>` is one token.
pub fn tokenize(text: &str) -> Vec<&str> {
    let mut out = Vec::new();
    let b = text.as_bytes();
    let mut i = 0;
    while i < b.len() {
        let c = text[i..].chars().next().unwrap();
        if c.is_whitespace() {
            i += c.len_utf8();
            continue;
        }
        let start = i;
        if c == '"' {
            i += 1;
            while i < b.len() {
                match b[i] {
                    b'\\' => i += 2,
                    b'"' => {
                        i += 1;
                        break;
                    }
                    _ => i += 1,
                }
            }
            let end = i.min(b.len());
            out.push(&text[start..end]);
            i = end;
            continue;
        }
        if c == '<' {
            if let Some(close) = text[i..].find('>') {
                let tag = &text[i..i + close + 1];
                if close <= 16 && !tag.contains(char::is_whitespace) {
                    out.push(tag);
                    i += close + 1;
                    continue;
                }
            }
        }
        if PUNCT.contains(&c) || c == '<' {
            out.push(&text[i..i + 1]);
            i += 1;
            continue;
        }
        while i < b.len() {
            let c = text[i..].chars().next().unwrap();
            if c.is_whitespace() || PUNCT.contains(&c) || c == '"' || c == '<' {
                break;
            }
            i += c.len_utf8();
        }
        out.push(&text[start..i]);
    }
    out
}

/// Renders tokens back to text, separated by single spaces.
pub fn detokenize<S: AsRef<str>>(tokens: &[S]) -> String {
    tokens.iter().map(AsRef::as_ref).collect::<Vec<_>>().join(" ")
}

/// Closed token table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(from = "Vec<String>", into = "Vec<String>")]
pub struct Vocab {
    tokens: Vec<String>,
    index: HashMap<String, u32>,
}

impl From<Vec<String>> for Vocab {
    fn from(tokens: Vec<String>) -> Self {
        let index = tokens
            .iter()
            .enumerate()
            .map(|(i, t)| (t.clone(), i as u32))
            .collect();
        Self { tokens, index }
    }
}

impl From<Vocab> for Vec<String> {
    fn from(v: Vocab) -> Self {
        v.tokens
    }
}

impl Vocab {
    /// Special tokens followed by the sorted distinct tokens of `texts`.
    pub fn build<'a>(texts: impl IntoIterator<Item = &'a str>) -> Self {
        let mut seen = BTreeSet::new();
        for t in texts {
            for tok in tokenize(t) {
                seen.insert(tok.to_string());
            }
        }
        let mut tokens: Vec<String> = SPECIAL_TOKENS.iter().map(|s| s.to_string()).collect();
        tokens.extend(seen.into_iter().filter(|t| !SPECIAL_TOKENS.contains(&t.as_str())));
        tokens.into()
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn id(&self, token: &str) -> Option<u32> {
        self.index.get(token).copied()
    }

    pub fn token(&self, id: u32) -> &str {
        &self.tokens[id as usize]
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn bos(&self) -> u32 {
        self.id(BOS).expect("vocabulary without <bos>")
    }

    pub fn encode(&self, text: &str) -> Result<Vec<u32>, PolicyError> {
        tokenize(text)
            .into_iter()
            .map(|t| self.id(t).ok_or_else(|| PolicyError::UnknownToken(t.to_string())))
            .collect()
    }

    /// Encodes, silently dropping out-of-vocabulary pieces.
    pub fn encode_lossy(&self, text: &str) -> Vec<u32> {
        tokenize(text).into_iter().filter_map(|t| self.id(t)).collect()
    }

    pub fn decode(&self, ids: &[u32]) -> String {
        detokenize(&ids.iter().map(|&i| self.token(i)).collect::<Vec<_>>())
    }
}
