use indexmap::IndexMap;

use super::{CallList, FunctionCall, Value};

/// Lists may nest at most this deep (`[[[1]]]` is depth 3).
pub const MAX_LIST_DEPTH: usize = 3;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("parse error at byte {position}: expected {expected}")]
pub struct ParseError {
    pub position: usize,
    pub expected: String,
}

struct Parser<'a> {
    src: &'a str,
    pos: usize,
}

impl<'a> Parser<'a> {
    fn new(src: &'a str) -> Self {
        Self { src, pos: 0 }
    }

    fn err<T>(&self, expected: impl Into<String>) -> Result<T, ParseError> {
        Err(ParseError {
            position: self.pos,
            expected: expected.into(),
        })
    }

    fn rest(&self) -> &'a str {
        &self.src[self.pos..]
    }

    fn peek(&self) -> Option<char> {
        self.rest().chars().next()
    }

    fn ws(&mut self) {
        let trimmed = self.rest().trim_start();
        self.pos = self.src.len() - trimmed.len();
    }

    fn eat(&mut self, c: char) -> bool {
        if self.peek() == Some(c) {
            self.pos += c.len_utf8();
            true
        } else {
            false
        }
    }

    fn expect(&mut self, c: char) -> Result<(), ParseError> {
        if self.eat(c) {
            Ok(())
        } else {
            self.err(format!("`{c}`"))
        }
    }

    fn ident(&mut self) -> Result<String, ParseError> {
        let rest = self.rest();
        let mut end = 0;
        for (i, c) in rest.char_indices() {
            let ok = if i == 0 {
                c.is_ascii_alphabetic() || c == '_'
            } else {
                c.is_ascii_alphanumeric() || c == '_'
            };
            if !ok {
                break;
            }
            end = i + c.len_utf8();
        }
        if end == 0 {
            return self.err("identifier");
        }
        self.pos += end;
        Ok(rest[..end].to_string())
    }

    fn call_list(&mut self) -> Result<CallList, ParseError> {
        self.ws();
        self.expect('[')?;
        self.ws();
        let mut calls = Vec::new();
        if !self.eat(']') {
            loop {
                calls.push(self.call()?);
                self.ws();
                if self.eat(',') {
                    self.ws();
                    continue;
                }
                if self.eat(']') {
                    break;
                }
                return self.err("`,` or `]`");
            }
        }
        self.ws();
        if self.pos != self.src.len() {
            return self.err("end of input");
        }
        Ok(CallList(calls))
    }

    fn call(&mut self) -> Result<FunctionCall, ParseError> {
        let name = self.ident()?;
        self.ws();
        self.expect('(')?;
        self.ws();
        let mut args = IndexMap::new();
        if !self.eat(')') {
            loop {
                let at = self.pos;
                let key = self.ident()?;
                self.ws();
                self.expect('=')?;
                self.ws();
                let value = self.value(0)?;
                if args.insert(key.clone(), value).is_some() {
                    return Err(ParseError {
                        position: at,
                        expected: format!("unique argument name (duplicate `{key}`)"),
                    });
                }
                self.ws();
                if self.eat(',') {
                    self.ws();
                    continue;
                }
                if self.eat(')') {
                    break;
                }
                return self.err("`,` or `)`");
            }
        }
        Ok(FunctionCall { name, args })
    }

    fn value(&mut self, depth: usize) -> Result<Value, ParseError> {
        match self.peek() {
            Some('"') => self.string().map(Value::Str),
            Some('[') => {
                if depth >= MAX_LIST_DEPTH {
                    return self.err(format!("list nesting of at most {MAX_LIST_DEPTH}"));
                }
                self.pos += 1;
                self.ws();
                let mut items = Vec::new();
                if !self.eat(']') {
                    loop {
                        items.push(self.value(depth + 1)?);
                        self.ws();
                        if self.eat(',') {
                            self.ws();
                            continue;
                        }
                        if self.eat(']') {
                            break;
                        }
                        return self.err("`,` or `]`");
                    }
                }
                Ok(Value::List(items))
            }
            Some(c) if c == '-' || c.is_ascii_digit() => self.number(),
            Some(c) if c.is_ascii_alphabetic() => {
                let at = self.pos;
                let word = self.ident()?;
                match word.as_str() {
                    "true" | "True" => Ok(Value::Bool(true)),
                    "false" | "False" => Ok(Value::Bool(false)),
                    _ => Err(ParseError {
                        position: at,
                        expected: "value (string, number, boolean or list)".into(),
                    }),
                }
            }
            _ => self.err("value (string, number, boolean or list)"),
        }
    }

    fn string(&mut self) -> Result<String, ParseError> {
        self.expect('"')?;
        let mut out = String::new();
        loop {
            let Some(c) = self.peek() else {
                return self.err("closing `\"`");
            };
            self.pos += c.len_utf8();
            match c {
                '"' => return Ok(out),
                '\\' => {
                    let Some(e) = self.peek() else {
                        return self.err("escape character");
                    };
                    let decoded = match e {
                        '"' => '"',
                        '\\' => '\\',
                        'n' => '\n',
                        't' => '\t',
                        'r' => '\r',
                        '/' => '/',
                        _ => return self.err("one of `\\\"`, `\\\\`, `\\n`, `\\t`, `\\r`, `\\/`"),
                    };
                    self.pos += 1;
                    out.push(decoded);
                }
                c => out.push(c),
            }
        }
    }

    fn number(&mut self) -> Result<Value, ParseError> {
        let start = self.pos;
        let bytes = self.src.as_bytes();
        let mut i = self.pos;
        if bytes.get(i) == Some(&b'-') {
            i += 1;
        }
        let digits_start = i;
        while bytes.get(i).is_some_and(u8::is_ascii_digit) {
            i += 1;
        }
        if i == digits_start {
            self.pos = i;
            return self.err("digit");
        }
        let mut is_float = false;
        if bytes.get(i) == Some(&b'.') {
            is_float = true;
            i += 1;
            let frac = i;
            while bytes.get(i).is_some_and(u8::is_ascii_digit) {
                i += 1;
            }
            if i == frac {
                self.pos = i;
                return self.err("digit after `.`");
            }
        }
        if matches!(bytes.get(i), Some(b'e' | b'E')) {
            is_float = true;
            i += 1;
            if matches!(bytes.get(i), Some(b'+' | b'-')) {
                i += 1;
            }
            let exp = i;
            while bytes.get(i).is_some_and(u8::is_ascii_digit) {
                i += 1;
            }
            if i == exp {
                self.pos = i;
                return self.err("exponent digits");
            }
        }
        let text = &self.src[start..i];
        self.pos = i;
        if is_float {
            match text.parse::<f64>() {
                Ok(x) if x.is_finite() => Ok(Value::Float(x)),
                _ => Err(ParseError {
                    position: start,
                    expected: "finite float".into(),
                }),
            }
        } else {
            text.parse::<i64>().map(Value::Int).map_err(|_| ParseError {
                position: start,
                expected: "integer within 64-bit range".into(),
            })
        }
    }
}

/// Parses `[call, call, ...]`. Any grammar violation is a [`ParseError`].
pub fn parse_call_list(text: &str) -> Result<CallList, ParseError> {
    Parser::new(text).call_list()
}

/// Parses one bare call, `name(k=v, ...)`.
pub fn parse_call(text: &str) -> Result<FunctionCall, ParseError> {
    let mut p = Parser::new(text);
    p.ws();
    let call = p.call()?;
    p.ws();
    if p.pos != text.len() {
        return p.err("end of input");
    }
    Ok(call)
}
