//! Line-oriented `key=value` records shared by policy inputs, decision logs
//! and fixture manifests.
//!
//! Fields are separated by whitespace. A value may be double-quoted to
//! hold spaces; `\"` and `\\` escape inside quotes. Blank lines and lines
//! starting with `#` are ignored.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum KvError {
    #[error("line {line}: field `{field}` has no `=`")]
    MissingEquals { line: usize, field: String },
    #[error("line {line}: unterminated quote")]
    Unterminated { line: usize },
    #[error("line {line}: duplicate key `{key}`")]
    Duplicate { line: usize, key: String },
    #[error("line {line}: missing key `{key}`")]
    Missing { line: usize, key: String },
    #[error("line {line}: bad value for `{key}`: {message}")]
    BadValue { line: usize, key: String, message: String },
}

/// One parsed line, with its 1-based line number.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Record {
    pub line: usize,
    pub fields: BTreeMap<String, String>,
}

impl Record {
    pub fn get(&self, key: &str) -> Option<&str> {
        self.fields.get(key).map(String::as_str)
    }

    pub fn require(&self, key: &str) -> Result<&str, KvError> {
        self.get(key).ok_or_else(|| KvError::Missing {
            line: self.line,
            key: key.to_string(),
        })
    }

    pub fn bad(&self, key: &str, message: impl Into<String>) -> KvError {
        KvError::BadValue {
            line: self.line,
            key: key.to_string(),
            message: message.into(),
        }
    }

    /// Parses a decimal or `0x` hexadecimal number.
    pub fn number(&self, key: &str) -> Result<u64, KvError> {
        let v = self.require(key)?;
        parse_u64(v).ok_or_else(|| self.bad(key, format!("`{v}` is not a number")))
    }

    /// Comma-separated list; empty string gives an empty list.
    pub fn list(&self, key: &str) -> Vec<String> {
        self.get(key)
            .map(|v| {
                v.split(',')
                    .map(str::trim)
                    .filter(|s| !s.is_empty())
                    .map(String::from)
                    .collect()
            })
            .unwrap_or_default()
    }
}

pub fn parse_u64(s: &str) -> Option<u64> {
    let s = s.trim().replace('_', "");
    match s.strip_prefix("0x").or_else(|| s.strip_prefix("0X")) {
        Some(h) => u64::from_str_radix(h, 16).ok(),
        None => s.parse().ok(),
    }
}

pub fn parse_line(text: &str, line: usize) -> Result<Record, KvError> {
    let mut fields = BTreeMap::new();
    let mut chars = text.chars().peekable();
    loop {
        while chars.next_if(|c| c.is_whitespace()).is_some() {}
        if chars.peek().is_none() {
            break;
        }
        let mut key = String::new();
        while let Some(c) = chars.next_if(|c| !c.is_whitespace() && *c != '=') {
            key.push(c);
        }
        if chars.next_if_eq(&'=').is_none() {
            return Err(KvError::MissingEquals { line, field: key });
        }
        let mut value = String::new();
        if chars.next_if_eq(&'"').is_some() {
            loop {
                match chars.next() {
                    None => return Err(KvError::Unterminated { line }),
                    Some('"') => break,
                    Some('\\') => match chars.next() {
                        Some(c) => value.push(c),
                        None => return Err(KvError::Unterminated { line }),
                    },
                    Some(c) => value.push(c),
                }
            }
        } else {
            while let Some(c) = chars.next_if(|c| !c.is_whitespace()) {
                value.push(c);
            }
        }
        if fields.insert(key.clone(), value).is_some() {
            return Err(KvError::Duplicate { line, key });
        }
    }
    Ok(Record { line, fields })
}

/// Parses every non-blank, non-comment line.
pub fn parse(text: &str) -> Result<Vec<Record>, KvError> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| {
            let t = l.trim();
            !t.is_empty() && !t.starts_with('#')
        })
        .map(|(i, l)| parse_line(l, i + 1))
        .collect()
}

fn needs_quotes(v: &str) -> bool {
    v.is_empty() || v.chars().any(|c| c.is_whitespace() || c == '"' || c == '\\')
}

/// Renders fields in the given order, quoting where needed.
pub fn render<'a>(fields: impl IntoIterator<Item = (&'a str, String)>) -> String {
    let mut out = String::new();
    for (k, v) in fields {
        if !out.is_empty() {
            out.push(' ');
        }
        if needs_quotes(&v) {
            let escaped = v.replace('\\', "\\\\").replace('"', "\\\"");
            let _ = write!(out, "{k}=\"{escaped}\"");
        } else {
            let _ = write!(out, "{k}={v}");
        }
    }
    out
}
