//! Flat `key = value` text shared by parameter and scan files.

use std::collections::HashSet;
use std::f64::consts::PI;

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct Entry {
    pub line: usize,
    pub key: String,
    pub value: String,
}

impl Entry {
    /// Numeric value; accepts products and quotients of numbers and `pi`,
    /// e.g. `0.3`, `pi/4`, `-2*pi/3`.
    pub fn angle(&self) -> Result<f64> {
        parse_angle(&self.value).ok_or_else(|| self.error(format!("bad number `{}`", self.value)))
    }

    pub fn count(&self) -> Result<usize> {
        self.value.parse().map_err(|_| self.error(format!("expected a non-negative integer, got `{}`", self.value)))
    }

    pub fn error(&self, msg: String) -> Error {
        Error::Parse { line: self.line, msg }
    }
}

pub fn entries(text: &str) -> Result<Vec<Entry>> {
    let mut out = Vec::new();
    let mut seen = HashSet::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let body = raw.split('#').next().unwrap_or("").trim();
        if body.is_empty() {
            continue;
        }
        let (key, value) =
            body.split_once('=').ok_or_else(|| Error::Parse { line, msg: format!("expected `key = value`, got `{body}`") })?;
        let (key, value) = (key.trim(), value.trim());
        if key.is_empty() || value.is_empty() {
            return Err(Error::Parse { line, msg: "empty key or value".into() });
        }
        if !seen.insert(key.to_string()) {
            return Err(Error::Parse { line, msg: format!("duplicate key `{key}`") });
        }
        out.push(Entry { line, key: key.into(), value: value.into() });
    }
    Ok(out)
}

pub fn parse_angle(s: &str) -> Option<f64> {
    let s = s.trim();
    let (sign, s) = match s.strip_prefix('-') {
        Some(rest) => (-1.0, rest),
        None => (1.0, s.strip_prefix('+').unwrap_or(s)),
    };
    let mut value = 1.0;
    let mut op = '*';
    let mut rest = s;
    loop {
        let end = rest.find(['*', '/']).unwrap_or(rest.len());
        let factor = match rest[..end].trim() {
            "pi" => PI,
            t => t.parse::<f64>().ok()?,
        };
        if op == '*' {
            value *= factor;
        } else {
            value /= factor;
        }
        if end == rest.len() {
            break;
        }
        op = rest.as_bytes()[end] as char;
        rest = &rest[end + 1..];
    }
    let v = sign * value;
    v.is_finite().then_some(v)
}
