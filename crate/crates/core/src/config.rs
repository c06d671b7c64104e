//! Flat `key = value` configuration files.
//!
//! One assignment per line, `#` starts a comment, values may be wrapped in
//! double quotes. Dotted keys (`beta.params.a0`) are plain strings; there is
//! no nesting.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Default, PartialEq)]
pub struct KeyValueConfig {
    entries: BTreeMap<String, String>,
}

impl KeyValueConfig {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut entries = BTreeMap::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = strip_comment(raw).trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::config(format!("line {}: expected `key = value`", lineno + 1))
            })?;
            let key = key.trim();
            if key.is_empty() || key.contains(char::is_whitespace) {
                return Err(Error::config(format!("line {}: invalid key `{key}`", lineno + 1)));
            }
            let value = unquote(value.trim());
            if entries.insert(key.to_string(), value.to_string()).is_some() {
                return Err(Error::config(format!("line {}: duplicate key `{key}`", lineno + 1)));
            }
        }
        Ok(Self { entries })
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(String::as_str)
    }

    pub fn set(&mut self, key: impl Into<String>, value: impl ToString) {
        self.entries.insert(key.into(), value.to_string());
    }

    pub fn contains(&self, key: &str) -> bool {
        self.entries.contains_key(key)
    }

    pub fn keys(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }

    /// Typed lookup; a present but unparsable value is an error.
    pub fn parsed<T: FromStr>(&self, key: &str) -> Result<Option<T>> {
        match self.get(key) {
            None => Ok(None),
            Some(v) => v
                .parse()
                .map(Some)
                .map_err(|_| Error::config(format!("key `{key}`: cannot parse `{v}`"))),
        }
    }

    pub fn required<T: FromStr>(&self, key: &str) -> Result<T> {
        self.parsed(key)?
            .ok_or_else(|| Error::config(format!("missing required key `{key}`")))
    }

    /// Copies every entry of `other` over this one.
    pub fn merge(&mut self, other: &KeyValueConfig) {
        for (k, v) in &other.entries {
            self.entries.insert(k.clone(), v.clone());
        }
    }
}

impl fmt::Display for KeyValueConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (k, v) in &self.entries {
            writeln!(f, "{k} = {v}")?;
        }
        Ok(())
    }
}

fn strip_comment(line: &str) -> &str {
    let mut in_quotes = false;
    for (i, c) in line.char_indices() {
        match c {
            '"' => in_quotes = !in_quotes,
            '#' if !in_quotes => return &line[..i],
            _ => {}
        }
    }
    line
}

fn unquote(v: &str) -> &str {
    v.strip_prefix('"')
        .and_then(|s| s.strip_suffix('"'))
        .unwrap_or(v)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_comments_and_quotes() {
        let cfg = KeyValueConfig::parse(
            "# kernel\nbeta.family = \"shifted-gamma\" # inline\nnu = 0.111\n\ns0=1e7\n",
        )
        .unwrap();
        assert_eq!(cfg.get("beta.family"), Some("shifted-gamma"));
        assert_eq!(cfg.parsed::<f64>("nu").unwrap(), Some(0.111));
        assert_eq!(cfg.required::<f64>("s0").unwrap(), 1e7);
    }

    #[test]
    fn rejects_malformed_lines() {
        assert!(KeyValueConfig::parse("nu 0.1").is_err());
        assert!(KeyValueConfig::parse("nu = 1\nnu = 2").is_err());
        let cfg = KeyValueConfig::parse("nu = abc").unwrap();
        assert!(cfg.parsed::<f64>("nu").is_err());
        assert!(cfg.required::<f64>("tau").is_err());
    }

    #[test]
    fn display_round_trips() {
        let mut cfg = KeyValueConfig::new();
        cfg.set("a", 1.5);
        cfg.set("b.c", "x");
        assert_eq!(KeyValueConfig::parse(&cfg.to_string()).unwrap(), cfg);
    }
}
