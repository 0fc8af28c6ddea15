//! Line-oriented `key = value` configuration files.
//!
//! Blank lines and lines starting with `#` are skipped. Keys must be known
//! to the caller and may appear only once; lists are comma-separated.

use std::collections::BTreeMap;
use std::str::FromStr;

use crate::error::{Error, Result};

#[derive(Debug, Clone)]
struct Entry {
    line: usize,
    value: String,
}

/// Parsed key/value pairs, each remembering the line it came from.
#[derive(Debug, Clone, Default)]
pub struct ConfigMap {
    entries: BTreeMap<String, Entry>,
}

impl ConfigMap {
    /// Parses `text`, rejecting keys outside `allowed`.
    pub fn parse(text: &str, allowed: &[&str]) -> Result<Self> {
        let mut entries = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let trimmed = raw.trim();
            if trimmed.is_empty() || trimmed.starts_with('#') {
                continue;
            }
            let (key, value) = trimmed.split_once('=').ok_or_else(|| Error::Config {
                line,
                reason: format!("expected `key = value`, got `{trimmed}`"),
            })?;
            let key = key.trim();
            let value = value.trim();
            if !allowed.contains(&key) {
                return Err(Error::Config {
                    line,
                    reason: format!("unknown key `{key}`"),
                });
            }
            if value.is_empty() {
                return Err(Error::Config {
                    line,
                    reason: format!("empty value for `{key}`"),
                });
            }
            let entry = Entry {
                line,
                value: value.to_string(),
            };
            if let Some(prev) = entries.insert(key.to_string(), entry) {
                return Err(Error::Config {
                    line,
                    reason: format!("`{key}` already set on line {}", prev.line),
                });
            }
        }
        Ok(ConfigMap { entries })
    }

    pub fn contains(&self, key: &str) -> bool {
        self.entries.contains_key(key)
    }

    pub fn raw(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(|e| e.value.as_str())
    }

    fn line_of(&self, key: &str) -> usize {
        self.entries.get(key).map_or(0, |e| e.line)
    }

    pub fn get<T: FromStr>(&self, key: &str) -> Result<Option<T>>
    where
        T::Err: std::fmt::Display,
    {
        match self.raw(key) {
            None => Ok(None),
            Some(v) => v.parse().map(Some).map_err(|e: T::Err| Error::Config {
                line: self.line_of(key),
                reason: format!("bad value `{v}` for `{key}`: {e}"),
            }),
        }
    }

    pub fn require<T: FromStr>(&self, key: &str) -> Result<T>
    where
        T::Err: std::fmt::Display,
    {
        self.get(key)?.ok_or_else(|| Error::Config {
            line: 0,
            reason: format!("missing required key `{key}`"),
        })
    }

    pub fn get_list<T: FromStr>(&self, key: &str) -> Result<Option<Vec<T>>>
    where
        T::Err: std::fmt::Display,
    {
        let Some(v) = self.raw(key) else {
            return Ok(None);
        };
        parse_list(v)
            .map(Some)
            .map_err(|reason| Error::Config {
                line: self.line_of(key),
                reason: format!("bad list for `{key}`: {reason}"),
            })
    }

    pub fn require_list<T: FromStr>(&self, key: &str) -> Result<Vec<T>>
    where
        T::Err: std::fmt::Display,
    {
        self.get_list(key)?.ok_or_else(|| Error::Config {
            line: 0,
            reason: format!("missing required key `{key}`"),
        })
    }
}

/// Parses `1, 2,3` into a vector.
pub fn parse_list<T: FromStr>(v: &str) -> std::result::Result<Vec<T>, String>
where
    T::Err: std::fmt::Display,
{
    v.split(',')
        .map(|s| {
            let s = s.trim();
            s.parse::<T>().map_err(|e| format!("`{s}`: {e}"))
        })
        .collect()
}

/// Expands a one-element list to `d` copies; otherwise requires length `d`.
pub fn broadcast<T: Clone>(name: &'static str, v: Vec<T>, d: usize) -> Result<Vec<T>> {
    match v.len() {
        1 => Ok(vec![v[0].clone(); d]),
        n if n == d => Ok(v),
        n => Err(Error::param(name, format!("{n} values for {d} modes"))),
    }
}
