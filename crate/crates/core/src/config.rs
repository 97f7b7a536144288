//! Flat `key = value` configuration files with dotted section names.
//!
//! ```text
//! # forward scenario
//! metric.kind = perturbed-beta
//! metric.coeff = 0.1
//! grid.nt = 800
//! grid.nx = 400
//! q.center = 1.0 0.5
//! ```
//!
//! Values are untyped strings until a typed getter pulls them out. Getters
//! record which keys were consumed so [`Config::check_unknown`] can flag
//! typos before any solve starts.

use crate::error::{Error, Result};
use std::collections::BTreeMap;
use std::sync::Mutex;

#[derive(Debug)]
pub struct Config {
    entries: BTreeMap<String, String>,
    consumed: Mutex<Vec<String>>,
}

impl Config {
    pub fn parse(text: &str) -> Result<Self> {
        let mut entries = BTreeMap::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = match raw.find('#') {
                Some(pos) => &raw[..pos],
                None => raw,
            }
            .trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::Config(format!("line {}: expected `key = value`", lineno + 1))
            })?;
            let key = key.trim().to_string();
            if key.is_empty() {
                return Err(Error::Config(format!("line {}: empty key", lineno + 1)));
            }
            if entries
                .insert(key.clone(), value.trim().to_string())
                .is_some()
            {
                return Err(Error::Config(format!("duplicate key `{key}`")));
            }
        }
        Ok(Self {
            entries,
            consumed: Mutex::new(Vec::new()),
        })
    }

    pub fn from_file(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::parse(&text)
    }

    fn raw(&self, key: &str) -> Option<&str> {
        let found = self.entries.get(key).map(|s| s.as_str());
        if found.is_some() {
            self.consumed.lock().unwrap().push(key.to_string());
        }
        found
    }

    pub fn has(&self, key: &str) -> bool {
        self.entries.contains_key(key)
    }

    pub fn str(&self, key: &str) -> Result<&str> {
        self.raw(key)
            .ok_or_else(|| Error::Config(format!("missing key `{key}`")))
    }

    pub fn str_or<'a>(&'a self, key: &str, default: &'a str) -> &'a str {
        self.raw(key).unwrap_or(default)
    }

    pub fn f64(&self, key: &str) -> Result<f64> {
        parse_f64(key, self.str(key)?)
    }

    pub fn f64_or(&self, key: &str, default: f64) -> Result<f64> {
        match self.raw(key) {
            Some(v) => parse_f64(key, v),
            None => Ok(default),
        }
    }

    pub fn usize(&self, key: &str) -> Result<usize> {
        let v = self.str(key)?;
        v.parse()
            .map_err(|_| Error::Config(format!("key `{key}`: `{v}` is not a non-negative integer")))
    }

    pub fn usize_or(&self, key: &str, default: usize) -> Result<usize> {
        match self.raw(key) {
            Some(v) => v.parse().map_err(|_| {
                Error::Config(format!("key `{key}`: `{v}` is not a non-negative integer"))
            }),
            None => Ok(default),
        }
    }

    pub fn u64_or(&self, key: &str, default: u64) -> Result<u64> {
        match self.raw(key) {
            Some(v) => v
                .parse()
                .map_err(|_| Error::Config(format!("key `{key}`: `{v}` is not a u64"))),
            None => Ok(default),
        }
    }

    pub fn bool_or(&self, key: &str, default: bool) -> Result<bool> {
        match self.raw(key) {
            Some("true") | Some("1") | Some("on") => Ok(true),
            Some("false") | Some("0") | Some("off") => Ok(false),
            Some(v) => Err(Error::Config(format!("key `{key}`: `{v}` is not a bool"))),
            None => Ok(default),
        }
    }

    /// Space-separated list of floats.
    pub fn f64_list(&self, key: &str) -> Result<Vec<f64>> {
        let v = self.str(key)?;
        v.split_whitespace().map(|tok| parse_f64(key, tok)).collect()
    }

    pub fn f64_list_or(&self, key: &str, default: &[f64]) -> Result<Vec<f64>> {
        if self.has(key) {
            self.f64_list(key)
        } else {
            Ok(default.to_vec())
        }
    }

    /// Fail if any key was never consumed by a getter. Called after a
    /// subcommand has pulled its full parameter set, so misspelled keys are
    /// diagnosed before any numerical work.
    pub fn check_unknown(&self) -> Result<()> {
        let consumed = self.consumed.lock().unwrap();
        let unknown: Vec<&String> = self
            .entries
            .keys()
            .filter(|k| !consumed.iter().any(|c| c == *k))
            .collect();
        if unknown.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(format!(
                "unknown keys: {}",
                unknown
                    .iter()
                    .map(|s| s.as_str())
                    .collect::<Vec<_>>()
                    .join(", ")
            )))
        }
    }

    /// Canonical `key = value` text, sorted by key. Used for hashing.
    pub fn canonical(&self) -> String {
        let mut out = String::new();
        for (k, v) in &self.entries {
            out.push_str(k);
            out.push_str(" = ");
            out.push_str(v);
            out.push('\n');
        }
        out
    }

    /// FNV-1a hash of the canonical text, as fixed-width hex.
    pub fn hash(&self) -> String {
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        for b in self.canonical().bytes() {
            h ^= b as u64;
            h = h.wrapping_mul(0x1000_0000_01b3);
        }
        format!("{h:016x}")
    }
}

fn parse_f64(key: &str, v: &str) -> Result<f64> {
    let x: f64 = v
        .parse()
        .map_err(|_| Error::Config(format!("key `{key}`: `{v}` is not a number")))?;
    if x.is_finite() {
        Ok(x)
    } else {
        Err(Error::Config(format!("key `{key}`: `{v}` is not finite")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_sections_comments_lists() {
        let c = Config::parse(
            "# comment\nmetric.kind = minkowski\ngrid.nt = 100 # trailing\nq.center = 1.0 0.5\n",
        )
        .unwrap();
        assert_eq!(c.str("metric.kind").unwrap(), "minkowski");
        assert_eq!(c.usize("grid.nt").unwrap(), 100);
        assert_eq!(c.f64_list("q.center").unwrap(), vec![1.0, 0.5]);
        c.check_unknown().unwrap();
    }

    #[test]
    fn rejects_duplicates_and_garbage() {
        assert!(Config::parse("a = 1\na = 2\n").is_err());
        assert!(Config::parse("just words\n").is_err());
        let c = Config::parse("a = nope\n").unwrap();
        assert!(c.f64("a").is_err());
    }

    #[test]
    fn flags_unknown_keys() {
        let c = Config::parse("grid.nt = 4\ngrid.ntx = 8\n").unwrap();
        let _ = c.usize("grid.nt").unwrap();
        let err = c.check_unknown().unwrap_err();
        assert!(err.to_string().contains("grid.ntx"));
    }

    #[test]
    fn hash_is_stable_under_reordering() {
        let a = Config::parse("x = 1\ny = 2\n").unwrap();
        let b = Config::parse("y = 2\nx = 1\n").unwrap();
        assert_eq!(a.hash(), b.hash());
    }
}
