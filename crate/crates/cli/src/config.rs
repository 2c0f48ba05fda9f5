//! Layered settings: command-line flags (and their `PRIVLEAK_*` environment
//! variables) override a `key = value` config file, which overrides the
//! built-in defaults. Every resolved value is recorded for the manifest.

use std::collections::BTreeMap;
use std::fmt::Display;
use std::path::Path;
use std::str::FromStr;

use anyhow::{bail, Context, Result};
use serde_json::Value;

/// Keys accepted in a config file.
pub const KNOWN_KEYS: &[&str] = &[
    "seed",
    "workers",
    "out-dir",
    "n",
    "dim",
    "rating-signal",
    "gender-signal",
    "country-signal",
    "age-signal",
    "words-per-profile",
    "tokens-per-record",
    "model",
    "epsilon",
    "sensitivity",
    "lambda",
    "alpha",
    "cgt-step",
    "learning-rate",
    "epochs",
    "batch-size",
    "seeds",
    "attacker-depth",
    "attacker-width",
    "target",
    "lambdas",
    "epsilons",
    "depths",
    "widths",
    "mechanisms",
    "epsilon-ldp",
    "epsilon-mdp",
    "limit",
];

#[derive(Debug, Default)]
pub struct Settings {
    file: BTreeMap<String, String>,
    resolved: BTreeMap<String, Value>,
}

impl Settings {
    pub fn load(path: Option<&Path>) -> Result<Self> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        Self::parse(&text).with_context(|| format!("in config {}", path.display()))
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut file = BTreeMap::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                bail!("line {}: expected `key = value`", i + 1);
            };
            let key = key.trim().replace('_', "-");
            if !KNOWN_KEYS.contains(&key.as_str()) {
                bail!("line {}: unknown key `{key}`", i + 1);
            }
            file.insert(key, value.trim().to_string());
        }
        Ok(Self {
            file,
            resolved: BTreeMap::new(),
        })
    }

    fn from_file<T: FromStr>(&self, key: &str) -> Result<Option<T>>
    where
        T::Err: Display,
    {
        self.file
            .get(key)
            .map(|raw| raw.parse::<T>().map_err(|e| anyhow::anyhow!("config key `{key}` = `{raw}`: {e}")))
            .transpose()
    }

    /// Flag, else config file, else `default`.
    pub fn get<T>(&mut self, key: &str, flag: Option<T>, default: T) -> Result<T>
    where
        T: FromStr + serde::Serialize,
        T::Err: Display,
    {
        let value = match flag {
            Some(v) => v,
            None => self.from_file(key)?.unwrap_or(default),
        };
        self.resolved.insert(key.to_string(), serde_json::to_value(&value)?);
        Ok(value)
    }

    /// Flag, else config file, else unset.
    pub fn get_opt<T>(&mut self, key: &str, flag: Option<T>) -> Result<Option<T>>
    where
        T: FromStr + serde::Serialize,
        T::Err: Display,
    {
        let value = match flag {
            Some(v) => Some(v),
            None => self.from_file(key)?,
        };
        self.resolved.insert(key.to_string(), serde_json::to_value(&value)?);
        Ok(value)
    }

    /// Comma-separated list setting.
    pub fn get_list<T>(&mut self, key: &str, flag: Option<Vec<T>>, default: Vec<T>) -> Result<Vec<T>>
    where
        T: FromStr + serde::Serialize,
        T::Err: Display,
    {
        let value = match flag {
            Some(v) => v,
            None => match self.file.get(key) {
                Some(raw) => raw
                    .split(',')
                    .map(|item| {
                        item.trim()
                            .parse::<T>()
                            .map_err(|e| anyhow::anyhow!("config key `{key}` item `{item}`: {e}"))
                    })
                    .collect::<Result<Vec<T>>>()?,
                None => default,
            },
        };
        self.resolved.insert(key.to_string(), serde_json::to_value(&value)?);
        Ok(value)
    }

    /// Records a value that has no config-file layer.
    pub fn note(&mut self, key: &str, value: impl serde::Serialize) -> Result<()> {
        self.resolved.insert(key.to_string(), serde_json::to_value(value)?);
        Ok(())
    }

    pub fn resolved(&self) -> &BTreeMap<String, Value> {
        &self.resolved
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn precedence() {
        let mut s = Settings::parse("epsilon = 0.5\n# comment\nlambdas = 1, 2\nbatch_size = 32").unwrap();
        assert_eq!(s.get("epsilon", Some(2.0), 0.1).unwrap(), 2.0);
        assert_eq!(s.get("epsilon", None, 0.1).unwrap(), 0.5);
        assert_eq!(s.get("lambda", None, 1.0).unwrap(), 1.0);
        assert_eq!(s.get("batch-size", None, 64usize).unwrap(), 32);
        assert_eq!(s.get_list("lambdas", None, vec![0.1]).unwrap(), vec![1.0, 2.0]);
        assert_eq!(s.resolved()["lambda"], serde_json::json!(1.0));
    }

    #[test]
    fn rejects_bad_lines() {
        assert!(Settings::parse("bogus = 1").is_err());
        assert!(Settings::parse("epsilon 1").is_err());
        let mut s = Settings::parse("epochs = many").unwrap();
        assert!(s.get("epochs", None, 50usize).is_err());
    }
}
