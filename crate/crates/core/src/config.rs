//! Flat key/value configuration.
//!
//! Config files are TOML documents restricted to top-level scalars and
//! arrays of scalars. Values are kept as strings so command-line flags can
//! override file entries uniformly; arrays become comma-separated lists,
//! matching the command-line syntax for vectors and diagonals.
//!
//! ```
//! use rcgd::config::Config;
//!
//! let mut cfg = Config::parse("objective = \"quadratic\"\nH = [1, -1]\nalpha = 0.1").unwrap();
//! cfg.set("alpha", "0.05");
//! assert_eq!(cfg.get::<f64>("alpha").unwrap(), Some(0.05));
//! assert_eq!(cfg.get::<String>("H").unwrap().as_deref(), Some("1,-1"));
//! ```

use std::collections::BTreeMap;
use std::fmt::Display;
use std::path::Path;
use std::str::FromStr;

use serde::Serialize;

use crate::{Error, Result};

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
#[serde(transparent)]
pub struct Config {
    entries: BTreeMap<String, String>,
}

fn scalar(key: &str, v: &toml::Value) -> Result<String> {
    match v {
        toml::Value::String(s) => Ok(s.clone()),
        toml::Value::Integer(i) => Ok(i.to_string()),
        toml::Value::Float(f) => Ok(f.to_string()),
        toml::Value::Boolean(b) => Ok(b.to_string()),
        _ => Err(Error::Config(format!("key `{key}` must be a scalar or an array of scalars"))),
    }
}

impl Config {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn parse(text: &str) -> Result<Self> {
        let table: toml::Table = text.parse().map_err(|e: toml::de::Error| Error::Config(e.to_string()))?;
        let mut entries = BTreeMap::new();
        for (key, value) in &table {
            let s = match value {
                toml::Value::Array(items) => items.iter().map(|v| scalar(key, v)).collect::<Result<Vec<_>>>()?.join(","),
                v => scalar(key, v)?,
            };
            entries.insert(key.clone(), s);
        }
        Ok(Self { entries })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    /// Insert or override `key`.
    pub fn set(&mut self, key: &str, value: impl Display) {
        self.entries.insert(key.to_owned(), value.to_string());
    }

    /// Override `key` only when `value` is present.
    pub fn set_opt<T: Display>(&mut self, key: &str, value: Option<T>) {
        if let Some(v) = value {
            self.set(key, v);
        }
    }

    pub fn contains(&self, key: &str) -> bool {
        self.entries.contains_key(key)
    }

    pub fn raw(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(String::as_str)
    }

    pub fn get<T: FromStr>(&self, key: &str) -> Result<Option<T>>
    where
        T::Err: Display,
    {
        self.entries
            .get(key)
            .map(|s| {
                s.trim()
                    .parse::<T>()
                    .map_err(|e| Error::Config(format!("bad value `{s}` for `{key}`: {e}")))
            })
            .transpose()
    }

    pub fn get_or<T: FromStr>(&self, key: &str, default: T) -> Result<T>
    where
        T::Err: Display,
    {
        Ok(self.get(key)?.unwrap_or(default))
    }

    /// Remove and parse `key`.
    pub fn take<T: FromStr>(&mut self, key: &str) -> Result<Option<T>>
    where
        T::Err: Display,
    {
        let v = self.get(key)?;
        self.entries.remove(key);
        Ok(v)
    }

    pub fn entries(&self) -> &BTreeMap<String, String> {
        &self.entries
    }

    pub fn into_entries(self) -> BTreeMap<String, String> {
        self.entries
    }

    /// Render back to TOML, quoting every value as a string.
    pub fn to_toml(&self) -> String {
        self.entries
            .iter()
            .map(|(k, v)| format!("{k} = {}\n", toml::Value::String(v.clone())))
            .collect()
    }
}
