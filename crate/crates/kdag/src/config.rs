//! Flat `key = value` config files.
//!
//! The syntax is the flat subset of TOML: scalars and arrays of scalars,
//! no tables. Lists may also be written as comma-separated strings
//! (`ps = "0.1,0.2"`). Command-line flags take precedence over file values.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use thiserror::Error;
use toml::Value;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("config syntax error: {0}")]
    Syntax(String),
    #[error("config key `{0}` is a table; only flat key = value pairs are allowed")]
    Nested(String),
    #[error("unknown config key `{key}` for this command (known: {known})")]
    UnknownKey { key: String, known: String },
    #[error("config key `{key}`: expected {expected}")]
    Type { key: String, expected: &'static str },
}

#[derive(Debug, Clone, Default)]
pub struct Config {
    values: BTreeMap<String, Value>,
}

impl Config {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let table: toml::Table = text.parse().map_err(|e: toml::de::Error| ConfigError::Syntax(e.to_string()))?;
        let mut values = BTreeMap::new();
        for (key, value) in table {
            let nested = match &value {
                Value::Table(_) => true,
                Value::Array(items) => items.iter().any(|v| matches!(v, Value::Table(_) | Value::Array(_))),
                _ => false,
            };
            if nested {
                return Err(ConfigError::Nested(key));
            }
            values.insert(key, value);
        }
        Ok(Self { values })
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Rejects keys outside `known`.
    pub fn check_keys(&self, known: &[&str]) -> Result<(), ConfigError> {
        match self.values.keys().find(|k| !known.contains(&k.as_str())) {
            Some(key) => Err(ConfigError::UnknownKey {
                key: key.clone(),
                known: known.join(", "),
            }),
            None => Ok(()),
        }
    }

    pub fn get<T: FromValue>(&self, key: &str) -> Result<Option<T>, ConfigError> {
        self.values
            .get(key)
            .map(|v| {
                T::from_value(v).ok_or(ConfigError::Type {
                    key: key.to_string(),
                    expected: T::EXPECTED,
                })
            })
            .transpose()
    }

    /// The flag value if given, else the config value.
    pub fn pick<T: FromValue>(&self, flag: Option<T>, key: &str) -> Result<Option<T>, ConfigError> {
        match flag {
            Some(v) => Ok(Some(v)),
            None => self.get(key),
        }
    }
}

pub trait FromValue: Sized {
    const EXPECTED: &'static str;
    fn from_value(v: &Value) -> Option<Self>;
}

impl FromValue for u64 {
    const EXPECTED: &'static str = "a nonnegative integer";
    fn from_value(v: &Value) -> Option<Self> {
        match v {
            Value::Integer(i) => u64::try_from(*i).ok(),
            Value::String(s) => s.trim().parse().ok(),
            _ => None,
        }
    }
}

impl FromValue for u32 {
    const EXPECTED: &'static str = "a nonnegative 32-bit integer";
    fn from_value(v: &Value) -> Option<Self> {
        u64::from_value(v).and_then(|x| u32::try_from(x).ok())
    }
}

impl FromValue for usize {
    const EXPECTED: &'static str = "a nonnegative integer";
    fn from_value(v: &Value) -> Option<Self> {
        u64::from_value(v).and_then(|x| usize::try_from(x).ok())
    }
}

impl FromValue for f64 {
    const EXPECTED: &'static str = "a number";
    fn from_value(v: &Value) -> Option<Self> {
        match v {
            Value::Float(f) => Some(*f),
            Value::Integer(i) => Some(*i as f64),
            Value::String(s) => s.trim().parse().ok(),
            _ => None,
        }
    }
}

impl FromValue for bool {
    const EXPECTED: &'static str = "true or false";
    fn from_value(v: &Value) -> Option<Self> {
        match v {
            Value::Boolean(b) => Some(*b),
            Value::String(s) => s.trim().parse().ok(),
            _ => None,
        }
    }
}

impl FromValue for String {
    const EXPECTED: &'static str = "a string";
    fn from_value(v: &Value) -> Option<Self> {
        match v {
            Value::String(s) => Some(s.clone()),
            _ => None,
        }
    }
}

impl FromValue for PathBuf {
    const EXPECTED: &'static str = "a path string";
    fn from_value(v: &Value) -> Option<Self> {
        String::from_value(v).map(PathBuf::from)
    }
}

impl<T: FromValue> FromValue for Vec<T> {
    const EXPECTED: &'static str = "a list (array or comma-separated string)";
    fn from_value(v: &Value) -> Option<Self> {
        match v {
            Value::Array(items) => items.iter().map(T::from_value).collect(),
            Value::String(s) => s
                .split(',')
                .map(|part| T::from_value(&Value::String(part.trim().to_string())))
                .collect(),
            scalar => T::from_value(scalar).map(|x| vec![x]),
        }
    }
}
