//! Flat key-value configuration files.
//!
//! Catalogs, deployment descriptors, SUT models, scenarios and run manifests
//! all share one format: a TOML document restricted to top-level scalars.
//! Prices are written as quoted decimal strings so they load exactly.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;

use rust_decimal::Decimal;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum KvError {
    #[error("parse error: {0}")]
    Parse(String),
    #[error("missing required field `{0}`")]
    Missing(String),
    #[error("invalid value for `{field}`: {reason}")]
    Invalid { field: String, reason: String },
    #[error("unknown field `{0}`")]
    Unknown(String),
}

impl KvError {
    /// Field the error refers to, if any.
    pub fn field(&self) -> Option<&str> {
        match self {
            KvError::Parse(_) => None,
            KvError::Missing(f) | KvError::Unknown(f) => Some(f),
            KvError::Invalid { field, .. } => Some(field),
        }
    }

    pub fn invalid(field: &str, reason: impl Into<String>) -> Self {
        KvError::Invalid { field: field.to_string(), reason: reason.into() }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Scalar {
    Str(String),
    Int(i64),
    Float(f64),
    Bool(bool),
}

/// A parsed flat document. Keys are consumed as they are read so that
/// leftovers can be reported as unknown fields.
#[derive(Debug, Clone, Default)]
pub struct KvDoc {
    entries: BTreeMap<String, Scalar>,
    seen: BTreeSet<String>,
}

impl KvDoc {
    pub fn parse(text: &str) -> Result<Self, KvError> {
        let table: toml::Table = text.parse().map_err(|e: toml::de::Error| {
            KvError::Parse(e.message().to_string())
        })?;
        let mut entries = BTreeMap::new();
        for (key, value) in table {
            let scalar = match value {
                toml::Value::String(s) => Scalar::Str(s),
                toml::Value::Integer(i) => Scalar::Int(i),
                toml::Value::Float(f) => Scalar::Float(f),
                toml::Value::Boolean(b) => Scalar::Bool(b),
                _ => return Err(KvError::invalid(&key, "expected a scalar value")),
            };
            entries.insert(key, scalar);
        }
        Ok(KvDoc { entries, seen: BTreeSet::new() })
    }

    pub fn read(path: &Path) -> Result<Self, KvError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| KvError::Parse(format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn contains(&self, key: &str) -> bool {
        self.entries.contains_key(key)
    }

    fn take(&mut self, key: &str) -> Option<&Scalar> {
        self.seen.insert(key.to_string());
        self.entries.get(key)
    }

    pub fn opt_str(&mut self, key: &str) -> Result<Option<String>, KvError> {
        match self.take(key) {
            None => Ok(None),
            Some(Scalar::Str(s)) => Ok(Some(s.clone())),
            Some(_) => Err(KvError::invalid(key, "expected a string")),
        }
    }

    pub fn req_str(&mut self, key: &str) -> Result<String, KvError> {
        self.opt_str(key)?.ok_or_else(|| KvError::Missing(key.to_string()))
    }

    pub fn opt_decimal(&mut self, key: &str) -> Result<Option<Decimal>, KvError> {
        let parsed = match self.take(key) {
            None => return Ok(None),
            Some(Scalar::Int(i)) => Some(Decimal::from(*i)),
            // Shortest round-trip rendering of the float, so `0.1` stays `0.1`.
            Some(Scalar::Float(f)) => parse_decimal(&f.to_string()),
            Some(Scalar::Str(s)) => parse_decimal(s.trim()),
            Some(Scalar::Bool(_)) => None,
        };
        parsed
            .map(Some)
            .ok_or_else(|| KvError::invalid(key, "expected a decimal number"))
    }

    pub fn req_decimal(&mut self, key: &str) -> Result<Decimal, KvError> {
        self.opt_decimal(key)?.ok_or_else(|| KvError::Missing(key.to_string()))
    }

    pub fn opt_f64(&mut self, key: &str) -> Result<Option<f64>, KvError> {
        match self.take(key) {
            None => Ok(None),
            Some(Scalar::Int(i)) => Ok(Some(*i as f64)),
            Some(Scalar::Float(f)) => Ok(Some(*f)),
            Some(Scalar::Str(s)) => s
                .trim()
                .parse::<f64>()
                .map(Some)
                .map_err(|_| KvError::invalid(key, "expected a number")),
            Some(Scalar::Bool(_)) => Err(KvError::invalid(key, "expected a number")),
        }
    }

    pub fn req_f64(&mut self, key: &str) -> Result<f64, KvError> {
        self.opt_f64(key)?.ok_or_else(|| KvError::Missing(key.to_string()))
    }

    pub fn opt_u64(&mut self, key: &str) -> Result<Option<u64>, KvError> {
        match self.take(key) {
            None => Ok(None),
            Some(Scalar::Int(i)) => u64::try_from(*i)
                .map(Some)
                .map_err(|_| KvError::invalid(key, "expected a non-negative integer")),
            Some(Scalar::Str(s)) => s
                .trim()
                .parse::<u64>()
                .map(Some)
                .map_err(|_| KvError::invalid(key, "expected a non-negative integer")),
            Some(_) => Err(KvError::invalid(key, "expected a non-negative integer")),
        }
    }

    pub fn req_u64(&mut self, key: &str) -> Result<u64, KvError> {
        self.opt_u64(key)?.ok_or_else(|| KvError::Missing(key.to_string()))
    }

    pub fn opt_u32(&mut self, key: &str) -> Result<Option<u32>, KvError> {
        match self.opt_u64(key)? {
            None => Ok(None),
            Some(v) => u32::try_from(v)
                .map(Some)
                .map_err(|_| KvError::invalid(key, "value out of range")),
        }
    }

    pub fn req_u32(&mut self, key: &str) -> Result<u32, KvError> {
        self.opt_u32(key)?.ok_or_else(|| KvError::Missing(key.to_string()))
    }

    /// Errors on the first key that no accessor asked for.
    pub fn finish(self) -> Result<(), KvError> {
        match self.entries.keys().find(|k| !self.seen.contains(*k)) {
            Some(k) => Err(KvError::Unknown(k.clone())),
            None => Ok(()),
        }
    }
}

fn parse_decimal(s: &str) -> Option<Decimal> {
    Decimal::from_str_exact(s)
        .or_else(|_| Decimal::from_scientific(s))
        .ok()
}

/// Parses a comma-separated list of decimals, e.g. `1,2,5,10`.
pub fn parse_decimal_list(field: &str, s: &str) -> Result<Vec<Decimal>, KvError> {
    s.split(',')
        .map(str::trim)
        .filter(|p| !p.is_empty())
        .map(|p| parse_decimal(p).ok_or_else(|| KvError::invalid(field, format!("`{p}` is not a number"))))
        .collect()
}

/// Builds a flat document in insertion order.
#[derive(Debug, Default)]
pub struct KvWriter {
    out: String,
}

impl KvWriter {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn comment(&mut self, text: &str) -> &mut Self {
        let _ = writeln!(self.out, "# {text}");
        self
    }

    pub fn str(&mut self, key: &str, value: &str) -> &mut Self {
        let _ = writeln!(self.out, "{key} = {}", toml::Value::String(value.to_string()));
        self
    }

    pub fn decimal(&mut self, key: &str, value: Decimal) -> &mut Self {
        self.str(key, &value.normalize().to_string())
    }

    pub fn int(&mut self, key: &str, value: u64) -> &mut Self {
        let _ = writeln!(self.out, "{key} = {value}");
        self
    }

    pub fn display(&mut self, key: &str, value: impl std::fmt::Display) -> &mut Self {
        self.str(key, &value.to_string())
    }

    pub fn finish(&self) -> String {
        self.out.clone()
    }
}

impl FromStr for KvDoc {
    type Err = KvError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        KvDoc::parse(s)
    }
}
