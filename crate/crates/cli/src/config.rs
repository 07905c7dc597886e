//! Optional TOML settings file.
//!
//! Keys are the long flag names. Top-level keys apply to every subcommand; a
//! table named after a subcommand overrides them for that subcommand. Flags
//! given on the command line win over both.

use std::path::Path;
use std::str::FromStr;

use crate::CliError;

#[derive(Debug, Default)]
pub struct Settings {
    table: toml::Table,
    section: String,
}

impl Settings {
    pub fn load(path: Option<&Path>, section: &str) -> Result<Self, CliError> {
        let table = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p)
                    .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", p.display())))?;
                text.parse::<toml::Table>()
                    .map_err(|e| CliError::Usage(format!("invalid config {}: {e}", p.display())))?
            }
            None => toml::Table::new(),
        };
        Ok(Settings { table, section: section.to_string() })
    }

    fn raw(&self, key: &str) -> Option<&toml::Value> {
        let alt = key.replace('-', "_");
        fn find<'a>(t: &'a toml::Table, key: &str, alt: &str) -> Option<&'a toml::Value> {
            t.get(key).or_else(|| t.get(alt)).filter(|v| !v.is_table())
        }
        let section = self.table.get(&self.section).and_then(|s| s.as_table());
        section.and_then(|s| find(s, key, &alt)).or_else(|| find(&self.table, key, &alt))
    }

    pub fn get<T: FromStr>(&self, key: &str) -> Result<Option<T>, CliError>
    where
        T::Err: std::fmt::Display,
    {
        let Some(v) = self.raw(key) else {
            return Ok(None);
        };
        let s = match v {
            toml::Value::String(s) => s.clone(),
            toml::Value::Integer(i) => i.to_string(),
            toml::Value::Float(f) => f.to_string(),
            toml::Value::Boolean(b) => b.to_string(),
            toml::Value::Array(a) => a
                .iter()
                .map(|x| match x {
                    toml::Value::String(s) => s.clone(),
                    other => other.to_string(),
                })
                .collect::<Vec<_>>()
                .join(","),
            other => return Err(CliError::Usage(format!("config key {key}: unsupported value {other}"))),
        };
        s.parse::<T>().map(Some).map_err(|e| CliError::Usage(format!("config key {key}: {e}")))
    }

    /// The flag value if given, else the config value.
    pub fn or<T: FromStr>(&self, flag: Option<T>, key: &str) -> Result<Option<T>, CliError>
    where
        T::Err: std::fmt::Display,
    {
        match flag {
            Some(v) => Ok(Some(v)),
            None => self.get(key),
        }
    }

    pub fn flag(&self, flag: bool, key: &str) -> Result<bool, CliError> {
        Ok(flag || self.get::<bool>(key)?.unwrap_or(false))
    }
}
