//! Flat `key = value` config files with CLI-flag override.
//!
//! Precedence is CLI > file > default. Unknown keys in a config file are
//! usage errors so typos fail loudly.

use std::collections::BTreeMap;
use std::path::Path;
use std::str::FromStr;

use anyhow::{anyhow, bail, Context, Result};

/// Parsed config file: `key = value` per line, `#` comments, blank lines
/// ignored.
#[derive(Clone, Debug, Default)]
pub struct ConfigFile {
    values: BTreeMap<String, String>,
}

impl ConfigFile {
    pub fn empty() -> Self {
        ConfigFile::default()
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        Self::parse(&text).with_context(|| format!("parsing config {}", path.display()))
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut values = BTreeMap::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| anyhow!("line {}: expected `key = value`", lineno + 1))?;
            let key = key.trim().to_owned();
            let value = value.trim().to_owned();
            if value.is_empty() {
                bail!("line {}: empty value for `{key}`", lineno + 1);
            }
            if values.insert(key.clone(), value).is_some() {
                bail!("line {}: duplicate key `{key}`", lineno + 1);
            }
        }
        Ok(ConfigFile { values })
    }

    /// Resolves one setting: CLI flag wins, then the file, then the default.
    pub fn resolve<T: FromStr + Clone>(&self, key: &str, cli: Option<T>, default: T) -> Result<T>
    where
        T::Err: std::fmt::Display,
    {
        if let Some(v) = cli {
            return Ok(v);
        }
        match self.values.get(key) {
            Some(raw) => raw
                .parse::<T>()
                .map_err(|e| anyhow!("config key `{key}` = `{raw}`: {e}")),
            None => Ok(default),
        }
    }

    /// Errors on any key outside the accepted set for the subcommand.
    pub fn check_known_keys(&self, known: &[&str]) -> Result<()> {
        for key in self.values.keys() {
            if !known.contains(&key.as_str()) {
                bail!(
                    "unknown config key `{key}` (known: {})",
                    known.join(", ")
                );
            }
        }
        Ok(())
    }
}
