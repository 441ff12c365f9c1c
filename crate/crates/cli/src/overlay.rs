//! Sectioned `key = value` config files backing every CLI flag.
//!
//! Precedence is flag > file > (`MRRN_SEED` for seeds) > default. Sections
//! are named after subcommands:
//!
//! ```text
//! [train]
//! hidden = 1024
//! dropout = 0.5
//! ```

use crate::{validation, CliResult, Failure};
use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

pub struct Overlay {
    /// `(section, key) -> value`
    values: BTreeMap<(String, String), String>,
    source: Option<PathBuf>,
}

impl Overlay {
    pub fn load(path: Option<&Path>) -> CliResult<Overlay> {
        let Some(path) = path else {
            return Ok(Overlay {
                values: BTreeMap::new(),
                source: None,
            });
        };
        let text = std::fs::read_to_string(path).map_err(|e| Failure {
            code: crate::EXIT_RUNTIME,
            msg: format!("--config {}: {e}", path.display()),
        })?;
        let mut values = BTreeMap::new();
        let mut section = String::new();
        for (ln, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            if let Some(name) = line.strip_prefix('[').and_then(|s| s.strip_suffix(']')) {
                section = name.trim().to_string();
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(validation(format!(
                    "--config {}: line {}: expected `key = value`, got {raw:?}",
                    path.display(),
                    ln + 1
                )));
            };
            if section.is_empty() {
                return Err(validation(format!(
                    "--config {}: line {}: key before any [section]",
                    path.display(),
                    ln + 1
                )));
            }
            values.insert(
                (section.clone(), key.trim().to_string()),
                value.trim().to_string(),
            );
        }
        Ok(Overlay {
            values,
            source: Some(path.to_path_buf()),
        })
    }

    pub fn section<'a>(&'a self, name: &'a str) -> Section<'a> {
        Section {
            overlay: self,
            name,
        }
    }
}

pub struct Section<'a> {
    overlay: &'a Overlay,
    name: &'a str,
}

impl Section<'_> {
    pub fn lookup(&self, key: &str) -> Option<&str> {
        self.overlay
            .values
            .get(&(self.name.to_string(), key.to_string()))
            .map(|s| s.as_str())
    }

    fn parse_value<T>(&self, key: &str, raw: &str) -> CliResult<T>
    where
        T: std::str::FromStr,
        T::Err: std::fmt::Display,
    {
        raw.parse().map_err(|e| {
            let src = self
                .overlay
                .source
                .as_ref()
                .map(|p| p.display().to_string())
                .unwrap_or_default();
            validation(format!("{src}: [{}] {key} = {raw:?}: {e}", self.name))
        })
    }

    /// flag > file > default.
    pub fn get<T>(&self, key: &str, flag: Option<T>, default: T) -> CliResult<T>
    where
        T: std::str::FromStr,
        T::Err: std::fmt::Display,
    {
        if let Some(v) = flag {
            return Ok(v);
        }
        match self.lookup(key) {
            Some(raw) => self.parse_value(key, raw),
            None => Ok(default),
        }
    }

    /// Same resolution as [`Section::get`]; alias kept for readability where
    /// the type parses through the engine's `FromStr` impls.
    pub fn get_parse<T>(&self, key: &str, flag: Option<T>, default: T) -> CliResult<T>
    where
        T: std::str::FromStr,
        T::Err: std::fmt::Display,
    {
        self.get(key, flag, default)
    }

    pub fn get_string(&self, key: &str, flag: Option<String>, default: &str) -> String {
        flag.or_else(|| self.lookup(key).map(str::to_string))
            .unwrap_or_else(|| default.to_string())
    }

    pub fn path(&self, key: &str, flag: Option<PathBuf>, default: &str) -> PathBuf {
        flag.or_else(|| self.lookup(key).map(PathBuf::from))
            .unwrap_or_else(|| PathBuf::from(default))
    }

    pub fn required_path(&self, key: &str, flag: Option<PathBuf>) -> CliResult<PathBuf> {
        flag.or_else(|| self.lookup(key).map(PathBuf::from))
            .ok_or_else(|| {
                validation(format!(
                    "missing --{} (or [{}] {} in the config file)",
                    key.replace('_', "-"),
                    self.name,
                    key
                ))
            })
    }

    /// Seed resolution: flag > file > `MRRN_SEED` > 0.
    pub fn seed(&self, flag: Option<u64>) -> CliResult<u64> {
        if let Some(v) = flag {
            return Ok(v);
        }
        if let Some(raw) = self.lookup("seed") {
            return self.parse_value("seed", raw);
        }
        match std::env::var("MRRN_SEED") {
            Ok(raw) => raw
                .parse()
                .map_err(|e| validation(format!("MRRN_SEED={raw:?}: {e}"))),
            Err(_) => Ok(0),
        }
    }
}
