//! Settings resolution: flags > config file > environment seed > defaults.

use std::collections::BTreeMap;
use std::path::Path;
use std::str::FromStr;

use crate::CliError;

pub const SEED_VAR: &str = "EHRHARD_SEED";

const KEYS: &[&str] = &[
    "f", "g", "h", "fields", "frame", "lam", "mu", "c", "dt", "paths", "delta", "order", "composite", "seed", "out",
    "format", "x", "mean", "tol",
];

#[derive(Debug, Default)]
pub struct Settings {
    file: BTreeMap<String, String>,
}

impl Settings {
    pub fn load(path: Option<&Path>) -> Result<Self, CliError> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self, CliError> {
        let mut file = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| CliError::Usage(format!("config line {}: expected key = value", i + 1)))?;
            let (k, v) = (k.trim(), v.trim());
            if !KEYS.contains(&k) {
                return Err(CliError::Usage(format!("config line {}: unknown key '{k}'", i + 1)));
            }
            if file.insert(k.to_string(), v.to_string()).is_some() {
                return Err(CliError::Usage(format!("config line {}: duplicate key '{k}'", i + 1)));
            }
        }
        Ok(Self { file })
    }

    /// The flag value, else the config entry parsed as `T`.
    pub fn pick<T: FromStr>(&self, key: &str, flag: Option<T>) -> Result<Option<T>, CliError>
    where
        T::Err: std::fmt::Display,
    {
        if flag.is_some() {
            return Ok(flag);
        }
        self.file
            .get(key)
            .map(|v| v.parse::<T>().map_err(|e| CliError::Usage(format!("config key '{key}': {e}"))))
            .transpose()
    }

    pub fn require<T: FromStr>(&self, key: &str, flag: Option<T>) -> Result<T, CliError>
    where
        T::Err: std::fmt::Display,
    {
        self.pick(key, flag)?
            .ok_or_else(|| CliError::Usage(format!("missing --{key} (flag or config key)")))
    }

    pub fn seed(&self, flag: Option<u64>) -> Result<u64, CliError> {
        if let Some(s) = self.pick("seed", flag)? {
            return Ok(s);
        }
        match std::env::var(SEED_VAR) {
            Ok(v) => v
                .trim()
                .parse()
                .map_err(|e| CliError::Usage(format!("{SEED_VAR}='{v}': {e}"))),
            Err(_) => Ok(0),
        }
    }

    /// Field list: flags, else `|`-separated specs from the config file.
    pub fn fields(&self, flag: &[String]) -> Vec<String> {
        if !flag.is_empty() {
            return flag.to_vec();
        }
        self.file
            .get("fields")
            .map(|v| v.split('|').map(|s| s.trim().to_string()).collect())
            .unwrap_or_default()
    }
}

/// Comma-separated floats.
pub fn float_list(key: &str, s: &str) -> Result<Vec<f64>, CliError> {
    s.split(',')
        .map(|p| {
            p.trim()
                .parse::<f64>()
                .map_err(|e| CliError::Usage(format!("--{key}: '{}' {e}", p.trim())))
        })
        .collect()
}
