//! Settings file plus flag overrides. Flags always win.

use std::collections::BTreeMap;
use std::fmt::Display;
use std::path::Path;
use std::str::FromStr;

use crate::CliError;

/// Flat `key -> raw value` map from a `key=value` or JSON object file.
/// Keys are normalized to lowercase with `-` replaced by `_`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ConfigFile {
    values: BTreeMap<String, String>,
}

fn normalize(key: &str) -> String {
    key.trim().to_ascii_lowercase().replace('-', "_")
}

impl ConfigFile {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self, CliError> {
        if text.trim_start().starts_with('{') {
            Self::parse_json(text)
        } else {
            Self::parse_pairs(text)
        }
    }

    fn parse_json(text: &str) -> Result<Self, CliError> {
        let value: serde_json::Value = serde_json::from_str(text)
            .map_err(|e| CliError::Malformed(format!("config JSON: {e}")))?;
        let obj = value
            .as_object()
            .ok_or_else(|| CliError::Malformed("config JSON must be an object".into()))?;
        let mut values = BTreeMap::new();
        for (k, v) in obj {
            let raw = match v {
                serde_json::Value::String(s) => s.clone(),
                serde_json::Value::Number(n) => n.to_string(),
                serde_json::Value::Bool(b) => b.to_string(),
                other => {
                    return Err(CliError::Malformed(format!(
                        "config key '{k}' must be a scalar, got {other}"
                    )))
                }
            };
            values.insert(normalize(k), raw);
        }
        Ok(Self { values })
    }

    fn parse_pairs(text: &str) -> Result<Self, CliError> {
        let mut values = BTreeMap::new();
        for (n, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| {
                CliError::Malformed(format!("config line {}: expected key=value", n + 1))
            })?;
            values.insert(normalize(k), v.trim().to_string());
        }
        Ok(Self { values })
    }

    pub fn raw(&self, key: &str) -> Option<&str> {
        self.values.get(key).map(String::as_str)
    }

    /// `flag`, else the parsed file entry, else `None`.
    pub fn resolve<T>(&self, key: &str, flag: Option<T>) -> Result<Option<T>, CliError>
    where
        T: FromStr,
        T::Err: Display,
    {
        if flag.is_some() {
            return Ok(flag);
        }
        match self.raw(key) {
            None => Ok(None),
            Some(raw) => raw
                .parse()
                .map(Some)
                .map_err(|e| CliError::Malformed(format!("config key '{key}' = '{raw}': {e}"))),
        }
    }

    pub fn resolve_or<T>(&self, key: &str, flag: Option<T>, default: T) -> Result<T, CliError>
    where
        T: FromStr,
        T::Err: Display,
    {
        Ok(self.resolve(key, flag)?.unwrap_or(default))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pairs_and_json_agree() {
        let a = ConfigFile::parse("# comment\ndelta = 0.3\ntrain-ratio=0.5\nkernel=exp\n").unwrap();
        let b =
            ConfigFile::parse(r#"{"delta": 0.3, "train_ratio": 0.5, "kernel": "exp"}"#).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn flags_override_file() {
        let c = ConfigFile::parse("delta=0.3\nk=12").unwrap();
        assert_eq!(c.resolve("delta", Some(0.5)).unwrap(), Some(0.5));
        assert_eq!(c.resolve::<f64>("delta", None).unwrap(), Some(0.3));
        assert_eq!(c.resolve_or::<usize>("k", None, 10).unwrap(), 12);
        assert_eq!(c.resolve_or::<usize>("folds", None, 5).unwrap(), 5);
    }

    #[test]
    fn bad_entries_rejected() {
        assert!(ConfigFile::parse("delta 0.3").is_err());
        assert!(ConfigFile::parse(r#"{"delta": [1]}"#).is_err());
        let c = ConfigFile::parse("k=many").unwrap();
        assert!(c.resolve::<usize>("k", None).is_err());
    }
}
