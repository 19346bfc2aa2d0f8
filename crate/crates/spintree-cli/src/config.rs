//! `key=value` config files. A config entry supplies a default for the
//! flag of the same name; an explicit flag always wins. Keys a command
//! does not use are ignored, so one file can serve several subcommands.

use std::collections::HashMap;
use std::path::{Path, PathBuf};
use std::str::FromStr;

pub struct ConfigMap {
    entries: HashMap<String, String>,
}

impl ConfigMap {
    pub fn empty() -> Self {
        Self {
            entries: HashMap::new(),
        }
    }

    pub fn load(path: &Path) -> Result<Self, String> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| format!("cannot read config {}: {e}", path.display()))?;
        let mut entries = HashMap::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                format!(
                    "{}:{}: expected key=value, got `{line}`",
                    path.display(),
                    lineno + 1
                )
            })?;
            entries.insert(key.trim().to_string(), value.trim().to_string());
        }
        Ok(Self { entries })
    }

    /// Flag value if given, else config entry, else the default.
    pub fn resolve<T, E>(
        &self,
        key: &str,
        flag: Option<T>,
        default: T,
    ) -> Result<T, super::Failure>
    where
        T: FromStr<Err = E>,
        E: std::fmt::Display,
    {
        match flag {
            Some(v) => Ok(v),
            None => match self.entries.get(key) {
                Some(raw) => raw.parse().map_err(|e| {
                    super::Failure::usage(format!("config key `{key}` = `{raw}`: {e}"))
                }),
                None => Ok(default),
            },
        }
    }

    /// Flag value if given, else config entry; error when neither exists.
    pub fn resolve_required<T, E>(&self, key: &str, flag: Option<T>) -> Result<T, String>
    where
        T: FromStr<Err = E>,
        E: std::fmt::Display,
    {
        match flag {
            Some(v) => Ok(v),
            None => match self.entries.get(key) {
                Some(raw) => raw
                    .parse()
                    .map_err(|e| format!("config key `{key}` = `{raw}`: {e}")),
                None => Err(format!("missing required --{key}")),
            },
        }
    }

    pub fn get_path(&self, key: &str) -> Option<PathBuf> {
        self.entries.get(key).map(PathBuf::from)
    }
}
