//! `key = value` config files whose keys mirror the long flag names.

use std::collections::BTreeMap;
use std::path::Path;
use std::str::FromStr;

#[derive(Debug, Default, Clone)]
pub struct ConfigFile {
    values: BTreeMap<String, String>,
}

impl ConfigFile {
    pub fn load(path: &Path) -> Result<Self, String> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| format!("cannot read config file {}: {e}", path.display()))?;
        Self::parse(&text)
    }

    /// Blank lines and lines starting with `#` are ignored. Keys may use
    /// `-` or `_` interchangeably.
    pub fn parse(text: &str) -> Result<Self, String> {
        let mut values = BTreeMap::new();
        for (n, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| format!("config line {}: expected `key = value`", n + 1))?;
            values.insert(k.trim().replace('_', "-"), v.trim().to_string());
        }
        Ok(Self { values })
    }

    pub fn raw(&self, key: &str) -> Option<&str> {
        self.values.get(key).map(String::as_str)
    }

    /// The flag value if given, else the parsed config value.
    pub fn pick<T: FromStr>(&self, flag: Option<T>, key: &str) -> Result<Option<T>, String>
    where
        T::Err: std::fmt::Display,
    {
        if flag.is_some() {
            return Ok(flag);
        }
        self.raw(key)
            .map(|v| v.parse::<T>().map_err(|e| format!("config key `{key}` = `{v}`: {e}")))
            .transpose()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flags_win_over_file() {
        let c = ConfigFile::parse("# comment\ndelta1 = 0.25\nmax_trials=3\n").unwrap();
        assert_eq!(c.pick::<f64>(None, "delta1").unwrap(), Some(0.25));
        assert_eq!(c.pick(Some(0.5), "delta1").unwrap(), Some(0.5));
        assert_eq!(c.raw("max-trials"), Some("3"));
        assert!(c.pick::<f64>(None, "max-trials").is_ok());
        assert!(ConfigFile::parse("nonsense").is_err());
    }
}
