//! `key=value` configuration: a file (optional) overlaid by command-line
//! flags, resolved into typed values with defaults.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use brownian_marble::rbessel::RateFunction;

use crate::error::CliError;

/// Resolved key/value pairs; this map is echoed into every output header.
#[derive(Debug, Clone, Default)]
pub struct Config {
    values: BTreeMap<String, String>,
    allowed: &'static [&'static str],
}

pub fn parse_kv(text: &str, origin: &Path) -> Result<BTreeMap<String, String>, CliError> {
    let mut out = BTreeMap::new();
    for (no, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line.split_once('=').ok_or_else(|| {
            CliError::Usage(format!("{}:{}: expected key=value, got {line:?}", origin.display(), no + 1))
        })?;
        out.insert(k.trim().replace('-', "_"), v.trim().to_owned());
    }
    Ok(out)
}

impl Config {
    pub fn load(
        file: Option<&Path>,
        flags: BTreeMap<String, String>,
        allowed: &'static [&'static str],
    ) -> Result<Self, CliError> {
        let mut values = match file {
            Some(p) => {
                let text = fs::read_to_string(p)
                    .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", p.display())))?;
                parse_kv(&text, p)?
            }
            None => BTreeMap::new(),
        };
        values.extend(flags);
        if let Some(k) = values.keys().find(|k| !allowed.contains(&k.as_str())) {
            return Err(CliError::Usage(format!("unknown config key {k:?} for this command")));
        }
        Ok(Self { values, allowed })
    }

    fn raw(&self, key: &str) -> Option<&str> {
        debug_assert!(self.allowed.contains(&key), "undeclared key {key}");
        self.values.get(key).map(String::as_str)
    }

    /// Typed value, recording the default in the echo when absent.
    pub fn get<T: FromStr + ToString>(&mut self, key: &str, default: T) -> Result<T, CliError> {
        match self.raw(key) {
            Some(s) => s
                .parse()
                .map_err(|_| CliError::Usage(format!("cannot parse {key}={s:?}"))),
            None => {
                self.values.insert(key.to_owned(), default.to_string());
                Ok(default)
            }
        }
    }

    pub fn get_opt<T: FromStr>(&self, key: &str) -> Result<Option<T>, CliError> {
        self.raw(key)
            .map(|s| s.parse().map_err(|_| CliError::Usage(format!("cannot parse {key}={s:?}"))))
            .transpose()
    }

    pub fn flag(&mut self, key: &str) -> Result<bool, CliError> {
        self.get(key, false)
    }

    pub fn list(&mut self, key: &str, default: &str) -> Result<Vec<f64>, CliError> {
        let s: String = self.get(key, default.to_owned())?;
        s.split(',')
            .map(|x| {
                x.trim()
                    .parse()
                    .map_err(|_| CliError::Usage(format!("cannot parse {key} entry {x:?}")))
            })
            .collect()
    }

    pub fn window(&mut self, default: (f64, f64)) -> Result<(f64, f64), CliError> {
        let v = self.list("window", &format!("{},{}", default.0, default.1))?;
        match v[..] {
            [a, b] if a < b => Ok((a, b)),
            _ => Err(CliError::Usage(format!("window must be two increasing numbers a,b, got {v:?}"))),
        }
    }

    pub fn out_dir(&mut self) -> Result<PathBuf, CliError> {
        let dir: String = self.get("out", ".".to_owned())?;
        let dir = PathBuf::from(dir);
        fs::create_dir_all(&dir).map_err(|e| CliError::Io(dir.clone(), e))?;
        Ok(dir)
    }

    /// The rate named by `rate` (`truncated`, `half`, `constant`) built from
    /// `lambda`, `n` and `r0`.
    pub fn rate(&mut self, default_kind: &str, lambda_default: f64, n_default: f64) -> Result<RateFunction, CliError> {
        let kind: String = self.get("rate", default_kind.to_owned())?;
        let rate = match kind.as_str() {
            "truncated" => {
                let lambda = self.get("lambda", lambda_default)?;
                RateFunction::truncated(lambda, self.get("n", n_default)?)
            }
            "half" => RateFunction::half_lambda(self.get("lambda", lambda_default)?),
            "constant" => RateFunction::constant(self.get("r0", 1.0)?),
            other => {
                return Err(CliError::Usage(format!(
                    "unknown rate kind {other:?}; expected truncated, half or constant"
                )))
            }
        };
        rate.validate().map_err(|e| CliError::Usage(e.to_string()))?;
        Ok(rate)
    }

    pub fn lines(&self) -> Vec<String> {
        self.values.iter().map(|(k, v)| format!("{k}={v}")).collect()
    }
}

pub fn require(cond: bool, msg: impl FnOnce() -> String) -> Result<(), CliError> {
    if cond {
        Ok(())
    } else {
        Err(CliError::Usage(msg()))
    }
}
