//! Machine-readable verdicts shared by the law checks and the CLI.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use serde_json::Value;

/// `{statistic, threshold, pass, meta}`; passes when `statistic < threshold`
/// unless built with another comparison.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LawCheck {
    pub statistic: f64,
    pub threshold: f64,
    pub pass: bool,
    #[serde(default)]
    pub meta: BTreeMap<String, Value>,
}

impl LawCheck {
    pub fn below(statistic: f64, threshold: f64) -> Self {
        Self {
            statistic,
            threshold,
            pass: statistic < threshold,
            meta: BTreeMap::new(),
        }
    }

    pub fn at_least(statistic: f64, threshold: f64) -> Self {
        Self {
            statistic,
            threshold,
            pass: statistic >= threshold,
            meta: BTreeMap::new(),
        }
    }

    pub fn with(mut self, key: &str, value: impl Into<Value>) -> Self {
        self.meta.insert(key.to_owned(), value.into());
        self
    }
}
