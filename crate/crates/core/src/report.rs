//! One-line JSON records emitted by every check.

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub check: String,
    pub pass: bool,
    pub params: Map<String, Value>,
    pub estimate: f64,
    pub stderr: f64,
    pub analytic: f64,
    pub n: usize,
    pub seed: u64,
}

impl Report {
    pub fn new(check: impl Into<String>, pass: bool, seed: u64) -> Self {
        Report {
            check: check.into(),
            pass,
            params: Map::new(),
            estimate: f64::NAN,
            stderr: f64::NAN,
            analytic: f64::NAN,
            n: 0,
            seed,
        }
    }

    pub fn param(mut self, key: &str, value: impl Serialize) -> Self {
        self.params
            .insert(key.to_string(), serde_json::to_value(value).unwrap_or(Value::Null));
        self
    }

    pub fn values(mut self, estimate: f64, stderr: f64, analytic: f64, n: usize) -> Self {
        self.estimate = estimate;
        self.stderr = stderr;
        self.analytic = analytic;
        self.n = n;
        self
    }

    /// Non-finite numbers are written as `null`.
    pub fn to_json_line(&self) -> String {
        serde_json::to_string(self).expect("report serializes")
    }
}
