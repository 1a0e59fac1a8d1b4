use std::time::Instant;

use indexmap::IndexMap;
use serde::Serialize;
use serde_json::Value;
use sha2::{Digest, Sha256};

/// One pass/fail comparison.
#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub name: String,
    pub kind: String,
    pub passed: bool,
    pub measured: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub expected: Option<String>,
}

/// Machine-readable summary written as `report.json` after every run.
#[derive(Debug, Clone, Serialize)]
pub struct RunReport {
    pub task: String,
    pub status: String,
    pub exit_code: u8,
    /// SHA-256 over the configuration bytes and the seed.
    pub inputs_digest: String,
    pub seed: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub family: Option<String>,
    pub anchors: IndexMap<String, Vec<f64>>,
    pub bindings: IndexMap<String, f64>,
    pub outputs: Vec<String>,
    /// Cycle notation, base-point labels by descending imaginary part.
    pub permutations: IndexMap<String, String>,
    pub checks: Vec<Check>,
    pub details: IndexMap<String, Value>,
    /// Wall-clock seconds per stage.
    pub timings: IndexMap<String, f64>,
    pub warnings: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

pub fn inputs_digest(config: &[u8], seed: u64) -> String {
    let mut h = Sha256::new();
    h.update(config);
    h.update(b"\0seed=");
    h.update(seed.to_le_bytes());
    h.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

impl RunReport {
    pub fn new(task: &str, inputs_digest: String, seed: u64) -> Self {
        Self {
            task: task.to_string(),
            status: "ok".into(),
            exit_code: 0,
            inputs_digest,
            seed,
            family: None,
            anchors: IndexMap::new(),
            bindings: IndexMap::new(),
            outputs: Vec::new(),
            permutations: IndexMap::new(),
            checks: Vec::new(),
            details: IndexMap::new(),
            timings: IndexMap::new(),
            warnings: Vec::new(),
            error: None,
        }
    }

    pub fn check(&mut self, name: &str, kind: &str, passed: bool, measured: String, expected: Option<String>) {
        self.checks.push(Check {
            name: name.to_string(),
            kind: kind.to_string(),
            passed,
            measured,
            expected,
        });
    }

    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn detail(&mut self, key: &str, value: impl Serialize) {
        self.details
            .insert(key.to_string(), serde_json::to_value(value).unwrap_or(Value::Null));
    }

    /// Runs `f` and records its duration under `stage`.
    pub fn timed<T>(&mut self, stage: &str, f: impl FnOnce(&mut Self) -> T) -> T {
        let start = Instant::now();
        let out = f(self);
        *self.timings.entry(stage.to_string()).or_insert(0.0) += start.elapsed().as_secs_f64();
        out
    }
}
