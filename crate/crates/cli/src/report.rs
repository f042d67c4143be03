use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Relation {
    AtMost,
    AtLeast,
    Above,
    Below,
    /// Bitwise equality of repeated results.
    Identical,
}

impl fmt::Display for Relation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Relation::AtMost => "<=",
            Relation::AtLeast => ">=",
            Relation::Above => ">",
            Relation::Below => "<",
            Relation::Identical => "==",
        })
    }
}

/// One pass/fail comparison of a measured value against a threshold.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub measured: f64,
    pub relation: Relation,
    pub threshold: f64,
    pub passed: bool,
}

impl Check {
    pub fn new(name: impl Into<String>, measured: f64, relation: Relation, threshold: f64) -> Self {
        let passed = match relation {
            Relation::AtMost => measured <= threshold,
            Relation::AtLeast => measured >= threshold,
            Relation::Above => measured > threshold,
            Relation::Below => measured < threshold,
            Relation::Identical => measured.to_bits() == threshold.to_bits(),
        };
        Check {
            name: name.into(),
            measured,
            relation,
            threshold,
            passed,
        }
    }

    pub fn at_most(name: impl Into<String>, measured: f64, threshold: f64) -> Self {
        Self::new(name, measured, Relation::AtMost, threshold)
    }

    pub fn at_least(name: impl Into<String>, measured: f64, threshold: f64) -> Self {
        Self::new(name, measured, Relation::AtLeast, threshold)
    }

    pub fn above(name: impl Into<String>, measured: f64, threshold: f64) -> Self {
        Self::new(name, measured, Relation::Above, threshold)
    }

    pub fn below(name: impl Into<String>, measured: f64, threshold: f64) -> Self {
        Self::new(name, measured, Relation::Below, threshold)
    }
}

impl fmt::Display for Check {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mark = if self.passed { "ok" } else { "FAILED" };
        write!(
            f,
            "{}: {:.6e} {} {:.6e} [{mark}]",
            self.name, self.measured, self.relation, self.threshold
        )
    }
}

/// Outcome of a single scenario run. Contains no timing information, so two
/// runs of the same configuration serialize identically.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub kind: String,
    pub seed: u64,
    pub config_hash: String,
    pub config: serde_json::Value,
    pub metrics: BTreeMap<String, f64>,
    pub checks: Vec<Check>,
    pub passed: bool,
}

impl RunReport {
    pub fn new(
        kind: &str,
        seed: u64,
        config: serde_json::Value,
        metrics: BTreeMap<String, f64>,
        checks: Vec<Check>,
    ) -> Self {
        let passed = checks.iter().all(|c| c.passed);
        RunReport {
            kind: kind.to_string(),
            seed,
            config_hash: content_hash(&config),
            config,
            metrics,
            checks,
            passed,
        }
    }
}

/// Git-style object hash: SHA-256 of `blob <len>\0<canonical JSON>`.
pub fn content_hash(value: &serde_json::Value) -> String {
    let body = serde_json::to_vec(value).expect("JSON values serialize");
    let mut h = Sha256::new();
    h.update(format!("blob {}\0", body.len()).as_bytes());
    h.update(&body);
    hex::encode(h.finalize())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn relations() {
        assert!(Check::at_most("a", 1.0, 1.0).passed);
        assert!(!Check::below("a", 1.0, 1.0).passed);
        assert!(!Check::at_most("a", f64::NAN, 1.0).passed);
        assert!(Check::new("a", 0.1, Relation::Identical, 0.1).passed);
        assert!(!Check::new("a", 0.0, Relation::Identical, -0.0).passed);
    }

    #[test]
    fn hash_is_stable_and_sensitive() {
        let a = serde_json::json!({"x": 1.0, "y": [1, 2]});
        let b = serde_json::json!({"x": 1.5, "y": [1, 2]});
        assert_eq!(content_hash(&a), content_hash(&a.clone()));
        assert_ne!(content_hash(&a), content_hash(&b));
        assert_eq!(content_hash(&a).len(), 64);
    }
}
