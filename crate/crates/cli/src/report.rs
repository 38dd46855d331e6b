use std::collections::BTreeMap;
use std::path::Path;

use anyhow::Result;
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::config::Cmp;

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

/// Seed of the named sub-stream `label` under `root`.
pub fn sub_seed(root: u64, label: &str) -> u64 {
    let mut h = Sha256::new();
    h.update(root.to_le_bytes());
    h.update(label.as_bytes());
    let d = h.finalize();
    u64::from_le_bytes(d[..8].try_into().expect("digest has 32 bytes"))
}

#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub name: String,
    pub measured: f64,
    pub expected: f64,
    pub tolerance: f64,
    pub cmp: Cmp,
    pub pass: bool,
    /// Runtime budgets depend on the machine; they are left out of the
    /// report hash.
    #[serde(skip_serializing_if = "std::ops::Not::not")]
    pub timing: bool,
}

impl Check {
    pub fn within(name: impl Into<String>, measured: f64, expected: f64, tolerance: f64) -> Self {
        let pass = (measured - expected).abs() <= tolerance;
        Check { name: name.into(), measured, expected, tolerance, cmp: Cmp::Within, pass, timing: false }
    }

    /// Relative tolerance `rel * |expected|`.
    pub fn rel(name: impl Into<String>, measured: f64, expected: f64, rel: f64) -> Self {
        Check::within(name, measured, expected, rel * expected.abs())
    }

    pub fn at_most(name: impl Into<String>, measured: f64, bound: f64) -> Self {
        let pass = measured <= bound;
        Check { name: name.into(), measured, expected: bound, tolerance: 0.0, cmp: Cmp::AtMost, pass, timing: false }
    }

    pub fn at_least(name: impl Into<String>, measured: f64, bound: f64) -> Self {
        let pass = measured >= bound;
        Check { name: name.into(), measured, expected: bound, tolerance: 0.0, cmp: Cmp::AtLeast, pass, timing: false }
    }

    /// Pass/fail flag as a check against 1.
    pub fn flag(name: impl Into<String>, ok: bool) -> Self {
        Check::at_least(name, f64::from(u8::from(ok)), 1.0)
    }

    pub fn runtime(name: impl Into<String>, seconds: f64, budget: f64) -> Self {
        Check { timing: true, ..Check::at_most(name, seconds, budget) }
    }

    pub fn from_cmp(name: impl Into<String>, measured: f64, expected: f64, tolerance: f64, cmp: Cmp) -> Self {
        match cmp {
            Cmp::Within => Check::within(name, measured, expected, tolerance),
            Cmp::AtMost => Check::at_most(name, measured, expected),
            Cmp::AtLeast => Check::at_least(name, measured, expected),
        }
    }

    pub fn line(&self) -> String {
        let rel = match self.cmp {
            Cmp::Within => format!("= {} +- {}", self.expected, self.tolerance),
            Cmp::AtMost => format!("<= {}", self.expected),
            Cmp::AtLeast => format!(">= {}", self.expected),
        };
        let verdict = if self.pass { "PASS" } else { "FAIL" };
        format!("{verdict}  {:<40} {:.6} {rel}", self.name, self.measured)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct RunReport {
    pub kind: String,
    pub config_hash: String,
    pub seed: u64,
    pub versions: BTreeMap<String, String>,
    pub wall_time_s: f64,
    pub metrics: BTreeMap<String, f64>,
    pub checks: Vec<Check>,
    pub artifacts: Vec<String>,
    pub passed: bool,
    /// Hash of everything above except wall time and timing checks.
    pub report_hash: String,
}

#[derive(Serialize)]
struct Hashed<'a> {
    kind: &'a str,
    config_hash: &'a str,
    seed: u64,
    versions: &'a BTreeMap<String, String>,
    metrics: &'a BTreeMap<String, f64>,
    checks: Vec<&'a Check>,
    artifacts: &'a [String],
}

pub fn versions() -> BTreeMap<String, String> {
    BTreeMap::from([
        ("fwlab".to_string(), env!("CARGO_PKG_VERSION").to_string()),
        ("fwlab-core".to_string(), fwlab_core::VERSION.to_string()),
    ])
}

impl RunReport {
    pub fn new(
        kind: &str,
        config_hash: String,
        seed: u64,
        wall_time_s: f64,
        metrics: BTreeMap<String, f64>,
        checks: Vec<Check>,
        artifacts: Vec<String>,
    ) -> Result<Self> {
        let mut r = RunReport {
            kind: kind.to_string(),
            config_hash,
            seed,
            versions: versions(),
            wall_time_s,
            passed: checks.iter().all(|c| c.pass),
            metrics,
            checks,
            artifacts,
            report_hash: String::new(),
        };
        r.report_hash = r.content_hash()?;
        Ok(r)
    }

    fn content_hash(&self) -> Result<String> {
        let h = Hashed {
            kind: &self.kind,
            config_hash: &self.config_hash,
            seed: self.seed,
            versions: &self.versions,
            metrics: &self.metrics,
            checks: self.checks.iter().filter(|c| !c.timing).collect(),
            artifacts: &self.artifacts,
        };
        Ok(sha256_hex(serde_json::to_string(&h)?.as_bytes()))
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, serde_json::to_string_pretty(self)? + "\n")?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hash_ignores_timing() {
        let mk = |t: f64| {
            RunReport::new(
                "x",
                "h".into(),
                1,
                t,
                BTreeMap::new(),
                vec![Check::within("a", 1.0, 1.0, 0.0), Check::runtime("r", t, 10.0)],
                vec![],
            )
            .unwrap()
        };
        let (a, b) = (mk(1.0), mk(20.0));
        assert_eq!(a.report_hash, b.report_hash);
        assert!(a.passed && !b.passed);
    }

    #[test]
    fn sub_seeds_differ_by_label() {
        assert_ne!(sub_seed(1, "a"), sub_seed(1, "b"));
        assert_eq!(sub_seed(1, "a"), sub_seed(1, "a"));
    }

    #[test]
    fn comparisons() {
        assert!(Check::within("w", 1.04, 1.0, 0.05).pass);
        assert!(!Check::rel("r", 1.06, 1.0, 0.05).pass);
        assert!(Check::at_most("m", 0.3, 0.3).pass);
        assert!(!Check::at_least("l", 0.2, 0.3).pass);
        assert!(!Check::flag("f", false).pass);
    }
}
