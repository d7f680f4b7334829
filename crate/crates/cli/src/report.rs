//! Line-delimited JSON reports: an environment line, one line per check,
//! and a summary footer.

use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

/// Outcome of one check. `pass` is `residual < tolerance`; sign checks store
/// the signed deficit as the residual.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Record {
    pub name: String,
    /// Which formula or identity the check exercises.
    pub formula: String,
    pub computed: f64,
    pub expected: f64,
    pub residual: f64,
    pub tolerance: f64,
    pub pass: bool,
}

impl Record {
    pub fn new(name: impl Into<String>, formula: impl Into<String>, computed: f64, expected: f64, residual: f64, tolerance: f64) -> Self {
        Record {
            name: name.into(),
            formula: formula.into(),
            computed,
            expected,
            residual,
            tolerance,
            pass: residual < tolerance,
        }
    }

    /// `|computed − expected| / max(1, |expected|)`.
    pub fn relative(name: impl Into<String>, formula: impl Into<String>, computed: f64, expected: f64, tolerance: f64) -> Self {
        let r = (computed - expected).abs() / 1f64.max(expected.abs());
        Self::new(name, formula, computed, expected, r, tolerance)
    }

    /// Passes when `computed > threshold`; the residual is `threshold − computed`.
    pub fn positive(name: impl Into<String>, formula: impl Into<String>, computed: f64, threshold: f64) -> Self {
        Self::new(name, formula, computed, threshold, threshold - computed, 0.0)
    }

    /// Passes when `computed < −threshold`; the residual is `computed + threshold`.
    pub fn negative(name: impl Into<String>, formula: impl Into<String>, computed: f64, threshold: f64) -> Self {
        Self::new(name, formula, computed, -threshold, computed + threshold, 0.0)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Environment {
    pub version: String,
    pub suite: String,
    pub seed: u64,
    pub grids: BTreeMap<String, serde_json::Value>,
    /// Seconds since the Unix epoch; excluded from reproducibility comparisons.
    pub timestamp: u64,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Summary {
    pub total: usize,
    pub passed: usize,
    pub failed: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
enum Line {
    Environment(Environment),
    Check(Record),
    Summary(Summary),
}

#[derive(Clone, Debug, PartialEq)]
pub struct Report {
    pub environment: Environment,
    pub records: Vec<Record>,
}

#[derive(Debug, thiserror::Error)]
#[error("report line {line}: {message}")]
pub struct ParseError {
    pub line: usize,
    pub message: String,
}

impl Report {
    /// Sorts records by name so output does not depend on scheduling.
    pub fn new(environment: Environment, mut records: Vec<Record>) -> Self {
        records.sort_by(|a, b| a.name.cmp(&b.name));
        Report { environment, records }
    }

    pub fn summary(&self) -> Summary {
        let passed = self.records.iter().filter(|r| r.pass).count();
        Summary { total: self.records.len(), passed, failed: self.records.len() - passed }
    }

    pub fn all_pass(&self) -> bool {
        self.records.iter().all(|r| r.pass)
    }

    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        let mut push = |l: &Line| {
            out.push_str(&serde_json::to_string(l).expect("report line serializes"));
            out.push('\n');
        };
        push(&Line::Environment(self.environment.clone()));
        for r in &self.records {
            push(&Line::Check(r.clone()));
        }
        push(&Line::Summary(self.summary()));
        out
    }

    pub fn from_jsonl(text: &str) -> Result<Self, ParseError> {
        let mut env = None;
        let mut records = Vec::new();
        let mut summary = None;
        for (i, raw) in text.lines().enumerate() {
            if raw.trim().is_empty() {
                continue;
            }
            let line: Line = serde_json::from_str(raw).map_err(|e| ParseError { line: i + 1, message: e.to_string() })?;
            match line {
                Line::Environment(e) => env = Some(e),
                Line::Check(r) => records.push(r),
                Line::Summary(s) => summary = Some(s),
            }
        }
        let environment = env.ok_or(ParseError { line: 0, message: "missing environment line".into() })?;
        let report = Report { environment, records };
        if let Some(s) = summary {
            if s != report.summary() {
                return Err(ParseError { line: 0, message: "summary footer does not match the records".into() });
            }
        }
        Ok(report)
    }

    /// Fixed-width table with a footer, for terminals.
    pub fn to_table(&self) -> String {
        let width = self.records.iter().map(|r| r.name.len()).max().unwrap_or(4).max(4);
        let mut out = format!("{:<width$}  {:>4}  {:>12}  {:>12}  {:>11}  {:>11}\n", "name", "ok", "computed", "expected", "residual", "tolerance");
        for r in &self.records {
            out.push_str(&format!(
                "{:<width$}  {:>4}  {:>12.5e}  {:>12.5e}  {:>11.3e}  {:>11.3e}\n",
                r.name,
                if r.pass { "pass" } else { "FAIL" },
                r.computed,
                r.expected,
                r.residual,
                r.tolerance
            ));
        }
        let s = self.summary();
        out.push_str(&format!(
            "suite {} seed {}: {} checks, {} passed, {} failed\n",
            self.environment.suite, self.environment.seed, s.total, s.passed, s.failed
        ));
        out
    }
}

/// The report text with the timestamp zeroed, for reproducibility checks.
pub fn without_timestamp(jsonl: &str) -> String {
    jsonl
        .lines()
        .map(|l| match serde_json::from_str::<Line>(l) {
            Ok(Line::Environment(mut e)) => {
                e.timestamp = 0;
                serde_json::to_string(&Line::Environment(e)).expect("report line serializes")
            }
            _ => l.to_string(),
        })
        .collect::<Vec<_>>()
        .join("\n")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn env() -> Environment {
        Environment { version: "0".into(), suite: "x".into(), seed: 1, grids: BTreeMap::new(), timestamp: 123 }
    }

    #[test]
    fn pass_is_residual_below_tolerance() {
        assert!(Record::relative("a", "f", 1.0, 1.0 + 1e-9, 1e-8).pass);
        assert!(!Record::relative("a", "f", 1.0, 1.1, 1e-8).pass);
        assert!(!Record::relative("a", "f", f64::NAN, 1.0, 1e-8).pass);
        assert!(Record::positive("a", "f", 2.0, 1.0).pass);
        assert!(!Record::positive("a", "f", 0.5, 1.0).pass);
        assert!(!Record::positive("a", "f", 1.0, 1.0).pass);
        assert!(Record::negative("a", "f", -2.0, 1.0).pass);
        assert!(!Record::negative("a", "f", 2.0, 0.0).pass);
    }

    #[test]
    fn jsonl_roundtrip_sorted() {
        let r = Report::new(env(), vec![Record::relative("b", "f", 1.0, 1.0, 1.0), Record::relative("a", "f", 1.0, 2.0, 1e-3)]);
        assert_eq!(r.records[0].name, "a");
        let text = r.to_jsonl();
        assert_eq!(text.lines().count(), 4);
        let back = Report::from_jsonl(&text).unwrap();
        assert_eq!(back, r);
        assert_eq!(back.summary(), Summary { total: 2, passed: 1, failed: 1 });
        assert!(!back.all_pass());
    }

    #[test]
    fn timestamp_is_ignored() {
        let a = Report::new(env(), vec![]);
        let mut b = a.clone();
        b.environment.timestamp = 999;
        assert_ne!(a.to_jsonl(), b.to_jsonl());
        assert_eq!(without_timestamp(&a.to_jsonl()), without_timestamp(&b.to_jsonl()));
    }

    #[test]
    fn tampered_footer_is_rejected() {
        let text = Report::new(env(), vec![Record::relative("a", "f", 1.0, 1.0, 1.0)]).to_jsonl();
        let bad = text.replace("\"passed\":1", "\"passed\":0");
        assert!(Report::from_jsonl(&bad).is_err());
        assert!(Report::from_jsonl("not json").is_err());
    }
}
