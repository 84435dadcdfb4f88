//! Run reports: a stable JSON body with no timestamps, so identical inputs
//! give identical bytes.

use hj_core::CheckReport;
use serde_json::{json, Map, Value};
use sha2::{Digest, Sha256};

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

/// Finite floats as numbers; infinities and NaN as strings.
pub fn number(v: f64) -> Value {
    if v.is_finite() {
        json!(v)
    } else {
        json!(v.to_string())
    }
}

pub fn check_json(r: &CheckReport) -> Value {
    let point: Map<String, Value> = r.worst_point.iter().map(|(k, v)| (k.clone(), number(*v))).collect();
    let mut m = Map::new();
    m.insert("label".into(), json!(r.label));
    m.insert("passed".into(), json!(r.passed));
    m.insert("n_samples".into(), json!(r.n_samples));
    m.insert("max_abs_residual".into(), number(r.max_abs_residual));
    m.insert("tolerance".into(), number(r.tolerance));
    m.insert("seed".into(), json!(r.seed));
    m.insert("worst_point".into(), Value::Object(point));
    if let Some(note) = &r.note {
        m.insert("note".into(), json!(note));
    }
    if !r.children.is_empty() {
        m.insert(
            "children".into(),
            Value::Array(r.children.iter().map(check_json).collect()),
        );
    }
    Value::Object(m)
}

/// Options that shaped a run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunOptions {
    pub seed: u64,
    pub samples: usize,
    pub tol: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct RunReport {
    pub command: String,
    pub model: String,
    pub model_sha256: String,
    pub options: RunOptions,
    pub checks: Vec<CheckReport>,
    pub details: Map<String, Value>,
}

impl RunReport {
    pub fn new(command: &str, model: &crate::model::LoadedModel, options: RunOptions) -> RunReport {
        RunReport {
            command: command.into(),
            model: model.file.name.clone(),
            model_sha256: model.sha256.clone(),
            options,
            checks: Vec::new(),
            details: Map::new(),
        }
    }

    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn detail(&mut self, key: &str, value: Value) {
        self.details.insert(key.into(), value);
    }

    pub fn to_json(&self) -> Value {
        json!({
            "tool": "hj-lab",
            "version": env!("CARGO_PKG_VERSION"),
            "command": self.command,
            "model": { "name": self.model, "sha256": self.model_sha256 },
            "options": {
                "seed": self.options.seed,
                "samples": self.options.samples,
                "tol": self.options.tol.map_or(Value::Null, number),
            },
            "passed": self.passed(),
            "checks": self.checks.iter().map(check_json).collect::<Vec<_>>(),
            "details": Value::Object(self.details.clone()),
        })
    }

    pub fn render(&self) -> String {
        let mut s = serde_json::to_string_pretty(&self.to_json()).expect("serialisable report");
        s.push('\n');
        s
    }

    /// One line per top-level check, for the terminal.
    pub fn summary(&self) -> String {
        let mut s = String::new();
        for c in &self.checks {
            s.push_str(&format!(
                "{:<5} {} (max residual {:e}, tol {:e})\n",
                if c.passed { "PASS" } else { "FAIL" },
                c.label,
                c.max_abs_residual,
                c.tolerance
            ));
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sha256_of_empty_input() {
        assert_eq!(
            sha256_hex(b""),
            "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855"
        );
    }

    #[test]
    fn non_finite_numbers_become_strings() {
        assert_eq!(number(1.5), json!(1.5));
        assert_eq!(number(f64::INFINITY), json!("inf"));
        assert_eq!(number(f64::NAN), json!("NaN"));
    }

    #[test]
    fn report_passes_only_if_every_check_passes() {
        let model = crate::model::LoadedModel::from_bytes(br#"{ "name": "m" }"#).unwrap();
        let opts = RunOptions {
            seed: 1,
            samples: 3,
            tol: None,
        };
        let mut r = RunReport::new("x", &model, opts);
        assert!(r.passed());
        let mut c = CheckReport {
            label: "a".into(),
            n_samples: 3,
            max_abs_residual: 0.0,
            tolerance: 1e-9,
            passed: true,
            worst_point: Default::default(),
            seed: 1,
            children: Vec::new(),
            note: None,
        };
        r.checks.push(c.clone());
        assert!(r.passed());
        c.passed = false;
        c.label = "b".into();
        r.checks.push(c);
        assert!(!r.passed());
        assert_eq!(r.to_json()["options"]["tol"], Value::Null);
        assert_eq!(r.summary().lines().collect::<Vec<_>>().len(), 2);
        assert!(r.summary().starts_with("PASS  a"));
        assert!(r.render().ends_with("}\n"));
    }
}
