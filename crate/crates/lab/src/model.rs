//! Model files: JSON documents whose expressions are strings in the
//! `hj-core` grammar. Unknown keys are rejected at every level.

use std::collections::BTreeMap;

use hj_core::phase::Chart;
use hj_core::{Domain, Expr};
use serde::Deserialize;

use crate::CliError;

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelFile {
    pub name: String,
    #[serde(default)]
    pub description: Option<String>,
    #[serde(default)]
    pub chart: Option<ChartSpec>,
    /// Free symbols other than coordinates (energies, masses, family labels).
    #[serde(default)]
    pub parameters: Vec<String>,
    #[serde(default)]
    pub domain: Option<DomainSpec>,
    #[serde(default)]
    pub hamiltonian: Option<String>,
    /// Level value `E` in `H ∘ α = E`.
    #[serde(default)]
    pub energy: Option<String>,
    #[serde(default)]
    pub oneform: Option<Vec<String>>,
    #[serde(default, rename = "W")]
    pub w: Option<String>,
    #[serde(default)]
    pub lagrangian: Option<LagrangianSpec>,
    #[serde(default)]
    pub vectorfields: Option<Vec<VectorFieldSpec>>,
    #[serde(default)]
    pub operator: Option<OperatorSpec>,
    #[serde(default)]
    pub quantum: Option<QuantumSpec>,
    #[serde(default)]
    pub joint: Option<JointSpec>,
    #[serde(default)]
    pub flow: Option<FlowSpec>,
    #[serde(default)]
    pub group: Option<GroupSpec>,
    #[serde(default)]
    pub tolerances: Option<Tolerances>,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub samples: Option<usize>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChartSpec {
    pub q: Vec<String>,
    pub p: Vec<String>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DomainSpec {
    /// Sampling interval per variable.
    pub vars: BTreeMap<String, [f64; 2]>,
    /// Keep only samples where each expression is at least `margin`.
    #[serde(default)]
    pub at_least: Vec<String>,
    /// Keep only samples where each expression is at least `margin` away from 0.
    #[serde(default)]
    pub avoid_zero: Vec<String>,
    #[serde(default)]
    pub margin: Option<f64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LagrangianSpec {
    pub q: Vec<String>,
    pub u: Vec<String>,
    #[serde(rename = "L")]
    pub l: String,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VectorFieldSpec {
    pub name: String,
    pub components: Vec<String>,
    /// Family parameters; when present the completeness check runs.
    #[serde(default)]
    pub parameters: Vec<String>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OperatorSpec {
    pub vars: Vec<String>,
    pub terms: Vec<TermSpec>,
    #[serde(default)]
    pub homogenize: Option<String>,
    /// Expected classification of the second-order symbol.
    #[serde(default)]
    pub expect: Option<String>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TermSpec {
    /// Multi-index of derivative orders, one entry per operator variable.
    pub index: Vec<u32>,
    pub coef: String,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QuantumSpec {
    #[serde(default = "default_q")]
    pub q: String,
    #[serde(default = "default_t")]
    pub t: String,
    #[serde(default = "default_m")]
    pub m: String,
    #[serde(default = "default_hbar")]
    pub hbar: String,
    pub potential: String,
    pub action: String,
    #[serde(default)]
    pub jwkb: Option<JwkbSpec>,
}

fn default_q() -> String {
    "q".into()
}
fn default_t() -> String {
    "t".into()
}
fn default_m() -> String {
    "m".into()
}
fn default_hbar() -> String {
    "hbar".into()
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct JwkbSpec {
    pub m: f64,
    pub omega: f64,
    pub hbar: f64,
    /// Points per axis of the `(q, Q, t)` grid.
    #[serde(default = "default_grid")]
    pub grid: usize,
}

fn default_grid() -> usize {
    10
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct JointSpec {
    pub observables: Vec<String>,
    pub targets: Vec<String>,
    #[serde(rename = "W")]
    pub w: String,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FlowSpec {
    #[serde(default)]
    pub params: BTreeMap<String, f64>,
    #[serde(default)]
    pub z0: Option<Vec<f64>>,
    #[serde(default)]
    pub tmax: Option<f64>,
    #[serde(default)]
    pub dt: Option<f64>,
    #[serde(default)]
    pub method: Option<String>,
    /// Time variable of a time-dependent `H`; the flow then runs on the
    /// extended space with state `(q, p, t, h)`.
    #[serde(default)]
    pub time: Option<String>,
    /// Largest accepted change of the monitored Hamiltonian.
    #[serde(default)]
    pub max_drift: Option<f64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GroupSpec {
    pub dimension: usize,
    /// `[r, s, t, value]` with `C^t_{rs} = value`, indices from 1.
    #[serde(default)]
    pub constants: Vec<(usize, usize, usize, f64)>,
    /// `f^r` over `a1..ak` (left factor) and `b1..bk` (right factor).
    pub composition: Vec<String>,
    #[serde(default)]
    pub realization: Option<RealizationSpec>,
    #[serde(default)]
    pub cocycle: Option<Vec<Vec<f64>>>,
    /// Candidate `S(q; a)` for the group HJ system.
    #[serde(default)]
    pub solution: Option<String>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RealizationSpec {
    pub chart: ChartSpec,
    pub hamiltonians: Vec<String>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Tolerances {
    #[serde(default)]
    pub default: Option<f64>,
}

/// A parsed model file with its raw bytes kept for hashing.
#[derive(Debug, Clone)]
pub struct LoadedModel {
    pub file: ModelFile,
    pub sha256: String,
}

impl LoadedModel {
    pub fn from_bytes(bytes: &[u8]) -> Result<LoadedModel, CliError> {
        let file: ModelFile = serde_json::from_slice(bytes).map_err(|e| CliError::Model(e.to_string()))?;
        Ok(LoadedModel {
            file,
            sha256: crate::report::sha256_hex(bytes),
        })
    }

    pub fn load(path: &std::path::Path) -> Result<LoadedModel, CliError> {
        let bytes = std::fs::read(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        LoadedModel::from_bytes(&bytes)
    }
}

pub fn missing(section: &str) -> CliError {
    CliError::Model(format!("missing section `{section}`"))
}

impl ModelFile {
    pub fn chart(&self) -> Result<Chart, CliError> {
        let c = self.chart.as_ref().ok_or_else(|| missing("chart"))?;
        Ok(Chart::new(&c.q, &c.p)?)
    }

    /// Chart coordinates plus declared parameters.
    pub fn declared(&self) -> Vec<String> {
        let mut out: Vec<String> = self
            .chart
            .iter()
            .flat_map(|c| c.q.iter().chain(&c.p).cloned())
            .collect();
        out.extend(self.parameters.iter().cloned());
        out
    }

    pub fn domain(&self) -> Result<Domain, CliError> {
        let spec = self.domain.as_ref().ok_or_else(|| missing("domain"))?;
        domain_from(spec, &self.domain_names())
    }

    /// Every name the domain may mention.
    fn domain_names(&self) -> Vec<String> {
        let mut out = self.declared();
        if let Some(l) = &self.lagrangian {
            out.extend(l.q.iter().chain(&l.u).cloned());
        }
        if let Some(o) = &self.operator {
            out.extend(o.vars.iter().cloned());
        }
        if let Some(q) = &self.quantum {
            out.extend([q.q.clone(), q.t.clone(), q.m.clone(), q.hbar.clone()]);
        }
        if let Some(g) = &self.group {
            if let Some(r) = &g.realization {
                out.extend(r.chart.q.iter().chain(&r.chart.p).cloned());
            }
        }
        out
    }

    /// Domain with `defaults` filled in for any listed variable the model
    /// leaves unbound.
    pub fn domain_with_defaults(&self, defaults: &[(String, f64, f64)]) -> Result<Domain, CliError> {
        let mut dom = match &self.domain {
            Some(spec) => {
                let mut names = self.domain_names();
                names.extend(defaults.iter().map(|(n, _, _)| n.clone()));
                domain_from(spec, &names)?
            }
            None => Domain::new(),
        };
        for (n, lo, hi) in defaults {
            if !dom.contains_var(n) {
                dom.set(n, *lo, *hi);
            }
        }
        Ok(dom)
    }

    pub fn tolerance(&self) -> Option<f64> {
        self.tolerances.as_ref().and_then(|t| t.default)
    }
}

fn domain_from(spec: &DomainSpec, declared: &[String]) -> Result<Domain, CliError> {
    let mut dom = Domain::new();
    for (name, [lo, hi]) in &spec.vars {
        if !declared.contains(name) {
            return Err(CliError::Model(format!("domain variable `{name}` is not declared")));
        }
        if !(lo <= hi) {
            return Err(CliError::Model(format!("empty interval for `{name}`")));
        }
        dom.set(name, *lo, *hi);
    }
    let margin = spec.margin.unwrap_or(0.0);
    for text in &spec.at_least {
        dom = dom.at_least(parse(text, declared)?, margin);
    }
    for text in &spec.avoid_zero {
        dom = dom.avoid_zero_by(parse(text, declared)?, margin);
    }
    Ok(dom)
}

pub fn parse<S: AsRef<str>>(text: &str, declared: &[S]) -> Result<Expr, CliError> {
    Expr::parse_declared(text, declared).map_err(|e| CliError::Model(format!("`{text}`: {e}")))
}

pub fn parse_all<S: AsRef<str>>(texts: &[String], declared: &[S]) -> Result<Vec<Expr>, CliError> {
    texts.iter().map(|t| parse(t, declared)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    const CIRCLE: &str = r#"{
        "name": "c", "chart": { "q": ["q"], "p": ["p"] }, "parameters": ["E"],
        "domain": { "vars": { "q": [-1, 1], "E": [0.5, 2] }, "at_least": ["E - q^2"], "margin": 0.1 }
    }"#;

    #[test]
    fn hash_is_of_the_raw_bytes() {
        let a = LoadedModel::from_bytes(CIRCLE.as_bytes()).unwrap();
        let b = LoadedModel::from_bytes(format!("{CIRCLE}\n").as_bytes()).unwrap();
        assert_eq!(a.sha256.len(), 64);
        assert_ne!(a.sha256, b.sha256);
    }

    #[test]
    fn domain_constraints_are_applied() {
        let m = LoadedModel::from_bytes(CIRCLE.as_bytes()).unwrap().file;
        let dom = m.domain().unwrap();
        assert!(dom.contains_var("q") && dom.contains_var("E"));
        assert_eq!(m.declared(), vec!["q", "p", "E"]);
    }

    #[test]
    fn undeclared_domain_variable_is_rejected() {
        let text = CIRCLE.replace("\"E\": [0.5, 2]", "\"F\": [0.5, 2]");
        let m = LoadedModel::from_bytes(text.as_bytes()).unwrap().file;
        assert!(matches!(m.domain(), Err(CliError::Model(_))));
    }

    #[test]
    fn empty_interval_is_rejected() {
        let text = CIRCLE.replace("[-1, 1]", "[1, -1]");
        let m = LoadedModel::from_bytes(text.as_bytes()).unwrap().file;
        assert!(m.domain().is_err());
    }

    #[test]
    fn defaults_fill_only_unbound_variables() {
        let m = LoadedModel::from_bytes(CIRCLE.as_bytes()).unwrap().file;
        let dom = m
            .domain_with_defaults(&[("q".into(), 5.0, 6.0), ("a1".into(), -1.0, 1.0)])
            .unwrap();
        assert!(dom.contains_var("a1"));
        let pts = dom.sample(20, 3).unwrap();
        assert!((0..pts.rows.len()).all(|i| pts.point(i)["q"].abs() <= 1.0));
    }

    #[test]
    fn group_constants_use_four_tuples() {
        let text = r#"{ "name": "g", "group": { "dimension": 2, "constants": [[1, 2, 2, 1.0]],
                       "composition": ["a1 + b1", "a2 + exp(a1)*b2"] } }"#;
        let m = LoadedModel::from_bytes(text.as_bytes()).unwrap().file;
        assert_eq!(m.group.unwrap().constants, vec![(1, 2, 2, 1.0)]);
    }
}
