//! Joint HJ problems: one generating function `W` solving `ψ*Aᵢ = aᵢ` for
//! several observables at once, where `ψ: q ↦ (q, ∇W)`.
//!
//! The necessary condition `ψ*{Aᵢ, Aⱼ} = 0` follows from the restricted
//! bracket identity `ψ*{A, B} = ψ*(L_{X_B} ψ*A - L_{X_A} ψ*B)`; it is not
//! sufficient.

use alloc::format;
use alloc::vec::Vec;

use crate::check::{check_vanishing, CheckOptions, CheckReport, Domain};
use crate::expr::{sum, Expr};
use crate::phase::{closedness_check, hamiltonian_vector_field, poisson_bracket, pullback, Chart, OneForm};
use crate::{Error, Result};

/// Observables `Aᵢ` with target values `aᵢ` and a candidate `W(q)`.
#[derive(Debug, Clone, PartialEq)]
pub struct JointProblem {
    pub chart: Chart,
    pub observables: Vec<Expr>,
    pub targets: Vec<Expr>,
    pub w: Expr,
}

impl JointProblem {
    pub fn new(chart: Chart, observables: Vec<Expr>, targets: Vec<Expr>, w: Expr) -> Result<JointProblem> {
        if observables.len() != targets.len() {
            return Err(Error::Dimension(format!(
                "{} observables but {} targets",
                observables.len(),
                targets.len()
            )));
        }
        if observables.len() > chart.dim() {
            return Err(Error::Dimension(format!(
                "{} observables on a {}-dimensional base",
                observables.len(),
                chart.dim()
            )));
        }
        if let Some(p) = chart.p.iter().find(|p| w.depends_on(p)) {
            return Err(Error::InvalidStructure(format!("W depends on the momentum `{p}`")));
        }
        Ok(JointProblem {
            chart,
            observables,
            targets,
            w,
        })
    }

    fn section(&self) -> OneForm {
        OneForm::exact(&self.w, &self.chart)
    }
}

/// `ψ*{A, B}`: the canonical bracket at `p = ∇W`.
pub fn restricted_bracket_lhs(a: &Expr, b: &Expr, w: &Expr, chart: &Chart) -> Result<Expr> {
    pullback(&poisson_bracket(a, b, chart), &OneForm::exact(w, chart), chart)
}

/// `ψ*(L_{X_B} ψ*A - L_{X_A} ψ*B)`, built from the Hamiltonian fields and the
/// fibre-constant pullbacks.
pub fn restricted_bracket_rhs(a: &Expr, b: &Expr, w: &Expr, chart: &Chart) -> Result<Expr> {
    let alpha = OneForm::exact(w, chart);
    let pa = pullback(a, &alpha, chart)?;
    let pb = pullback(b, &alpha, chart)?;
    let coords = chart.coords();
    // Lie derivative of a function of q alone along a phase-space field.
    let lie = |field: &[Expr], f: &Expr| sum(field.iter().zip(&coords).map(|(x, z)| x * f.diff(z)));
    let xa = hamiltonian_vector_field(a, chart);
    let xb = hamiltonian_vector_field(b, chart);
    let raw = lie(&xb, &pa) - lie(&xa, &pb);
    pullback(&raw, &alpha, chart)
}

/// Pairwise results of the necessary condition.
#[derive(Debug, Clone, PartialEq)]
pub struct NecessaryReport {
    /// `pairs[i][j]` checks `ψ*{Aᵢ, Aⱼ}`; the diagonal is trivially zero.
    pub pairs: Vec<Vec<CheckReport>>,
    pub summary: CheckReport,
}

/// Sampled vanishing of `ψ*{Aᵢ, Aⱼ}` for every pair.
pub fn joint_necessary_check(problem: &JointProblem, dom: &Domain, opts: &CheckOptions) -> Result<NecessaryReport> {
    let k = problem.observables.len();
    let mut pairs = Vec::with_capacity(k);
    let mut upper = Vec::new();
    for i in 0..k {
        let mut row = Vec::with_capacity(k);
        for j in 0..k {
            let r = restricted_bracket_lhs(
                &problem.observables[i],
                &problem.observables[j],
                &problem.w,
                &problem.chart,
            )?;
            let rep = check_vanishing(&format!("bracket[{i},{j}]"), &[r], dom, opts)?;
            if i < j {
                upper.push(rep.clone());
            }
            row.push(rep);
        }
        pairs.push(row);
    }
    let summary = CheckReport::aggregate("joint-necessary", upper);
    Ok(NecessaryReport { pairs, summary })
}

/// Sampled `ψ*(Aᵢ - aᵢ) = 0` for each observable, plus closedness of `dW`.
pub fn joint_hj_check(problem: &JointProblem, dom: &Domain, opts: &CheckOptions) -> Result<CheckReport> {
    let alpha = problem.section();
    let mut children = Vec::with_capacity(problem.observables.len() + 1);
    for (i, (a, target)) in problem.observables.iter().zip(&problem.targets).enumerate() {
        let r = pullback(a, &alpha, &problem.chart)? - target;
        children.push(check_vanishing(&format!("level[{i}]"), &[r], dom, opts)?);
    }
    children.push(closedness_check(&alpha, &problem.chart, dom, opts)?);
    Ok(CheckReport::aggregate("joint-hj", children))
}

/// `½[s√(2E - s²) + 2E asin(s/√(2E))]`, an antiderivative of `√(2E - s²)`.
pub fn circle_antiderivative(s: &Expr, e: &Expr) -> Expr {
    let two_e = 2.0 * e;
    let root = (&two_e - s.powi(2)).sqrt();
    (s * root + &two_e * (s / two_e.sqrt()).asin()) / 2.0
}
