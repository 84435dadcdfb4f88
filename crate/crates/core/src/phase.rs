//! Cotangent-bundle calculus in canonical coordinates `(q, p)`.
//!
//! Sign conventions: `{q, p} = 1`, and the Hamiltonian vector field of `H`
//! has components `(∂H/∂p, -∂H/∂q)`.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use crate::check::{check_vanishing, CheckOptions, CheckReport, Domain};
use crate::expr::{sum, Expr};
use crate::{Error, Result};

/// Canonical coordinates on `T*Q`: base names `q` and fibre names `p`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Chart {
    pub q: Vec<String>,
    pub p: Vec<String>,
}

impl Chart {
    pub fn new<S: AsRef<str>>(q: &[S], p: &[S]) -> Result<Chart> {
        let chart = Chart {
            q: q.iter().map(|s| s.as_ref().to_string()).collect(),
            p: p.iter().map(|s| s.as_ref().to_string()).collect(),
        };
        if chart.q.len() != chart.p.len() {
            return Err(Error::Dimension(format!(
                "{} positions but {} momenta",
                chart.q.len(),
                chart.p.len()
            )));
        }
        let all = chart.coords();
        for (i, a) in all.iter().enumerate() {
            if all[..i].contains(a) {
                return Err(Error::Dimension(format!("coordinate `{a}` repeated")));
            }
        }
        Ok(chart)
    }

    /// `q, p` for one degree of freedom, `q1..qn, p1..pn` otherwise.
    pub fn canonical(n: usize) -> Chart {
        if n == 1 {
            return Chart {
                q: alloc::vec!["q".into()],
                p: alloc::vec!["p".into()],
            };
        }
        Chart {
            q: (1..=n).map(|i| format!("q{i}")).collect(),
            p: (1..=n).map(|i| format!("p{i}")).collect(),
        }
    }

    pub fn dim(&self) -> usize {
        self.q.len()
    }

    /// All phase-space coordinates, positions first.
    pub fn coords(&self) -> Vec<String> {
        self.q.iter().chain(&self.p).cloned().collect()
    }

    /// Reject free variables that are neither coordinates nor `params`.
    pub fn validate<S: AsRef<str>>(&self, e: &Expr, params: &[S]) -> Result<()> {
        for v in e.free_vars() {
            let known = self.q.contains(&v) || self.p.contains(&v) || params.iter().any(|s| s.as_ref() == v);
            if !known {
                return Err(Error::UnknownVariable(v));
            }
        }
        Ok(())
    }
}

/// `{f, g} = Σ ∂f/∂qⁱ ∂g/∂pᵢ - ∂g/∂qⁱ ∂f/∂pᵢ`.
pub fn poisson_bracket(f: &Expr, g: &Expr, chart: &Chart) -> Expr {
    sum(chart
        .q
        .iter()
        .zip(&chart.p)
        .map(|(q, p)| f.diff(q) * g.diff(p) - g.diff(q) * f.diff(p)))
}

/// Components `(q̇, ṗ) = (∂H/∂p, -∂H/∂q)` in chart order.
pub fn hamiltonian_vector_field(h: &Expr, chart: &Chart) -> Vec<Expr> {
    let qdot = chart.p.iter().map(|p| h.diff(p));
    let pdot = chart.q.iter().map(|q| -h.diff(q));
    qdot.chain(pdot).collect()
}

/// A one-form `αᵢ(q) dqⁱ` on the base, viewed as the section `p = α(q)`.
#[derive(Debug, Clone, PartialEq)]
pub struct OneForm {
    pub components: Vec<Expr>,
}

impl OneForm {
    pub fn new(components: Vec<Expr>) -> OneForm {
        OneForm { components }
    }

    /// `dW` for a generating function `W(q)`.
    pub fn exact(w: &Expr, chart: &Chart) -> OneForm {
        OneForm::new(w.grad(&chart.q))
    }

    fn check_dim(&self, chart: &Chart) -> Result<()> {
        if self.components.len() != chart.dim() {
            return Err(Error::Dimension(format!(
                "one-form has {} components on a {}-dimensional base",
                self.components.len(),
                chart.dim()
            )));
        }
        Ok(())
    }

    pub(crate) fn substitution(&self, chart: &Chart) -> BTreeMap<String, Expr> {
        chart.p.iter().cloned().zip(self.components.iter().cloned()).collect()
    }
}

/// Pull a phase-space function back along `p = α(q)`.
pub fn pullback(f: &Expr, alpha: &OneForm, chart: &Chart) -> Result<Expr> {
    alpha.check_dim(chart)?;
    Ok(f.subs_all(&alpha.substitution(chart)))
}

/// The independent components `∂ⱼαᵢ - ∂ᵢαⱼ` (i < j) of `dα`.
pub fn closedness_residuals(alpha: &OneForm, chart: &Chart) -> Result<Vec<Expr>> {
    alpha.check_dim(chart)?;
    let a = &alpha.components;
    let mut out = Vec::new();
    for i in 0..chart.dim() {
        for j in i + 1..chart.dim() {
            out.push(a[i].diff(&chart.q[j]) - a[j].diff(&chart.q[i]));
        }
    }
    Ok(out)
}

pub fn closedness_check(alpha: &OneForm, chart: &Chart, dom: &Domain, opts: &CheckOptions) -> Result<CheckReport> {
    let res = closedness_residuals(alpha, chart)?;
    check_vanishing("closedness", &res, dom, opts)
}

/// Check that `α` is closed and that `H ∘ α = E` on the domain.
///
/// Both sub-checks always run; the report carries them as children.
pub fn hj_check(
    h: &Expr,
    alpha: &OneForm,
    energy: &Expr,
    chart: &Chart,
    dom: &Domain,
    opts: &CheckOptions,
) -> Result<CheckReport> {
    let closed = closedness_check(alpha, chart, dom, opts)?;
    let pulled = pullback(h, alpha, chart)? - energy;
    let level = check_vanishing("pullback", &[pulled], dom, opts)?;
    Ok(CheckReport::aggregate("hamilton-jacobi", alloc::vec![closed, level]))
}

/// `Xⁱ(q) = ∂H/∂pᵢ(q, α(q))`, the projected field whose integral curves lift
/// to solutions when `α` solves the Hamilton-Jacobi equation.
pub fn characteristic_field(h: &Expr, alpha: &OneForm, chart: &Chart) -> Result<Vec<Expr>> {
    alpha.check_dim(chart)?;
    let sub = alpha.substitution(chart);
    Ok(chart.p.iter().map(|p| h.diff(p).subs_all(&sub)).collect())
}

/// Lie derivative of a one-form `θ = θₐ dzᵃ` along a vector field `X`, both
/// given in phase-space coordinates (positions then momenta).
///
/// Computed by Cartan's formula `i_X dθ + d(i_X θ)`.
pub fn lie_derivative_oneform(x: &[Expr], theta: &[Expr], chart: &Chart) -> Result<Vec<Expr>> {
    let z = chart.coords();
    if x.len() != z.len() || theta.len() != z.len() {
        return Err(Error::Dimension(format!(
            "expected {} components, got field {} and form {}",
            z.len(),
            x.len(),
            theta.len()
        )));
    }
    let contraction = sum(x.iter().zip(theta).map(|(xa, ta)| xa * ta));
    Ok((0..z.len())
        .map(|b| {
            let interior = sum((0..z.len()).map(|a| {
                let d_ab = theta[b].diff(&z[a]) - theta[a].diff(&z[b]);
                &x[a] * d_ab
            }));
            interior + contraction.diff(&z[b])
        })
        .collect())
}

/// Check `form = dF` componentwise over phase space.
pub fn exactness_probe(
    form: &[Expr],
    f: &Expr,
    chart: &Chart,
    dom: &Domain,
    opts: &CheckOptions,
) -> Result<CheckReport> {
    let z = chart.coords();
    if form.len() != z.len() {
        return Err(Error::Dimension(format!(
            "form has {} components, phase space has {}",
            form.len(),
            z.len()
        )));
    }
    let res: Vec<Expr> = form.iter().zip(&z).map(|(c, v)| c - f.diff(v)).collect();
    check_vanishing("exactness", &res, dom, opts)
}

/// Components of the Liouville form `θ₀ = pᵢ dqⁱ` in phase-space coordinates.
pub fn liouville_form(chart: &Chart) -> Vec<Expr> {
    chart
        .p
        .iter()
        .map(|p| Expr::var(p.as_str()))
        .chain(chart.p.iter().map(|_| Expr::zero()))
        .collect()
}
