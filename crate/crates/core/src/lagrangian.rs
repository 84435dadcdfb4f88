//! Lagrangian structures on the tangent bundle and the Lagrangian
//! Hamilton-Jacobi problem for vector fields `X` on the base.
//!
//! A system is given by base coordinates `qⁱ`, velocity coordinates `uⁱ`
//! and a Lagrangian `L(q, u)`.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use crate::check::{check_points, check_vanishing, CheckOptions, CheckReport, Domain};
use crate::expr::{sum, Expr, Tape};
use crate::linalg;
use crate::{Error, Result};

/// Largest dimension for which the Hessian is inverted symbolically.
pub const SYMBOLIC_INVERSE_MAX: usize = 3;
/// Lower bound on `|det ∂X/∂λ|` for a complete solution.
pub const COMPLETENESS_THRESHOLD: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct LagrangianSystem {
    pub q: Vec<String>,
    pub u: Vec<String>,
    pub lagrangian: Expr,
}

impl LagrangianSystem {
    pub fn new<S: AsRef<str>>(q: &[S], u: &[S], lagrangian: Expr) -> Result<LagrangianSystem> {
        if q.len() != u.len() {
            return Err(Error::Dimension(format!(
                "{} positions but {} velocities",
                q.len(),
                u.len()
            )));
        }
        Ok(LagrangianSystem {
            q: q.iter().map(|s| s.as_ref().to_string()).collect(),
            u: u.iter().map(|s| s.as_ref().to_string()).collect(),
            lagrangian,
        })
    }

    /// `q1..qn` and `u1..un` (or `q`, `u` when n = 1).
    pub fn canonical(n: usize, lagrangian: Expr) -> LagrangianSystem {
        let names = |s: &str| -> Vec<String> {
            if n == 1 {
                alloc::vec![s.to_string()]
            } else {
                (1..=n).map(|i| format!("{s}{i}")).collect()
            }
        };
        LagrangianSystem {
            q: names("q"),
            u: names("u"),
            lagrangian,
        }
    }

    pub fn dim(&self) -> usize {
        self.q.len()
    }

    fn lift(&self, x: &[Expr]) -> Result<BTreeMap<String, Expr>> {
        if x.len() != self.dim() {
            return Err(Error::Dimension(format!(
                "vector field has {} components on a {}-dimensional base",
                x.len(),
                self.dim()
            )));
        }
        Ok(self.u.iter().cloned().zip(x.iter().cloned()).collect())
    }
}

/// Accelerations `aⁱ(q, u)` of the Euler-Lagrange field.
#[derive(Debug, Clone, PartialEq)]
pub enum Forces {
    /// Closed form, for dimension up to [`SYMBOLIC_INVERSE_MAX`].
    Symbolic(Vec<Expr>),
    /// `H a = rhs`, solved numerically point by point.
    PerPoint { rhs: Vec<Expr> },
}

/// The geometric objects derived from a Lagrangian.
#[derive(Debug, Clone, PartialEq)]
pub struct Structures {
    /// `θ_L = θᵢ dqⁱ` with `θᵢ = ∂L/∂uⁱ`.
    pub theta: Vec<Expr>,
    /// Coefficient of `duʲ ∧ dqⁱ` in `ω_L = dθ_L`, indexed `[j][i]`.
    pub omega_uq: Vec<Vec<Expr>>,
    /// Coefficients of `dqʲ ∧ dqⁱ` (j < i) in `ω_L`, row-major over pairs.
    pub omega_qq: Vec<((usize, usize), Expr)>,
    /// `E_L = uⁱ ∂L/∂uⁱ - L`.
    pub energy: Expr,
    /// `Hᵢⱼ = ∂²L/∂uⁱ∂uʲ`.
    pub hessian: Vec<Vec<Expr>>,
    pub forces: Forces,
}

/// Compute `θ_L`, `ω_L`, `E_L`, the velocity Hessian and the accelerations
/// `aⁱ = Hⁱʲ (∂L/∂qʲ - ∂²L/∂uʲ∂qᵏ uᵏ)`.
pub fn derive_structures(sys: &LagrangianSystem) -> Result<Structures> {
    let n = sys.dim();
    let l = &sys.lagrangian;
    let theta: Vec<Expr> = sys.u.iter().map(|u| l.diff(u)).collect();
    let hessian: Vec<Vec<Expr>> = theta
        .iter()
        .map(|t| sys.u.iter().map(|u| t.diff(u)).collect())
        .collect();
    let omega_uq = hessian.clone();
    let mut omega_qq = Vec::new();
    for j in 0..n {
        for i in j + 1..n {
            let c = theta[i].diff(&sys.q[j]) - theta[j].diff(&sys.q[i]);
            omega_qq.push(((j, i), c));
        }
    }
    let energy = sum(sys.u.iter().zip(&theta).map(|(u, t)| Expr::var(u.as_str()) * t)) - l;
    let rhs: Vec<Expr> = (0..n)
        .map(|j| {
            let mixed = sum((0..n).map(|k| theta[j].diff(&sys.q[k]) * Expr::var(sys.u[k].as_str())));
            l.diff(&sys.q[j]) - mixed
        })
        .collect();
    let forces = if n <= SYMBOLIC_INVERSE_MAX {
        let inv = linalg::inverse_expr(&hessian).ok_or(Error::SingularMatrix { point: Vec::new() })?;
        Forces::Symbolic(
            inv.iter()
                .map(|row| sum(row.iter().zip(&rhs).map(|(h, r)| h * r)))
                .collect(),
        )
    } else {
        Forces::PerPoint { rhs }
    };
    Ok(Structures {
        theta,
        omega_uq,
        omega_qq,
        energy,
        hessian,
        forces,
    })
}

/// Fail with the first sample where the velocity Hessian is singular.
pub fn regularity_check(st: &Structures, dom: &Domain, opts: &CheckOptions) -> Result<CheckReport> {
    let det = linalg::det_expr(&st.hessian);
    let tape = Tape::compile(&[det], &dom.names())?;
    let mut out = [0.0];
    let report = check_points("regularity", dom, opts, 0.0, |x| {
        tape.eval_real(x, &mut out)?;
        if libm::fabs(out[0]) < 1e-12 {
            return Err(Error::SingularMatrix { point: Vec::new() });
        }
        Ok(0.0)
    })?;
    Ok(report)
}

/// Residuals `∂Xⁱ/∂qʲ Xʲ - aⁱ(q, X(q))` of the second-order field equation.
///
/// Needs symbolic forces; for larger systems use [`pde2_check`].
pub fn pde2_residual(sys: &LagrangianSystem, st: &Structures, x: &[Expr]) -> Result<Vec<Expr>> {
    let lift = sys.lift(x)?;
    let Forces::Symbolic(a) = &st.forces else {
        return Err(Error::Unsupported(format!(
            "symbolic accelerations for dimension {}",
            sys.dim()
        )));
    };
    Ok((0..sys.dim())
        .map(|i| transport(sys, x, i) - a[i].subs_all(&lift))
        .collect())
}

fn transport(sys: &LagrangianSystem, x: &[Expr], i: usize) -> Expr {
    sum(sys.q.iter().zip(x).map(|(q, xj)| x[i].diff(q) * xj))
}

/// Sampled check that `X` solves the second-order field equation.
pub fn pde2_check(
    sys: &LagrangianSystem,
    st: &Structures,
    x: &[Expr],
    dom: &Domain,
    opts: &CheckOptions,
) -> Result<CheckReport> {
    match &st.forces {
        Forces::Symbolic(_) => {
            let res = pde2_residual(sys, st, x)?;
            check_vanishing("pde2", &res, dom, opts)
        }
        Forces::PerPoint { rhs } => {
            let lift = sys.lift(x)?;
            let n = sys.dim();
            let mut exprs: Vec<Expr> = (0..n).map(|i| transport(sys, x, i)).collect();
            exprs.extend(rhs.iter().map(|r| r.subs_all(&lift)));
            exprs.extend(st.hessian.iter().flatten().map(|h| h.subs_all(&lift)));
            let tol = opts.tolerance_for(&exprs);
            let tape = Tape::compile(&exprs, &dom.names())?;
            let mut out = alloc::vec![0.0; exprs.len()];
            check_points("pde2", dom, opts, tol, |pt| {
                tape.eval_real(pt, &mut out)?;
                let b = &out[n..2 * n];
                let h: linalg::Matrix = out[2 * n..].chunks(n).map(|r| r.to_vec()).collect();
                let a = linalg::solve(&h, b).ok_or(Error::SingularMatrix { point: Vec::new() })?;
                Ok((0..n).map(|i| libm::fabs(out[i] - a[i])).fold(0.0, f64::max))
            })
        }
    }
}

/// `θ_L ∘ X`, the components of `X*θ_L`.
pub fn pullback_theta(sys: &LagrangianSystem, st: &Structures, x: &[Expr]) -> Result<Vec<Expr>> {
    let lift = sys.lift(x)?;
    Ok(st.theta.iter().map(|t| t.subs_all(&lift)).collect())
}

/// Coefficients of `X*ω_L` on `dqʲ ∧ dqᵏ` (j < k):
/// `∂ⱼ(θₖ ∘ X) - ∂ₖ(θⱼ ∘ X)`.
pub fn omega_pullback(sys: &LagrangianSystem, st: &Structures, x: &[Expr]) -> Result<Vec<Expr>> {
    let t = pullback_theta(sys, st, x)?;
    let n = sys.dim();
    let mut out = Vec::new();
    for j in 0..n {
        for k in j + 1..n {
            out.push(t[k].diff(&sys.q[j]) - t[j].diff(&sys.q[k]));
        }
    }
    Ok(out)
}

/// Components of `d(X*E_L)`.
pub fn energy_differential(sys: &LagrangianSystem, st: &Structures, x: &[Expr]) -> Result<Vec<Expr>> {
    let e = st.energy.subs_all(&sys.lift(x)?);
    Ok(e.grad(&sys.q))
}

/// Outcome of the two Hamilton-Jacobi conditions `X*ω_L = 0`, `d(X*E_L) = 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct HjConditions {
    pub omega: CheckReport,
    pub energy: CheckReport,
    pub omega_coefficients: Vec<Expr>,
    pub energy_gradient: Vec<Expr>,
}

impl HjConditions {
    pub fn passed(&self) -> bool {
        self.omega.passed && self.energy.passed
    }

    pub fn report(&self) -> CheckReport {
        CheckReport::aggregate("lagrangian-hj", alloc::vec![self.omega.clone(), self.energy.clone()])
    }
}

pub fn hj_conditions(
    sys: &LagrangianSystem,
    st: &Structures,
    x: &[Expr],
    dom: &Domain,
    opts: &CheckOptions,
) -> Result<HjConditions> {
    let omega_coefficients = omega_pullback(sys, st, x)?;
    let energy_gradient = energy_differential(sys, st, x)?;
    Ok(HjConditions {
        omega: check_vanishing("omega-pullback", &omega_coefficients, dom, opts)?,
        energy: check_vanishing("energy-closed", &energy_gradient, dom, opts)?,
        omega_coefficients,
        energy_gradient,
    })
}

/// Check that a family `X(q; λ)` is non-degenerate in its parameters:
/// `|det ∂Xⁱ/∂λⱼ| ≥ 1e-9` at every sample.
///
/// The residual reported is the shortfall below the threshold, so the check
/// passes with residual zero; the note records the smallest determinant.
pub fn complete_solution_check<S: AsRef<str>>(
    family: &[Expr],
    params: &[S],
    dom: &Domain,
    opts: &CheckOptions,
) -> Result<CheckReport> {
    if family.len() != params.len() {
        return Err(Error::Dimension(format!(
            "{} components but {} parameters",
            family.len(),
            params.len()
        )));
    }
    let jac: Vec<Expr> = family
        .iter()
        .flat_map(|x| params.iter().map(move |l| x.diff(l.as_ref())))
        .collect();
    let n = params.len();
    let tape = Tape::compile(&jac, &dom.names())?;
    let mut out = alloc::vec![0.0; jac.len()];
    let mut min_det = f64::INFINITY;
    let report = check_points("complete-solution", dom, opts, 0.0, |x| {
        tape.eval_real(x, &mut out)?;
        let m: linalg::Matrix = out.chunks(n).map(|r| r.to_vec()).collect();
        let d = libm::fabs(linalg::det(&m));
        min_det = min_det.min(d);
        Ok((COMPLETENESS_THRESHOLD - d).max(0.0))
    })?;
    Ok(report.with_note(format!("min |det| = {min_det:e}")))
}

/// The second-order field `Γ_L = uⁱ ∂/∂qⁱ + aⁱ ∂/∂uⁱ` on `(q, u)`.
pub fn euler_lagrange_field(sys: &LagrangianSystem, st: &Structures) -> Result<Vec<Expr>> {
    let Forces::Symbolic(a) = &st.forces else {
        return Err(Error::Unsupported(format!(
            "symbolic accelerations for dimension {}",
            sys.dim()
        )));
    };
    Ok(sys
        .u
        .iter()
        .map(|u| Expr::var(u.as_str()))
        .chain(a.iter().cloned())
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn e(s: &str) -> Expr {
        Expr::parse(s).unwrap()
    }

    fn osc_family(s1: f64, s2: f64) -> Vec<Expr> {
        alloc::vec![s1 * e("sqrt(2*E1 - q1^2)"), s2 * e("sqrt(2*E2 - q2^2)"),]
    }

    fn osc_domain() -> Domain {
        // |qᵢ| ≤ 0.9·√(2Eᵢ), E ∈ [1, 2].
        Domain::new()
            .with("q1", -1.8, 1.8)
            .with("q2", -1.8, 1.8)
            .with("E1", 1.0, 2.0)
            .with("E2", 1.0, 2.0)
            .at_least(e("1.62*E1 - q1^2"), 0.0)
            .at_least(e("1.62*E2 - q2^2"), 0.0)
    }

    const SIGNS: [(f64, f64); 4] = [(1.0, 1.0), (1.0, -1.0), (-1.0, 1.0), (-1.0, -1.0)];

    #[test]
    fn free_particle_structures() {
        let sys = LagrangianSystem::canonical(2, e("(u1^2 + u2^2)/2"));
        let st = derive_structures(&sys).unwrap();
        let at = [("u1", 0.3), ("u2", -1.1)];
        assert_eq!(st.theta[0].eval(&at).unwrap().re, 0.3);
        assert_eq!(st.theta[1].eval(&at).unwrap().re, -1.1);
        assert_eq!(st.omega_uq[0][0], Expr::one());
        assert_eq!(st.omega_uq[0][1], Expr::zero());
        assert!(st.omega_qq.iter().all(|(_, c)| c.is_zero()));
        assert_eq!(st.forces, Forces::Symbolic(alloc::vec![Expr::zero(), Expr::zero()]));
    }

    #[test]
    fn free_particle_family_solves_pde2_but_not_hj() {
        let sys = LagrangianSystem::canonical(2, e("(u1^2 + u2^2)/2"));
        let st = derive_structures(&sys).unwrap();
        let x = alloc::vec![e("k"), e("(k*q2 - l)/q1")];
        let dom = Domain::new()
            .with("q1", 0.5, 2.0)
            .with("q2", -2.0, 2.0)
            .with("k", 0.5, 2.0)
            .with("l", 0.5, 2.0)
            .at_least(e("abs(k*q2 - l)"), 0.1);
        let o = CheckOptions::default();
        assert!(pde2_check(&sys, &st, &x, &dom, &o).unwrap().passed);
        let hj = hj_conditions(&sys, &st, &x, &dom, &o).unwrap();
        assert!(!hj.omega.passed && !hj.energy.passed);
        let expected = e("-(k*q2 - l)/q1^2");
        let r = crate::check::sampled_identity_check(&hj.omega_coefficients[0], &expected, &dom, &o).unwrap();
        assert!(r.passed);
    }

    #[test]
    fn oscillator_structures() {
        let sys = LagrangianSystem::canonical(2, e("(u1^2 + u2^2 - q1^2 - q2^2)/2"));
        let st = derive_structures(&sys).unwrap();
        let dom = Domain::new()
            .with("q1", -2.0, 2.0)
            .with("q2", -2.0, 2.0)
            .with("u1", -2.0, 2.0)
            .with("u2", -2.0, 2.0);
        let o = CheckOptions::default();
        let r =
            crate::check::sampled_identity_check(&st.energy, &e("(u1^2 + u2^2 + q1^2 + q2^2)/2"), &dom, &o).unwrap();
        assert!(r.passed);
        let Forces::Symbolic(a) = &st.forces else { panic!() };
        assert!(
            crate::check::sampled_identity_check(&a[0], &e("-q1"), &dom, &o)
                .unwrap()
                .passed
        );
    }

    #[test]
    fn oscillator_families_solve_everything() {
        let sys = LagrangianSystem::canonical(2, e("(u1^2 + u2^2 - q1^2 - q2^2)/2"));
        let st = derive_structures(&sys).unwrap();
        let o = CheckOptions::default();
        for (s1, s2) in SIGNS {
            let x = osc_family(s1, s2);
            assert!(pde2_check(&sys, &st, &x, &osc_domain(), &o).unwrap().passed);
            assert!(hj_conditions(&sys, &st, &x, &osc_domain(), &o).unwrap().passed());
            let c = complete_solution_check(&x, &["E1", "E2"], &osc_domain(), &o).unwrap();
            assert!(c.passed, "{c:?}");
        }
    }

    #[test]
    fn alternative_lagrangians() {
        let o = CheckOptions::default();
        let l1 = LagrangianSystem::canonical(2, e("(u1^2 - u2^2 - q1^2 + q2^2)/2"));
        let st1 = derive_structures(&l1).unwrap();
        let l2 = LagrangianSystem::canonical(2, e("u1*u2 - q1*q2"));
        let st2 = derive_structures(&l2).unwrap();
        assert_eq!(st2.theta, alloc::vec![e("u2"), e("u1")]);
        for (s1, s2) in SIGNS {
            let x = osc_family(s1, s2);
            assert!(pde2_check(&l1, &st1, &x, &osc_domain(), &o).unwrap().passed);
            assert!(pde2_check(&l2, &st2, &x, &osc_domain(), &o).unwrap().passed);
            assert!(hj_conditions(&l1, &st1, &x, &osc_domain(), &o).unwrap().passed());
            let hj2 = hj_conditions(&l2, &st2, &x, &osc_domain(), &o).unwrap();
            assert!(!hj2.omega.passed && !hj2.energy.passed);
            let expected = -s1 * e("q1/sqrt(2*E1 - q1^2)") + s2 * e("q2/sqrt(2*E2 - q2^2)");
            let r =
                crate::check::sampled_identity_check(&hj2.omega_coefficients[0], &expected, &osc_domain(), &o).unwrap();
            assert!(r.passed);
        }
    }

    #[test]
    fn degenerate_family_detected() {
        let x = alloc::vec![e("sqrt(2*E1 - q1^2)"), e("sqrt(2*E1 - q2^2)")];
        let dom = osc_domain().at_least(e("1.62*E1 - q2^2"), 0.0);
        let c = complete_solution_check(&x, &["E1", "E2"], &dom, &CheckOptions::default()).unwrap();
        assert!(!c.passed);
    }

    #[test]
    fn singular_hessian() {
        let sys = LagrangianSystem::canonical(2, e("u1 + q1*u2"));
        assert!(matches!(derive_structures(&sys), Err(Error::SingularMatrix { .. })));
        let sys = LagrangianSystem::canonical(1, e("q*u^2"));
        let st = derive_structures(&sys).unwrap();
        let dom = Domain::new().with("q", 0.0, 0.0).with("u", -1.0, 1.0);
        let err = regularity_check(&st, &dom, &CheckOptions::default()).unwrap_err();
        assert!(matches!(err, Error::SingularMatrix { point } if !point.is_empty()));
    }

    #[test]
    fn numeric_forces_agree_with_symbolic() {
        // Four uncoupled oscillators exercise the per-point path.
        let l = e("(u1^2 + u2^2 + u3^2 + u4^2 - q1^2 - q2^2 - q3^2 - q4^2)/2");
        let sys = LagrangianSystem::canonical(4, l);
        let st = derive_structures(&sys).unwrap();
        assert!(matches!(st.forces, Forces::PerPoint { .. }));
        let x: Vec<Expr> = (1..=4).map(|i| e(&format!("sqrt(2*E{i} - q{i}^2)"))).collect();
        let mut dom = Domain::new();
        for i in 1..=4 {
            dom = dom.with(&format!("q{i}"), -1.0, 1.0).with(&format!("E{i}"), 1.0, 2.0);
        }
        let o = CheckOptions::default();
        assert!(pde2_check(&sys, &st, &x, &dom, &o).unwrap().passed);
        let wrong: Vec<Expr> = (1..=4).map(|i| e(&format!("sqrt(2*E{i} + q{i}^2)"))).collect();
        assert!(!pde2_check(&sys, &st, &wrong, &dom, &o).unwrap().passed);
    }
}
