//! HJ problems on a Lie group `G`, worked in a chart normalised to `α = 0`
//! at the identity.
//!
//! The composition law `c = ab` is given as `γ^r = f^r(α, β)`. From it,
//! `η^r_s(α) = ∂f^r(β, α)/∂β^s` at `β = 0`, `ξ = η⁻¹`, the right-invariant
//! fields are `X_r = -η^s_r ∂/∂α^s` and their dual forms `θ^r = -ξ^r_s dα^s`.
//! Every sign downstream is fixed by these definitions.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use num_complex::Complex64;

use crate::check::{check_vanishing, CheckOptions, CheckReport, Domain, DEFAULT_SEED};
use crate::expr::{sum, Expr, Tape};
use crate::linalg::{self, Matrix};
use crate::phase::{poisson_bracket, Chart};
use crate::{Error, Result};

pub mod fixtures;
#[cfg(test)]
mod tests;

/// Largest dimension for which `ξ` is built symbolically (adjugate).
pub const SYMBOLIC_XI_MAX_DIM: usize = 3;
/// Tolerance of antisymmetry, Jacobi and cocycle conditions.
pub const STRUCTURE_TOL: f64 = 1e-12;
/// Residual below which `C λ = d` counts as solved.
pub const COBOUNDARY_TOL: f64 = 1e-10;
/// Largest sample variance accepted for a constant bracket remainder.
pub const CONSTANT_VARIANCE_TOL: f64 = 1e-10;

/// `C^t_{rs}` with `[e_r, e_s] = C^t_{rs} e_t`, indices from zero.
#[derive(Debug, Clone, PartialEq)]
pub struct StructureConstants {
    k: usize,
    c: Vec<f64>,
}

impl StructureConstants {
    pub fn zero(k: usize) -> StructureConstants {
        StructureConstants {
            k,
            c: vec![0.0; k * k * k],
        }
    }

    /// `c[t][r][s] = C^t_{rs}`; no symmetry is imposed.
    pub fn from_dense(c: &[Vec<Vec<f64>>]) -> Result<StructureConstants> {
        let k = c.len();
        let mut out = StructureConstants::zero(k);
        for (t, plane) in c.iter().enumerate() {
            if plane.len() != k || plane.iter().any(|row| row.len() != k) {
                return Err(Error::Dimension(format!("C^{t} is not {k}×{k}")));
            }
            for (r, row) in plane.iter().enumerate() {
                for (s, v) in row.iter().enumerate() {
                    let i = out.idx(t, r, s);
                    out.c[i] = *v;
                }
            }
        }
        Ok(out)
    }

    /// Sparse `(r, s, t, value)` entries; each one also sets
    /// `C^t_{sr} = -value`.
    pub fn from_triples(k: usize, triples: &[(usize, usize, usize, f64)]) -> Result<StructureConstants> {
        let mut out = StructureConstants::zero(k);
        for &(r, s, t, v) in triples {
            if r >= k || s >= k || t >= k {
                return Err(Error::Dimension(format!(
                    "index ({r}, {s}, {t}) out of range for k = {k}"
                )));
            }
            if r == s {
                if v != 0.0 {
                    return Err(Error::InvalidStructure(format!("C^{t}_{{{r}{r}}} = {v} must vanish")));
                }
                continue;
            }
            let (a, b) = (out.idx(t, r, s), out.idx(t, s, r));
            out.c[a] = v;
            out.c[b] = -v;
        }
        Ok(out)
    }

    /// `C^t_{rs} = ε_{rst}`, the algebra of rotations.
    pub fn levi_civita() -> StructureConstants {
        StructureConstants::from_triples(3, &[(0, 1, 2, 1.0), (1, 2, 0, 1.0), (2, 0, 1, 1.0)]).expect("valid triples")
    }

    fn idx(&self, t: usize, r: usize, s: usize) -> usize {
        (t * self.k + r) * self.k + s
    }

    pub fn dim(&self) -> usize {
        self.k
    }

    /// `C^t_{rs}`.
    pub fn get(&self, t: usize, r: usize, s: usize) -> f64 {
        self.c[self.idx(t, r, s)]
    }

    pub fn is_abelian(&self) -> bool {
        self.c.iter().all(|v| *v == 0.0)
    }

    /// Non-zero entries with `r < s`, as `(r, s, t, C^t_{rs})`.
    pub fn triples(&self) -> Vec<(usize, usize, usize, f64)> {
        let mut out = Vec::new();
        for r in 0..self.k {
            for s in r + 1..self.k {
                for t in 0..self.k {
                    let v = self.get(t, r, s);
                    if v != 0.0 {
                        out.push((r, s, t, v));
                    }
                }
            }
        }
        out
    }

    fn max_abs(&self) -> f64 {
        self.c.iter().fold(0.0f64, |m, v| m.max(libm::fabs(*v)))
    }
}

fn plain_report(label: &str, n: usize, residual: f64, tol: f64, seed: u64) -> CheckReport {
    CheckReport {
        label: label.into(),
        n_samples: n,
        max_abs_residual: residual,
        tolerance: tol,
        passed: residual <= tol,
        worst_point: BTreeMap::new(),
        seed,
        children: Vec::new(),
        note: None,
    }
}

/// Antisymmetry (exact) and the Jacobi identity
/// `C^u_{rs}C^v_{ut} + C^u_{st}C^v_{ur} + C^u_{tr}C^v_{us} = 0`.
pub fn structure_check(c: &StructureConstants) -> CheckReport {
    let k = c.k;
    let mut anti = 0.0f64;
    let mut worst_anti = None;
    for t in 0..k {
        for r in 0..k {
            for s in r..k {
                let v = libm::fabs(c.get(t, r, s) + c.get(t, s, r));
                if v > anti {
                    anti = v;
                    worst_anti = Some((r, s, t));
                }
            }
        }
    }
    let mut jacobi = 0.0f64;
    let mut worst_jacobi = None;
    for r in 0..k {
        for s in 0..k {
            for t in 0..k {
                for v in 0..k {
                    let total: f64 = (0..k)
                        .map(|u| {
                            c.get(u, r, s) * c.get(v, u, t)
                                + c.get(u, s, t) * c.get(v, u, r)
                                + c.get(u, t, r) * c.get(v, u, s)
                        })
                        .sum();
                    if libm::fabs(total) > jacobi {
                        jacobi = libm::fabs(total);
                        worst_jacobi = Some((r, s, t, v));
                    }
                }
            }
        }
    }
    let mut a = plain_report("antisymmetry", k * k * k, anti, 0.0, DEFAULT_SEED);
    if let Some((r, s, t)) = worst_anti.filter(|_| anti > 0.0) {
        a = a.with_note(format!("C^{t}_{{{r}{s}}} + C^{t}_{{{s}{r}}} = {anti:e}"));
    }
    let mut j = plain_report("jacobi", k * k * k * k, jacobi, STRUCTURE_TOL, DEFAULT_SEED);
    if let Some((r, s, t, v)) = worst_jacobi.filter(|_| jacobi > STRUCTURE_TOL) {
        j = j.with_note(format!("fails for (r, s, t) = ({r}, {s}, {t}), component {v}"));
    }
    CheckReport::aggregate("structure", vec![a, j])
}

/// `d_{rs} = C^t_{rs} λ_t`.
pub fn coboundary(c: &StructureConstants, lambda: &[f64]) -> Matrix {
    let k = c.k;
    (0..k)
        .map(|r| {
            (0..k)
                .map(|s| (0..k).map(|t| c.get(t, r, s) * lambda[t]).sum())
                .collect()
        })
        .collect()
}

/// Checks that `d` is antisymmetric and satisfies
/// `C^u_{rs}d_{ut} + C^u_{st}d_{ur} + C^u_{tr}d_{us} = 0`.
pub fn cocycle_condition(c: &StructureConstants, d: &[Vec<f64>]) -> Result<()> {
    let k = c.k;
    if d.len() != k || d.iter().any(|row| row.len() != k) {
        return Err(Error::Dimension(format!("cocycle must be {k}×{k}")));
    }
    let scale = d.iter().flatten().fold(0.0f64, |m, v| m.max(libm::fabs(*v))).max(1.0);
    for r in 0..k {
        for s in r..k {
            if libm::fabs(d[r][s] + d[s][r]) > STRUCTURE_TOL * scale {
                return Err(Error::InvalidStructure(format!("d is not antisymmetric at ({r}, {s})")));
            }
        }
    }
    let tol = STRUCTURE_TOL * scale * c.max_abs().max(1.0);
    for r in 0..k {
        for s in r + 1..k {
            for t in s + 1..k {
                let v: f64 = (0..k)
                    .map(|u| c.get(u, r, s) * d[u][t] + c.get(u, s, t) * d[u][r] + c.get(u, t, r) * d[u][s])
                    .sum();
                if libm::fabs(v) > tol {
                    return Err(Error::NotCocycle { r, s, t, residual: v });
                }
            }
        }
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub enum CocycleSolution {
    /// `d_{rs} = C^t_{rs} λ_t`; `λ` is the minimum-norm solution.
    Coboundary { lambda: Vec<f64>, residual: f64 },
    /// No `λ` reproduces `d`: a genuine central extension.
    NoCoboundary { residual: f64 },
}

/// Solve `C^t_{rs} λ_t = d_{rs}` over all `r < s` in the least-squares sense.
pub fn cocycle_solve(c: &StructureConstants, d: &[Vec<f64>]) -> Result<CocycleSolution> {
    cocycle_condition(c, d)?;
    let k = c.k;
    let mut a = Vec::new();
    let mut b = Vec::new();
    for r in 0..k {
        for s in r + 1..k {
            a.push((0..k).map(|t| c.get(t, r, s)).collect::<Vec<_>>());
            b.push(d[r][s]);
        }
    }
    if a.is_empty() {
        return Ok(CocycleSolution::Coboundary {
            lambda: vec![0.0; k],
            residual: 0.0,
        });
    }
    let (lambda, residual) = linalg::lstsq(&a, &b);
    Ok(if residual <= COBOUNDARY_TOL {
        CocycleSolution::Coboundary { lambda, residual }
    } else {
        CocycleSolution::NoCoboundary { residual }
    })
}

/// A canonical realization `H_r(q, p)` of the algebra on `T*Q`.
#[derive(Debug, Clone, PartialEq)]
pub struct Realization {
    pub chart: Chart,
    pub hamiltonians: Vec<Expr>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LieGroupModel {
    pub name: String,
    pub constants: StructureConstants,
    /// Group coordinates; the first argument of the composition law.
    pub alpha: Vec<String>,
    /// Second argument of the composition law.
    pub beta: Vec<String>,
    /// Momenta conjugate to `alpha`.
    pub momenta: Vec<String>,
    /// `f^r(α, β)` over `alpha` and `beta`.
    pub composition: Vec<Expr>,
    pub realization: Option<Realization>,
    pub cocycle: Option<Matrix>,
}

/// `a1.., b1.., pi1..` for a `k`-dimensional group.
pub fn default_names(k: usize) -> [Vec<String>; 3] {
    let names = |p: &str| (1..=k).map(|i| format!("{p}{i}")).collect::<Vec<_>>();
    [names("a"), names("b"), names("pi")]
}

impl LieGroupModel {
    pub fn new(name: &str, constants: StructureConstants, composition: Vec<Expr>) -> Result<LieGroupModel> {
        let [a, b, pi] = default_names(constants.dim());
        LieGroupModel::with_coordinates(name, constants, &a, &b, &pi, composition)
    }

    /// Validates dimensions, antisymmetry of `C` and the identity axioms
    /// `f(α, 0) = α`, `f(0, β) = β` on samples.
    pub fn with_coordinates<S: AsRef<str>>(
        name: &str,
        constants: StructureConstants,
        alpha: &[S],
        beta: &[S],
        momenta: &[S],
        composition: Vec<Expr>,
    ) -> Result<LieGroupModel> {
        let k = constants.dim();
        let own = |v: &[S]| v.iter().map(|s| s.as_ref().to_string()).collect::<Vec<_>>();
        let (alpha, beta, momenta) = (own(alpha), own(beta), own(momenta));
        if [alpha.len(), beta.len(), momenta.len(), composition.len()]
            .iter()
            .any(|n| *n != k)
        {
            return Err(Error::Dimension(format!(
                "group of dimension {k} needs {k} coordinates of each kind and {k} composition functions"
            )));
        }
        let mut all: Vec<&String> = alpha.iter().chain(&beta).chain(&momenta).collect();
        all.sort();
        all.dedup();
        if all.len() != 3 * k {
            return Err(Error::Dimension("group coordinate names must be distinct".into()));
        }
        let anti = structure_check(&constants).children.remove(0);
        if !anti.passed {
            return Err(Error::InvalidStructure(format!(
                "C is not antisymmetric: {}",
                anti.note.unwrap_or_default()
            )));
        }
        for f in &composition {
            if let Some(v) = f
                .free_vars()
                .into_iter()
                .find(|v| !alpha.contains(v) && !beta.contains(v))
            {
                return Err(Error::UnknownVariable(v));
            }
        }
        let model = LieGroupModel {
            name: name.into(),
            constants,
            alpha,
            beta,
            momenta,
            composition,
            realization: None,
            cocycle: None,
        };
        let r = model.identity_check(&CheckOptions::default())?;
        if !r.passed {
            return Err(Error::InvalidStructure(format!(
                "composition law is not normalised at the identity (residual {:e})",
                r.max_abs_residual
            )));
        }
        Ok(model)
    }

    pub fn with_realization(mut self, chart: Chart, hamiltonians: Vec<Expr>) -> Result<LieGroupModel> {
        if hamiltonians.len() != self.dim() {
            return Err(Error::Dimension(format!(
                "{} Hamiltonians for a group of dimension {}",
                hamiltonians.len(),
                self.dim()
            )));
        }
        if chart
            .coords()
            .iter()
            .any(|c| self.alpha.contains(c) || self.momenta.contains(c))
        {
            return Err(Error::Dimension(
                "realization chart clashes with the group coordinates".into(),
            ));
        }
        self.realization = Some(Realization { chart, hamiltonians });
        Ok(self)
    }

    pub fn with_cocycle(mut self, d: Matrix) -> Result<LieGroupModel> {
        cocycle_condition(&self.constants, &d)?;
        self.cocycle = Some(d);
        Ok(self)
    }

    pub fn dim(&self) -> usize {
        self.constants.dim()
    }

    /// `α ∈ [-radius, radius]^k`.
    pub fn group_domain(&self, radius: f64) -> Domain {
        self.alpha.iter().fold(Domain::new(), |d, a| d.with(a, -radius, radius))
    }

    fn pair_domain(&self, radius: f64) -> Domain {
        self.beta
            .iter()
            .fold(self.group_domain(radius), |d, b| d.with(b, -radius, radius))
    }

    fn realization(&self) -> Result<&Realization> {
        self.realization
            .as_ref()
            .ok_or_else(|| Error::Unsupported(format!("model `{}` has no realization", self.name)))
    }

    /// Sampled `f(α, 0) = α` and `f(0, β) = β` on `[-½, ½]^{2k}`.
    pub fn identity_check(&self, opts: &CheckOptions) -> Result<CheckReport> {
        let zero =
            |names: &[String]| -> BTreeMap<String, Expr> { names.iter().map(|n| (n.clone(), Expr::zero())).collect() };
        let (za, zb) = (zero(&self.alpha), zero(&self.beta));
        let mut res = Vec::with_capacity(2 * self.dim());
        for (r, f) in self.composition.iter().enumerate() {
            res.push(f.subs_all(&zb) - Expr::var(self.alpha[r].as_str()));
            res.push(f.subs_all(&za) - Expr::var(self.beta[r].as_str()));
        }
        check_vanishing("identity", &res, &self.pair_domain(0.5), opts)
    }

    /// Sampled `f(f(α, β), γ) = f(α, f(β, γ))` on `[-radius, radius]^{3k}`.
    pub fn associativity_check(&self, radius: f64, opts: &CheckOptions) -> Result<CheckReport> {
        let gamma: Vec<String> = (0..self.dim()).map(|i| format!("_gamma{i}")).collect();
        let law = |x: &[Expr], y: &[Expr]| -> Vec<Expr> {
            let map: BTreeMap<String, Expr> = self
                .alpha
                .iter()
                .cloned()
                .zip(x.iter().cloned())
                .chain(self.beta.iter().cloned().zip(y.iter().cloned()))
                .collect();
            self.composition.iter().map(|f| f.subs_all(&map)).collect()
        };
        let vars = |names: &[String]| names.iter().map(|n| Expr::var(n.as_str())).collect::<Vec<_>>();
        let (a, b, c) = (vars(&self.alpha), vars(&self.beta), vars(&gamma));
        let left = law(&law(&a, &b), &c);
        let right = law(&a, &law(&b, &c));
        let res: Vec<Expr> = left.into_iter().zip(right).map(|(l, r)| l - r).collect();
        let dom = gamma
            .iter()
            .fold(self.pair_domain(radius), |d, g| d.with(g, -radius, radius));
        check_vanishing("associativity", &res, &dom, opts)
    }
}

/// `η` and, for small groups, its symbolic inverse `ξ`.
#[derive(Debug, Clone, PartialEq)]
pub struct EtaXi {
    pub alpha: Vec<String>,
    /// `eta[r][s] = η^r_s`.
    pub eta: Vec<Vec<Expr>>,
    /// `ξ = η⁻¹`; `None` means it is computed per point.
    pub xi: Option<Vec<Vec<Expr>>>,
}

/// `η^r_s(α) = ∂f^r(β, α)/∂β^s` at `β = 0`, plus `ξ` by adjugate when
/// `k ≤ SYMBOLIC_XI_MAX_DIM`.
pub fn eta_xi(model: &LieGroupModel) -> Result<EtaXi> {
    let k = model.dim();
    // f(β, α): the first slot carries the infinitesimal element.
    let at_identity: BTreeMap<String, Expr> = model.alpha.iter().map(|a| (a.clone(), Expr::zero())).collect();
    let rename: BTreeMap<String, Expr> = model
        .beta
        .iter()
        .zip(&model.alpha)
        .map(|(b, a)| (b.clone(), Expr::var(a.as_str())))
        .collect();
    let eta: Vec<Vec<Expr>> = model
        .composition
        .iter()
        .map(|f| {
            model
                .alpha
                .iter()
                .map(|a| f.diff(a).subs_all(&at_identity).subs_all(&rename))
                .collect()
        })
        .collect();
    let origin: BTreeMap<String, f64> = model.alpha.iter().map(|a| (a.clone(), 0.0)).collect();
    let e0 = linalg::eval_matrix(&eta, &origin)?;
    let off = (0..k)
        .flat_map(|r| (0..k).map(move |s| (r, s)))
        .map(|(r, s)| libm::fabs(e0[r][s] - if r == s { 1.0 } else { 0.0 }))
        .fold(0.0f64, f64::max);
    if off > STRUCTURE_TOL {
        return Err(Error::InvalidStructure(format!(
            "η(0) differs from the identity by {off:e}"
        )));
    }
    let xi = if k <= SYMBOLIC_XI_MAX_DIM {
        Some(linalg::inverse_expr(&eta).ok_or_else(|| Error::InvalidStructure("η is identically singular".into()))?)
    } else {
        None
    };
    Ok(EtaXi {
        alpha: model.alpha.clone(),
        eta,
        xi,
    })
}

impl EtaXi {
    pub fn dim(&self) -> usize {
        self.alpha.len()
    }

    /// Drop the symbolic `ξ` so every check goes through per-point solves.
    pub fn numeric(mut self) -> EtaXi {
        self.xi = None;
        self
    }

    /// `fields()[r][s]`: component `s` of `X_r = -η^s_r ∂_s`.
    pub fn fields(&self) -> Vec<Vec<Expr>> {
        let k = self.dim();
        (0..k).map(|r| (0..k).map(|s| -&self.eta[s][r]).collect()).collect()
    }

    /// `forms()[r][s]`: component `s` of `θ^r = -ξ^r_s dα^s`.
    pub fn forms(&self) -> Option<Vec<Vec<Expr>>> {
        self.xi
            .as_ref()
            .map(|xi| xi.iter().map(|row| row.iter().map(|x| -x).collect()).collect())
    }

    pub fn eta_at(&self, alpha: &[f64]) -> Result<Matrix> {
        let scope: BTreeMap<String, f64> = self.alpha.iter().cloned().zip(alpha.iter().copied()).collect();
        linalg::eval_matrix(&self.eta, &scope)
    }

    /// `ξ(α)`, from the symbolic inverse if present, else by a linear solve.
    pub fn xi_at(&self, alpha: &[f64]) -> Result<Matrix> {
        let scope: BTreeMap<String, f64> = self.alpha.iter().cloned().zip(alpha.iter().copied()).collect();
        let singular = || Error::SingularMatrix {
            point: scope.iter().map(|(k, v)| (k.clone(), *v)).collect(),
        };
        match &self.xi {
            Some(xi) => linalg::eval_matrix(xi, &scope).map_err(|_| singular()),
            None => {
                let eta = linalg::eval_matrix(&self.eta, &scope)?;
                if libm::fabs(linalg::det(&eta)) < 1e-12 {
                    return Err(singular());
                }
                linalg::inverse(&eta).ok_or_else(singular)
            }
        }
    }
}

/// `[X, Y]^u = X^a ∂_a Y^u - Y^a ∂_a X^u`.
pub fn field_commutator<S: AsRef<str>>(x: &[Expr], y: &[Expr], coords: &[S]) -> Vec<Expr> {
    (0..coords.len())
        .map(|u| {
            sum(coords
                .iter()
                .enumerate()
                .map(|(a, c)| &x[a] * y[u].diff(c.as_ref()) - &y[a] * x[u].diff(c.as_ref())))
        })
        .collect()
}

/// Read `C` off the frame at the identity: `C^u_{rs} = -[X_r, X_s]^u(0)`.
pub fn structure_from_frame(ex: &EtaXi) -> Result<StructureConstants> {
    let k = ex.dim();
    let fields = ex.fields();
    let origin: BTreeMap<String, f64> = ex.alpha.iter().map(|a| (a.clone(), 0.0)).collect();
    let mut out = StructureConstants::zero(k);
    for r in 0..k {
        for s in 0..k {
            let br = field_commutator(&fields[r], &fields[s], &ex.alpha);
            for (u, e) in br.iter().enumerate() {
                let i = out.idx(u, r, s);
                out.c[i] = -e.eval_real(&origin)?;
            }
        }
    }
    Ok(out)
}

/// The three right-invariant geometry checks.
#[derive(Debug, Clone, PartialEq)]
pub struct GeometryReport {
    /// `[X_r, X_s] - C^t_{rs} X_t = 0`.
    pub commutators: CheckReport,
    /// `i_{X_s} θ^r = δ^r_s`.
    pub duality: CheckReport,
    /// `dθ^r + ½ C^r_{st} θ^s ∧ θ^t = 0`.
    pub maurer_cartan: CheckReport,
}

impl GeometryReport {
    pub fn summary(&self) -> CheckReport {
        CheckReport::aggregate(
            "invariant-geometry",
            vec![
                self.commutators.clone(),
                self.duality.clone(),
                self.maurer_cartan.clone(),
            ],
        )
    }
}

/// Sampled check of the frame, coframe and structure equations on `dom`,
/// which must bind the group coordinates.
pub fn invariant_geometry_check(
    model: &LieGroupModel,
    ex: &EtaXi,
    dom: &Domain,
    opts: &CheckOptions,
) -> Result<GeometryReport> {
    let k = model.dim();
    let c = &model.constants;
    let fields = ex.fields();
    let mut comm = Vec::new();
    for r in 0..k {
        for s in r + 1..k {
            let br = field_commutator(&fields[r], &fields[s], &ex.alpha);
            for (u, b) in br.into_iter().enumerate() {
                comm.push(b - sum((0..k).map(|t| c.get(t, r, s) * &fields[t][u])));
            }
        }
    }
    let commutators = if comm.is_empty() {
        plain_report("commutators", 0, 0.0, opts.tolerance_for(&[]), opts.seed)
    } else {
        check_vanishing("commutators", &comm, dom, opts)?
    };
    let (duality, maurer_cartan) = match ex.forms() {
        Some(theta) => symbolic_coframe_checks(c, &ex.alpha, &fields, &theta, dom, opts)?,
        None => numeric_coframe_checks(c, ex, dom, opts)?,
    };
    Ok(GeometryReport {
        commutators,
        duality,
        maurer_cartan,
    })
}

fn symbolic_coframe_checks(
    c: &StructureConstants,
    alpha: &[String],
    fields: &[Vec<Expr>],
    theta: &[Vec<Expr>],
    dom: &Domain,
    opts: &CheckOptions,
) -> Result<(CheckReport, CheckReport)> {
    let k = alpha.len();
    let mut dual = Vec::with_capacity(k * k);
    for r in 0..k {
        for s in 0..k {
            let pairing = sum((0..k).map(|a| &theta[r][a] * &fields[s][a]));
            dual.push(if r == s { pairing - 1.0 } else { pairing });
        }
    }
    let mut mc = Vec::new();
    for r in 0..k {
        for a in 0..k {
            for b in a + 1..k {
                let d = theta[r][b].diff(&alpha[a]) - theta[r][a].diff(&alpha[b]);
                let wedge = sum((0..k).flat_map(|s| (0..k).map(move |t| (s, t))).filter_map(|(s, t)| {
                    let v = c.get(r, s, t);
                    (v != 0.0).then(|| v * &theta[s][a] * &theta[t][b])
                }));
                mc.push(d + wedge);
            }
        }
    }
    let duality = check_vanishing("duality", &dual, dom, opts)?;
    let maurer_cartan = if mc.is_empty() {
        plain_report("maurer-cartan", 0, 0.0, opts.tolerance_for(&[]), opts.seed)
    } else {
        check_vanishing("maurer-cartan", &mc, dom, opts)?
    };
    Ok((duality, maurer_cartan))
}

/// Per-point `ξ = η⁻¹` and `∂_a ξ = -ξ (∂_a η) ξ`.
fn numeric_coframe_checks(
    c: &StructureConstants,
    ex: &EtaXi,
    dom: &Domain,
    opts: &CheckOptions,
) -> Result<(CheckReport, CheckReport)> {
    let k = ex.dim();
    let mut exprs: Vec<Expr> = ex.eta.iter().flatten().cloned().collect();
    for a in &ex.alpha {
        exprs.extend(ex.eta.iter().flatten().map(|e| e.diff(a)));
    }
    let names = dom.names();
    let tape = Tape::compile(&exprs, &names)?;
    let tol = opts.tolerance_for(&exprs);
    let pos: Vec<usize> = ex
        .alpha
        .iter()
        .map(|a| {
            names
                .iter()
                .position(|n| n == a)
                .ok_or_else(|| Error::UnboundVariable(a.clone()))
        })
        .collect::<Result<_>>()?;
    let frame = |x: &[f64]| -> Result<(Matrix, Matrix, Vec<Matrix>)> {
        let mut out = vec![0.0; exprs.len()];
        tape.eval_real(x, &mut out)?;
        let block = |i: usize| -> Matrix {
            (0..k)
                .map(|r| out[i * k * k + r * k..i * k * k + (r + 1) * k].to_vec())
                .collect()
        };
        let eta = block(0);
        let alpha: Vec<f64> = pos.iter().map(|&i| x[i]).collect();
        let xi = ex.xi_at(&alpha)?;
        let deta: Vec<Matrix> = (0..k).map(|a| block(a + 1)).collect();
        Ok((eta, xi, deta))
    };
    let duality = crate::check::check_points("duality", dom, opts, tol, |x| {
        let (eta, xi, _) = frame(x)?;
        // θ^r(X_s) = (-ξ)(-η) = ξη.
        let p = linalg::matmul(&xi, &eta);
        Ok(max_off_identity(&p))
    })?;
    let maurer_cartan = crate::check::check_points("maurer-cartan", dom, opts, tol, |x| {
        let (_, xi, deta) = frame(x)?;
        let theta: Matrix = xi.iter().map(|row| row.iter().map(|v| -v).collect()).collect();
        // ∂_a θ = ξ (∂_a η) ξ.
        let dtheta: Vec<Matrix> = deta
            .iter()
            .map(|d| linalg::matmul(&linalg::matmul(&xi, d), &xi))
            .collect();
        let mut worst = 0.0f64;
        for r in 0..k {
            for a in 0..k {
                for b in a + 1..k {
                    let mut v = dtheta[a][r][b] - dtheta[b][r][a];
                    for s in 0..k {
                        for t in 0..k {
                            v += c.get(r, s, t) * theta[s][a] * theta[t][b];
                        }
                    }
                    worst = worst.max(libm::fabs(v));
                }
            }
        }
        Ok(worst)
    })?;
    Ok((duality, maurer_cartan))
}

fn max_off_identity(m: &Matrix) -> f64 {
    let mut worst = 0.0f64;
    for (r, row) in m.iter().enumerate() {
        for (s, v) in row.iter().enumerate() {
            worst = worst.max(libm::fabs(v - if r == s { 1.0 } else { 0.0 }));
        }
    }
    worst
}

/// `R_{rs} = {F_r, F_s} + C^t_{rs} F_t` for `r < s`, in row-major order.
pub fn bracket_remainders(c: &StructureConstants, fs: &[Expr], chart: &Chart) -> Vec<(usize, usize, Expr)> {
    let k = c.dim();
    let mut out = Vec::new();
    for r in 0..k {
        for s in r + 1..k {
            let lin = sum((0..k)
                .filter(|t| c.get(*t, r, s) != 0.0)
                .map(|t| c.get(t, r, s) * &fs[t]));
            out.push((r, s, poisson_bracket(&fs[r], &fs[s], chart) + lin));
        }
    }
    out
}

/// Estimated cocycle plus the constancy check behind it.
#[derive(Debug, Clone, PartialEq)]
pub struct RealizationReport {
    /// Sample means of `{H_r, H_s} + C^t_{rs} H_t`, antisymmetrised.
    pub d: Matrix,
    /// Residual is the largest per-entry sample variance.
    pub report: CheckReport,
}

/// `{H_r, H_s} = -C^t_{rs} H_t + d_{rs}` with constant `d`, on `dom` over
/// the realization chart.
pub fn realization_bracket_check(
    model: &LieGroupModel,
    dom: &Domain,
    opts: &CheckOptions,
) -> Result<RealizationReport> {
    let real = model.realization()?;
    let rem = bracket_remainders(&model.constants, &real.hamiltonians, &real.chart);
    constancy("realization", model.dim(), &rem, dom, opts, None)
}

/// Sample every remainder; `expected` (when given) is subtracted and the
/// residual becomes the largest absolute deviation instead of the variance.
fn constancy(
    label: &str,
    k: usize,
    rem: &[(usize, usize, Expr)],
    dom: &Domain,
    opts: &CheckOptions,
    expected: Option<&[Vec<f64>]>,
) -> Result<RealizationReport> {
    let mut d = vec![vec![0.0; k]; k];
    let tol = opts.tol.unwrap_or(match expected {
        Some(_) => opts.tolerance_for(&rem.iter().map(|(_, _, e)| e.clone()).collect::<Vec<_>>()),
        None => CONSTANT_VARIANCE_TOL,
    });
    if rem.is_empty() {
        let report = plain_report(label, 0, 0.0, tol, opts.seed);
        return Ok(RealizationReport { d, report });
    }
    let exprs: Vec<Expr> = rem.iter().map(|(_, _, e)| e.clone()).collect();
    let samples = dom.sample(opts.samples, opts.seed)?;
    let tape = Tape::compile(&exprs, &samples.names)?;
    let mut values: Vec<Vec<Complex64>> = Vec::with_capacity(samples.len());
    let mut out = vec![Complex64::new(0.0, 0.0); exprs.len()];
    for (i, x) in samples.rows.iter().enumerate() {
        tape.eval_at(x, &mut out).map_err(|e| e.at_point(&samples.point(i)))?;
        values.push(out.clone());
    }
    let n = values.len().max(1) as f64;
    let centre: Vec<Complex64> = match expected {
        Some(exp) => rem.iter().map(|(r, s, _)| Complex64::new(exp[*r][*s], 0.0)).collect(),
        None => (0..exprs.len())
            .map(|j| values.iter().map(|v| v[j]).sum::<Complex64>() / n)
            .collect(),
    };
    let mut residual = 0.0f64;
    let mut worst = (0.0f64, 0usize);
    for j in 0..exprs.len() {
        let dev: Vec<f64> = values.iter().map(|v| (v[j] - centre[j]).norm()).collect();
        let stat = match expected {
            Some(_) => dev.iter().fold(0.0f64, |m, v| m.max(*v)),
            None => dev.iter().map(|v| v * v).sum::<f64>() / n,
        };
        let stat = if stat.is_nan() { f64::INFINITY } else { stat };
        residual = residual.max(stat);
        for (i, v) in dev.iter().enumerate() {
            if *v > worst.0 || v.is_nan() {
                worst = (if v.is_nan() { f64::INFINITY } else { *v }, i);
            }
        }
    }
    for ((r, s, _), c) in rem.iter().zip(&centre) {
        d[*r][*s] = c.re;
        d[*s][*r] = -c.re;
    }
    let report = CheckReport {
        label: label.into(),
        n_samples: samples.len(),
        max_abs_residual: residual,
        tolerance: tol,
        passed: residual <= tol,
        worst_point: samples.point(worst.1),
        seed: opts.seed,
        children: Vec::new(),
        note: None,
    };
    Ok(RealizationReport { d, report })
}

/// `H_r(q, ∂S/∂q) - η^s_r(α) ∂S/∂α^s` for `S(q; α)`.
pub fn group_hj_residuals(model: &LieGroupModel, ex: &EtaXi, s: &Expr) -> Result<Vec<Expr>> {
    let real = model.realization()?;
    let map: BTreeMap<String, Expr> = real
        .chart
        .q
        .iter()
        .zip(&real.chart.p)
        .map(|(q, p)| (p.clone(), s.diff(q)))
        .collect();
    let s_alpha = s.grad(&model.alpha);
    let k = model.dim();
    Ok((0..k)
        .map(|r| real.hamiltonians[r].subs_all(&map) - sum((0..k).map(|u| &ex.eta[u][r] * &s_alpha[u])))
        .collect())
}

/// `h_r = -η^s_r π_s` on `T*G`.
pub fn momentum_functions(model: &LieGroupModel, ex: &EtaXi) -> Vec<Expr> {
    let k = model.dim();
    (0..k)
        .map(|r| -sum((0..k).map(|s| &ex.eta[s][r] * Expr::var(model.momenta[s].as_str()))))
        .collect()
}

/// `(q.., α..; p.., π..)` on `T*(Q × G)`.
pub fn extended_chart(model: &LieGroupModel) -> Result<Chart> {
    let real = model.realization()?;
    let mut q = real.chart.q.clone();
    q.extend(model.alpha.iter().cloned());
    let mut p = real.chart.p.clone();
    p.extend(model.momenta.iter().cloned());
    Ok(Chart { q, p })
}

/// `H̃_r = H_r + h_r`.
pub fn lifted_hamiltonians(model: &LieGroupModel, ex: &EtaXi) -> Result<Vec<Expr>> {
    let real = model.realization()?;
    Ok(real
        .hamiltonians
        .iter()
        .zip(momentum_functions(model, ex))
        .map(|(h, m)| h + m)
        .collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct MomentumReport {
    /// Children: `{h_r, h_s} + C^t_{rs} h_t = 0` and
    /// `{H̃_r, H̃_s}~ + C^t_{rs} H̃_t - d_{rs} = 0`.
    pub report: CheckReport,
    pub d: Matrix,
    /// `μ⁻¹(0)` is invariant exactly when `d = 0`.
    pub zero_level_invariant: bool,
}

/// Check the lifted brackets against the cocycle `d` on `dom`, which must
/// bind `q, p, α, π`.
pub fn momentum_map_check(
    model: &LieGroupModel,
    ex: &EtaXi,
    d: &[Vec<f64>],
    dom: &Domain,
    opts: &CheckOptions,
) -> Result<MomentumReport> {
    let k = model.dim();
    if d.len() != k || d.iter().any(|row| row.len() != k) {
        return Err(Error::Dimension(format!("cocycle must be {k}×{k}")));
    }
    let chart = extended_chart(model)?;
    let zero = vec![vec![0.0; k]; k];
    let h = momentum_functions(model, ex);
    let momenta = constancy(
        "momenta",
        k,
        &bracket_remainders(&model.constants, &h, &chart),
        dom,
        opts,
        Some(&zero),
    )?;
    let lifted = constancy(
        "lifted",
        k,
        &bracket_remainders(&model.constants, &lifted_hamiltonians(model, ex)?, &chart),
        dom,
        opts,
        Some(d),
    )?;
    let zero_level_invariant = d.iter().flatten().all(|v| libm::fabs(*v) <= STRUCTURE_TOL);
    let mut report = CheckReport::aggregate("momentum-map", vec![momenta.report, lifted.report]);
    if !zero_level_invariant {
        report = report.with_note("d ≠ 0: the zero level set of the momentum map is not invariant");
    }
    Ok(MomentumReport {
        report,
        d: d.to_vec(),
        zero_level_invariant,
    })
}
