//! Linear differential operators `D = Σ g_σ ∂^σ` with coefficients on the
//! left, their principal symbols, and the homogenisation trick that lets the
//! symbol see lower-order terms.
//!
//! Coefficients are either scalar expressions or matrices of expressions
//! (operators between trivialised vector bundles); the [`Coefficient`] trait
//! abstracts over both so that an operator never mixes them.
//!
//! Normalisation: the nested commutator `[…[D, f₁]…, f_k]` of an order-`k`
//! operator equals [`Symbol::contract`] of `(df₁, …, df_k)`, the symmetric
//! tensor evaluated on the symmetrised product `Σ_π df_π(1) ⊗ … ⊗ df_π(k)`.
//! With all `fᵢ = f` this is `k!` times the symbol polynomial at `p = df`.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;
use core::cmp::Ordering;

use num_complex::Complex64;

use crate::check::{check_points, CheckOptions, CheckReport, Domain, Point};
use crate::expr::{sum, Expr, Scope, Tape};
use crate::linalg;
use crate::{Error, Result};

/// Exponents of `∂/∂x₁ … ∂/∂xₙ`, in variable declaration order.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct MultiIndex(pub Vec<u32>);

impl MultiIndex {
    pub fn zero(n: usize) -> MultiIndex {
        MultiIndex(vec![0; n])
    }

    pub fn unit(n: usize, i: usize) -> MultiIndex {
        let mut m = MultiIndex::zero(n);
        m.0[i] = 1;
        m
    }

    pub fn degree(&self) -> usize {
        self.0.iter().map(|&e| e as usize).sum()
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|&e| e == 0)
    }

    fn add(&self, o: &MultiIndex) -> MultiIndex {
        MultiIndex(self.0.iter().zip(&o.0).map(|(a, b)| a + b).collect())
    }

    fn sub(&self, o: &MultiIndex) -> MultiIndex {
        MultiIndex(self.0.iter().zip(&o.0).map(|(a, b)| a - b).collect())
    }

    /// Every `ν ≤ self` componentwise.
    fn below(&self) -> Vec<MultiIndex> {
        let mut out = vec![MultiIndex::zero(self.0.len())];
        for (i, &e) in self.0.iter().enumerate() {
            out = out
                .into_iter()
                .flat_map(|m| {
                    (0..=e).map(move |k| {
                        let mut m = m.clone();
                        m.0[i] = k;
                        m
                    })
                })
                .collect();
        }
        out
    }

    /// `Π binom(σᵢ, νᵢ)`.
    fn binomial(&self, nu: &MultiIndex) -> f64 {
        self.0.iter().zip(&nu.0).map(|(&s, &v)| binom(s, v)).product()
    }

    /// `σ! = Π σᵢ!`.
    fn factorial(&self) -> f64 {
        self.0
            .iter()
            .map(|&e| (1..=e).map(|k| k as f64).product::<f64>())
            .product()
    }

    fn differentiate(&self, f: &Expr, vars: &[String]) -> Expr {
        let mut out = f.clone();
        for (v, &e) in vars.iter().zip(&self.0) {
            for _ in 0..e {
                out = out.diff(v);
            }
        }
        out
    }

    fn monomial(&self, momenta: &[String]) -> Expr {
        self.0
            .iter()
            .zip(momenta)
            .fold(Expr::one(), |acc, (&e, p)| acc * Expr::var(p.as_str()).powi(e as i32))
    }
}

fn binom(n: u32, k: u32) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// Graded order: lower total degree first; within a degree, larger
/// exponents on earlier variables first.
impl Ord for MultiIndex {
    fn cmp(&self, other: &Self) -> Ordering {
        self.degree().cmp(&other.degree()).then_with(|| other.0.cmp(&self.0))
    }
}

impl PartialOrd for MultiIndex {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Operator coefficient: a scalar expression or a matrix of them.
pub trait Coefficient: Clone + PartialEq + core::fmt::Debug {
    fn is_zero(&self) -> bool;
    fn plus(&self, other: &Self) -> Self;
    /// Multiply every entry by a scalar function.
    fn times(&self, f: &Expr) -> Self;
    fn same_shape(&self, other: &Self) -> bool;
    fn entries(&self) -> Vec<&Expr>;
}

impl Coefficient for Expr {
    fn is_zero(&self) -> bool {
        Expr::is_zero(self)
    }
    fn plus(&self, other: &Expr) -> Expr {
        self + other
    }
    fn times(&self, f: &Expr) -> Expr {
        f * self
    }
    fn same_shape(&self, _: &Expr) -> bool {
        true
    }
    fn entries(&self) -> Vec<&Expr> {
        vec![self]
    }
}

/// A dense `rows × cols` matrix of expressions, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct ExprMatrix {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<Expr>,
}

impl ExprMatrix {
    pub fn zeros(rows: usize, cols: usize) -> ExprMatrix {
        ExprMatrix {
            rows,
            cols,
            data: vec![Expr::zero(); rows * cols],
        }
    }

    pub fn from_rows(rows: Vec<Vec<Expr>>) -> Result<ExprMatrix> {
        let r = rows.len();
        let c = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|row| row.len() != c) {
            return Err(Error::Dimension("ragged matrix rows".into()));
        }
        Ok(ExprMatrix {
            rows: r,
            cols: c,
            data: rows.into_iter().flatten().collect(),
        })
    }

    /// Constant matrix from real entries.
    pub fn constant(rows: &[Vec<f64>]) -> Result<ExprMatrix> {
        ExprMatrix::from_rows(
            rows.iter()
                .map(|r| r.iter().map(|&v| Expr::real(v)).collect())
                .collect(),
        )
    }

    pub fn get(&self, i: usize, j: usize) -> &Expr {
        &self.data[i * self.cols + j]
    }

    pub fn row_vecs(&self) -> Vec<Vec<Expr>> {
        self.data.chunks(self.cols.max(1)).map(|r| r.to_vec()).collect()
    }

    pub fn eval(&self, scope: &dyn Scope) -> Result<Vec<Vec<Complex64>>> {
        let mut out = Vec::with_capacity(self.rows);
        for i in 0..self.rows {
            let row: Result<Vec<Complex64>> = (0..self.cols).map(|j| self.get(i, j).eval(scope)).collect();
            out.push(row?);
        }
        Ok(out)
    }

    pub fn map(&self, f: impl Fn(&Expr) -> Expr) -> ExprMatrix {
        ExprMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(f).collect(),
        }
    }

    pub fn mul_vec(&self, v: &[Expr]) -> Vec<Expr> {
        (0..self.rows)
            .map(|i| sum((0..self.cols).map(|j| self.get(i, j) * &v[j])))
            .collect()
    }
}

impl Coefficient for ExprMatrix {
    fn is_zero(&self) -> bool {
        self.data.iter().all(Expr::is_zero)
    }
    fn plus(&self, other: &ExprMatrix) -> ExprMatrix {
        ExprMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&other.data).map(|(a, b)| a + b).collect(),
        }
    }
    fn times(&self, f: &Expr) -> ExprMatrix {
        self.map(|e| f * e)
    }
    fn same_shape(&self, other: &ExprMatrix) -> bool {
        self.rows == other.rows && self.cols == other.cols
    }
    fn entries(&self) -> Vec<&Expr> {
        self.data.iter().collect()
    }
}

/// `D = Σ_σ g_σ ∂^σ` over the variables `vars`.
#[derive(Debug, Clone, PartialEq)]
pub struct DiffOp<C: Coefficient> {
    pub vars: Vec<String>,
    pub terms: BTreeMap<MultiIndex, C>,
}

pub type ScalarOp = DiffOp<Expr>;
pub type MatrixOp = DiffOp<ExprMatrix>;

/// Default name of the momentum conjugate to `var`.
pub fn momentum_name(var: &str) -> String {
    format!("p_{var}")
}

impl<C: Coefficient> DiffOp<C> {
    pub fn new<S: AsRef<str>>(vars: &[S]) -> DiffOp<C> {
        DiffOp {
            vars: vars.iter().map(|s| s.as_ref().to_string()).collect(),
            terms: BTreeMap::new(),
        }
    }

    /// Builder form of [`DiffOp::add_term`].
    pub fn with(mut self, index: &[u32], coef: C) -> Result<DiffOp<C>> {
        self.add_term(MultiIndex(index.to_vec()), coef)?;
        Ok(self)
    }

    /// Accumulate `coef ∂^index`; zero coefficients are dropped.
    pub fn add_term(&mut self, index: MultiIndex, coef: C) -> Result<()> {
        if index.0.len() != self.vars.len() {
            return Err(Error::Dimension(format!(
                "multi-index of length {} over {} variables",
                index.0.len(),
                self.vars.len()
            )));
        }
        if let Some(first) = self.terms.values().next() {
            if !first.same_shape(&coef) {
                return Err(Error::Dimension("coefficient shapes differ".into()));
            }
        }
        let merged = match self.terms.remove(&index) {
            Some(old) => old.plus(&coef),
            None => coef,
        };
        if !merged.is_zero() {
            self.terms.insert(index, merged);
        }
        Ok(())
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    /// Highest `|σ|` with a structurally non-zero coefficient.
    pub fn order(&self) -> Option<usize> {
        self.terms.keys().map(MultiIndex::degree).max()
    }

    pub fn momenta(&self) -> Vec<String> {
        self.vars.iter().map(|v| momentum_name(v)).collect()
    }

    /// `[D, f̂] = Σ_σ g_σ Σ_{0<ν≤σ} binom(σ,ν) (∂^ν f) ∂^{σ-ν}`.
    pub fn commutator_with_function(&self, f: &Expr) -> DiffOp<C> {
        let mut out = DiffOp {
            vars: self.vars.clone(),
            terms: BTreeMap::new(),
        };
        for (sigma, g) in &self.terms {
            for nu in sigma.below() {
                if nu.is_zero() {
                    continue;
                }
                let df = nu.differentiate(f, &self.vars);
                if df.is_zero() {
                    continue;
                }
                let coef = g.times(&(sigma.binomial(&nu) * df));
                out.add_term(sigma.sub(&nu), coef).expect("same shape");
            }
        }
        out
    }

    /// The order-zero part left after commuting with each of `fs` in turn.
    pub fn symbol_via_commutators(&self, fs: &[Expr]) -> Option<C> {
        let mut op = self.clone();
        for f in fs {
            op = op.commutator_with_function(f);
        }
        op.terms.get(&MultiIndex::zero(self.vars.len())).cloned()
    }

    /// Top-order part as a polynomial in the momenta `p_x`.
    pub fn principal_symbol(&self) -> Symbol<C> {
        let degree = self.order().unwrap_or(0);
        self.symbol_at_degree(degree)
    }

    /// The degree-`k` part of the full symbol.
    pub fn symbol_at_degree(&self, k: usize) -> Symbol<C> {
        Symbol {
            vars: self.vars.clone(),
            momenta: self.momenta(),
            degree: k,
            terms: self
                .terms
                .iter()
                .filter(|(s, _)| s.degree() == k)
                .map(|(s, g)| (s.clone(), g.clone()))
                .collect(),
        }
    }

    /// Lift a second-order operator to a homogeneous one on `vars × {τ}`:
    /// `a ∂∂ + b ∂ + e ↦ a ∂∂ + b ∂∂_τ + e ∂_τ²`.
    pub fn homogenize(&self, tau: &str) -> Result<DiffOp<C>> {
        if self.vars.iter().any(|v| v == tau) {
            return Err(Error::Dimension(format!("`{tau}` is already a variable")));
        }
        if self.order().unwrap_or(0) > 2 {
            return Err(Error::Unsupported("homogenisation beyond order two".into()));
        }
        let mut vars = self.vars.clone();
        vars.push(tau.to_string());
        let mut out = DiffOp {
            vars,
            terms: BTreeMap::new(),
        };
        for (s, g) in &self.terms {
            let mut idx = s.0.clone();
            idx.push(2 - s.degree() as u32);
            out.add_term(MultiIndex(idx), g.clone())?;
        }
        Ok(out)
    }
}

impl DiffOp<Expr> {
    /// `D f`.
    pub fn apply(&self, f: &Expr) -> Expr {
        sum(self.terms.iter().map(|(s, g)| g * s.differentiate(f, &self.vars)))
    }

    fn check_vars(&self, other: &ScalarOp) -> Result<()> {
        if self.vars != other.vars {
            return Err(Error::Dimension("operators over different variables".into()));
        }
        Ok(())
    }

    /// `D₁ ∘ D₂`, expanded with the Leibniz rule.
    pub fn compose(&self, other: &ScalarOp) -> Result<ScalarOp> {
        self.check_vars(other)?;
        let mut out = ScalarOp::new(&self.vars);
        for (sigma, g) in &self.terms {
            for (tau, h) in &other.terms {
                for nu in sigma.below() {
                    let dh = nu.differentiate(h, &self.vars);
                    if dh.is_zero() {
                        continue;
                    }
                    let idx = sigma.sub(&nu).add(tau);
                    out.add_term(idx, sigma.binomial(&nu) * g * dh)?;
                }
            }
        }
        Ok(out)
    }

    /// `[D₁, D₂]`. The top-order products `g h ∂^{σ+τ}` cancel exactly and are
    /// never formed, so the result has order at most `k₁ + k₂ - 1`.
    pub fn commutator(&self, other: &ScalarOp) -> Result<ScalarOp> {
        self.check_vars(other)?;
        let mut out = ScalarOp::new(&self.vars);
        let mut half = |a: &ScalarOp, b: &ScalarOp, sign: f64| -> Result<()> {
            for (sigma, g) in &a.terms {
                for (tau, h) in &b.terms {
                    for nu in sigma.below() {
                        if nu.is_zero() {
                            continue;
                        }
                        let dh = nu.differentiate(h, &self.vars);
                        if dh.is_zero() {
                            continue;
                        }
                        let idx = sigma.sub(&nu).add(tau);
                        out.add_term(idx, (sign * sigma.binomial(&nu)) * g * dh)?;
                    }
                }
            }
            Ok(())
        };
        half(self, other, 1.0)?;
        half(other, self, -1.0)?;
        Ok(out)
    }

    /// Principal symbol of `[D₁, D₂]` at degree `k₁ + k₂ - 1`.
    pub fn symbol_bracket(&self, other: &ScalarOp) -> Result<Symbol<Expr>> {
        let k = self.order().unwrap_or(0) + other.order().unwrap_or(0);
        let c = self.commutator(other)?;
        Ok(c.symbol_at_degree(k.saturating_sub(1)))
    }

    /// The symmetric matrix `M` with principal symbol `pᵀ M p` (order two).
    pub fn quadratic_form(&self) -> Result<Vec<Vec<Expr>>> {
        if self.order() != Some(2) {
            return Err(Error::Unsupported(
                "quadratic form of a non-second-order operator".into(),
            ));
        }
        let n = self.vars.len();
        let mut m = vec![vec![Expr::zero(); n]; n];
        for (s, g) in self.terms.iter().filter(|(s, _)| s.degree() == 2) {
            let idx: Vec<usize> = (0..n).filter(|&i| s.0[i] > 0).collect();
            match idx.as_slice() {
                [i] => m[*i][*i] = g.clone(),
                [i, j] => {
                    m[*i][*j] = g / 2.0;
                    m[*j][*i] = g / 2.0;
                }
                _ => unreachable!("degree-two index"),
            }
        }
        Ok(m)
    }

    /// Symbol computed with `θ_K = pᵢ Kⁱⱼ dqʲ` instead of `θ₀`:
    /// `pᵀ (K M Kᵀ) p` where `pᵀ M p` is the usual symbol.
    pub fn symbol_with_form(&self, k: &[Vec<f64>]) -> Result<Expr> {
        let n = self.vars.len();
        if k.len() != n || k.iter().any(|r| r.len() != n) {
            return Err(Error::Dimension(format!("K must be {n}×{n}")));
        }
        if libm::fabs(linalg::det(k)) < 1e-12 {
            return Err(Error::SingularMatrix { point: Vec::new() });
        }
        let m = self.quadratic_form()?;
        let p = self.momenta();
        let mut terms = Vec::new();
        for a in 0..n {
            for b in 0..n {
                // (K M Kᵀ)_ab = Σ K_ai M_ij K_bj
                let entry = sum((0..n).flat_map(|i| (0..n).map(move |j| (i, j))).filter_map(|(i, j)| {
                    let w = k[a][i] * k[b][j];
                    (w != 0.0).then(|| w * &m[i][j])
                }));
                terms.push(entry * Expr::var(p[a].as_str()) * Expr::var(p[b].as_str()));
            }
        }
        Ok(sum(terms))
    }

    /// Signature of the second-order symbol over the domain.
    pub fn classify(&self, dom: &Domain, opts: &CheckOptions) -> Result<Classification> {
        let m = self.quadratic_form()?;
        let n = self.vars.len();
        let flat: Vec<Expr> = m.into_iter().flatten().collect();
        let tape = Tape::compile(&flat, &dom.names())?;
        let samples = dom.sample(opts.samples, opts.seed)?;
        let mut out = vec![0.0; flat.len()];
        let mut signature = None;
        let mut witnesses: Vec<(Kind, Point)> = Vec::new();
        for (i, x) in samples.rows.iter().enumerate() {
            tape.eval_real(x, &mut out).map_err(|e| e.at_point(&samples.point(i)))?;
            let mat: linalg::Matrix = out.chunks(n).map(|r| r.to_vec()).collect();
            let sig = Signature::of(&linalg::sym_eigenvalues(&mat));
            signature.get_or_insert(sig);
            let kind = sig.kind();
            if witnesses.iter().all(|(k, _)| *k != kind) {
                witnesses.push((kind, samples.point(i)));
            }
        }
        let kind = match witnesses.as_slice() {
            [] => Kind::Degenerate,
            [(k, _)] => *k,
            _ => Kind::Mixed,
        };
        Ok(Classification {
            kind,
            signature: signature.unwrap_or_default(),
            witnesses,
            n_samples: samples.len(),
        })
    }
}

impl DiffOp<ExprMatrix> {
    /// `D s` for a vector of section components.
    pub fn apply(&self, s: &[Expr]) -> Vec<Expr> {
        let rows = self.terms.values().next().map_or(0, |c| c.rows);
        let mut out = vec![Expr::zero(); rows];
        for (sigma, g) in &self.terms {
            let ds: Vec<Expr> = s.iter().map(|f| sigma.differentiate(f, &self.vars)).collect();
            for (o, v) in out.iter_mut().zip(g.mul_vec(&ds)) {
                *o = &*o + v;
            }
        }
        out
    }
}

/// Eigenvalue counts of a real symmetric symbol matrix.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Signature {
    pub positive: usize,
    pub negative: usize,
    pub zero: usize,
}

impl Signature {
    fn of(vals: &[f64]) -> Signature {
        let scale = vals.iter().fold(0.0f64, |m, v| m.max(libm::fabs(*v)));
        let eps = 1e-10 * scale.max(f64::MIN_POSITIVE);
        let mut s = Signature::default();
        for &v in vals {
            if v > eps {
                s.positive += 1;
            } else if v < -eps {
                s.negative += 1;
            } else {
                s.zero += 1;
            }
        }
        s
    }

    fn kind(&self) -> Kind {
        if self.zero > 0 {
            Kind::Degenerate
        } else if self.negative == 0 || self.positive == 0 {
            Kind::Elliptic
        } else if self.negative == 1 || self.positive == 1 {
            Kind::Hyperbolic
        } else {
            Kind::Indefinite
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Kind {
    /// Definite symbol (Riemannian metric).
    Elliptic,
    /// One eigenvalue of the opposite sign (Lorentzian metric).
    Hyperbolic,
    /// A vanishing eigenvalue somewhere.
    Degenerate,
    /// Indefinite but not Lorentzian.
    Indefinite,
    /// The kind changes across the domain.
    Mixed,
}

impl Kind {
    pub fn name(self) -> &'static str {
        match self {
            Kind::Elliptic => "elliptic",
            Kind::Hyperbolic => "hyperbolic",
            Kind::Degenerate => "degenerate",
            Kind::Indefinite => "indefinite",
            Kind::Mixed => "mixed",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Classification {
    pub kind: Kind,
    /// Signature at the first sample.
    pub signature: Signature,
    /// First sample of each kind encountered.
    pub witnesses: Vec<(Kind, Point)>,
    pub n_samples: usize,
}

/// Homogeneous part `Σ_{|σ|=k} g_σ p^σ` of an operator's symbol.
#[derive(Debug, Clone, PartialEq)]
pub struct Symbol<C: Coefficient> {
    pub vars: Vec<String>,
    pub momenta: Vec<String>,
    pub degree: usize,
    pub terms: BTreeMap<MultiIndex, C>,
}

impl<C: Coefficient> Symbol<C> {
    /// The symmetric `k`-linear form evaluated on the symmetrised product of
    /// `covectors`, each given by its components in `vars`.
    pub fn contract(&self, covectors: &[Vec<Expr>]) -> Result<Option<C>> {
        let n = self.vars.len();
        let k = self.degree;
        if covectors.len() != k || covectors.iter().any(|c| c.len() != n) {
            return Err(Error::Dimension(format!("need {k} covectors of length {n}")));
        }
        let mut acc: Option<C> = None;
        // Each index sequence of type σ stands for σ! permutations.
        let mut seq = vec![0usize; k];
        let total = n.pow(k as u32);
        for code in 0..total {
            let mut c = code;
            for s in seq.iter_mut() {
                *s = c % n;
                c /= n;
            }
            let mut sigma = MultiIndex::zero(n);
            for &s in &seq {
                sigma.0[s] += 1;
            }
            let Some(g) = self.terms.get(&sigma) else {
                continue;
            };
            let prod = seq
                .iter()
                .zip(covectors)
                .fold(Expr::real(sigma.factorial()), |a, (&s, cv)| a * &cv[s]);
            if prod.is_zero() {
                continue;
            }
            let term = g.times(&prod);
            acc = Some(match acc {
                Some(a) => a.plus(&term),
                None => term,
            });
        }
        Ok(acc)
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }
}

impl Symbol<Expr> {
    /// The symbol as a polynomial in the momenta.
    pub fn to_expr(&self) -> Expr {
        sum(self.terms.iter().map(|(s, g)| g * s.monomial(&self.momenta)))
    }
}

impl Symbol<ExprMatrix> {
    /// The symbol as a matrix of polynomials in the momenta.
    pub fn to_matrix(&self) -> Option<ExprMatrix> {
        let first = self.terms.values().next()?;
        let mut out = ExprMatrix::zeros(first.rows, first.cols);
        for (s, g) in &self.terms {
            out = out.plus(&g.times(&s.monomial(&self.momenta)));
        }
        Some(out)
    }
}

/// `(dS)*f_D - c`: momenta `p_x ↦ ∂S/∂x`, except the momentum of `tau`
/// (if given) which is set to 1, i.e. `S̃ = τ + S`.
pub fn hj_residual_from_symbol(symbol: &Symbol<Expr>, s: &Expr, c: &Expr, tau: Option<&str>) -> Expr {
    let map: BTreeMap<String, Expr> = symbol
        .vars
        .iter()
        .zip(&symbol.momenta)
        .map(|(v, p)| {
            let value = if Some(v.as_str()) == tau {
                Expr::one()
            } else {
                s.diff(v)
            };
            (p.clone(), value)
        })
        .collect();
    symbol.to_expr().subs_all(&map) - c
}

/// A matrix-valued symbol viewed as a family of Hamiltonians, one per
/// eigenvalue branch.
#[derive(Debug, Clone, PartialEq)]
pub struct MatrixHamiltonian {
    pub matrix: ExprMatrix,
}

/// Tolerance on `|H - H†|` for the eigenvalue split.
pub const HERMITIAN_TOL: f64 = 1e-9;

impl MatrixHamiltonian {
    pub fn new(matrix: ExprMatrix) -> Result<MatrixHamiltonian> {
        if matrix.rows != matrix.cols {
            return Err(Error::Dimension("matrix symbol must be square".into()));
        }
        Ok(MatrixHamiltonian { matrix })
    }

    /// Eigenvalues at a point, ascending; fails if `H` is not Hermitian there.
    pub fn eigenvalues_at(&self, scope: &dyn Scope) -> Result<Vec<f64>> {
        let h = self.matrix.eval(scope)?;
        let n = h.len();
        for i in 0..n {
            for j in 0..n {
                if (h[i][j] - h[j][i].conj()).norm() > HERMITIAN_TOL {
                    return Err(Error::Unsupported(format!(
                        "symbol is not Hermitian at entry ({i}, {j})"
                    )));
                }
            }
        }
        Ok(linalg::hermitian_eigenvalues(&h))
    }

    /// Closed-form eigenvalue branches `λ₋ ≤ λ₊` for a 2×2 Hermitian symbol:
    /// `(a + d)/2 ± √(((a - d)/2)² + H₀₁H₁₀)`.
    pub fn closed_form(&self) -> Option<[Expr; 2]> {
        if self.matrix.rows != 2 {
            return None;
        }
        let m = &self.matrix;
        let (a, d) = (m.get(0, 0), m.get(1, 1));
        let mean = (a + d) / 2.0;
        let half = (a - d) / 2.0;
        let root = (half.powi(2) + m.get(0, 1) * m.get(1, 0)).sqrt();
        Some([&mean - &root, mean + root])
    }

    /// Sampled check that the symbol is Hermitian on the domain.
    pub fn hermitian_check(&self, dom: &Domain, opts: &CheckOptions) -> Result<CheckReport> {
        let n = self.matrix.rows;
        let diffs: Vec<Expr> = (0..n)
            .flat_map(|i| (0..n).map(move |j| (i, j)))
            .map(|(i, j)| self.matrix.get(i, j).clone())
            .collect();
        let tape = Tape::compile(&diffs, &dom.names())?;
        let mut out = vec![Complex64::new(0.0, 0.0); diffs.len()];
        check_points("hermitian", dom, opts, HERMITIAN_TOL, |x| {
            tape.eval_at(x, &mut out)?;
            let mut worst = 0.0f64;
            for i in 0..n {
                for j in 0..n {
                    worst = worst.max((out[i * n + j] - out[j * n + i].conj()).norm());
                }
            }
            Ok(worst)
        })
    }
}

/// Matrix symbol of an operator, with chosen momenta fixed (for instance the
/// homogenising momentum set to 1).
pub fn matrix_symbol_hamiltonians(op: &MatrixOp, fixed: &BTreeMap<String, Expr>) -> Result<MatrixHamiltonian> {
    let sym = op.principal_symbol();
    let m = sym
        .to_matrix()
        .ok_or_else(|| Error::Unsupported("zero operator".into()))?;
    MatrixHamiltonian::new(m.map(|e| e.subs_all(fixed)))
}

/// Sampled comparison of two operators acting on a test function.
pub fn operator_identity_check(
    lhs: &ScalarOp,
    rhs: &ScalarOp,
    test: &Expr,
    dom: &Domain,
    opts: &CheckOptions,
) -> Result<CheckReport> {
    let r = crate::check::sampled_identity_check(&lhs.apply(test), &rhs.apply(test), dom, opts)?;
    Ok(r.with_label("operator-identity"))
}
