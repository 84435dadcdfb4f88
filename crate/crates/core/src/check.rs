//! Sampling domains and numerical identity checks.
//!
//! A [`Domain`] is a box of per-variable intervals with optional exclusion
//! constraints. Checks draw points with a seeded ChaCha generator, so a
//! report is reproducible from its seed.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::expr::{Expr, Tape};
use crate::{Error, Result};

pub const DEFAULT_SAMPLES: usize = 200;
pub const DEFAULT_SEED: u64 = 42;
pub const DEFAULT_MARGIN: f64 = 1e-3;
/// Tolerance for polynomial and rational identities.
pub const TOL_RATIONAL: f64 = 1e-9;
/// Tolerance once square roots, logarithms or trigonometric functions appear.
pub const TOL_TRANSCENDENTAL: f64 = 1e-7;

/// A named sample point.
pub type Point = BTreeMap<String, f64>;

#[derive(Debug, Clone, PartialEq)]
pub struct Interval {
    pub name: String,
    pub lo: f64,
    pub hi: f64,
}

/// A condition a sample must satisfy to be kept.
#[derive(Debug, Clone, PartialEq)]
pub enum Constraint {
    /// Real part of `expr` is at least `margin`.
    AtLeast { expr: Expr, margin: f64 },
    /// Modulus of `expr` is at least `margin`.
    AwayFromZero { expr: Expr, margin: f64 },
}

impl Constraint {
    fn expr(&self) -> &Expr {
        match self {
            Constraint::AtLeast { expr, .. } | Constraint::AwayFromZero { expr, .. } => expr,
        }
    }

    fn accepts(&self, v: Complex64) -> bool {
        match *self {
            Constraint::AtLeast { margin, .. } => v.re >= margin,
            Constraint::AwayFromZero { margin, .. } => v.norm() >= margin,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Domain {
    pub vars: Vec<Interval>,
    pub constraints: Vec<Constraint>,
}

impl Domain {
    pub fn new() -> Domain {
        Domain::default()
    }

    /// Add (or replace) the interval for `name`.
    pub fn with(mut self, name: &str, lo: f64, hi: f64) -> Domain {
        self.set(name, lo, hi);
        self
    }

    pub fn set(&mut self, name: &str, lo: f64, hi: f64) {
        match self.vars.iter_mut().find(|iv| iv.name == name) {
            Some(iv) => {
                iv.lo = lo;
                iv.hi = hi;
            }
            None => self.vars.push(Interval {
                name: name.into(),
                lo,
                hi,
            }),
        }
    }

    /// Pin `name` to a single value.
    pub fn fixed(self, name: &str, v: f64) -> Domain {
        self.with(name, v, v)
    }

    pub fn at_least(mut self, expr: Expr, margin: f64) -> Domain {
        self.constraints.push(Constraint::AtLeast { expr, margin });
        self
    }

    /// Keep `expr` away from zero by the default margin.
    pub fn avoid_zero(self, expr: Expr) -> Domain {
        self.avoid_zero_by(expr, DEFAULT_MARGIN)
    }

    pub fn avoid_zero_by(mut self, expr: Expr, margin: f64) -> Domain {
        self.constraints.push(Constraint::AwayFromZero { expr, margin });
        self
    }

    pub fn names(&self) -> Vec<String> {
        self.vars.iter().map(|iv| iv.name.clone()).collect()
    }

    pub fn contains_var(&self, name: &str) -> bool {
        self.vars.iter().any(|iv| iv.name == name)
    }

    fn validate(&self) -> Result<()> {
        for iv in &self.vars {
            if !(iv.lo.is_finite() && iv.hi.is_finite()) || iv.lo > iv.hi {
                return Err(Error::DegenerateDomain(format!(
                    "interval for `{}` is [{}, {}]",
                    iv.name, iv.lo, iv.hi
                )));
            }
        }
        for (i, a) in self.vars.iter().enumerate() {
            if self.vars[..i].iter().any(|b| b.name == a.name) {
                return Err(Error::DegenerateDomain(format!("`{}` declared twice", a.name)));
            }
        }
        Ok(())
    }

    /// Draw `n` points satisfying every constraint.
    ///
    /// More than 99% rejections is reported as an infeasible domain.
    pub fn sample(&self, n: usize, seed: u64) -> Result<Samples> {
        self.validate()?;
        let names = self.names();
        let guards: Vec<Expr> = self.constraints.iter().map(|c| c.expr().clone()).collect();
        let tape = Tape::compile(&guards, &names)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let budget = 100 * n + 100;
        let mut rows = Vec::with_capacity(n);
        let mut attempts = 0;
        let mut vals = alloc::vec![Complex64::new(0.0, 0.0); guards.len()];
        while rows.len() < n {
            if attempts >= budget {
                return Err(Error::InfeasibleDomain {
                    accepted: rows.len(),
                    attempts,
                });
            }
            attempts += 1;
            let x: Vec<f64> = self
                .vars
                .iter()
                .map(|iv| iv.lo + (iv.hi - iv.lo) * rng.gen::<f64>())
                .collect();
            if tape.eval_at(&x, &mut vals).is_err() {
                continue;
            }
            if self.constraints.iter().zip(&vals).all(|(c, v)| c.accepts(*v)) {
                rows.push(x);
            }
        }
        Ok(Samples { names, rows })
    }
}

/// Accepted sample points, stored row-wise in domain variable order.
#[derive(Debug, Clone)]
pub struct Samples {
    pub names: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Samples {
    pub fn point(&self, i: usize) -> Point {
        self.names.iter().cloned().zip(self.rows[i].iter().copied()).collect()
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CheckOptions {
    pub samples: usize,
    pub seed: u64,
    /// Overrides the default tolerance when set.
    pub tol: Option<f64>,
}

impl Default for CheckOptions {
    fn default() -> Self {
        CheckOptions {
            samples: DEFAULT_SAMPLES,
            seed: DEFAULT_SEED,
            tol: None,
        }
    }
}

impl CheckOptions {
    pub fn with_tol(self, tol: f64) -> CheckOptions {
        CheckOptions { tol: Some(tol), ..self }
    }

    pub fn with_samples(self, samples: usize) -> CheckOptions {
        CheckOptions { samples, ..self }
    }

    pub fn with_seed(self, seed: u64) -> CheckOptions {
        CheckOptions { seed, ..self }
    }

    /// The explicit tolerance, or the default for `exprs`.
    pub fn tolerance_for(&self, exprs: &[Expr]) -> f64 {
        self.tol.unwrap_or_else(|| default_tolerance(exprs))
    }
}

/// 1e-9 for rational expressions, 1e-7 once elementary functions appear.
pub fn default_tolerance(exprs: &[Expr]) -> f64 {
    if exprs.iter().any(Expr::is_transcendental) {
        TOL_TRANSCENDENTAL
    } else {
        TOL_RATIONAL
    }
}

/// Outcome of a sampled check.
#[derive(Debug, Clone, PartialEq)]
pub struct CheckReport {
    pub label: String,
    pub n_samples: usize,
    pub max_abs_residual: f64,
    pub tolerance: f64,
    pub passed: bool,
    pub worst_point: Point,
    pub seed: u64,
    pub children: Vec<CheckReport>,
    pub note: Option<String>,
}

impl CheckReport {
    /// Combine sub-checks; passes only if every child passes.
    pub fn aggregate(label: impl Into<String>, children: Vec<CheckReport>) -> CheckReport {
        let worst = children.iter().max_by(|a, b| {
            let ra = a.max_abs_residual / a.tolerance.max(f64::MIN_POSITIVE);
            let rb = b.max_abs_residual / b.tolerance.max(f64::MIN_POSITIVE);
            ra.total_cmp(&rb)
        });
        CheckReport {
            label: label.into(),
            n_samples: children.iter().map(|c| c.n_samples).max().unwrap_or(0),
            max_abs_residual: children.iter().map(|c| c.max_abs_residual).fold(0.0, f64::max),
            tolerance: worst.map_or(0.0, |w| w.tolerance),
            passed: children.iter().all(|c| c.passed),
            worst_point: worst.map(|w| w.worst_point.clone()).unwrap_or_default(),
            seed: children.first().map_or(DEFAULT_SEED, |c| c.seed),
            children,
            note: None,
        }
    }

    pub fn with_note(mut self, note: impl Into<String>) -> CheckReport {
        self.note = Some(note.into());
        self
    }

    pub fn with_label(mut self, label: impl Into<String>) -> CheckReport {
        self.label = label.into();
        self
    }
}

/// Run `residual` at every sample and compare the maximum against `tol`.
///
/// The closure receives values in domain variable order.
pub fn check_points(
    label: &str,
    dom: &Domain,
    opts: &CheckOptions,
    tol: f64,
    mut residual: impl FnMut(&[f64]) -> Result<f64>,
) -> Result<CheckReport> {
    let samples = dom.sample(opts.samples, opts.seed)?;
    let mut worst = 0.0f64;
    let mut worst_i = None;
    for (i, x) in samples.rows.iter().enumerate() {
        let r = residual(x).map_err(|e| e.at_point(&samples.point(i)))?;
        let r = if r.is_nan() { f64::INFINITY } else { r };
        if worst_i.is_none() || r > worst {
            worst = r;
            worst_i = Some(i);
        }
    }
    Ok(CheckReport {
        label: label.into(),
        n_samples: samples.len(),
        max_abs_residual: worst,
        tolerance: tol,
        passed: worst <= tol,
        worst_point: worst_i.map(|i| samples.point(i)).unwrap_or_default(),
        seed: opts.seed,
        children: Vec::new(),
        note: None,
    })
}

/// Check that every expression in `exprs` vanishes on the domain.
pub fn check_vanishing(label: &str, exprs: &[Expr], dom: &Domain, opts: &CheckOptions) -> Result<CheckReport> {
    let tol = opts.tolerance_for(exprs);
    let names = dom.names();
    let tape = Tape::compile(exprs, &names)?;
    let mut out = alloc::vec![Complex64::new(0.0, 0.0); exprs.len()];
    check_points(label, dom, opts, tol, |x| {
        tape.eval_at(x, &mut out)?;
        Ok(out.iter().map(|v| v.norm()).fold(0.0, f64::max))
    })
}

/// Check `lhs == rhs` on the domain; the residual is `|lhs - rhs|`.
pub fn sampled_identity_check(lhs: &Expr, rhs: &Expr, dom: &Domain, opts: &CheckOptions) -> Result<CheckReport> {
    let tol = opts.tolerance_for(&[lhs.clone(), rhs.clone()]);
    let names = dom.names();
    let tape = Tape::compile(&[lhs.clone(), rhs.clone()], &names)?;
    let mut out = [Complex64::new(0.0, 0.0); 2];
    check_points("identity", dom, opts, tol, |x| {
        tape.eval_at(x, &mut out)?;
        Ok((out[0] - out[1]).norm())
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn e(s: &str) -> Expr {
        Expr::parse(s).unwrap()
    }

    #[test]
    fn pythagorean_identity() {
        let dom = Domain::new().with("x", -3.0, 3.0);
        let r = sampled_identity_check(&e("sin(x)^2 + cos(x)^2"), &e("1"), &dom, &CheckOptions::default()).unwrap();
        assert!(r.passed);
        assert_eq!(r.n_samples, 200);
        assert_eq!(r.seed, 42);
        assert_eq!(r.tolerance, TOL_TRANSCENDENTAL);
    }

    #[test]
    fn false_identity_reports_witness() {
        let dom = Domain::new().with("x", 0.5, 1.0);
        let r = sampled_identity_check(&e("x^2"), &e("x"), &dom, &CheckOptions::default()).unwrap();
        assert!(!r.passed);
        assert_eq!(r.tolerance, TOL_RATIONAL);
        let x = r.worst_point["x"];
        assert!((r.max_abs_residual - (x - x * x).abs()).abs() < 1e-15);
    }

    #[test]
    fn sampling_is_reproducible() {
        let dom = Domain::new().with("a", -1.0, 1.0).with("b", 0.0, 2.0);
        let s1 = dom.sample(50, 7).unwrap();
        let s2 = dom.sample(50, 7).unwrap();
        let s3 = dom.sample(50, 8).unwrap();
        assert_eq!(s1.rows, s2.rows);
        assert_ne!(s1.rows, s3.rows);
    }

    #[test]
    fn constraints_filter_samples() {
        let dom = Domain::new().with("x", -1.0, 1.0).avoid_zero_by(e("x"), 0.5);
        let s = dom.sample(100, 1).unwrap();
        assert!(s.rows.iter().all(|r| r[0].abs() >= 0.5));
    }

    #[test]
    fn infeasible_domain() {
        let dom = Domain::new().with("x", -1.0, 1.0).at_least(e("x"), 2.0);
        assert!(matches!(dom.sample(10, 1), Err(Error::InfeasibleDomain { .. })));
    }

    #[test]
    fn degenerate_domain() {
        let dom = Domain::new().with("x", 1.0, -1.0);
        assert!(matches!(dom.sample(10, 1), Err(Error::DegenerateDomain(_))));
    }

    #[test]
    fn singular_sample_carries_point() {
        let dom = Domain::new().with("x", 0.0, 0.0);
        let err = check_vanishing("s", &[e("1/x")], &dom, &CheckOptions::default()).unwrap_err();
        match err {
            Error::Singular { point, .. } => assert_eq!(point, alloc::vec![("x".into(), 0.0)]),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn residual_is_symmetric() {
        let dom = Domain::new().with("x", -2.0, 2.0);
        let o = CheckOptions::default();
        let a = sampled_identity_check(&e("x^3"), &e("x"), &dom, &o).unwrap();
        let b = sampled_identity_check(&e("x"), &e("x^3"), &dom, &o).unwrap();
        assert_eq!(a.max_abs_residual, b.max_abs_residual);
        assert_eq!(a.worst_point, b.worst_point);
    }

    #[test]
    fn unbound_variable_is_an_error() {
        let dom = Domain::new().with("x", -1.0, 1.0);
        let err = check_vanishing("u", &[e("x*y")], &dom, &CheckOptions::default()).unwrap_err();
        assert_eq!(err, Error::UnboundVariable("y".into()));
    }
}
