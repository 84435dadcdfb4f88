//! One-dimensional quantum HJ equation in c-number form, Madelung
//! decomposition, Van Vleck densities and JWKB propagator comparisons.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use num_complex::Complex64;

use crate::expr::{sum, Expr, Scope, Tape};
use crate::phase::Chart;
use crate::{linalg, Error, Result};

/// Variable and parameter names of a 1-D problem.
#[derive(Debug, Clone, PartialEq)]
pub struct Setting {
    pub q: String,
    pub t: String,
    pub m: Expr,
    pub hbar: Expr,
}

impl Default for Setting {
    fn default() -> Self {
        Setting {
            q: "q".into(),
            t: "t".into(),
            m: Expr::var("m"),
            hbar: Expr::var("hbar"),
        }
    }
}

/// `(1/2m)[(∂S/∂q)² - iħ ∂²S/∂q²] + V + ∂S/∂t`.
pub fn qhj_residual(s: &Expr, v: &Expr, set: &Setting) -> Expr {
    let sq = s.diff(&set.q);
    let sqq = sq.diff(&set.q);
    (sq.powi(2) - Expr::i() * &set.hbar * sqq) / (2.0 * &set.m) + v + s.diff(&set.t)
}

/// `iħ ∂ψ/∂t + (ħ²/2m) ∂²ψ/∂q² - Vψ`.
pub fn schroedinger_residual(psi: &Expr, v: &Expr, set: &Setting) -> Expr {
    Expr::i() * &set.hbar * psi.diff(&set.t) + set.hbar.powi(2) / (2.0 * &set.m) * psi.diff(&set.q).diff(&set.q)
        - v * psi
}

fn momentum_map(chart: &Chart, s: &Expr, sign: f64) -> BTreeMap<String, Expr> {
    chart
        .q
        .iter()
        .zip(&chart.p)
        .map(|(q, p)| (p.clone(), sign * s.diff(q)))
        .collect()
}

/// `H(q, ∂S/∂q, t) + ∂S/∂t`.
pub fn classical_hj_residual(h: &Expr, chart: &Chart, s: &Expr, t: &str) -> Expr {
    h.subs_all(&momentum_map(chart, s, 1.0)) + s.diff(t)
}

/// `H(q, ∂S/∂q, t) + ∂S/∂t - K(Q, P, t)` with `P = -∂S/∂Q`, the momenta of
/// a type-1 generating function `S(q, Q, t)`.
pub fn generalized_hj_residual(h: &Expr, h_chart: &Chart, k: &Expr, k_chart: &Chart, s: &Expr, t: &str) -> Expr {
    classical_hj_residual(h, h_chart, s, t) - k.subs_all(&momentum_map(k_chart, s, -1.0))
}

/// `ψ = A exp(iS/ħ)` with real amplitude and phase.
#[derive(Debug, Clone, PartialEq)]
pub struct MadelungPair {
    pub a: Expr,
    pub s: Expr,
}

/// Residuals of the Madelung system over spatial variables `xs`:
/// the quantum-corrected HJ equation and the continuity equation.
pub fn madelung_residuals<S: AsRef<str>>(
    pair: &MadelungPair,
    v: &Expr,
    xs: &[S],
    t: &str,
    m: &Expr,
    hbar: &Expr,
) -> (Expr, Expr) {
    let grad_s: Vec<Expr> = pair.s.grad(xs);
    let lap_a = sum(xs.iter().map(|x| pair.a.diff(x.as_ref()).diff(x.as_ref())));
    let kinetic = sum(grad_s.iter().map(|g| g.powi(2))) / (2.0 * m);
    let hj = kinetic + v + pair.s.diff(t) - hbar.powi(2) / (2.0 * m) * lap_a / &pair.a;
    let rho = pair.a.powi(2);
    let continuity = continuity_residual(&rho, &pair.s, xs, t, m);
    (hj, continuity)
}

/// `∇·(ρ ∇S/m) + ∂ρ/∂t`.
pub fn continuity_residual<S: AsRef<str>>(rho: &Expr, s: &Expr, xs: &[S], t: &str, m: &Expr) -> Expr {
    let flux = sum(xs.iter().map(|x| {
        let x = x.as_ref();
        (rho * s.diff(x) / m).diff(x)
    }));
    flux + rho.diff(t)
}

fn mixed_hessian<S: AsRef<str>>(s: &Expr, xs: &[S], x0s: &[S]) -> Result<Vec<Vec<Expr>>> {
    if xs.len() != x0s.len() {
        return Err(Error::Dimension(format!(
            "{} final and {} initial coordinates",
            xs.len(),
            x0s.len()
        )));
    }
    Ok(xs
        .iter()
        .map(|x| {
            let sx = s.diff(x.as_ref());
            x0s.iter().map(|y| sx.diff(y.as_ref())).collect()
        })
        .collect())
}

/// `|det ∂²S/∂xⁱ∂x₀ʲ|` symbolically, for one or two degrees of freedom.
pub fn van_vleck_density<S: AsRef<str>>(s: &Expr, xs: &[S], x0s: &[S]) -> Result<Expr> {
    if xs.len() > 2 {
        return Err(Error::Unsupported(
            "symbolic Van Vleck density beyond two dimensions; use van_vleck_at".into(),
        ));
    }
    Ok(linalg::det_expr(&mixed_hessian(s, xs, x0s)?).abs())
}

/// `|det ∂²S/∂xⁱ∂x₀ʲ|` at a point, any dimension.
pub fn van_vleck_at<S: AsRef<str>>(s: &Expr, xs: &[S], x0s: &[S], scope: &dyn Scope) -> Result<f64> {
    let m = linalg::eval_matrix(&mixed_hessian(s, xs, x0s)?, scope)?;
    Ok(libm::fabs(linalg::det(&m)))
}

fn parse(text: &str) -> Expr {
    Expr::parse(text).expect("built-in expression")
}

/// Oscillator action with the `(iħ/2) ln(2πiħ sin ωt / mω)` normalisation,
/// in `q, Q, t, m, omega, hbar`.
pub fn oscillator_action() -> Expr {
    oscillator_classical_action() + parse("i*hbar/2*ln(2*pi*i*hbar*sin(omega*t)/(m*omega))")
}

/// Real part of [`oscillator_action`]: the classical oscillator action.
pub fn oscillator_classical_action() -> Expr {
    parse("m*omega/(2*sin(omega*t))*((q^2 + Q^2)*cos(omega*t) - 2*q*Q)")
}

/// Free-particle action with the same normalisation as [`oscillator_action`].
pub fn free_action() -> Expr {
    free_classical_action() + parse("i*hbar/2*ln(2*pi*i*hbar*t/m)")
}

pub fn free_classical_action() -> Expr {
    parse("m*(q - Q)^2/(2*t)")
}

/// `√ρ (2πiħ)^(-1/2) exp(iS/ħ)`.
pub fn jwkb_wavefunction(s_cl: &Expr, rho: &Expr, hbar: &Expr) -> Expr {
    let norm = (2.0 * Expr::constant(Complex64::new(0.0, core::f64::consts::PI)) * hbar).sqrt();
    rho.sqrt() / norm * (Expr::i() * s_cl / hbar).exp()
}

/// Pointwise comparison of two kernels on a `(q, Q, t)` grid.
#[derive(Debug, Clone, PartialEq)]
pub struct GridComparison {
    /// Rows `(q, Q, t, |a - b|)`.
    pub rows: Vec<[f64; 4]>,
    pub max_deviation: f64,
}

/// Evaluate `|a - b|` at every grid point, with `params` held fixed.
pub fn compare_on_grid(a: &Expr, b: &Expr, params: &[(&str, f64)], grid: &[[f64; 3]]) -> Result<GridComparison> {
    let mut vars: Vec<String> = vec!["q".into(), "Q".into(), "t".into()];
    vars.extend(params.iter().map(|(n, _)| n.to_string()));
    let tape = Tape::compile(&[a.clone(), b.clone()], &vars)?;
    let mut x: Vec<f64> = vec![0.0; 3];
    x.extend(params.iter().map(|(_, v)| *v));
    let mut out = [Complex64::new(0.0, 0.0); 2];
    let mut rows = Vec::with_capacity(grid.len());
    let mut worst = 0.0f64;
    for g in grid {
        x[..3].copy_from_slice(g);
        tape.eval_at(&x, &mut out)?;
        let d = (out[0] - out[1]).norm();
        worst = if d.is_nan() { f64::INFINITY } else { worst.max(d) };
        rows.push([g[0], g[1], g[2], d]);
    }
    Ok(GridComparison {
        rows,
        max_deviation: worst,
    })
}

/// `n³` points with `q, Q ∈ [-2, 2]` and `ωt ∈ [0.05, π - 0.05]`, away from
/// the caustics at `sin ωt = 0`.
pub fn oscillator_grid(n: usize, omega: f64) -> Vec<[f64; 3]> {
    let lin = |lo: f64, hi: f64, i: usize| {
        if n <= 1 {
            (lo + hi) / 2.0
        } else {
            lo + (hi - lo) * i as f64 / (n - 1) as f64
        }
    };
    let (t_lo, t_hi) = (0.05 / omega, (core::f64::consts::PI - 0.05) / omega);
    let mut out = Vec::with_capacity(n * n * n);
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                out.push([lin(-2.0, 2.0, i), lin(-2.0, 2.0, j), lin(t_lo, t_hi, k)]);
            }
        }
    }
    out
}

/// JWKB kernel built from the classical action and its Van Vleck density,
/// against `exp(iS/ħ)` for the full oscillator action.
pub fn jwkb_vs_exact(m: f64, omega: f64, hbar: f64, grid: &[[f64; 3]]) -> Result<GridComparison> {
    let s_cl = oscillator_classical_action();
    let rho = van_vleck_density(&s_cl, &["q"], &["Q"])?;
    let h = Expr::var("hbar");
    let approx = jwkb_wavefunction(&s_cl, &rho, &h);
    let exact = (Expr::i() * oscillator_action() / &h).exp();
    compare_on_grid(&approx, &exact, &[("m", m), ("omega", omega), ("hbar", hbar)], grid)
}

/// `∫ exp(iS(q, Q, t)/ħ) φ(Q) dQ` over `[lo, hi]` by composite Simpson with
/// `steps` (rounded up to even) intervals.
#[allow(clippy::too_many_arguments)]
pub fn smear_kernel(
    s: &Expr,
    params: &[(&str, f64)],
    q: f64,
    t: f64,
    phi: impl Fn(f64) -> Complex64,
    lo: f64,
    hi: f64,
    steps: usize,
) -> Result<Complex64> {
    let hbar = params
        .iter()
        .find(|(n, _)| *n == "hbar")
        .map(|(_, v)| *v)
        .ok_or_else(|| Error::UnboundVariable("hbar".into()))?;
    let kernel = (Expr::i() * s / hbar).exp();
    let mut vars: Vec<String> = vec!["q".into(), "Q".into(), "t".into()];
    vars.extend(params.iter().map(|(n, _)| n.to_string()));
    let tape = Tape::compile(&[kernel], &vars)?;
    let mut x: Vec<f64> = vec![q, 0.0, t];
    x.extend(params.iter().map(|(_, v)| *v));
    let n = steps + steps % 2;
    let h = (hi - lo) / n as f64;
    let mut out = [Complex64::new(0.0, 0.0)];
    let mut acc = Complex64::new(0.0, 0.0);
    for i in 0..=n {
        let y = lo + h * i as f64;
        x[1] = y;
        tape.eval_at(&x, &mut out)?;
        let w = if i == 0 || i == n {
            1.0
        } else if i % 2 == 1 {
            4.0
        } else {
            2.0
        };
        acc += out[0] * phi(y) * w;
    }
    Ok(acc * (h / 3.0))
}

/// `S(φ*, ψ) = -Σ φ*_a U_ab ψ_b`, bilinear in the named components.
pub fn unitary_generating_function<S: AsRef<str>>(u: &[Vec<Complex64>], phi_star: &[S], psi: &[S]) -> Result<Expr> {
    let n = u.len();
    if u.iter().any(|r| r.len() != n) || phi_star.len() != n || psi.len() != n {
        return Err(Error::Dimension(format!(
            "U must be {n}×{n} with {n} components on each side"
        )));
    }
    let mut terms = Vec::new();
    for (a, row) in u.iter().enumerate() {
        for (b, &c) in row.iter().enumerate() {
            if c == Complex64::new(0.0, 0.0) {
                continue;
            }
            terms.push(Expr::constant(-c) * Expr::var(phi_star[a].as_ref()) * Expr::var(psi[b].as_ref()));
        }
    }
    Ok(sum(terms))
}
