//! Time-dependent HJ theory on the extended phase space `T*(Q × ℝ)` with
//! coordinates `(q, p, t, h)` and extended Hamiltonian `H̃ = H + h`.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use crate::check::{CheckOptions, CheckReport, Domain, Point};
use crate::expr::{Expr, Tape};
use crate::integrate::{Flow, Method, Trajectory};
use crate::phase::{hamiltonian_vector_field, poisson_bracket, Chart};
use crate::{Error, Result};

/// `H(q, p, t)` on `T*Q`, lifted to `T*(Q × ℝ)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ExtendedSystem {
    pub chart: Chart,
    pub t: String,
    pub h: String,
    pub hamiltonian: Expr,
}

impl ExtendedSystem {
    /// Uses `t` and `h` for the extra conjugate pair.
    pub fn new(chart: Chart, hamiltonian: Expr) -> Result<ExtendedSystem> {
        ExtendedSystem::with_names(chart, hamiltonian, "t", "h")
    }

    pub fn with_names(chart: Chart, hamiltonian: Expr, t: &str, h: &str) -> Result<ExtendedSystem> {
        if hamiltonian.depends_on(h) {
            return Err(Error::InvalidStructure(format!("H must not depend on `{h}`")));
        }
        if chart.coords().iter().any(|c| c == t || c == h) {
            return Err(Error::Dimension(format!("`{t}` or `{h}` clashes with the chart")));
        }
        Ok(ExtendedSystem {
            chart,
            t: t.to_string(),
            h: h.to_string(),
            hamiltonian,
        })
    }

    /// `(q.., t; p.., h)`: `(t, h)` is a canonical pair.
    pub fn extended_chart(&self) -> Chart {
        let mut q = self.chart.q.clone();
        q.push(self.t.clone());
        let mut p = self.chart.p.clone();
        p.push(self.h.clone());
        Chart { q, p }
    }

    /// State order used by flows and CSV output: `q.., p.., t, h`.
    pub fn state_names(&self) -> Vec<String> {
        let mut out = self.chart.coords();
        out.push(self.t.clone());
        out.push(self.h.clone());
        out
    }

    /// `H̃ = H + h`.
    pub fn lifted_hamiltonian(&self) -> Expr {
        &self.hamiltonian + Expr::var(self.h.as_str())
    }

    /// `X̃_H̃ = (∂H/∂p, -∂H/∂q, 1, -∂H/∂t)` in state order.
    pub fn lifted_fields(&self) -> Vec<Expr> {
        let mut out = hamiltonian_vector_field(&self.hamiltonian, &self.chart);
        out.push(Expr::one());
        out.push(-self.hamiltonian.diff(&self.t));
        out
    }

    /// `{F, G}~ = {F, G} + ∂F/∂t ∂G/∂h - ∂F/∂h ∂G/∂t`.
    pub fn extended_bracket(&self, f: &Expr, g: &Expr) -> Expr {
        poisson_bracket(f, g, &self.chart) + f.diff(&self.t) * g.diff(&self.h) - f.diff(&self.h) * g.diff(&self.t)
    }

    /// `H(q, ∂S/∂q, t) + ∂S/∂t`: the pullback of `H̃` along
    /// `(q, t) ↦ (q, ∂S/∂q, t, ∂S/∂t)`.
    pub fn tdhj_residual(&self, s: &Expr) -> Expr {
        let map: BTreeMap<String, Expr> = self
            .chart
            .q
            .iter()
            .zip(&self.chart.p)
            .map(|(q, p)| (p.clone(), s.diff(q)))
            .chain(core::iter::once((self.h.clone(), s.diff(&self.t))))
            .collect();
        self.lifted_hamiltonian().subs_all(&map)
    }

    /// Flow of `X̃_H̃` from `z0 = (q, p, t, h)` for evolution time `tau_max`,
    /// with `H̃` monitored.
    pub fn extended_flow(
        &self,
        z0: &[f64],
        tau_max: f64,
        dt: f64,
        method: Method,
        params: &[(&str, f64)],
    ) -> Result<Trajectory> {
        let flow = Flow::new(&self.lifted_fields(), &self.state_names(), params)?
            .with_monitor(&self.lifted_hamiltonian(), params)?;
        flow.integrate(z0, tau_max, dt, method)
    }

    /// Largest deviation from `h(τ) = h₀ + H(m₀, t₀) - H(m(τ), t₀ + τ)` and
    /// from `t(τ) = t₀ + τ` along a trajectory of [`Self::extended_flow`].
    pub fn bookkeeping_residuals(&self, traj: &Trajectory, params: &[(&str, f64)]) -> Result<(f64, f64)> {
        let n = self.chart.dim();
        let mut vars = self.chart.coords();
        vars.push(self.t.clone());
        vars.extend(params.iter().map(|(p, _)| p.to_string()));
        let tape = Tape::compile(core::slice::from_ref(&self.hamiltonian), &vars)?;
        let energy = |z: &[f64], t: f64| -> Result<f64> {
            let mut x: Vec<f64> = z[..2 * n].to_vec();
            x.push(t);
            x.extend(params.iter().map(|(_, v)| *v));
            let mut out = [0.0];
            tape.eval_real(&x, &mut out)?;
            Ok(out[0])
        };
        let z0 = &traj.states[0];
        let (t0, h0) = (z0[2 * n], z0[2 * n + 1]);
        let e0 = energy(z0, t0)?;
        let mut worst_h = 0.0f64;
        let mut worst_t = 0.0f64;
        for (tau, z) in traj.times.iter().zip(&traj.states) {
            let predicted = h0 + e0 - energy(z, t0 + tau)?;
            worst_h = worst_h.max(libm::fabs(z[2 * n + 1] - predicted));
            worst_t = worst_t.max(libm::fabs(z[2 * n] - t0 - tau));
        }
        Ok((worst_h, worst_t))
    }
}

/// Settings of [`graph_evolution_check`].
#[derive(Debug, Clone, PartialEq)]
pub struct GraphEvolution {
    pub t0: f64,
    pub tau: f64,
    pub dt: f64,
    pub method: Method,
    pub tol: f64,
    /// Expressions over the state and parameters that must keep their sign
    /// and stay at least `guard_margin` away from zero along the flow; a
    /// sample whose flow violates one is skipped.
    pub guards: Vec<Expr>,
    pub guard_margin: f64,
}

impl GraphEvolution {
    pub fn new(t0: f64, tau: f64, dt: f64) -> GraphEvolution {
        GraphEvolution {
            t0,
            tau,
            dt,
            method: Method::Rk4,
            tol: 1e-6,
            guards: Vec::new(),
            guard_margin: 1e-3,
        }
    }

    pub fn with_guard(mut self, g: Expr) -> GraphEvolution {
        self.guards.push(g);
        self
    }

    pub fn with_tol(mut self, tol: f64) -> GraphEvolution {
        self.tol = tol;
        self
    }
}

/// Seed points on the graph of `dS(·, t₀)`, flow them for `τ` and measure
/// the distance of the landing points from the graph of `dS(·, t₀ + τ)`.
///
/// The domain ranges over `q` and any parameters of `S` and `H`.
pub fn graph_evolution_check(
    sys: &ExtendedSystem,
    s: &Expr,
    dom: &Domain,
    cfg: &GraphEvolution,
    opts: &CheckOptions,
) -> Result<CheckReport> {
    let n = sys.chart.dim();
    let names = dom.names();
    for q in &sys.chart.q {
        if !names.contains(q) {
            return Err(Error::UnboundVariable(q.clone()));
        }
    }
    let ext = sys.state_names();
    if let Some(bad) = names.iter().find(|v| ext[n..].contains(v)) {
        return Err(Error::Dimension(format!(
            "`{bad}` is a flowed coordinate and cannot be sampled"
        )));
    }
    let params: Vec<String> = names.iter().filter(|v| !sys.chart.q.contains(v)).cloned().collect();

    // Parameters ride along as constant state components.
    let mut state = ext.clone();
    state.extend(params.iter().cloned());
    let mut field = sys.lifted_fields();
    field.extend(params.iter().map(|_| Expr::zero()));
    let flow = Flow::new(&field, &state, &[])?;

    let mut graph: Vec<Expr> = sys.chart.q.iter().map(|q| s.diff(q)).collect();
    graph.push(s.diff(&sys.t));
    let mut graph_vars = sys.chart.q.clone();
    graph_vars.push(sys.t.clone());
    graph_vars.extend(params.iter().cloned());
    let graph_tape = Tape::compile(&graph, &graph_vars)?;
    let guard_tape = Tape::compile(&cfg.guards, &state)?;

    let samples = dom.sample(opts.samples, opts.seed)?;
    let mut worst = 0.0f64;
    let mut worst_point = Point::new();
    let mut used = 0usize;
    let mut skipped = 0usize;
    let mut gx = vec![0.0; graph_vars.len()];
    let mut gout = vec![0.0; graph.len()];
    let mut guard_out = vec![0.0; cfg.guards.len()];
    for (i, row) in samples.rows.iter().enumerate() {
        let point = samples.point(i);
        let q0: Vec<f64> = sys.chart.q.iter().map(|q| point[q]).collect();
        let pv: Vec<f64> = params.iter().map(|p| point[p]).collect();
        let on_graph = |q: &[f64], t: f64, gx: &mut Vec<f64>, gout: &mut Vec<f64>| -> Result<()> {
            gx[..n].copy_from_slice(q);
            gx[n] = t;
            gx[n + 1..].copy_from_slice(&pv);
            graph_tape.eval_real(gx, gout)
        };
        if on_graph(&q0, cfg.t0, &mut gx, &mut gout).is_err() {
            skipped += 1;
            continue;
        }
        let mut z0: Vec<f64> = q0.clone();
        z0.extend_from_slice(&gout[..n]);
        z0.push(cfg.t0);
        z0.push(gout[n]);
        z0.extend_from_slice(&pv);
        let traj = flow.integrate(&z0, cfg.tau, cfg.dt, cfg.method)?;
        if !traj.completed() || !guards_hold(&guard_tape, &traj, cfg.guard_margin, &mut guard_out) {
            skipped += 1;
            continue;
        }
        let z = traj.last();
        if on_graph(&z[..n], cfg.t0 + cfg.tau, &mut gx, &mut gout).is_err() {
            skipped += 1;
            continue;
        }
        let mut r = 0.0f64;
        for k in 0..n {
            r = r.max(libm::fabs(z[n + k] - gout[k]));
        }
        r = r.max(libm::fabs(z[2 * n + 1] - gout[n]));
        let r = if r.is_nan() { f64::INFINITY } else { r };
        if used == 0 || r > worst {
            worst = r;
            worst_point = point;
        }
        used += 1;
        let _ = row;
    }
    let passed = used > 0 && worst <= cfg.tol;
    let mut report = CheckReport {
        label: "graph-evolution".into(),
        n_samples: used,
        max_abs_residual: worst,
        tolerance: cfg.tol,
        passed,
        worst_point,
        seed: opts.seed,
        children: Vec::new(),
        note: None,
    };
    if skipped > 0 || used == 0 {
        report.note = Some(format!("{skipped} of {} samples skipped", samples.len()));
    }
    Ok(report)
}

fn guards_hold(tape: &Tape, traj: &Trajectory, margin: f64, out: &mut [f64]) -> bool {
    if tape.is_empty() {
        return true;
    }
    let mut signs: Option<Vec<bool>> = None;
    for z in &traj.states {
        if tape.eval_real(z, out).is_err() {
            return false;
        }
        if out.iter().any(|g| !(libm::fabs(*g) >= margin)) {
            return false;
        }
        let now: Vec<bool> = out.iter().map(|g| *g > 0.0).collect();
        match &signs {
            None => signs = Some(now),
            Some(s) if *s != now => return false,
            _ => {}
        }
    }
    true
}
