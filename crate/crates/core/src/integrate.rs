//! Fixed-step integration of autonomous vector fields given as expressions.
//!
//! Fields are compiled to a [`Tape`] once; the inner loop only evaluates it.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;
use core::fmt::Write;

use crate::expr::{Expr, Tape};
use crate::phase::{hamiltonian_vector_field, Chart};
use crate::{Error, Result};

/// Fixed-point tolerance of the implicit midpoint stage.
pub const MIDPOINT_TOL: f64 = 1e-12;
/// Fixed-point iteration cap of the implicit midpoint stage.
pub const MIDPOINT_MAX_ITER: usize = 50;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    Rk4,
    /// Symplectic, second order; preserves quadratic invariants.
    ImplicitMidpoint,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Rk4 => "rk4",
            Method::ImplicitMidpoint => "implicit-midpoint",
        }
    }

    pub fn from_name(name: &str) -> Option<Method> {
        match name {
            "rk4" => Some(Method::Rk4),
            "implicit-midpoint" | "midpoint" => Some(Method::ImplicitMidpoint),
            _ => None,
        }
    }
}

/// `ż = F(z)` with parameters held fixed, plus an optional monitored
/// quantity (energy, extended Hamiltonian) recorded at every step.
#[derive(Debug, Clone)]
pub struct Flow {
    names: Vec<String>,
    field: Tape,
    params: Vec<f64>,
    monitor: Option<Tape>,
}

impl Flow {
    /// Field components over the state variables `state`; every other free
    /// symbol must be bound in `params`.
    pub fn new<S: AsRef<str>>(components: &[Expr], state: &[S], params: &[(&str, f64)]) -> Result<Flow> {
        if components.len() != state.len() {
            return Err(Error::Dimension(format!(
                "{} components for {} state variables",
                components.len(),
                state.len()
            )));
        }
        let names: Vec<String> = state.iter().map(|s| s.as_ref().to_string()).collect();
        let vars = Self::tape_vars(&names, params);
        Ok(Flow {
            field: Tape::compile(components, &vars)?,
            names,
            params: params.iter().map(|(_, v)| *v).collect(),
            monitor: None,
        })
    }

    /// Hamilton's equations on `(q, p)` with `H` monitored.
    pub fn hamiltonian(h: &Expr, chart: &Chart, params: &[(&str, f64)]) -> Result<Flow> {
        Flow::new(&hamiltonian_vector_field(h, chart), &chart.coords(), params)?.with_monitor(h, params)
    }

    pub fn with_monitor(mut self, quantity: &Expr, params: &[(&str, f64)]) -> Result<Flow> {
        let vars = Self::tape_vars(&self.names, params);
        self.monitor = Some(Tape::compile(core::slice::from_ref(quantity), &vars)?);
        Ok(self)
    }

    fn tape_vars(names: &[String], params: &[(&str, f64)]) -> Vec<String> {
        names
            .iter()
            .cloned()
            .chain(params.iter().map(|(n, _)| n.to_string()))
            .collect()
    }

    pub fn dim(&self) -> usize {
        self.names.len()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    fn full(&self, z: &[f64], buf: &mut Vec<f64>) {
        buf.clear();
        buf.extend_from_slice(z);
        buf.extend_from_slice(&self.params);
    }

    /// `F(z)` into `out`.
    pub fn rhs(&self, z: &[f64], out: &mut [f64]) -> Result<()> {
        let mut buf = Vec::with_capacity(z.len() + self.params.len());
        self.full(z, &mut buf);
        self.field.eval_real(&buf, out)
    }

    pub fn monitor(&self, z: &[f64]) -> Result<Option<f64>> {
        let Some(m) = &self.monitor else {
            return Ok(None);
        };
        let mut buf = Vec::with_capacity(z.len() + self.params.len());
        self.full(z, &mut buf);
        let mut out = [0.0];
        m.eval_real(&buf, &mut out)?;
        Ok(Some(out[0]))
    }

    /// Integrate from `z0` over `[0, t_max]`. The last step is shortened to
    /// land on `t_max` exactly. A failure mid-run stops the trajectory at the
    /// last good state and is recorded in [`Trajectory::stop`].
    pub fn integrate(&self, z0: &[f64], t_max: f64, dt: f64, method: Method) -> Result<Trajectory> {
        if z0.len() != self.dim() {
            return Err(Error::Dimension(format!(
                "initial state has {} entries, expected {}",
                z0.len(),
                self.dim()
            )));
        }
        if !(dt > 0.0 && dt.is_finite() && t_max >= 0.0 && t_max.is_finite()) {
            return Err(Error::Unsupported(format!(
                "need dt > 0 and t_max ≥ 0, got dt = {dt}, t_max = {t_max}"
            )));
        }
        let full_steps = libm::floor(t_max / dt * (1.0 + 1e-12)) as usize;
        let rest = t_max - full_steps as f64 * dt;
        let n = full_steps + usize::from(rest > dt * 1e-9);

        let mut traj = Trajectory {
            method,
            dt,
            names: self.names.clone(),
            times: Vec::with_capacity(n + 1),
            states: Vec::with_capacity(n + 1),
            monitor: Vec::new(),
            stop: None,
        };
        let mut stepper = Stepper::new(self);
        let mut z = z0.to_vec();
        traj.push(0.0, &z, self.monitor(&z)?);
        for k in 1..=n {
            let h = if k > full_steps { rest } else { dt };
            let outcome = match method {
                Method::Rk4 => stepper.rk4(&mut z, h),
                Method::ImplicitMidpoint => stepper.midpoint(&mut z, h),
            };
            let outcome = outcome.and_then(|()| {
                if z.iter().all(|v| v.is_finite()) {
                    self.monitor(&z)
                } else {
                    Err(Error::NonConvergence { step: k })
                }
            });
            match outcome {
                Ok(m) => {
                    let t = if k > full_steps { t_max } else { k as f64 * dt };
                    traj.push(t, &z, m);
                }
                Err(Error::NonConvergence { .. }) => {
                    traj.stop = Some(Error::NonConvergence { step: k });
                    break;
                }
                Err(e) => {
                    traj.stop = Some(e);
                    break;
                }
            }
        }
        Ok(traj)
    }
}

struct Stepper<'a> {
    flow: &'a Flow,
    k: [Vec<f64>; 4],
    tmp: Vec<f64>,
    buf: Vec<f64>,
}

impl<'a> Stepper<'a> {
    fn new(flow: &'a Flow) -> Stepper<'a> {
        let n = flow.dim();
        Stepper {
            flow,
            k: [vec![0.0; n], vec![0.0; n], vec![0.0; n], vec![0.0; n]],
            tmp: vec![0.0; n],
            buf: Vec::with_capacity(n + flow.params.len()),
        }
    }

    fn eval(&mut self, z: &[f64], slot: usize) -> Result<()> {
        self.flow.full(z, &mut self.buf);
        self.flow.field.eval_real(&self.buf, &mut self.k[slot])
    }

    fn rk4(&mut self, z: &mut [f64], h: f64) -> Result<()> {
        let n = z.len();
        self.eval(z, 0)?;
        for s in 1..4 {
            let c = if s == 3 { h } else { h / 2.0 };
            let mut tmp = core::mem::take(&mut self.tmp);
            for i in 0..n {
                tmp[i] = z[i] + c * self.k[s - 1][i];
            }
            let r = self.eval(&tmp, s);
            self.tmp = tmp;
            r?;
        }
        for i in 0..n {
            z[i] += h / 6.0 * (self.k[0][i] + 2.0 * self.k[1][i] + 2.0 * self.k[2][i] + self.k[3][i]);
        }
        Ok(())
    }

    /// `z₁ = z₀ + h F((z₀ + z₁)/2)` by fixed-point iteration.
    fn midpoint(&mut self, z: &mut [f64], h: f64) -> Result<()> {
        let n = z.len();
        self.eval(z, 0)?;
        let mut next: Vec<f64> = (0..n).map(|i| z[i] + h * self.k[0][i]).collect();
        for _ in 0..MIDPOINT_MAX_ITER {
            let mut mid = core::mem::take(&mut self.tmp);
            for i in 0..n {
                mid[i] = (z[i] + next[i]) / 2.0;
            }
            let r = self.eval(&mid, 1);
            self.tmp = mid;
            r?;
            let mut change = 0.0f64;
            for i in 0..n {
                let v = z[i] + h * self.k[1][i];
                change = change.max(libm::fabs(v - next[i]) / (1.0 + libm::fabs(v)));
                next[i] = v;
            }
            if !change.is_finite() {
                break;
            }
            if change <= MIDPOINT_TOL {
                z.copy_from_slice(&next);
                return Ok(());
            }
        }
        Err(Error::NonConvergence { step: 0 })
    }
}

/// Recorded states at `times`, with the monitored quantity if any.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub method: Method,
    pub dt: f64,
    pub names: Vec<String>,
    pub times: Vec<f64>,
    pub states: Vec<Vec<f64>>,
    pub monitor: Vec<f64>,
    /// Why integration ended before `t_max`, if it did.
    pub stop: Option<Error>,
}

impl Trajectory {
    fn push(&mut self, t: f64, z: &[f64], m: Option<f64>) {
        self.times.push(t);
        self.states.push(z.to_vec());
        if let Some(m) = m {
            self.monitor.push(m);
        }
    }

    pub fn completed(&self) -> bool {
        self.stop.is_none()
    }

    pub fn last(&self) -> &[f64] {
        self.states.last().map_or(&[], Vec::as_slice)
    }

    /// `max |m(t) - m(0)|` of the monitored quantity.
    pub fn monitor_drift(&self) -> f64 {
        let Some(&m0) = self.monitor.first() else {
            return 0.0;
        };
        self.monitor.iter().map(|m| libm::fabs(m - m0)).fold(0.0, f64::max)
    }

    /// CSV with a header row; floats with 17 significant digits.
    pub fn write_csv(&self, time_label: &str, monitor_label: &str, out: &mut impl Write) -> core::fmt::Result {
        write!(out, "{time_label}")?;
        for n in &self.names {
            write!(out, ",{n}")?;
        }
        let with_monitor = self.monitor.len() == self.times.len() && !self.monitor.is_empty();
        if with_monitor {
            write!(out, ",{monitor_label}")?;
        }
        writeln!(out)?;
        for (i, (t, z)) in self.times.iter().zip(&self.states).enumerate() {
            write!(out, "{t:.16e}")?;
            for v in z {
                write!(out, ",{v:.16e}")?;
            }
            if with_monitor {
                write!(out, ",{:.16e}", self.monitor[i])?;
            }
            writeln!(out)?;
        }
        Ok(())
    }

    pub fn to_csv(&self, time_label: &str, monitor_label: &str) -> String {
        let mut s = String::new();
        self.write_csv(time_label, monitor_label, &mut s)
            .expect("writing to a String");
        s
    }
}

/// RK4 integration of a field on the base manifold.
pub fn integrate_base_field<S: AsRef<str>>(
    field: &[Expr],
    q: &[S],
    params: &[(&str, f64)],
    q0: &[f64],
    t_max: f64,
    dt: f64,
) -> Result<Trajectory> {
    Flow::new(field, q, params)?.integrate(q0, t_max, dt, Method::Rk4)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::phase::{characteristic_field, OneForm};
    use core::f64::consts::PI;
    use proptest::prelude::*;

    fn e(s: &str) -> Expr {
        Expr::parse(s).unwrap()
    }

    fn oscillator() -> Flow {
        Flow::hamiltonian(&e("(p^2 + q^2)/2"), &Chart::canonical(1), &[]).unwrap()
    }

    fn endpoint_error(dt: f64, t_max: f64) -> f64 {
        let tr = oscillator().integrate(&[1.0, 0.0], t_max, dt, Method::Rk4).unwrap();
        let z = tr.last();
        // q = cos t, p = -sin t
        (z[0] - t_max.cos()).hypot(z[1] + t_max.sin())
    }

    #[test]
    fn rk4_one_period() {
        let err = endpoint_error(1e-3, 2.0 * PI);
        assert!(err <= 1e-8, "{err}");
        let tr = oscillator()
            .integrate(&[1.0, 0.0], 2.0 * PI, 1e-3, Method::Rk4)
            .unwrap();
        assert_eq!(*tr.times.last().unwrap(), 2.0 * PI);
        assert!(tr.times.windows(2).all(|w| w[1] > w[0]));
    }

    #[test]
    fn rk4_order() {
        let ratio = endpoint_error(0.1, 10.0) / endpoint_error(0.05, 10.0);
        assert!((12.0..=20.0).contains(&ratio), "ratio {ratio}");
    }

    #[test]
    fn midpoint_preserves_quadratic_energy_per_step() {
        let tr = oscillator()
            .integrate(&[0.3, -1.2], 50.0, 0.1, Method::ImplicitMidpoint)
            .unwrap();
        assert!(tr.completed());
        let worst = tr.monitor.windows(2).map(|w| (w[1] - w[0]).abs()).fold(0.0, f64::max);
        assert!(worst <= 1e-10, "{worst}");
    }

    #[test]
    fn zero_field_is_constant() {
        let f = Flow::hamiltonian(&Expr::zero(), &Chart::canonical(2), &[]).unwrap();
        for m in [Method::Rk4, Method::ImplicitMidpoint] {
            let tr = f.integrate(&[0.1, 0.2, 0.3, 0.4], 1.0, 0.1, m).unwrap();
            assert!(tr.states.iter().all(|z| z == &[0.1, 0.2, 0.3, 0.4]));
            assert_eq!(tr.times.len(), 11);
        }
    }

    #[test]
    fn deterministic() {
        let a = oscillator()
            .integrate(&[1.0, 0.5], 3.0, 0.01, Method::ImplicitMidpoint)
            .unwrap();
        let b = oscillator()
            .integrate(&[1.0, 0.5], 3.0, 0.01, Method::ImplicitMidpoint)
            .unwrap();
        assert_eq!(a, b);
        assert_eq!(a.to_csv("t", "H"), b.to_csv("t", "H"));
    }

    #[test]
    fn partial_last_step() {
        let tr = oscillator().integrate(&[1.0, 0.0], 1.05, 0.1, Method::Rk4).unwrap();
        assert_eq!(tr.times.len(), 12);
        assert_eq!(*tr.times.last().unwrap(), 1.05);
        assert!((tr.last()[0] - 1.05f64.cos()).abs() < 1e-6);
    }

    #[test]
    fn linear_base_field_is_exact() {
        let tr = integrate_base_field(&[e("c")], &["q"], &[("c", 0.7)], &[0.25], 2.0, 0.1).unwrap();
        for (t, z) in tr.times.iter().zip(&tr.states) {
            assert!((z[0] - (0.25 + 0.7 * t)).abs() < 1e-14);
        }
    }

    #[test]
    fn csv_layout() {
        let tr = oscillator().integrate(&[1.0, 0.0], 0.2, 0.1, Method::Rk4).unwrap();
        let csv = tr.to_csv("t", "H");
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "t,q,p,H");
        assert_eq!(lines.len(), 4);
        assert_eq!(
            lines[1],
            "0.0000000000000000e0,1.0000000000000000e0,0.0000000000000000e0,5.0000000000000000e-1"
        );
        let parsed: Vec<f64> = lines[2].split(',').map(|s| s.parse().unwrap()).collect();
        assert_eq!(parsed[1], tr.states[1][0]);
    }

    #[test]
    fn blow_up_stops_with_last_good_state() {
        let f = Flow::new(&[e("q^2")], &["q"], &[]).unwrap();
        let tr = f.integrate(&[1.0], 2.0, 0.01, Method::Rk4).unwrap();
        assert!(!tr.completed());
        assert!(tr.last()[0].is_finite());
        assert!(*tr.times.last().unwrap() < 2.0);

        let stiff = Flow::new(&[e("-1000*q")], &["q"], &[]).unwrap();
        let tr = stiff.integrate(&[1.0], 1.0, 0.1, Method::ImplicitMidpoint).unwrap();
        assert!(matches!(tr.stop, Some(Error::NonConvergence { step: 1 })));
        assert_eq!(tr.states.len(), 1);
    }

    #[test]
    fn bad_arguments() {
        let f = oscillator();
        assert!(f.integrate(&[1.0], 1.0, 0.1, Method::Rk4).is_err());
        assert!(f.integrate(&[1.0, 0.0], 1.0, 0.0, Method::Rk4).is_err());
        assert!(Flow::new(&[e("q")], &["q", "p"], &[]).is_err());
        assert!(Flow::new(&[e("q*k")], &["q"], &[]).is_err());
    }

    /// Characteristic field of the separable oscillator solution.
    fn oscillator_rays() -> (Vec<Expr>, Expr) {
        let w = crate::joint::circle_antiderivative(&e("q1"), &e("E1"))
            + crate::joint::circle_antiderivative(&e("q2"), &e("E2"));
        let chart = Chart::canonical(2);
        let h = e("(p1^2 + q1^2)/2 + (p2^2 + q2^2)/2");
        (
            characteristic_field(&h, &OneForm::exact(&w, &chart), &chart).unwrap(),
            w,
        )
    }

    #[test]
    fn base_field_from_rest_position() {
        let (field, _) = oscillator_rays();
        let params = [("E1", 1.3), ("E2", 1.7)];
        let tr = integrate_base_field(&field, &["q1", "q2"], &params, &[0.0, 0.0], 1.0, 1e-3).unwrap();
        for (t, z) in tr.times.iter().zip(&tr.states) {
            assert!((z[0] - (2.6f64).sqrt() * t.sin()).abs() <= 1e-8);
            assert!((z[1] - (3.4f64).sqrt() * t.sin()).abs() <= 1e-8);
        }
    }

    #[test]
    fn ray_lift_matches_hamiltonian_flow() {
        let (field, w) = oscillator_rays();
        let params = [("E1", 1.3), ("E2", 1.7)];
        let base = integrate_base_field(&field, &["q1", "q2"], &params, &[0.1, -0.2], 1.0, 1e-3).unwrap();
        let grad = w.grad(&["q1", "q2"]);
        let lift = |q: &[f64]| -> Vec<f64> {
            let scope = [("q1", q[0]), ("q2", q[1]), ("E1", 1.3), ("E2", 1.7)];
            let p: Vec<f64> = grad.iter().map(|g| g.eval_real(&scope).unwrap()).collect();
            vec![q[0], q[1], p[0], p[1]]
        };
        let h = e("(p1^2 + q1^2)/2 + (p2^2 + q2^2)/2");
        let full = Flow::hamiltonian(&h, &Chart::canonical(2), &[])
            .unwrap()
            .integrate(&lift(&base.states[0]), 1.0, 1e-3, Method::Rk4)
            .unwrap();
        for (zb, zf) in base.states.iter().zip(&full.states) {
            let lifted = lift(zb);
            let d = lifted.iter().zip(zf).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            assert!(d <= 1e-6, "{d}");
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(16))]

        #[test]
        fn midpoint_conserves_oscillator_energy(q in -2.0f64..2.0, p in -2.0f64..2.0, dt in 0.01f64..0.5) {
            let tr = oscillator().integrate(&[q, p], 20.0, dt, Method::ImplicitMidpoint).unwrap();
            prop_assert!(tr.completed());
            prop_assert!(tr.monitor_drift() <= 1e-10 * (tr.times.len() as f64));
        }

        #[test]
        fn rk4_is_exact_for_constant_fields(c in -3.0f64..3.0, z0 in -3.0f64..3.0) {
            let tr = integrate_base_field(&[Expr::real(c)], &["x"], &[], &[z0], 1.0, 0.125).unwrap();
            prop_assert!((tr.last()[0] - (z0 + c)).abs() < 1e-13);
        }
    }
}
