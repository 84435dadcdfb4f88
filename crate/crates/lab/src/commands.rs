//! One function per subcommand. Each returns a [`RunReport`]; malformed
//! input surfaces as a [`CliError`].

use std::collections::BTreeMap;
use std::path::Path;

use hj_core::check::check_vanishing;
use hj_core::diffop::{MultiIndex, ScalarOp};
use hj_core::integrate::{Flow, Method, Trajectory};
use hj_core::joint::{joint_hj_check, joint_necessary_check, JointProblem};
use hj_core::lagrangian::{complete_solution_check, derive_structures, hj_conditions, pde2_check, LagrangianSystem};
use hj_core::liegroup::{
    cocycle_solve, default_names, eta_xi, group_hj_residuals, invariant_geometry_check, momentum_map_check,
    realization_bracket_check, structure_check, structure_from_frame, CocycleSolution, LieGroupModel,
    StructureConstants,
};
use hj_core::phase::{hj_check, Chart, OneForm};
use hj_core::quantum::{jwkb_vs_exact, oscillator_grid, qhj_residual, Setting};
use hj_core::tdhj::ExtendedSystem;
use hj_core::{CheckOptions, CheckReport, Expr, Point};
use serde_json::{json, Map, Value};

use crate::model::{missing, parse, parse_all, LoadedModel};
use crate::report::{number, RunOptions, RunReport};
use crate::CliError;

/// Model plus resolved options for one run.
pub struct Ctx {
    pub model: LoadedModel,
    pub opts: CheckOptions,
}

impl Ctx {
    /// Command-line values win over the model file, which wins over defaults.
    pub fn new(model: LoadedModel, seed: Option<u64>, samples: Option<usize>, tol: Option<f64>) -> Ctx {
        let mut opts = CheckOptions::default();
        if let Some(s) = seed.or(model.file.seed) {
            opts = opts.with_seed(s);
        }
        if let Some(n) = samples.or(model.file.samples) {
            opts = opts.with_samples(n);
        }
        if let Some(t) = tol.or(model.file.tolerance()) {
            opts = opts.with_tol(t);
        }
        Ctx { model, opts }
    }

    fn report(&self, command: &str) -> RunReport {
        let options = RunOptions {
            seed: self.opts.seed,
            samples: self.opts.samples,
            tol: self.opts.tol,
        };
        RunReport::new(command, &self.model, options)
    }
}

fn verdict(label: &str, passed: bool, note: impl Into<String>, opts: &CheckOptions) -> CheckReport {
    CheckReport {
        label: label.into(),
        n_samples: 0,
        max_abs_residual: if passed { 0.0 } else { 1.0 },
        tolerance: 0.0,
        passed,
        worst_point: Point::new(),
        seed: opts.seed,
        children: Vec::new(),
        note: Some(note.into()),
    }
}

fn strings(exprs: &[Expr]) -> Value {
    Value::Array(exprs.iter().map(|e| json!(e.to_string())).collect())
}

fn matrix(m: &[Vec<f64>]) -> Value {
    Value::Array(
        m.iter()
            .map(|row| Value::Array(row.iter().map(|v| number(*v)).collect()))
            .collect(),
    )
}

pub fn check_hj(ctx: &Ctx, energy: Option<&str>) -> Result<RunReport, CliError> {
    let m = &ctx.model.file;
    let chart = m.chart()?;
    let declared = m.declared();
    let h = parse(
        m.hamiltonian.as_deref().ok_or_else(|| missing("hamiltonian"))?,
        &declared,
    )?;
    let alpha = match (&m.oneform, &m.w) {
        (Some(c), None) => OneForm::new(parse_all(c, &declared)?),
        (None, Some(w)) => OneForm::exact(&parse(w, &declared)?, &chart),
        (Some(_), Some(_)) => return Err(CliError::Model("give either `oneform` or `W`, not both".into())),
        (None, None) => return Err(missing("oneform")),
    };
    let e_text = energy.or(m.energy.as_deref()).ok_or_else(|| missing("energy"))?;
    let level = parse(e_text, &declared)?;
    let dom = m.domain()?;
    let mut report = ctx.report("check-hj");
    report
        .checks
        .push(hj_check(&h, &alpha, &level, &chart, &dom, &ctx.opts)?);
    report.detail("energy", json!(level.to_string()));
    report.detail("oneform", strings(&alpha.components));
    Ok(report)
}

pub fn lagrangian(ctx: &Ctx) -> Result<RunReport, CliError> {
    let m = &ctx.model.file;
    let spec = m.lagrangian.as_ref().ok_or_else(|| missing("lagrangian"))?;
    let mut declared: Vec<String> = spec.q.iter().chain(&spec.u).cloned().collect();
    declared.extend(m.parameters.iter().cloned());
    let sys = LagrangianSystem::new(&spec.q, &spec.u, parse(&spec.l, &declared)?)?;
    let st = derive_structures(&sys)?;
    let fields = m.vectorfields.as_ref().ok_or_else(|| missing("vectorfields"))?;
    let dom = m.domain()?;
    let base: Vec<String> = spec.q.iter().chain(&m.parameters).cloned().collect();
    let mut report = ctx.report("lagrangian");
    report.detail("energy", json!(st.energy.to_string()));
    let mut per_field = Map::new();
    for vf in fields {
        let x = parse_all(&vf.components, &base)?;
        let mut children = vec![pde2_check(&sys, &st, &x, &dom, &ctx.opts)?];
        let hj = hj_conditions(&sys, &st, &x, &dom, &ctx.opts)?;
        children.push(hj.omega.clone());
        children.push(hj.energy.clone());
        if !vf.parameters.is_empty() {
            for p in &vf.parameters {
                if !m.parameters.contains(p) {
                    return Err(CliError::Model(format!("family parameter `{p}` is not declared")));
                }
            }
            children.push(complete_solution_check(&x, &vf.parameters, &dom, &ctx.opts)?);
        }
        report.checks.push(CheckReport::aggregate(vf.name.clone(), children));
        per_field.insert(
            vf.name.clone(),
            json!({
                "omega_coefficients": strings(&hj.omega_coefficients),
                "energy_gradient": strings(&hj.energy_gradient),
            }),
        );
    }
    report.detail("vectorfields", Value::Object(per_field));
    Ok(report)
}

pub fn symbol(ctx: &Ctx, homogenize: Option<&str>, classify: bool) -> Result<RunReport, CliError> {
    let m = &ctx.model.file;
    let spec = m.operator.as_ref().ok_or_else(|| missing("operator"))?;
    let mut declared = spec.vars.clone();
    declared.extend(m.parameters.iter().cloned());
    let mut op = ScalarOp::new(&spec.vars);
    for t in &spec.terms {
        if t.index.len() != spec.vars.len() {
            return Err(CliError::Model(format!(
                "term index {:?} has {} entries for {} variables",
                t.index,
                t.index.len(),
                spec.vars.len()
            )));
        }
        op.add_term(MultiIndex(t.index.clone()), parse(&t.coef, &declared)?)?;
    }
    let tau = homogenize.map(str::to_string).or_else(|| spec.homogenize.clone());
    let target = match &tau {
        Some(tau) => op.homogenize(tau)?,
        None => op.clone(),
    };
    let defaults: Vec<(String, f64, f64)> = spec.vars.iter().map(|v| (v.clone(), -1.0, 1.0)).collect();
    let dom = m.domain_with_defaults(&defaults)?;
    let mut report = ctx.report("symbol");
    let principal = target.principal_symbol();
    report.detail("order", json!(target.order()));
    report.detail("principal_symbol", json!(principal.to_expr().to_string()));
    if tau.is_some() {
        report.detail("homogenized_vars", json!(target.vars));
    }

    // Both routes to the symbol, fed with linear functions of random slope.
    let k = target.order().unwrap_or(0);
    let n = target.vars.len();
    let slope = |j: usize, i: usize| format!("_xi{j}_{i}");
    let fs: Vec<Expr> = (0..k)
        .map(|j| hj_core::expr::sum((0..n).map(|i| Expr::var(slope(j, i)) * Expr::var(target.vars[i].as_str()))))
        .collect();
    let grads: Vec<Vec<Expr>> = (0..k)
        .map(|j| (0..n).map(|i| Expr::var(slope(j, i))).collect())
        .collect();
    let via = target.symbol_via_commutators(&fs).unwrap_or_else(Expr::zero);
    let contracted = principal.contract(&grads)?.unwrap_or_else(Expr::zero);
    let mut route_dom = dom.clone();
    for j in 0..k {
        for i in 0..n {
            route_dom.set(&slope(j, i), -1.0, 1.0);
        }
    }
    report.checks.push(check_vanishing(
        "symbol-routes",
        &[via - contracted],
        &route_dom,
        &ctx.opts,
    )?);

    if classify || spec.expect.is_some() {
        let cls = target.classify(&dom, &ctx.opts)?;
        let witnesses: Vec<Value> = cls
            .witnesses
            .iter()
            .map(|(kind, pt)| json!({ "kind": kind.name(), "point": point_json(pt) }))
            .collect();
        report.detail(
            "classification",
            json!({
                "kind": cls.kind.name(),
                "signature": [cls.signature.positive, cls.signature.negative, cls.signature.zero],
                "witnesses": witnesses,
            }),
        );
        if let Some(expect) = &spec.expect {
            let ok = cls.kind.name() == expect;
            report.checks.push(verdict(
                "classification",
                ok,
                format!("expected {expect}, found {}", cls.kind.name()),
                &ctx.opts,
            ));
        }
    }
    Ok(report)
}

fn point_json(p: &Point) -> Value {
    Value::Object(p.iter().map(|(k, v)| (k.clone(), number(*v))).collect())
}

pub fn quantum(ctx: &Ctx, jwkb: bool) -> Result<RunReport, CliError> {
    let m = &ctx.model.file;
    let spec = m.quantum.as_ref().ok_or_else(|| missing("quantum"))?;
    let mut declared = vec![spec.q.clone(), spec.t.clone(), spec.m.clone(), spec.hbar.clone()];
    declared.extend(m.parameters.iter().cloned());
    let set = Setting {
        q: spec.q.clone(),
        t: spec.t.clone(),
        m: Expr::var(spec.m.as_str()),
        hbar: Expr::var(spec.hbar.as_str()),
    };
    let s = parse(&spec.action, &declared)?;
    let v = parse(&spec.potential, &declared)?;
    let dom = m.domain()?;
    let mut report = ctx.report("quantum");
    report.checks.push(check_vanishing(
        "quantum-hj",
        &[qhj_residual(&s, &v, &set)],
        &dom,
        &ctx.opts,
    )?);
    if jwkb {
        let j = spec.jwkb.as_ref().ok_or_else(|| missing("quantum.jwkb"))?;
        let grid = oscillator_grid(j.grid, j.omega);
        let cmp = jwkb_vs_exact(j.m, j.omega, j.hbar, &grid)?;
        let tol = ctx.opts.tol.unwrap_or(1e-9);
        let worst = cmp
            .rows
            .iter()
            .max_by(|a, b| a[3].total_cmp(&b[3]))
            .map(|r| {
                Point::from([
                    ("q".to_string(), r[0]),
                    ("Q".to_string(), r[1]),
                    ("t".to_string(), r[2]),
                ])
            })
            .unwrap_or_default();
        report.checks.push(CheckReport {
            label: "jwkb".into(),
            n_samples: cmp.rows.len(),
            max_abs_residual: cmp.max_deviation,
            tolerance: tol,
            passed: cmp.max_deviation <= tol,
            worst_point: worst,
            seed: ctx.opts.seed,
            children: Vec::new(),
            note: Some(format!("m = {}, omega = {}, hbar = {}", j.m, j.omega, j.hbar)),
        });
    }
    Ok(report)
}

pub fn joint(ctx: &Ctx) -> Result<RunReport, CliError> {
    let m = &ctx.model.file;
    let spec = m.joint.as_ref().ok_or_else(|| missing("joint"))?;
    let chart = m.chart()?;
    let declared = m.declared();
    let problem = JointProblem::new(
        chart,
        parse_all(&spec.observables, &declared)?,
        parse_all(&spec.targets, &declared)?,
        parse(&spec.w, &declared)?,
    )?;
    let dom = m.domain()?;
    let necessary = joint_necessary_check(&problem, &dom, &ctx.opts)?;
    let solution = joint_hj_check(&problem, &dom, &ctx.opts)?;
    let mut report = ctx.report("joint");
    report.detail("necessary_passed", json!(necessary.summary.passed));
    report.detail("solution_passed", json!(solution.passed));
    report.checks.push(necessary.summary);
    report.checks.push(solution);
    Ok(report)
}

/// Flags of `flow` that override the model's `flow` section.
#[derive(Debug, Clone, Default)]
pub struct FlowArgs {
    pub z0: Option<Vec<f64>>,
    pub tmax: Option<f64>,
    pub dt: Option<f64>,
    pub method: Option<String>,
    pub csv: Option<std::path::PathBuf>,
}

pub fn flow(ctx: &Ctx, args: &FlowArgs) -> Result<RunReport, CliError> {
    let m = &ctx.model.file;
    let chart = m.chart()?;
    let spec = m.flow.clone().unwrap_or(crate::model::FlowSpec {
        params: BTreeMap::new(),
        z0: None,
        tmax: None,
        dt: None,
        method: None,
        time: None,
        max_drift: None,
    });
    let mut declared = m.declared();
    declared.extend(spec.params.keys().cloned());
    declared.extend(spec.time.iter().cloned());
    let h = parse(
        m.hamiltonian.as_deref().ok_or_else(|| missing("hamiltonian"))?,
        &declared,
    )?;
    let method_name = args
        .method
        .clone()
        .or(spec.method.clone())
        .unwrap_or_else(|| "rk4".into());
    let method =
        Method::from_name(&method_name).ok_or_else(|| CliError::Usage(format!("unknown method `{method_name}`")))?;
    let z0 = args.z0.clone().or(spec.z0.clone()).ok_or_else(|| missing("flow.z0"))?;
    let tmax = args.tmax.or(spec.tmax).ok_or_else(|| missing("flow.tmax"))?;
    let dt = args.dt.or(spec.dt).ok_or_else(|| missing("flow.dt"))?;
    if dt > tmax {
        return Err(CliError::Usage(format!("dt = {dt} exceeds tmax = {tmax}")));
    }
    let params: Vec<(&str, f64)> = spec.params.iter().map(|(k, v)| (k.as_str(), *v)).collect();
    let (traj, time_label, monitor_label): (Trajectory, &str, &str) = match &spec.time {
        Some(t) => {
            let sys = ExtendedSystem::with_names(chart, h, t, "h")?;
            (sys.extended_flow(&z0, tmax, dt, method, &params)?, "tau", "H_ext")
        }
        None => (
            Flow::hamiltonian(&h, &chart, &params)?.integrate(&z0, tmax, dt, method)?,
            "t",
            "H",
        ),
    };
    let mut report = ctx.report("flow");
    let stop = traj.stop.as_ref().map(|e| e.to_string());
    report.checks.push(verdict(
        "completed",
        traj.completed(),
        stop.clone()
            .unwrap_or_else(|| format!("{} steps", traj.times.len() - 1)),
        &ctx.opts,
    ));
    let drift = traj.monitor_drift();
    if let Some(max) = spec.max_drift {
        report.checks.push(CheckReport {
            label: "drift".into(),
            n_samples: traj.times.len(),
            max_abs_residual: drift,
            tolerance: max,
            passed: drift <= max,
            worst_point: Point::new(),
            seed: ctx.opts.seed,
            children: Vec::new(),
            note: None,
        });
    }
    let last: Map<String, Value> = traj
        .names
        .iter()
        .zip(traj.last())
        .map(|(n, v)| (n.clone(), number(*v)))
        .collect();
    report.detail("method", json!(method.name()));
    report.detail("steps", json!(traj.times.len() - 1));
    report.detail("final_time", number(*traj.times.last().unwrap_or(&0.0)));
    report.detail("final_state", Value::Object(last));
    report.detail("monitor_drift", number(drift));
    if let Some(path) = &args.csv {
        write_file(path, &traj.to_csv(time_label, monitor_label))?;
        report.detail("csv", json!(path.display().to_string()));
    }
    Ok(report)
}

pub fn write_file(path: &Path, text: &str) -> Result<(), CliError> {
    std::fs::write(path, text).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

pub fn group(ctx: &Ctx) -> Result<RunReport, CliError> {
    let m = &ctx.model.file;
    let spec = m.group.as_ref().ok_or_else(|| missing("group"))?;
    let k = spec.dimension;
    let mut triples = Vec::with_capacity(spec.constants.len());
    for &(r, s, t, v) in &spec.constants {
        if r == 0 || s == 0 || t == 0 {
            return Err(CliError::Model("structure-constant indices start at 1".into()));
        }
        triples.push((r - 1, s - 1, t - 1, v));
    }
    let c = StructureConstants::from_triples(k, &triples)?;
    let [a, b, pi] = default_names(k);
    let law_vars: Vec<String> = a.iter().chain(&b).cloned().collect();
    let law = parse_all(&spec.composition, &law_vars)?;
    let mut model = LieGroupModel::with_coordinates(&m.name, c.clone(), &a, &b, &pi, law)?;
    let mut phase_vars: Vec<String> = Vec::new();
    if let Some(r) = &spec.realization {
        let chart = Chart::new(&r.chart.q, &r.chart.p)?;
        phase_vars = chart.coords();
        let mut declared = phase_vars.clone();
        declared.extend(m.parameters.iter().cloned());
        model = model.with_realization(chart, parse_all(&r.hamiltonians, &declared)?)?;
    }
    if let Some(d) = &spec.cocycle {
        model = model.with_cocycle(d.clone())?;
    }
    let mut defaults: Vec<(String, f64, f64)> = a.iter().map(|n| (n.clone(), -0.8, 0.8)).collect();
    defaults.extend(phase_vars.iter().chain(&pi).map(|n| (n.clone(), -1.5, 1.5)));
    let dom = m.domain_with_defaults(&defaults)?;

    let mut report = ctx.report("group");
    report.checks.push(structure_check(&c));
    report.checks.push(model.associativity_check(0.5, &ctx.opts)?);
    let ex = eta_xi(&model)?;
    report
        .checks
        .push(invariant_geometry_check(&model, &ex, &dom, &ctx.opts)?.summary());
    let frame = structure_from_frame(&ex)?;
    let frame_triples: Vec<Value> = frame
        .triples()
        .iter()
        .map(|(r, s, t, v)| json!([r + 1, s + 1, t + 1, number(*v)]))
        .collect();
    report.detail("frame_constants", Value::Array(frame_triples));
    report.detail("eta", Value::Array(ex.eta.iter().map(|row| strings(row)).collect()));

    if model.realization.is_some() {
        let real = realization_bracket_check(&model, &dom, &ctx.opts)?;
        report.checks.push(real.report.clone());
        let d = model.cocycle.clone().unwrap_or_else(|| real.d.clone());
        report.detail("cocycle", matrix(&d));
        let solved = match cocycle_solve(&c, &d)? {
            CocycleSolution::Coboundary { lambda, residual } => json!({
                "kind": "coboundary",
                "lambda": lambda.iter().map(|v| number(*v)).collect::<Vec<_>>(),
                "residual": number(residual),
            }),
            CocycleSolution::NoCoboundary { residual } => json!({
                "kind": "no-coboundary",
                "residual": number(residual),
            }),
        };
        report.detail("cocycle_solution", solved);
        let mm = momentum_map_check(&model, &ex, &d, &dom, &ctx.opts)?;
        report.checks.push(mm.report);
        report.checks.push(verdict(
            "zero-level-invariance",
            mm.zero_level_invariant,
            if mm.zero_level_invariant {
                "d = 0"
            } else {
                "d ≠ 0: the zero level set of the momentum map is not invariant"
            },
            &ctx.opts,
        ));
        if let Some(text) = &spec.solution {
            let mut declared = phase_vars.clone();
            declared.extend(a.iter().cloned());
            declared.extend(m.parameters.iter().cloned());
            let s = parse(text, &declared)?;
            let res = group_hj_residuals(&model, &ex, &s)?;
            report.detail("group_hj_residuals", strings(&res));
            report.checks.push(check_vanishing("group-hj", &res, &dom, &ctx.opts)?);
        }
    } else if spec.solution.is_some() {
        return Err(missing("group.realization"));
    }
    Ok(report)
}
