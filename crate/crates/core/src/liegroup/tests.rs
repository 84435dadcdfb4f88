use super::fixtures::*;
use super::*;
use crate::tdhj::ExtendedSystem;
use proptest::prelude::*;

fn e(s: &str) -> Expr {
    Expr::parse(s).unwrap()
}

fn tight() -> CheckOptions {
    CheckOptions::default().with_tol(1e-9)
}

fn phase_domain(model: &LieGroupModel) -> Domain {
    let real = model.realization.as_ref().unwrap();
    real.chart
        .coords()
        .iter()
        .fold(model.group_domain(0.8), |d, c| d.with(c, -1.5, 1.5))
}

fn full_domain(model: &LieGroupModel) -> Domain {
    model
        .momenta
        .iter()
        .fold(phase_domain(model), |d, m| d.with(m, -1.5, 1.5))
}

#[test]
fn structure_constants_of_known_algebras() {
    assert!(structure_check(&StructureConstants::zero(4)).passed);
    assert!(structure_check(&StructureConstants::levi_civita()).passed);
    assert!(structure_check(&heisenberg().constants).passed);
    assert!(structure_check(&affine().constants).passed);
}

#[test]
fn jacobi_violation_is_reported() {
    // [e1, e2] = e3, [e1, e3] = e1: the cyclic sum on (1, 2, 3) is -e3.
    let c = StructureConstants::from_triples(3, &[(0, 1, 2, 1.0), (0, 2, 0, 1.0)]).unwrap();
    let r = structure_check(&c);
    assert!(!r.passed);
    assert!(r.children[0].passed);
    assert!(!r.children[1].passed && r.children[1].note.is_some());
}

#[test]
fn non_antisymmetric_constants() {
    let mut dense = vec![vec![vec![0.0; 2]; 2]; 2];
    dense[1][0][1] = 1.0;
    let c = StructureConstants::from_dense(&dense).unwrap();
    let r = structure_check(&c);
    assert!(!r.children[0].passed);
    let law = vec![e("a1 + b1"), e("a2 + b2")];
    assert!(matches!(
        LieGroupModel::new("bad", c, law),
        Err(Error::InvalidStructure(_))
    ));
}

#[test]
fn triples_are_validated() {
    assert!(StructureConstants::from_triples(2, &[(0, 2, 1, 1.0)]).is_err());
    assert!(StructureConstants::from_triples(2, &[(1, 1, 0, 1.0)]).is_err());
    let c = StructureConstants::from_triples(2, &[(0, 1, 1, 2.0)]).unwrap();
    assert_eq!(c.get(1, 1, 0), -2.0);
    assert_eq!(c.triples(), vec![(0, 1, 1, 2.0)]);
}

#[test]
fn central_charge_is_not_a_coboundary() {
    let m = plane_central();
    let d = m.cocycle.clone().unwrap();
    match cocycle_solve(&m.constants, &d).unwrap() {
        CocycleSolution::NoCoboundary { residual } => assert!((residual - 1.0).abs() < 1e-12),
        other => panic!("{other:?}"),
    }
}

#[test]
fn zero_cocycle_gives_zero_lambda() {
    for m in bundled() {
        let k = m.dim();
        match cocycle_solve(&m.constants, &vec![vec![0.0; k]; k]).unwrap() {
            CocycleSolution::Coboundary { lambda, residual } => {
                assert!(lambda.iter().all(|v| *v == 0.0) && residual == 0.0)
            }
            other => panic!("{}: {other:?}", m.name),
        }
    }
}

#[test]
fn heisenberg_cocycles() {
    let c = heisenberg().constants;
    let mut d = vec![vec![0.0; 3]; 3];
    d[0][1] = 0.7;
    d[1][0] = -0.7;
    match cocycle_solve(&c, &d).unwrap() {
        CocycleSolution::Coboundary { lambda, .. } => {
            assert!(lambda[0].abs() < 1e-12 && lambda[1].abs() < 1e-12 && (lambda[2] - 0.7).abs() < 1e-12)
        }
        other => panic!("{other:?}"),
    }
    // d₁₃ pairs e₁ with the centre; nothing in the image of C reaches it.
    let mut d = vec![vec![0.0; 3]; 3];
    d[0][2] = 1.0;
    d[2][0] = -1.0;
    assert!(matches!(
        cocycle_solve(&c, &d).unwrap(),
        CocycleSolution::NoCoboundary { .. }
    ));
}

#[test]
fn cocycle_condition_violation_names_the_triple() {
    // [e1, e2] = e1 with e3 abelian: the condition on (1, 2, 3) reads d₁₃ = 0.
    let c = StructureConstants::from_triples(3, &[(0, 1, 0, 1.0)]).unwrap();
    let mut d = vec![vec![0.0; 3]; 3];
    d[0][2] = 1.0;
    d[2][0] = -1.0;
    match cocycle_solve(&c, &d) {
        Err(Error::NotCocycle {
            r: 0,
            s: 1,
            t: 2,
            residual,
        }) => assert_eq!(residual, 1.0),
        other => panic!("{other:?}"),
    }
    d[2][0] = 0.0;
    assert!(matches!(cocycle_solve(&c, &d), Err(Error::InvalidStructure(_))));
}

proptest! {
    #[test]
    fn so3_coboundaries_recover_lambda(v in prop::array::uniform3(-3.0f64..3.0)) {
        let c = StructureConstants::levi_civita();
        let d = coboundary(&c, &v);
        match cocycle_solve(&c, &d).unwrap() {
            CocycleSolution::Coboundary { lambda, residual } => {
                prop_assert!(residual <= 1e-10);
                for (a, b) in lambda.iter().zip(&v) {
                    prop_assert!((a - b).abs() < 1e-10);
                }
            }
            other => prop_assert!(false, "{:?}", other),
        }
    }

    #[test]
    fn solve_inverts_coboundary_modulo_kernel(
        v in prop::array::uniform3(-3.0f64..3.0),
        which in 0usize..3,
    ) {
        let c = match which {
            0 => heisenberg().constants,
            1 => StructureConstants::from_triples(3, &[(0, 1, 1, 1.0), (0, 2, 2, 1.0)]).unwrap(),
            _ => StructureConstants::zero(3),
        };
        let d = coboundary(&c, &v);
        match cocycle_solve(&c, &d).unwrap() {
            CocycleSolution::Coboundary { lambda, .. } => {
                let back = coboundary(&c, &lambda);
                for (x, y) in back.iter().flatten().zip(d.iter().flatten()) {
                    prop_assert!((x - y).abs() < 1e-10);
                }
            }
            other => prop_assert!(false, "{:?}", other),
        }
    }
}

#[test]
fn eta_of_abelian_groups_is_identity() {
    for m in [real_line(), plane(), so2()] {
        let ex = eta_xi(&m).unwrap();
        for (r, row) in ex.eta.iter().enumerate() {
            for (s, v) in row.iter().enumerate() {
                assert_eq!(v.as_real(), Some(if r == s { 1.0 } else { 0.0 }));
            }
        }
    }
}

#[test]
fn affine_eta_by_hand() {
    let ex = eta_xi(&affine()).unwrap();
    let expected = [[e("1"), e("0")], [e("a2"), e("1")]];
    let dom = affine().group_domain(2.0);
    for r in 0..2 {
        for s in 0..2 {
            let rep = sampled_identity(&ex.eta[r][s], &expected[r][s], &dom);
            assert!(rep.passed && rep.max_abs_residual == 0.0, "η[{r}][{s}]");
        }
    }
    let xi = ex.xi_at(&[0.3, -0.4]).unwrap();
    assert_eq!(xi, vec![vec![1.0, 0.0], vec![0.4, 1.0]]);
}

fn sampled_identity(a: &Expr, b: &Expr, dom: &Domain) -> CheckReport {
    crate::check::sampled_identity_check(a, b, dom, &CheckOptions::default()).unwrap()
}

#[test]
fn unnormalised_law_is_rejected() {
    let r = LieGroupModel::new("shifted", StructureConstants::zero(1), vec![e("a1 + b1 + 1")]);
    assert!(matches!(r, Err(Error::InvalidStructure(_))));
    let r = LieGroupModel::new("stray", StructureConstants::zero(1), vec![e("a1 + b1 + x*a1*b1")]);
    assert!(matches!(r, Err(Error::UnknownVariable(v)) if v == "x"));
}

#[test]
fn singular_eta_is_reported_with_point() {
    // η = 1 - α², singular at α = 1.
    let m = LieGroupModel::new("edge", StructureConstants::zero(1), vec![e("a1 + b1 - a1*b1^2")]).unwrap();
    let ex = eta_xi(&m).unwrap();
    assert!(matches!(ex.xi_at(&[1.0]), Err(Error::SingularMatrix { point }) if point == vec![("a1".into(), 1.0)]));
    assert!(matches!(ex.numeric().xi_at(&[1.0]), Err(Error::SingularMatrix { .. })));
}

#[test]
fn fixtures_are_associative() {
    for m in bundled().into_iter().chain([so3()]) {
        let r = m.associativity_check(0.5, &tight()).unwrap();
        assert!(r.passed, "{}: {r:?}", m.name);
    }
}

#[test]
fn frame_reproduces_declared_constants() {
    for m in bundled().into_iter().chain([so3()]) {
        let c = structure_from_frame(&eta_xi(&m).unwrap()).unwrap();
        let k = m.dim();
        for t in 0..k {
            for r in 0..k {
                for s in 0..k {
                    assert!((c.get(t, r, s) - m.constants.get(t, r, s)).abs() < 1e-12, "{}", m.name);
                }
            }
        }
    }
}

#[test]
fn invariant_geometry_of_all_fixtures() {
    for m in bundled().into_iter().chain([so3()]) {
        let ex = eta_xi(&m).unwrap();
        let g = invariant_geometry_check(&m, &ex, &m.group_domain(0.8), &tight()).unwrap();
        assert!(g.summary().passed, "{}: {g:?}", m.name);
        assert_eq!(g.commutators.tolerance, 1e-9);
    }
}

#[test]
fn numeric_coframe_route() {
    for m in [heisenberg(), so3(), affine()] {
        let ex = eta_xi(&m).unwrap().numeric();
        assert!(ex.forms().is_none());
        let g = invariant_geometry_check(&m, &ex, &m.group_domain(0.8), &tight()).unwrap();
        assert!(g.summary().passed, "{}: {g:?}", m.name);
    }
}

#[test]
fn wrong_constants_fail_commutators_with_witness() {
    let good = affine();
    let c = StructureConstants::from_triples(2, &[(0, 1, 1, -1.0)]).unwrap();
    let m = LieGroupModel::new("affine-flipped", c, good.composition.clone()).unwrap();
    let ex = eta_xi(&m).unwrap();
    let g = invariant_geometry_check(&m, &ex, &m.group_domain(0.8), &tight()).unwrap();
    assert!(!g.commutators.passed);
    assert!(g.commutators.worst_point.contains_key("a1"));
    assert!(g.duality.passed);
    assert!(!g.maurer_cartan.passed);
}

#[test]
fn realization_cocycles() {
    let opts = CheckOptions::default();
    for m in [plane(), affine(), heisenberg(), so3(), real_line(), so2()] {
        let r = realization_bracket_check(&m, &phase_domain(&m), &opts).unwrap();
        assert!(r.report.passed, "{}", m.name);
        assert!(r.d.iter().flatten().all(|v| *v == 0.0), "{}: {:?}", m.name, r.d);
    }
    let m = plane_central();
    let r = realization_bracket_check(&m, &phase_domain(&m), &opts).unwrap();
    assert!(r.report.passed);
    assert_eq!(r.d, vec![vec![0.0, -1.0], vec![1.0, 0.0]]);
}

#[test]
fn mismatched_realization_has_witness() {
    // H₁ = qp realizes the opposite sign: {qp, p} + p = 2p is not constant.
    let m = affine()
        .with_realization(Chart::canonical(1), vec![e("q*p"), e("p")])
        .unwrap();
    let r = realization_bracket_check(&m, &phase_domain(&m), &CheckOptions::default()).unwrap();
    assert!(!r.report.passed);
    assert!(r.report.worst_point.contains_key("p"));
}

#[test]
fn abelian_group_hj_solution() {
    let m = plane();
    let ex = eta_xi(&m).unwrap();
    let dom = phase_domain(&m).with("P", -2.0, 2.0);
    let good = group_hj_residuals(&m, &ex, &e("P*q + P^2/2*a1 + P*a2")).unwrap();
    assert!(
        check_vanishing("group-hj", &good, &dom, &CheckOptions::default())
            .unwrap()
            .passed
    );
    // With both α-terms negated the first residual is P², the second 2P.
    let flipped = group_hj_residuals(&m, &ex, &e("P*q - P^2/2*a1 - P*a2")).unwrap();
    let expected = [e("P^2"), e("2*P")];
    for (r, x) in flipped.iter().zip(&expected) {
        assert!(sampled_identity(r, x, &dom).passed);
    }
}

#[test]
fn affine_group_hj_solution() {
    let m = affine();
    let ex = eta_xi(&m).unwrap();
    let dom = phase_domain(&m).with("P", -2.0, 2.0);
    let res = group_hj_residuals(&m, &ex, &e("P*(q + a2)*exp(-a1)")).unwrap();
    assert!(check_vanishing("group-hj", &res, &dom, &tight()).unwrap().passed);
    let res = group_hj_residuals(&m, &ex, &e("P*q*exp(-a1)")).unwrap();
    assert!(!check_vanishing("group-hj", &res, &dom, &tight()).unwrap().passed);
}

#[test]
fn real_line_reduces_to_time_dependent_hj() {
    let m = real_line();
    let ex = eta_xi(&m).unwrap();
    let sys = ExtendedSystem::new(Chart::canonical(1), e("p^2/2")).unwrap();
    let dom = Domain::new()
        .with("q", -2.0, 2.0)
        .with("a1", -2.0, 2.0)
        .with("P", -2.0, 2.0);
    for s_t in ["P*q - P^2*t/2", "q^2/(2*(t + 3))", "sin(q) + t*q"] {
        let s_t = e(s_t);
        let to_group: BTreeMap<String, Expr> = [("t".to_string(), -e("a1"))].into();
        let s_g = s_t.subs_all(&to_group);
        let group = group_hj_residuals(&m, &ex, &s_g).unwrap().remove(0);
        let time = sys.tdhj_residual(&s_t).subs_all(&to_group);
        let r =
            crate::check::sampled_identity_check(&group, &time, &dom, &CheckOptions::default().with_tol(0.0)).unwrap();
        assert!(r.passed, "{r:?}");
    }
    // H̃ = H + h_1 with h_1 = -π, the lifted Hamiltonian of the extended system at h = -π.
    let lifted = lifted_hamiltonians(&m, &ex).unwrap().remove(0);
    let to_time: BTreeMap<String, Expr> = [("h".to_string(), -e("pi1"))].into();
    let expected = sys.lifted_hamiltonian().subs_all(&to_time);
    let dom = Domain::new()
        .with("q", -2.0, 2.0)
        .with("p", -2.0, 2.0)
        .with("pi1", -2.0, 2.0);
    let r =
        crate::check::sampled_identity_check(&lifted, &expected, &dom, &CheckOptions::default().with_tol(0.0)).unwrap();
    assert!(r.passed, "{r:?}");
}

#[test]
fn momentum_map_brackets() {
    let opts = CheckOptions::default();
    for m in [plane(), affine(), heisenberg(), so3()] {
        let ex = eta_xi(&m).unwrap();
        let d = realization_bracket_check(&m, &phase_domain(&m), &opts).unwrap().d;
        let r = momentum_map_check(&m, &ex, &d, &full_domain(&m), &opts).unwrap();
        assert!(r.report.passed, "{}: {:?}", m.name, r.report);
        assert!(r.zero_level_invariant);
        assert!(r.report.max_abs_residual <= 1e-9);
    }
}

#[test]
fn central_charge_breaks_zero_level_invariance() {
    let m = plane_central();
    let ex = eta_xi(&m).unwrap();
    let d = m.cocycle.clone().unwrap();
    let r = momentum_map_check(&m, &ex, &d, &full_domain(&m), &CheckOptions::default()).unwrap();
    assert!(r.report.passed && r.report.max_abs_residual == 0.0);
    assert!(!r.zero_level_invariant && r.report.note.is_some());
    // The momenta alone carry no constant.
    assert!(r.report.children[0].passed);
    let zero = vec![vec![0.0; 2]; 2];
    let r = momentum_map_check(&m, &ex, &zero, &full_domain(&m), &CheckOptions::default()).unwrap();
    assert!(!r.report.passed);
}

#[test]
fn missing_realization_is_unsupported() {
    let m = LieGroupModel::new("bare", StructureConstants::zero(1), vec![e("a1 + b1")]).unwrap();
    let ex = eta_xi(&m).unwrap();
    assert!(matches!(
        group_hj_residuals(&m, &ex, &e("a1")),
        Err(Error::Unsupported(_))
    ));
}
