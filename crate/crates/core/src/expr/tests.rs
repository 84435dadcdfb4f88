use alloc::boxed::Box;
use alloc::format;
use alloc::string::ToString;
use alloc::vec;

use proptest::prelude::*;

use super::*;
use crate::Error;

fn p(s: &str) -> Expr {
    Expr::parse(s).unwrap()
}

fn at(e: &Expr, x: f64) -> Complex64 {
    e.eval(&[("x", x), ("y", 0.7)]).unwrap()
}

#[test]
fn precedence() {
    // ^ binds tighter than unary minus, which binds tighter than * and /.
    assert_eq!(at(&p("-x^2"), 3.0).re, -9.0);
    assert_eq!(at(&p("2^3^2"), 0.0).re, 512.0);
    assert_eq!(at(&p("-2^2"), 0.0).re, -4.0);
    assert_eq!(at(&p("(-2)^2"), 0.0).re, 4.0);
    assert_eq!(at(&p("1 - 2 - 3"), 0.0).re, -4.0);
    assert_eq!(at(&p("8/4/2"), 0.0).re, 1.0);
    assert_eq!(at(&p("2*-x*3"), 1.0).re, -6.0);
    assert_eq!(at(&p("x^-2"), 2.0).re, 0.25);
}

#[test]
fn syntax_error_offset() {
    match Expr::parse("q1 +") {
        Err(Error::Syntax { offset, .. }) => assert_eq!(offset, 4),
        other => panic!("{other:?}"),
    }
    assert!(matches!(Expr::parse("x^0.5"), Err(Error::Syntax { offset: 2, .. })));
    assert!(matches!(Expr::parse("sin x"), Err(Error::Syntax { .. })));
    assert!(matches!(Expr::parse("foo(x)"), Err(Error::Syntax { .. })));
    assert!(matches!(Expr::parse("(x"), Err(Error::Syntax { offset: 2, .. })));
}

#[test]
fn unknown_identifier_lists_declared() {
    let err = Expr::parse_declared("q1 + r", &["q1", "p1"]).unwrap_err();
    match &err {
        Error::UnknownIdentifier { name, offset, declared } => {
            assert_eq!(name, "r");
            assert_eq!(*offset, 5);
            assert_eq!(declared, &vec!["q1".to_string(), "p1".to_string()]);
        }
        other => panic!("{other:?}"),
    }
    assert!(err.to_string().contains("q1, p1"));
}

#[test]
fn imaginary_unit_and_constants() {
    let z = p("exp(i*pi)").eval(&[("x", 0.0)]).unwrap();
    assert!((z.re + 1.0).abs() < 1e-15 && z.im.abs() < 1e-15);
    assert_eq!(p("complex(1, -2)"), Expr::Complex(1.0, -2.0));
}

#[test]
fn principal_branch() {
    let s = p("sqrt(x)").eval(&[("x", -4.0)]).unwrap();
    assert_eq!(s, Complex64::new(0.0, 2.0));
    let l = p("ln(x)").eval(&[("x", -1.0)]).unwrap();
    assert_eq!(l, Complex64::new(0.0, core::f64::consts::PI));
    let l = p("ln(i*x)").eval(&[("x", 2.0)]).unwrap();
    assert!((l.im - core::f64::consts::FRAC_PI_2).abs() < 1e-15);
}

#[test]
fn real_subtrees_stay_real() {
    let v = p("sqrt(x)*sin(x)/ln(x) + exp(-x)^3").eval(&[("x", 2.5)]).unwrap();
    assert_eq!(v.im, 0.0);
}

#[test]
fn singular_evaluation() {
    assert!(matches!(p("1/x").eval(&[("x", 0.0)]), Err(Error::Singular { .. })));
    assert!(matches!(p("ln(x)").eval(&[("x", 0.0)]), Err(Error::Singular { .. })));
    assert!(matches!(p("x^(-1)").eval(&[("x", 0.0)]), Err(Error::Singular { .. })));
    assert!(matches!(
        p("sqrt(x)").eval_real(&[("x", -1.0)]),
        Err(Error::Singular { .. })
    ));
    assert_eq!(p("x").eval(&[("y", 0.0)]), Err(Error::UnboundVariable("x".into())));
}

#[test]
fn derivative_examples() {
    let d = p("q^3 + 2*q").diff("q");
    assert_eq!(d.eval(&[("q", 2.0)]).unwrap().re, 14.0);
    assert_eq!(p("y*x").diff("z"), Expr::zero());
    assert_eq!(p("x").diff("x"), Expr::one());
}

#[test]
fn constant_folding_is_local() {
    assert_eq!(p("x") * Expr::zero(), Expr::zero());
    assert_eq!(Expr::one() * p("x"), p("x"));
    assert_eq!(Expr::real(2.0) + Expr::real(3.0), Expr::real(5.0));
    assert_eq!(p("x") - p("x"), Expr::zero());
    assert_eq!(-(-p("x")), p("x"));
    assert_eq!(Expr::i() * Expr::i(), Expr::real(-1.0));
}

#[test]
fn substitution() {
    let e = p("p^2/2 + q").subs("p", &p("sqrt(2*E - q)"));
    let v = e.eval(&[("q", 0.5), ("E", 1.0)]).unwrap().re;
    assert!((v - 1.25).abs() < 1e-15);
}

#[test]
fn tape_matches_tree() {
    let exprs = [p("x*y + sin(x)"), p("sqrt(x - y)"), p("1/(x+y)^2")];
    let tape = Tape::compile(&exprs, &["x", "y"]).unwrap();
    let mut out = [Complex64::new(0.0, 0.0); 3];
    tape.eval_at(&[0.3, 0.7], &mut out).unwrap();
    for (e, v) in exprs.iter().zip(out) {
        assert_eq!(e.eval(&[("x", 0.3), ("y", 0.7)]).unwrap(), v);
    }
    let mut real = [0.0; 3];
    assert!(tape.eval_real(&[0.3, 0.7], &mut real).is_err());
    tape.eval_real(&[0.9, 0.2], &mut real).unwrap();
    assert!((real[1] - 0.7f64.sqrt()).abs() < 1e-15);
}

fn leaf() -> impl Strategy<Value = Expr> {
    prop_oneof![
        prop::sample::select(vec!["x", "y", "q1", "p_2"]).prop_map(Expr::var),
        (-1e3f64..1e3).prop_map(Expr::Real),
        (0u32..20).prop_map(|n| Expr::Real(n as f64)),
        ((-5f64..5.0), (-5f64..5.0)).prop_map(|(a, b)| Expr::Complex(a, b)),
        Just(Expr::i()),
    ]
}

fn raw_tree() -> impl Strategy<Value = Expr> {
    leaf().prop_recursive(5, 40, 2, |inner| {
        let funcs = prop::sample::select(vec![
            Func::Sqrt,
            Func::Exp,
            Func::Ln,
            Func::Sin,
            Func::Cos,
            Func::Tan,
            Func::Asin,
            Func::Atan,
            Func::Abs,
        ]);
        prop_oneof![
            (inner.clone(), inner.clone()).prop_map(|(a, b)| Expr::Add(Arc::new(a), Arc::new(b))),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| Expr::Sub(Arc::new(a), Arc::new(b))),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| Expr::Mul(Arc::new(a), Arc::new(b))),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| Expr::Div(Arc::new(a), Arc::new(b))),
            inner.clone().prop_map(|a| Expr::Neg(Arc::new(a))),
            (inner.clone(), -4i32..5).prop_map(|(a, n)| Expr::Pow(Arc::new(a), n)),
            (funcs, inner).prop_map(|(f, a)| Expr::Call(f, Arc::new(a))),
        ]
    })
}

/// Smooth trees in `x` and `y` whose derivatives are easy to probe.
fn smooth_tree() -> impl Strategy<Value = Expr> {
    let leaf = prop_oneof![
        Just(Expr::var("x")),
        Just(Expr::var("y")),
        (-3f64..3.0).prop_map(Expr::Real),
    ];
    leaf.prop_recursive(4, 24, 2, |inner| {
        prop_oneof![
            (inner.clone(), inner.clone()).prop_map(|(a, b)| a + b),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| a - b),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| a * b),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| a / (b.powi(2) + 1.0)),
            inner.clone().prop_map(|a| a.sin()),
            inner.clone().prop_map(|a| a.cos()),
            inner.clone().prop_map(|a| (a.powi(2) + 1.0).sqrt()),
            inner.clone().prop_map(|a| (a.powi(2) + 1.0).ln()),
            inner.clone().prop_map(|a| a.atan()),
            (inner, 0i32..4).prop_map(|(a, n)| a.powi(n)),
        ]
    })
}

/// Fourth-order central difference, used as an independent oracle.
fn central_diff(e: &Expr, x: f64, y: f64) -> Option<f64> {
    let h = 1e-4;
    let f = |x: f64| e.eval_real(&[("x", x), ("y", y)]).ok();
    Some((-f(x + 2.0 * h)? + 8.0 * f(x + h)? - 8.0 * f(x - h)? + f(x - 2.0 * h)?) / (12.0 * h))
}

proptest! {
    #[test]
    fn print_parse_roundtrip(e in raw_tree()) {
        let text = e.to_string();
        let back = Expr::parse(&text).map_err(|err| TestCaseError::fail(format!("{text}: {err}")))?;
        prop_assert_eq!(back, e, "text: {}", text);
    }

    #[test]
    fn derivative_matches_finite_difference(e in smooth_tree(), x in -1.5f64..1.5, y in -1.5f64..1.5) {
        let d = e.diff("x");
        let exact = d.eval_real(&[("x", x), ("y", y)]).unwrap();
        let fd = central_diff(&e, x, y).unwrap();
        let scale = 1.0 + exact.abs().max(fd.abs());
        prop_assert!((exact - fd).abs() <= 1e-5 * scale, "{} : {} vs {}", e, exact, fd);
    }

    #[test]
    fn derivative_is_linear(a in smooth_tree(), b in smooth_tree(), c in -2f64..2.0, x in -1f64..1.0) {
        let lhs = (c * &a + &b).diff("x");
        let rhs = c * a.diff("x") + b.diff("x");
        let s = [("x", x), ("y", 0.3)];
        let (l, r) = (lhs.eval_real(&s).unwrap(), rhs.eval_real(&s).unwrap());
        prop_assert!((l - r).abs() <= 1e-9 * (1.0 + l.abs()));
    }

    #[test]
    fn product_rule(a in smooth_tree(), b in smooth_tree(), x in -1f64..1.0) {
        let lhs = (&a * &b).diff("x");
        let rhs = a.diff("x") * &b + &a * b.diff("x");
        let s = [("x", x), ("y", -0.4)];
        let (l, r) = (lhs.eval_real(&s).unwrap(), rhs.eval_real(&s).unwrap());
        prop_assert!((l - r).abs() <= 1e-9 * (1.0 + l.abs()));
    }

    #[test]
    fn mixed_partials_commute(e in smooth_tree(), x in -1f64..1.0, y in -1f64..1.0) {
        let s = [("x", x), ("y", y)];
        let xy = e.diff("x").diff("y").eval_real(&s).unwrap();
        let yx = e.diff("y").diff("x").eval_real(&s).unwrap();
        prop_assert!((xy - yx).abs() <= 1e-8 * (1.0 + xy.abs()));
    }
}

#[test]
fn roundtrip_edge_cases() {
    let cases: [Box<dyn Fn() -> Expr>; 6] = [
        Box::new(|| Expr::Neg(Arc::new(Expr::Real(2.0)))),
        Box::new(|| Expr::Real(-2.0)),
        Box::new(|| Expr::Pow(Arc::new(Expr::Real(-2.0)), -3)),
        Box::new(|| Expr::Neg(Arc::new(Expr::Neg(Arc::new(Expr::var("x")))))),
        Box::new(|| Expr::Complex(-0.0, 1.0)),
        Box::new(|| Expr::Real(1e-300)),
    ];
    for c in cases {
        let e = c();
        assert_eq!(Expr::parse(&e.to_string()).unwrap(), e, "{e}");
    }
}
