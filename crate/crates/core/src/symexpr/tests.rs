use approx::assert_relative_eq;
use proptest::prelude::*;

use super::*;
use crate::dist::JobSizeDistribution;
use crate::quad::{integrate, integrate_to_infinity, QuadOptions};

fn exp1() -> JobSizeDistribution<f64> {
    JobSizeDistribution::exponential(1.0).unwrap()
}

fn y() -> Expr {
    Expr::w_power(int(1), 1)
}

fn moment_term(c: Rational, j: u32) -> Expr {
    Expr::term(
        c,
        TermKey {
            moment_orders: vec![j],
            ..TermKey::one()
        },
    )
}

#[test]
fn add_and_scale() {
    let e = Expr::decay(rat(1, 2), -1, int(2)).add(&y());
    assert_eq!(e.add(&Expr::zero()), e);
    assert!(e.scale(&int(0)).is_zero());
    let merged = Expr::w_power(int(1), 1).add(&Expr::w_power(int(2), 1));
    assert_eq!(merged, Expr::w_power(int(3), 1));
    assert!(e.sub(&e).is_zero());
}

#[test]
fn shift_examples() {
    assert_eq!(y().shift_expectation(), moment_term(int(1), 1).add(&y()));

    let decay = Expr::decay(int(1), 0, int(2));
    let want = Expr::term(
        int(1),
        TermKey {
            exp_rate: int(2),
            transform_rates: vec![int(2)],
            ..TermKey::one()
        },
    );
    assert_eq!(decay.shift_expectation(), want);

    let sq = Expr::w_power(int(1), 2).shift_expectation();
    let want = moment_term(int(1), 2)
        .add(&Expr::term(
            int(2),
            TermKey {
                w_pow: 1,
                moment_orders: vec![1],
                ..TermKey::one()
            },
        ))
        .add(&Expr::w_power(int(1), 2));
    assert_eq!(sq, want);
}

#[test]
fn shift_of_mixed_term_uses_mixed_factor() {
    let mixed = Expr::term(
        int(1),
        TermKey {
            w_pow: 1,
            exp_rate: int(3),
            ..TermKey::one()
        },
    );
    let s = mixed.shift_expectation();
    assert!(s.has_mixed_factors());
    // E[(S+y) e^{-3λ(S+y)}] for exp(1), λ = 0.5, y = 0.4
    let (lam, yv) = (0.5, 0.4);
    let got = eval(&s, &exp1(), lam, yv, 0.0);
    let r = 3.0 * lam;
    let want = (-r * yv).exp() * (exp1().mixed_moment(1, r) + yv * exp1().transform(r));
    assert_relative_eq!(got, want, max_relative = 1e-14);
}

#[test]
fn weight_and_integrate_examples() {
    let a = Expr::one().weight_and_integrate(&int(2));
    let want = Expr::decay(rat(1, 2), -1, int(0)).add(&Expr::decay(rat(-1, 2), -1, int(2)));
    assert_eq!(a, want);

    let b = y().scale(&int(2)).weight_and_integrate(&int(2));
    let want = Expr::term(
        int(1),
        TermKey {
            lam_pow: -1,
            w_pow: 1,
            ..TermKey::one()
        },
    )
    .add(&Expr::decay(rat(-1, 2), -2, int(0)))
    .add(&Expr::decay(rat(1, 2), -2, int(2)));
    assert_eq!(b, want);

    assert!(Expr::zero().weight_and_integrate(&int(2)).is_zero());
}

#[test]
fn resonant_integration() {
    // e^{-2λw} ∫_0^w e^{2λy} e^{-2λy} dy = w e^{-2λw}
    let a = Expr::decay(int(1), 0, int(2)).weight_and_integrate(&int(2));
    let want = Expr::term(
        int(1),
        TermKey {
            w_pow: 1,
            exp_rate: int(2),
            ..TermKey::one()
        },
    );
    assert_eq!(a, want);
    // plain antiderivative of y^2 vanishing at 0
    assert_eq!(
        Expr::w_power(int(1), 2).weight_and_integrate(&int(0)),
        Expr::w_power(rat(1, 3), 3)
    );
}

#[test]
fn integration_matches_quadrature() {
    // a(y) = 3 y^2 e^{-λ y/2} + 5, α = 7/3
    let a = Expr::term(
        int(3),
        TermKey {
            w_pow: 2,
            exp_rate: rat(1, 2),
            ..TermKey::one()
        },
    )
    .add(&Expr::constant(int(5)));
    let alpha = rat(7, 3);
    let e = a.weight_and_integrate(&alpha);
    let lam = 0.8;
    for &w in &[0.0, 0.3, 1.7, 6.0] {
        let q = integrate(
            |yv: f64| (7.0 / 3.0 * lam * yv).exp() * (3.0 * yv * yv * (-0.5 * lam * yv).exp() + 5.0),
            0.0,
            w,
            QuadOptions::with_tol(1e-14, 1e-13),
        )
        .unwrap()
        .value
            * (-7.0 / 3.0 * lam * w).exp();
        assert_relative_eq!(eval(&e, &exp1(), lam, w, 0.0), q, epsilon = 1e-12, max_relative = 1e-11);
    }
}

#[test]
fn k2_offsets_have_the_known_closed_forms() {
    let (u, v) = build_uv(2, BuildLimits::default()).unwrap();
    let u1 = Expr::decay(rat(1, 2), -1, int(0)).add(&Expr::decay(rat(-1, 2), -1, int(2)));
    assert_eq!(u[0], u1);
    let v1 = Expr::term(
        int(1),
        TermKey {
            lam_pow: -1,
            w_pow: 1,
            ..TermKey::one()
        },
    )
    .add(&Expr::decay(rat(-1, 2), -2, int(0)))
    .add(&Expr::decay(rat(1, 2), -2, int(2)));
    assert_eq!(v[0], v1);

    let l = build_l(2, BuildLimits::default()).unwrap();
    let c_part = Expr::decay(int(-1), -1, int(0))
        .add(&Expr::decay(int(1), -1, int(2)))
        .mul_c(1);
    assert_eq!(l[0], v1.add(&c_part));
}

#[test]
fn k3_second_offset() {
    let (u, _) = build_uv(3, BuildLimits::default()).unwrap();
    let want = Expr::decay(rat(1, 3), -1, int(0)).add(&Expr::decay(rat(-1, 3), -1, rat(3, 2)));
    assert_eq!(u[1], want);
}

#[test]
fn l_without_c_is_v() {
    for k in 2..=6 {
        let t = TestFunctions::build(k, BuildLimits::default()).unwrap();
        for q in 1..k {
            assert_eq!(t.l(q).without_c(), t.v(q), "k={k} q={q}");
        }
        assert!(t.u(k).is_zero());
    }
}

#[test]
fn every_offset_vanishes_at_zero() {
    for k in 2..=7 {
        let t = TestFunctions::build(k, BuildLimits::default()).unwrap();
        for e in t.u.iter().chain(&t.v).chain(&t.l) {
            assert!(e.at_zero().is_zero(), "k={k}: {e}");
        }
    }
}

#[test]
fn growth_is_at_most_doubling_plus_one() {
    for k in 2..=10 {
        let t = TestFunctions::build(k, BuildLimits::default()).unwrap();
        assert_eq!(t.u[0].len(), 1 << (k - 1));
        for q in 1..k - 1 {
            assert!(t.v[q - 1].len() <= 2 * t.v[q].len() + 1);
            assert!(t.l[q - 1].len() <= 2 * t.l[q].len() + 1);
        }
    }
}

#[test]
fn build_errors() {
    assert_eq!(build_uv(1, BuildLimits::default()), Err(BuildError::TooFewServers(1)));
    assert!(matches!(
        build_uv(21, BuildLimits::default()),
        Err(BuildError::TooManyServers { k: 21, max: 20 })
    ));
    let tight = BuildLimits {
        max_k: 20,
        max_terms: 10,
    };
    assert!(matches!(build_uv(6, tight), Err(BuildError::TermLimit { k: 6, .. })));
}

#[test]
fn eval_examples() {
    let (u, v) = build_uv(2, BuildLimits::default()).unwrap();
    assert_relative_eq!(eval(&u[0], &exp1(), 0.5, 200.0, 0.0), 1.0, max_relative = 1e-14);
    assert_eq!(eval(&u[0], &exp1(), 0.5, 0.0, 0.0), 0.0);
    let ev = eval(&v[0].shift_expectation().at_zero(), &exp1(), 0.5, 0.0, 0.0);
    assert_relative_eq!(ev, 1.0, max_relative = 1e-14);
}

#[test]
fn derivative_matches_finite_difference() {
    let t = TestFunctions::build(4, BuildLimits::default()).unwrap();
    let d = JobSizeDistribution::hyperexponential2_balanced(1.0, 3.0).unwrap();
    let (lam, c) = (0.7, 0.3);
    for e in t.l.iter() {
        let b = BoundExpr::bind(e, &d, lam, c);
        let sym = BoundExpr::bind(&e.derivative(), &d, lam, c);
        for &w in &[0.1, 1.0, 4.0] {
            let h = 1e-5;
            let fd = (b.eval(w + h) - b.eval(w - h)) / (2.0 * h);
            assert_relative_eq!(b.derivative(w), fd, epsilon = 1e-7, max_relative = 1e-7);
            assert_relative_eq!(sym.eval(w), b.derivative(w), epsilon = 1e-12, max_relative = 1e-11);
        }
    }
}

#[test]
fn printing_and_dump() {
    let (u, _) = build_uv(2, BuildLimits::default()).unwrap();
    let text = u[0].to_string();
    assert_eq!(text, "+ 1/2 · λ^-1\n- 1/2 · λ^-1 · e^(-2λw)");
    let json = serde_json::to_string(&u[0].dump()).unwrap();
    assert!(json.contains("\"exp_rate\":\"2\""));
    assert_eq!(Expr::zero().to_string(), "0");
}

/// `E[f(S + y)]` by quadrature over the size density.
fn expect_shifted(d: &JobSizeDistribution<f64>, y: f64, f: &dyn Fn(f64) -> f64, tol: f64) -> f64 {
    integrate_to_infinity(
        |s| f(s + y) * d.density(s).unwrap(),
        0.0,
        QuadOptions::with_tol(tol, tol),
    )
    .unwrap()
    .value
}

/// Direct numeric evaluation of the offset recursion, no symbols.
fn numeric_offset(
    d: &JobSizeDistribution<f64>,
    k: usize,
    q: usize,
    lam: f64,
    w: f64,
    source: &dyn Fn(usize, f64) -> f64,
) -> f64 {
    if q == k || w == 0.0 {
        return 0.0;
    }
    let alpha = k as f64 / q as f64;
    let tol = 1e-11;
    let inner = |yv: f64| {
        let carried = if q + 1 == k {
            0.0
        } else {
            let next = |z: f64| numeric_offset(d, k, q + 1, lam, z, source);
            expect_shifted(d, yv, &next, tol)
        };
        (alpha * lam * (yv - w)).exp() * (source(q, yv) + k as f64 * lam * carried) / q as f64
    };
    integrate(inner, 0.0, w, QuadOptions::with_tol(tol, tol)).unwrap().value
}

#[test]
fn symbolic_offsets_match_nested_quadrature() {
    let d = exp1();
    for k in [2usize, 3] {
        let (u, v) = build_uv(k, BuildLimits::default()).unwrap();
        for &lam in &[0.3, 0.8] {
            for &w in &[0.2, 1.0, 2.5] {
                let nu = numeric_offset(&d, k, 1, lam, w, &|q, _| (k - q) as f64);
                let nv = numeric_offset(&d, k, 1, lam, w, &|q, yv| 2.0 * (k - q) as f64 * yv);
                assert!((eval(&u[0], &d, lam, w, 0.0) - nu).abs() < 1e-6, "u k={k} λ={lam} w={w}");
                assert!((eval(&v[0], &d, lam, w, 0.0) - nv).abs() < 1e-6, "v k={k} λ={lam} w={w}");
            }
        }
    }
}

#[test]
fn expectation_at_zero_matches_quadrature() {
    let t = TestFunctions::build(4, BuildLimits::default()).unwrap();
    let d = JobSizeDistribution::uniform_mean_scv(1.0, 0.05).unwrap();
    let lam = 0.6;
    let law = d.truncate(1.1).law().unwrap();
    for e in [&t.u[0], &t.v[0]] {
        let sym = eval(&e.shift_expectation().at_zero(), &law, lam, 0.0, 0.0);
        let b = BoundExpr::bind(e, &law, lam, 0.0);
        let lo = match d.family() {
            crate::dist::SizeFamily::Uniform { lo, .. } => *lo,
            _ => unreachable!(),
        };
        let q = integrate(
            |s| b.eval(s) * d.density(s).unwrap(),
            lo,
            1.1,
            QuadOptions::with_tol(1e-14, 1e-12),
        )
        .unwrap()
        .value
            / law.mass();
        assert_relative_eq!(sym, q, max_relative = 1e-10);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn offsets_are_nonnegative(k in 2usize..=6, lam in 0.05f64..2.0, w in 0.0f64..30.0, scv in 1.5f64..6.0) {
        let t = TestFunctions::build(k, BuildLimits::default()).unwrap();
        let d = JobSizeDistribution::hyperexponential2_balanced(1.0, scv).unwrap();
        for q in 1..k {
            let (uv, um) = BoundExpr::bind(&t.u(q), &d, lam, 0.0).eval_with_magnitude(w);
            let (vv, vm) = BoundExpr::bind(&t.v(q), &d, lam, 0.0).eval_with_magnitude(w);
            prop_assert!(uv >= -1e-12 * um.max(1.0), "u_{} = {}", q, uv);
            prop_assert!(vv >= -1e-12 * vm.max(1.0), "v_{} = {}", q, vv);
        }
    }

    #[test]
    fn eval_commutes_with_algebra(lam in 0.1f64..2.0, w in 0.0f64..10.0, c in -2.0f64..2.0) {
        let t = TestFunctions::build(3, BuildLimits::default()).unwrap();
        let d = exp1();
        let a = &t.l[0];
        let b = &t.u[0];
        let lhs = eval(&a.add(&b.scale(&rat(-3, 7))), &d, lam, w, c);
        let rhs = eval(a, &d, lam, w, c) - 3.0 / 7.0 * eval(b, &d, lam, w, c);
        prop_assert!((lhs - rhs).abs() <= 1e-10 * (1.0 + lhs.abs()));
    }
}
