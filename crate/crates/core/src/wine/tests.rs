use approx::assert_relative_eq;
use proptest::prelude::*;

use super::*;
use crate::bounds::SystemParams;
use crate::dist::JobSizeDistribution;
use crate::quad::integrate;

type D = JobSizeDistribution<f64>;

fn model(k: usize, rho: f64, d: D) -> BoundModel<f64> {
    BoundModel::new(SystemParams::from_load(k, rho, d).unwrap()).unwrap()
}

fn families4() -> [D; 4] {
    [
        D::exponential(1.0).unwrap(),
        D::deterministic(1.5).unwrap(),
        D::uniform(0.2, 1.8).unwrap(),
        D::hyperexponential2_balanced(1.0, 5.0).unwrap(),
    ]
}

#[test]
fn mginf_identity() {
    for d in families4() {
        for k in [1, 2, 5] {
            let r = wine_integrate(&model(k, 0.6, d), &[CurveFamily::MgInf], DEFAULT_TOL).unwrap();
            let want = k as f64 * d.mean();
            assert!((r.value - want).abs() <= 1e-6, "{d} k={k}: {} vs {want}", r.value);
            assert!(r.abs_error_estimate <= DEFAULT_TOL);
        }
    }
}

/// M/G/1-SRPT mean response time from the waiting and residence integrals.
fn srpt_mean_response(d: &D, lam: f64) -> f64 {
    let opts = QuadOptions::with_tol(1e-13, 1e-12);
    let density = |x: f64| d.density(x).unwrap();
    let rho_x = |x: f64| lam * d.truncate(x).truncated_moment(1);
    let waiting = |x: f64| {
        let v = d.truncate(x);
        0.5 * lam * v.capped_moment(2) / (1.0 - rho_x(x)).powi(2)
    };
    let residence = |x: f64| integrate(|t: f64| 1.0 / (1.0 - rho_x(t)), 0.0, x, opts).unwrap().value;
    integrate(|x: f64| (waiting(x) + residence(x)) * density(x), 0.0, 60.0, opts)
        .unwrap()
        .value
}

#[test]
fn srpt1_only_is_srpt_response_time() {
    let d = D::exponential(1.0).unwrap();
    let r = wine_integrate(&model(1, 0.5, d), &[CurveFamily::Srpt1], DEFAULT_TOL).unwrap();
    let want = srpt_mean_response(&d, 0.5);
    assert!((r.value - want).abs() <= 2e-6, "{} vs {want}", r.value);
}

#[test]
fn light_traffic_tends_to_k_mean() {
    let d = D::exponential(1.0).unwrap();
    let r = wine_integrate(&model(2, 1e-4, d), &MIXEX, DEFAULT_TOL).unwrap();
    assert_relative_eq!(r.value, 2.0, max_relative = 1e-3);
}

#[test]
fn suite_ordering_and_naive_gap() {
    let d = D::exponential(1.0).unwrap();
    for rho in [0.5, 0.9] {
        let m = model(2, rho, d);
        let s = bound_suite(&m, DEFAULT_TOL).unwrap();
        let slack = 2.0 * DEFAULT_TOL;
        assert!(s.mixex.value <= s.isq.value + slack);
        assert!(s.isq.value <= s.isq_recycling.value + slack);
        if rho == 0.9 {
            let n = naive_bounds(&m, DEFAULT_TOL).unwrap();
            assert!(s.mixex.value > n.value + 1e-3, "{} vs {}", s.mixex.value, n.value);
            assert!(s.isq_recycling.families_used.contains(&CurveFamily::RecIsqL));
        }
    }
}

#[test]
fn tolerance_refinement_is_consistent() {
    let m = model(3, 0.8, D::uniform_mean_scv(1.0, 0.05).unwrap());
    let coarse = wine_integrate(&m, &ISQ_RECYCLING, 1e-5).unwrap();
    let fine = wine_integrate(&m, &ISQ_RECYCLING, 5e-6).unwrap();
    assert!((coarse.value - fine.value).abs() <= coarse.abs_error_estimate);
}

#[test]
fn breakdown_sums_to_value() {
    let m = model(2, 0.7, D::hyperexponential2_balanced(1.0, 3.0).unwrap());
    let r = wine_integrate(&m, &ISQ_RECYCLING, DEFAULT_TOL).unwrap();
    let sum: f64 = r.breakdown.iter().map(|s| s.value).sum();
    assert_relative_eq!(sum, r.value, max_relative = 1e-12);
    assert_eq!(r.breakdown.first().unwrap().x_lo, 0.0);
    assert!(r.breakdown.last().unwrap().x_hi.is_infinite());
    for w in r.breakdown.windows(2) {
        assert_eq!(w[0].x_hi, w[1].x_lo);
    }
}

#[test]
fn rejects_bad_input() {
    let m = model(2, 0.5, D::exponential(1.0).unwrap());
    assert!(matches!(wine_integrate(&m, &[], 1e-6), Err(WineError::NoFamilies)));
    assert!(matches!(wine_integrate(&m, &MIXEX, 0.0), Err(WineError::BadTolerance(_))));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn adding_families_never_lowers(k in 1usize..4, rho in 0.2f64..0.9, scv in 0.05f64..0.3) {
        let m = model(k, rho, D::uniform_mean_scv(1.0, scv).unwrap());
        let a = wine_integrate(&m, &[CurveFamily::MgInf], 1e-5).unwrap();
        let b = wine_integrate(&m, &MIXEX, 1e-5).unwrap();
        let c = wine_integrate(&m, &ISQ, 1e-5).unwrap();
        prop_assert!(a.value <= b.value + 2e-5);
        prop_assert!(b.value <= c.value + 2e-5);
    }
}
