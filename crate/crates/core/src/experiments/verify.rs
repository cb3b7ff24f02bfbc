//! Fast invariant checks behind the `verify` verb.

use serde::{Deserialize, Serialize};

use crate::bounds::{k2, BoundModel, CurveFamily, JumpOptions, SystemParams};
use crate::dist::JobSizeDistribution;
use crate::sim::{measure_bar_residual, simulate_coupled, simulate_isq, Policy, SimOptions};
use crate::wine::wine_integrate;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

fn check(name: &str, passed: bool, detail: String) -> Check {
    Check {
        name: name.to_string(),
        passed,
        detail,
    }
}

type D = JobSizeDistribution<f64>;

fn closed_forms() -> Check {
    let d = D::exponential(1.0).unwrap();
    let mut worst = 0.0f64;
    for i in 1..=9 {
        let lam = i as f64 / 10.0;
        let m = BoundModel::new(SystemParams::new(2, lam, d).unwrap()).unwrap();
        let mut rel = |a: f64, b: f64| worst = worst.max((a - b).abs() / b.abs().max(1e-300));
        rel(m.isq_total_work(), k2::isq_total_work(&d, lam));
        rel(m.idle_probability(), k2::idle_probability(&d, lam));
        for x in [0.5, 1.0, 2.0] {
            rel(m.sep_isq_relevant_work(x).unwrap(), k2::sep_isq(&d, lam, x));
            rel(m.rec_isq_relevant_work_lb(x).unwrap(), k2::rec_isq(&d, lam, x));
        }
    }
    check("k2_closed_forms", worst <= 1e-10, format!("max relative gap {worst:.2e}"))
}

fn jump(opts: JumpOptions) -> Check {
    let d = D::exponential(1.0).unwrap();
    let m = BoundModel::new(SystemParams::new(3, 0.6, d).unwrap())
        .unwrap()
        .with_jump_options(opts);
    let mut worst = 0.0f64;
    for i in 1..=20 {
        let x = 0.2 * i as f64;
        match m.jump_lower_bound(x) {
            Ok(j) => worst = worst.max((x * x - j) / (x * x)),
            Err(e) => return check("jump_k3", false, e.to_string()),
        }
    }
    check("jump_k3", worst <= 1e-6, format!("max relative shortfall below x^2: {worst:.2e}"))
}

fn mginf_identity(tol: f64) -> Check {
    let dists = [
        D::exponential(1.0).unwrap(),
        D::deterministic(1.0).unwrap(),
        D::uniform(0.0, 2.0).unwrap(),
        D::hyperexponential2_balanced(1.0, 4.0).unwrap(),
    ];
    let mut worst = 0.0f64;
    for d in dists {
        for k in [1, 2, 5] {
            let m = BoundModel::new(SystemParams::from_load(k, 0.5, d).unwrap()).unwrap();
            match wine_integrate(&m, &[CurveFamily::MgInf], tol) {
                Ok(r) => worst = worst.max((r.value - k as f64 * d.mean()).abs()),
                Err(e) => return check("wine_mginf_identity", false, e.to_string()),
            }
        }
    }
    check(
        "wine_mginf_identity",
        worst <= tol.max(1e-6),
        format!("max abs gap {worst:.2e}"),
    )
}

fn isq2() -> Check {
    let p = SystemParams::new(2, 0.5, D::exponential(1.0).unwrap()).unwrap();
    let r = simulate_isq(&p, &SimOptions::new(1_000_000, 1)).unwrap();
    let w = r.mean_work;
    let i = r.occupancy[0];
    let ok = (w.mean - 1.2).abs() <= 3.0 * w.ci && (i.mean - 0.4).abs() <= 3.0 * i.ci;
    check(
        "isq2_simulation",
        ok,
        format!("work {:.4} ± {:.4}, P(I=0) {:.4} ± {:.4}", w.mean, w.ci, i.mean, i.ci),
    )
}

fn coupling() -> Check {
    let d = D::exponential(1.0).unwrap();
    let mut detail = Vec::new();
    let mut ok = true;
    for k in [2, 3] {
        for policy in [Policy::Srpt, Policy::Fcfs] {
            let p = SystemParams::from_load(k, 0.8, d).unwrap();
            let r = simulate_coupled(&p, policy, 200_000, 1);
            ok &= r.violations == 0;
            detail.push(format!("k={k} {policy}: {} violations", r.violations));
        }
    }
    check("coupled_dominance", ok, detail.join(", "))
}

fn bar() -> Check {
    let p = SystemParams::new(2, 0.5, D::exponential(1.0).unwrap()).unwrap();
    let r = measure_bar_residual(&p, &SimOptions::new(1_000_000, 2)).unwrap();
    let ok = r.g.mean.abs() <= 3.0 * r.g.ci && r.h.mean.abs() <= 3.0 * r.h.ci;
    check(
        "bar_residual",
        ok,
        format!("g {:.2e} ± {:.2e}, h {:.2e} ± {:.2e}", r.g.mean, r.g.ci, r.h.mean, r.h.ci),
    )
}

/// Runs the suite; every check is independent.
pub fn run_verify(tol: f64, jump_opts: JumpOptions) -> Vec<Check> {
    vec![closed_forms(), jump(jump_opts), mginf_identity(tol), isq2(), coupling(), bar()]
}

