//! The recycling jump bound
//!
//! ```text
//! J_x = min{ x^2, min_{q<k} inf_{w ∈ [0, q x]} h(w + x, (q+1)/k) - h(w, q/k) }
//! ```
//!
//! with `h(w, q/k) = w^2 + ℓ_q(w)`, `h(w, 1) = w^2` and `h(0, 0) = 0`.

use serde::{Deserialize, Serialize};

use super::{BoundModel, BoundsError, CurveFamily, MAX_REL_CANCELLATION};
use crate::scalar::Scalar;
use crate::symexpr::BoundExpr;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JumpOptions {
    /// Replace the minimization by `x^2` for `k ≥ 3` (unproven; off by default).
    pub assume_conjecture: bool,
    /// Golden-section starts per speed branch.
    pub starts: usize,
    /// Absolute tolerance on the minimum, relative to `x^2`.
    pub tol: f64,
}

impl Default for JumpOptions {
    fn default() -> Self {
        Self {
            assume_conjecture: false,
            starts: 8,
            tol: 1e-9,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct JumpReport<T> {
    pub value: T,
    /// `(q, argmin w, minimum)` for each speed branch that was minimized.
    pub branches: Vec<(usize, T, T)>,
    /// True when the value was taken as `x^2` without minimizing.
    pub assumed: bool,
}

fn assumed<T: Scalar>(x: T) -> JumpReport<T> {
    JumpReport {
        value: x * x,
        branches: Vec::new(),
        assumed: true,
    }
}

pub(super) fn jump_report<T: Scalar>(model: &BoundModel<T>, x: T) -> Result<JumpReport<T>, BoundsError> {
    let k = model.params.k;
    // k = 2 is proven exact; k = 1 has a single speed so the only jump is x^2.
    if k <= 2 || model.jump.assume_conjecture {
        return Ok(assumed(x));
    }
    let isq = model.isq.as_ref().expect("ISQ functions exist for k >= 2");
    let Some((law, lam_x)) = model.truncated(x) else {
        return Ok(assumed(x));
    };
    let c = model.c_k(x);
    let ell: Vec<BoundExpr<T>> = (1..k)
        .map(|q| BoundExpr::bind(&isq.functions.l(q), &law, lam_x, c))
        .collect();
    let offset = |q: usize, w: T| -> (T, T) {
        if q == k {
            (T::zero(), T::zero())
        } else {
            ell[q - 1].eval_with_magnitude(w)
        }
    };
    let x2 = x * x;
    let eps64 = T::epsilon() * T::lit(64.0);
    let tol = T::lit(model.jump.tol) * x2;
    let check = |err: T| -> Result<(), BoundsError> {
        if err > T::lit(MAX_REL_CANCELLATION) * x2 {
            return Err(BoundsError::IllConditioned {
                family: CurveFamily::RecIsqL,
                x: x.to_f64_lossy(),
                rel_error: (err / x2).to_f64_lossy(),
            });
        }
        Ok(())
    };

    let mut branches = Vec::with_capacity(k);
    // q = 0: the only state is w = 0, jumping to (x, 1/k).
    let (l1, m1) = offset(1, x);
    check(eps64 * (m1 + x2))?;
    let mut best = x2 + l1;
    branches.push((0, T::zero(), best));

    for q in 1..k {
        let f = |w: T| -> (T, T) {
            let wx = w + x;
            let (hi, mhi) = offset(q + 1, wx);
            let (lo, mlo) = offset(q, w);
            let value = wx * wx + hi - w * w - lo;
            (value, eps64 * (wx * wx + w * w + mhi + mlo))
        };
        let right = T::from_usize_lossy(q) * x;
        let (w_min, v_min, err) = multistart_golden(&f, right, model.jump.starts, tol).map_err(|reason| {
            BoundsError::JumpMinimizer {
                x: x.to_f64_lossy(),
                q,
                k,
                reason,
            }
        })?;
        check(err)?;
        branches.push((q, w_min, v_min));
        if v_min < best {
            best = v_min;
        }
    }
    Ok(JumpReport {
        value: best.min(x2),
        branches,
        assumed: false,
    })
}

/// Minimizes `f` over `[0, right]` by golden-section search on `starts` equal
/// sub-brackets, also probing every bracket end. Returns `(argmin, min, error)`.
fn multistart_golden<T: Scalar>(
    f: &impl Fn(T) -> (T, T),
    right: T,
    starts: usize,
    tol: T,
) -> Result<(T, T, T), String> {
    let starts = starts.max(1);
    let mut best = (T::zero(), T::infinity(), T::zero());
    let mut consider = |w: T, (v, e): (T, T)| -> Result<(), String> {
        if !v.is_finite() {
            return Err(format!("objective is {} at w = {}", v, w));
        }
        if v < best.1 {
            best = (w, v, e);
        }
        Ok(())
    };
    let width = right / T::from_usize_lossy(starts);
    let inv_phi = T::lit((5f64.sqrt() - 1.0) / 2.0);
    for s in 0..=starts {
        let w = width * T::from_usize_lossy(s);
        consider(w, f(w))?;
    }
    for s in 0..starts {
        let mut a = width * T::from_usize_lossy(s);
        let mut b = a + width;
        let mut c = b - inv_phi * (b - a);
        let mut d = a + inv_phi * (b - a);
        let (mut fc, mut fd) = (f(c), f(d));
        let mut iters = 0;
        while b - a > T::epsilon() * (T::one() + b.abs()) * T::lit(4.0) {
            iters += 1;
            if iters > 300 {
                return Err(format!("no convergence on [{a}, {b}] after 300 iterations"));
            }
            // Flat to within tolerance: further refinement cannot change the minimum.
            if (fc.0 - fd.0).abs() < tol * T::lit(1e-3) && b - a < width * T::lit(1e-6) {
                break;
            }
            if fc.0 < fd.0 {
                b = d;
                d = c;
                fd = fc;
                c = b - inv_phi * (b - a);
                fc = f(c);
            } else {
                a = c;
                c = d;
                fc = fd;
                d = a + inv_phi * (b - a);
                fd = f(d);
            }
        }
        consider(c, fc)?;
        consider(d, fd)?;
    }
    Ok(best)
}
