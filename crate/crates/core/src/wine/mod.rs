//! Mean response time lower bounds from relevant-work curves:
//!
//! ```text
//! E[T] ≥ (1/λ) ∫_0^∞ max_f E[W_x^f] / x^2 dx
//! ```
//!
//! The integral runs on `t = ln x`, where the integrand becomes
//! `best(e^t) / e^t`. Below `x_min` every curve is quadratic to within the
//! tolerance, so the head is `best(x_min)/x_min`; above `x_max` the curves
//! sit at their limits and the tail is `best(x_max)/x_max`.

use std::cell::RefCell;
use std::collections::BTreeSet;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bounds::{BoundModel, BoundsError, CurveFamily};
use crate::dist::{SizeFamily, SizeLaw};
use crate::quad::{integrate_with_breaks, QuadError, QuadOptions};
use crate::scalar::Scalar;

pub const DEFAULT_TOL: f64 = 1e-6;

/// Grid used to locate switches of the maximizing family before integrating.
const SCAN_POINTS: usize = 240;
/// Largest number of `x_max` doublings while the tail error is above budget.
const MAX_TAIL_DOUBLINGS: usize = 40;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum WineError {
    #[error("no curve families selected")]
    NoFamilies,
    #[error("tolerance must be positive and finite, got {0}")]
    BadTolerance(f64),
    #[error(transparent)]
    Bounds(#[from] BoundsError),
    #[error("quadrature failed on [{x_lo}, {x_hi}]: {source}")]
    Quadrature {
        x_lo: f64,
        x_hi: f64,
        source: QuadError,
        partial: Vec<WineSegment>,
    },
    #[error("tail does not settle: error {error:e} at x_max = {x_max}")]
    Tail { x_max: f64, error: f64 },
}

/// Contribution of `[x_lo, x_hi]` to the response-time bound, already divided by `λ`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WineSegment {
    pub x_lo: f64,
    pub x_hi: f64,
    /// Family attaining the maximum at the segment midpoint.
    pub family: CurveFamily,
    pub value: f64,
    pub abs_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WineResult<T> {
    pub value: T,
    pub abs_error_estimate: T,
    /// Head segment `[0, x_min]`, integrated segments, then `[x_max, ∞)`.
    pub breakdown: Vec<WineSegment>,
    pub families_used: BTreeSet<CurveFamily>,
}

pub const MIXEX: [CurveFamily; 2] = [CurveFamily::Srpt1, CurveFamily::MgInf];
pub const ISQ: [CurveFamily; 3] = [CurveFamily::Srpt1, CurveFamily::MgInf, CurveFamily::SepIsq];
pub const ISQ_RECYCLING: [CurveFamily; 4] = CurveFamily::ALL;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundSuite<T> {
    pub mixex: WineResult<T>,
    pub isq: WineResult<T>,
    pub isq_recycling: WineResult<T>,
}

/// The two single-family bounds and their maximum.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NaiveBounds<T> {
    pub srpt1: WineResult<T>,
    pub mginf: WineResult<T>,
    pub value: T,
}

pub fn wine_integrate<T: Scalar>(
    model: &BoundModel<T>,
    families: &[CurveFamily],
    tol: T,
) -> Result<WineResult<T>, WineError> {
    if families.is_empty() {
        return Err(WineError::NoFamilies);
    }
    if !(tol > T::zero() && tol.is_finite()) {
        return Err(WineError::BadTolerance(tol.to_f64_lossy()));
    }
    let params = model.params();
    let lam = params.lambda();
    let dist = params.dist();
    let mean = dist.mean();
    let k = T::from_usize_lossy(params.k());
    let best = |x: T| model.best_relevant_work(x, families);

    // Head: the integrand is at most about kλ/2, so [0, x_min] carries at
    // most k x_min / 2 after dividing by λ.
    let x_min = T::lit(1e-3) * tol * mean / k;
    let head_value = best(x_min)?.0 / x_min / lam;

    let mut x_max = initial_x_max(model, tol);
    let limit = limit_value(model, families);
    let mut tail_value;
    let mut tail_error;
    let mut doublings = 0;
    loop {
        let b = best(x_max)?.0;
        tail_value = b / x_max / lam;
        tail_error = (limit - b).max(T::zero()) / x_max / lam;
        if tail_error <= T::lit(0.25) * tol {
            break;
        }
        doublings += 1;
        if doublings > MAX_TAIL_DOUBLINGS {
            return Err(WineError::Tail {
                x_max: x_max.to_f64_lossy(),
                error: tail_error.to_f64_lossy(),
            });
        }
        x_max = x_max * T::lit(2.0);
    }

    let t_min = x_min.ln();
    let t_max = x_max.ln();
    let breaks = breakpoints(model, families, t_min, t_max)?;
    let span = t_max - t_min;
    // Half the budget goes to quadrature, shared by segment length in t.
    let quad_budget = T::lit(0.5) * tol * lam;

    let pieces: Vec<Result<(WineSegment, T, T), (WineError, f64, f64)>> = breaks
        .par_windows(2)
        .map(|w| {
            let (a, b) = (w[0], w[1]);
            let failure: RefCell<Option<BoundsError>> = RefCell::new(None);
            let mut f = |t: T| {
                let x = t.exp();
                match best(x) {
                    Ok((v, _)) => v / x,
                    Err(e) => {
                        failure.borrow_mut().get_or_insert(e);
                        T::nan()
                    }
                }
            };
            let opts = QuadOptions {
                abs_tol: quad_budget * (b - a) / span,
                rel_tol: T::zero(),
                max_panels: 4000,
            };
            let x_lo = if a == t_min { x_min } else { a.exp() };
            let x_hi = if b == t_max { x_max } else { b.exp() };
            let r = integrate_with_breaks(&mut f, &[a, b], opts);
            if let Some(e) = failure.into_inner() {
                return Err((e.into(), x_lo.to_f64_lossy(), x_hi.to_f64_lossy()));
            }
            let r = r.map_err(|source| {
                (
                    WineError::Quadrature {
                        x_lo: x_lo.to_f64_lossy(),
                        x_hi: x_hi.to_f64_lossy(),
                        source,
                        partial: Vec::new(),
                    },
                    x_lo.to_f64_lossy(),
                    x_hi.to_f64_lossy(),
                )
            })?;
            let mid = (T::lit(0.5) * (a + b)).exp();
            let family = best(mid).map_err(|e| (e.into(), x_lo.to_f64_lossy(), x_hi.to_f64_lossy()))?.1;
            let value = r.value / lam;
            let err = r.abs_error / lam;
            Ok((
                WineSegment {
                    x_lo: x_lo.to_f64_lossy(),
                    x_hi: x_hi.to_f64_lossy(),
                    family,
                    value: value.to_f64_lossy(),
                    abs_error: err.to_f64_lossy(),
                },
                value,
                err,
            ))
        })
        .collect();

    let head_family = best(x_min)?.1;
    let tail_family = best(x_max)?.1;
    let mut breakdown = vec![WineSegment {
        x_lo: 0.0,
        x_hi: x_min.to_f64_lossy(),
        family: head_family,
        value: head_value.to_f64_lossy(),
        abs_error: head_value.to_f64_lossy(),
    }];
    let mut value = head_value;
    let mut error = head_value;
    for piece in pieces {
        match piece {
            Ok((seg, v, e)) => {
                value = value + v;
                error = error + e;
                breakdown.push(seg);
            }
            Err((WineError::Quadrature { x_lo, x_hi, source, .. }, _, _)) => {
                return Err(WineError::Quadrature {
                    x_lo,
                    x_hi,
                    source,
                    partial: breakdown,
                });
            }
            Err((e, _, _)) => return Err(e),
        }
    }
    breakdown.push(WineSegment {
        x_lo: x_max.to_f64_lossy(),
        x_hi: f64::INFINITY,
        family: tail_family,
        value: tail_value.to_f64_lossy(),
        abs_error: tail_error.to_f64_lossy(),
    });
    value = value + tail_value;
    error = error + tail_error;
    let families_used = breakdown.iter().map(|s| s.family).collect();
    Ok(WineResult {
        value,
        abs_error_estimate: error,
        breakdown,
        families_used,
    })
}

/// `max(quantile(1 - 1e-10), x)` where `x` is the first point with
/// `(1 - F(x)) x^2 < tol / 10`.
fn initial_x_max<T: Scalar>(model: &BoundModel<T>, tol: T) -> T {
    let dist = model.params().dist();
    let q = dist.quantile(T::one() - T::lit(1e-10));
    let mut x = q.max(dist.mean());
    let target = tol / T::lit(10.0);
    while dist.survival(x) * x * x >= target {
        x = x * T::lit(1.25);
    }
    x.max(q)
}

/// The largest `x → ∞` limit among the families: `λE[S²]/(2(1-ρ))` for
/// SRPT-1, `kλE[S²]/2` for M/G/∞ and the ISQ total work for the ISQ curves.
fn limit_value<T: Scalar>(model: &BoundModel<T>, families: &[CurveFamily]) -> T {
    let p = model.params();
    let lam = p.lambda();
    let m2 = p.dist().expect_power(2);
    let half = T::lit(0.5);
    families
        .iter()
        .map(|f| match f {
            CurveFamily::Srpt1 => half * lam * m2 / (T::one() - p.rho()),
            CurveFamily::MgInf => half * T::from_usize_lossy(p.k()) * lam * m2,
            CurveFamily::SepIsq | CurveFamily::RecIsqL => model.isq_total_work(),
        })
        .fold(T::zero(), T::max)
}

/// Sorted `t` breakpoints: the ends, kinks of the size law, and every
/// located switch of the maximizing family.
fn breakpoints<T: Scalar>(
    model: &BoundModel<T>,
    families: &[CurveFamily],
    t_min: T,
    t_max: T,
) -> Result<Vec<T>, BoundsError> {
    let family_at = |t: T| model.best_relevant_work(t.exp(), families).map(|b| b.1);
    let mut out = vec![t_min, t_max];
    let kinks: Vec<T> = match *model.params().dist().family() {
        SizeFamily::Deterministic { value } => vec![value],
        SizeFamily::Uniform { lo, hi } => vec![lo, hi],
        _ => Vec::new(),
    };
    for x in kinks {
        if x > T::zero() {
            let t = x.ln();
            if t > t_min && t < t_max {
                out.push(t);
            }
        }
    }
    let n = T::from_usize_lossy(SCAN_POINTS);
    let step = (t_max - t_min) / n;
    let mut prev_t = t_min;
    let mut prev_f = family_at(t_min)?;
    for i in 1..=SCAN_POINTS {
        let t = if i == SCAN_POINTS {
            t_max
        } else {
            t_min + step * T::from_usize_lossy(i)
        };
        let f = family_at(t)?;
        if f != prev_f {
            let (mut a, mut b) = (prev_t, t);
            for _ in 0..60 {
                let m = T::lit(0.5) * (a + b);
                if m <= a || m >= b {
                    break;
                }
                if family_at(m)? == prev_f {
                    a = m;
                } else {
                    b = m;
                }
            }
            out.push(T::lit(0.5) * (a + b));
        }
        prev_t = t;
        prev_f = f;
    }
    out.sort_by(|a, b| a.partial_cmp(b).unwrap());
    out.dedup();
    Ok(out)
}

pub fn bound_suite<T: Scalar>(model: &BoundModel<T>, tol: T) -> Result<BoundSuite<T>, WineError> {
    Ok(BoundSuite {
        mixex: wine_integrate(model, &MIXEX, tol)?,
        isq: wine_integrate(model, &ISQ, tol)?,
        isq_recycling: wine_integrate(model, &ISQ_RECYCLING, tol)?,
    })
}

pub fn naive_bounds<T: Scalar>(model: &BoundModel<T>, tol: T) -> Result<NaiveBounds<T>, WineError> {
    let srpt1 = wine_integrate(model, &[CurveFamily::Srpt1], tol)?;
    let mginf = wine_integrate(model, &[CurveFamily::MgInf], tol)?;
    let value = srpt1.value.max(mginf.value);
    Ok(NaiveBounds { srpt1, mginf, value })
}

#[cfg(test)]
mod tests;
