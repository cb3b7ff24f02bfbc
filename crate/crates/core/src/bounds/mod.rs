//! Relevant-work curves `x ↦ E[W_x]` for the lower-bounding systems, the
//! increasing-speed-queue totals they are built from, and the recycling jump
//! bound.

mod closed;
mod jump;

pub use closed::k2;
pub use jump::{JumpOptions, JumpReport};

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;
use std::sync::{Arc, Mutex, OnceLock};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dist::{DistError, JobSizeDistribution, SizeLaw, TruncatedLaw};
use crate::scalar::Scalar;
use crate::symexpr::{BoundExpr, BuildError, BuildLimits, Expr, TestFunctions};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BoundsError {
    #[error("need at least one server, got k = {0}")]
    NoServers(usize),
    #[error("arrival rate must be positive and finite, got {0}")]
    BadArrivalRate(f64),
    #[error("load rho = {rho} is not below 1; the system is unstable")]
    Unstable { rho: f64 },
    #[error(transparent)]
    Build(#[from] BuildError),
    #[error(transparent)]
    Dist(#[from] DistError),
    #[error("{family} curve is numerically unreliable at x = {x}: estimated relative error {rel_error:e}")]
    IllConditioned {
        family: CurveFamily,
        x: f64,
        rel_error: f64,
    },
    #[error("jump minimization failed at x = {x}, speed {q}/{k}: {reason}")]
    JumpMinimizer {
        x: f64,
        q: usize,
        k: usize,
        reason: String,
    },
}

/// Largest tolerated estimated relative error of a curve value, from
/// cancellation in its symbolic part, before the curve is withheld at that
/// threshold.
pub const MAX_REL_CANCELLATION: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum CurveFamily {
    #[serde(rename = "SRPT1")]
    Srpt1,
    #[serde(rename = "MGINF")]
    MgInf,
    #[serde(rename = "SEP_ISQ")]
    SepIsq,
    #[serde(rename = "REC_ISQ_L")]
    RecIsqL,
}

impl CurveFamily {
    pub const ALL: [CurveFamily; 4] = [Self::Srpt1, Self::MgInf, Self::SepIsq, Self::RecIsqL];

    pub fn name(self) -> &'static str {
        match self {
            Self::Srpt1 => "SRPT1",
            Self::MgInf => "MGINF",
            Self::SepIsq => "SEP_ISQ",
            Self::RecIsqL => "REC_ISQ_L",
        }
    }
}

impl fmt::Display for CurveFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for CurveFamily {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        Self::ALL
            .into_iter()
            .find(|c| c.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| format!("unknown curve family `{s}`"))
    }
}

/// `k`, `λ` and the size law, with `ρ = λE[S] < 1` enforced.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SystemParams<T> {
    k: usize,
    lambda: T,
    dist: JobSizeDistribution<T>,
}

impl<T: Scalar> SystemParams<T> {
    pub fn new(k: usize, lambda: T, dist: JobSizeDistribution<T>) -> Result<Self, BoundsError> {
        if k == 0 {
            return Err(BoundsError::NoServers(k));
        }
        if !(lambda > T::zero() && lambda.is_finite()) {
            return Err(BoundsError::BadArrivalRate(lambda.to_f64_lossy()));
        }
        let rho = lambda * dist.mean();
        if !(rho < T::one()) {
            return Err(BoundsError::Unstable {
                rho: rho.to_f64_lossy(),
            });
        }
        Ok(Self { k, lambda, dist })
    }

    /// Parameters with `λ = ρ / E[S]`.
    pub fn from_load(k: usize, rho: T, dist: JobSizeDistribution<T>) -> Result<Self, BoundsError> {
        Self::new(k, rho / dist.mean(), dist)
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn lambda(&self) -> T {
        self.lambda
    }

    pub fn dist(&self) -> &JobSizeDistribution<T> {
        &self.dist
    }

    pub fn rho(&self) -> T {
        self.lambda * self.dist.mean()
    }
}

/// Symbolic offsets for one `k` plus the shifted-at-zero forms used for
/// `E[u_1(S)]` and `E[v_1(S)]`.
#[derive(Debug)]
pub struct IsqFunctions {
    pub functions: TestFunctions,
    pub expect_u1: Expr,
    pub expect_v1: Expr,
}

impl IsqFunctions {
    pub fn build(k: usize, limits: BuildLimits) -> Result<Self, BuildError> {
        let functions = TestFunctions::build(k, limits)?;
        let expect_u1 = functions.u[0].shift_expectation().at_zero();
        let expect_v1 = functions.v[0].shift_expectation().at_zero();
        Ok(Self {
            functions,
            expect_u1,
            expect_v1,
        })
    }

    /// Process-wide cache keyed by `k`, built with default limits.
    pub fn shared(k: usize) -> Result<Arc<Self>, BuildError> {
        static CACHE: OnceLock<Mutex<HashMap<usize, Arc<IsqFunctions>>>> = OnceLock::new();
        let cache = CACHE.get_or_init(Default::default);
        if let Some(f) = cache.lock().unwrap().get(&k) {
            return Ok(f.clone());
        }
        let built = Arc::new(Self::build(k, BuildLimits::default())?);
        Ok(cache.lock().unwrap().entry(k).or_insert(built).clone())
    }
}

/// `E[u_1(S)]` and `E[v_1(S)]` with a relative error estimate covering the
/// cancellation between symbolic terms.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OffsetMoments<T> {
    pub expect_u1: T,
    pub expect_v1: T,
    pub rel_error: T,
}

impl<T: Scalar> OffsetMoments<T> {
    fn zero() -> Self {
        Self {
            expect_u1: T::zero(),
            expect_v1: T::zero(),
            rel_error: T::zero(),
        }
    }

    /// The ISQ excess `λE[v_1(S)] / (2 + 2λE[u_1(S)])`.
    pub fn excess(&self, lambda: T) -> T {
        let two = T::lit(2.0);
        lambda * self.expect_v1 / (two + two * lambda * self.expect_u1)
    }
}

/// Rounding-error gauge: machine epsilon times a safety factor, times the
/// ratio of absolute term mass to the result.
pub(crate) fn cancellation<T: Scalar>(value: T, magnitude: T) -> T {
    let scale = T::epsilon() * T::lit(64.0);
    if value == T::zero() {
        if magnitude == T::zero() {
            T::zero()
        } else {
            T::infinity()
        }
    } else {
        scale * magnitude / value.abs()
    }
}

/// Bound computations for one system.
#[derive(Debug, Clone)]
pub struct BoundModel<T> {
    params: SystemParams<T>,
    isq: Option<Arc<IsqFunctions>>,
    jump: JumpOptions,
}

impl<T: Scalar> BoundModel<T> {
    pub fn new(params: SystemParams<T>) -> Result<Self, BoundsError> {
        let isq = if params.k >= 2 {
            Some(IsqFunctions::shared(params.k)?)
        } else {
            None
        };
        Ok(Self {
            params,
            isq,
            jump: JumpOptions::default(),
        })
    }

    pub fn with_jump_options(mut self, jump: JumpOptions) -> Self {
        self.jump = jump;
        self
    }

    pub fn params(&self) -> &SystemParams<T> {
        &self.params
    }

    pub fn jump_options(&self) -> &JumpOptions {
        &self.jump
    }

    pub fn isq_functions(&self) -> Option<&Arc<IsqFunctions>> {
        self.isq.as_ref()
    }

    fn lambda(&self) -> T {
        self.params.lambda
    }

    fn half() -> T {
        T::lit(0.5)
    }

    /// `E[u_1(S)]`, `E[v_1(S)]` for any law and arrival rate.
    pub fn offset_moments<L: SizeLaw<T>>(&self, law: &L, lambda: T) -> OffsetMoments<T> {
        let Some(isq) = &self.isq else {
            return OffsetMoments::zero();
        };
        let (eu, mu) = BoundExpr::bind(&isq.expect_u1, law, lambda, T::zero()).eval_with_magnitude(T::zero());
        let (ev, mv) = BoundExpr::bind(&isq.expect_v1, law, lambda, T::zero()).eval_with_magnitude(T::zero());
        OffsetMoments {
            expect_u1: eu,
            expect_v1: ev,
            rel_error: cancellation(eu, mu).max(cancellation(ev, mv)),
        }
    }

    /// M/G/1-SRPT relevant work, `(λ/2) E[min(S,x)^2] / (1 - ρ_x)`.
    pub fn srpt1_relevant_work(&self, x: T) -> T {
        let v = self.params.dist.truncate(x);
        Self::half() * self.lambda() * v.capped_moment(2) / (T::one() - v.rho_x(self.lambda()))
    }

    /// M/G/∞ relevant work at per-server speed `1/k`, `(kλ/2) E[min(S,x)^2]`.
    pub fn mginf_relevant_work(&self, x: T) -> T {
        let v = self.params.dist.truncate(x);
        Self::half() * T::from_usize_lossy(self.params.k) * self.lambda() * v.capped_moment(2)
    }

    /// Mean total work of the increasing-speed queue fed by the full stream.
    pub fn isq_total_work(&self) -> T {
        let (lam, d) = (self.lambda(), &self.params.dist);
        let rho = self.params.rho();
        let m = self.offset_moments(d, lam);
        Self::half() * lam * d.expect_power(2) / (T::one() - rho) + m.excess(lam)
    }

    /// `P(I = 0) = (1 - ρ) / (1 + λE[u_1(S)])`.
    pub fn idle_probability(&self) -> T {
        let lam = self.lambda();
        let m = self.offset_moments(&self.params.dist, lam);
        (T::one() - self.params.rho()) / (T::one() + lam * m.expect_u1)
    }

    /// The conditional law `S_x` and `λ_x`; `None` when `F(x) = 0`.
    fn truncated(&self, x: T) -> Option<(TruncatedLaw<T>, T)> {
        let view = self.params.dist.truncate(x);
        let law = view.law().ok()?;
        Some((law, view.lambda_x(self.lambda())))
    }

    /// Total work of the ISQ fed by the truncated stream `(λ_x, S_x)`, with
    /// its relative error estimate. `None` when no jobs are at most `x`.
    fn truncated_isq(&self, x: T) -> Option<(T, OffsetMoments<T>, T)> {
        let (law, lam_x) = self.truncated(x)?;
        let rho_x = lam_x * law.expect_power(1);
        let m = self.offset_moments(&law, lam_x);
        let base = Self::half() * lam_x * law.expect_power(2) / (T::one() - rho_x);
        Some((base, m, lam_x))
    }

    /// `C_k(x, λ_x) = (2/k) · λ_x E[v_1(S_x)] / (2 + 2λ_x E[u_1(S_x)])`;
    /// zero for an empty truncation.
    pub fn c_k(&self, x: T) -> T {
        match self.truncated_isq(x) {
            Some((_, m, lam_x)) => T::lit(2.0) / T::from_usize_lossy(self.params.k) * m.excess(lam_x),
            None => T::zero(),
        }
    }

    fn tail_arrivals(&self, x: T) -> T {
        self.lambda() * self.params.dist.survival(x)
    }

    /// Separate-ISQ relevant work: truncated ISQ total work plus the M/G/∞
    /// term `(k/2) λ (1 - F(x)) x^2` for the jobs above `x`.
    pub fn sep_isq_relevant_work(&self, x: T) -> Result<T, BoundsError> {
        let tail = Self::half() * T::from_usize_lossy(self.params.k) * self.tail_arrivals(x) * x * x;
        let Some((base, m, lam_x)) = self.truncated_isq(x) else {
            return Ok(tail);
        };
        let excess = m.excess(lam_x);
        let value = base + excess + tail;
        self.guard(CurveFamily::SepIsq, x, m.rel_error * excess.abs() / value)?;
        Ok(value)
    }

    fn guard(&self, family: CurveFamily, x: T, rel_error: T) -> Result<(), BoundsError> {
        if rel_error.to_f64_lossy() > MAX_REL_CANCELLATION {
            Err(BoundsError::IllConditioned {
                family,
                x: x.to_f64_lossy(),
                rel_error: rel_error.to_f64_lossy(),
            })
        } else {
            Ok(())
        }
    }

    /// Recycling jump bound `J_x`.
    pub fn jump_lower_bound(&self, x: T) -> Result<T, BoundsError> {
        Ok(self.jump_report(x)?.value)
    }

    /// `J_x` with per-speed minima and diagnostics.
    pub fn jump_report(&self, x: T) -> Result<JumpReport<T>, BoundsError> {
        jump::jump_report(self, x)
    }

    /// Rec-ISQ-L relevant-work lower bound.
    pub fn rec_isq_relevant_work_lb(&self, x: T) -> Result<T, BoundsError> {
        let Some((base, m, lam_x)) = self.truncated_isq(x) else {
            return self.sep_isq_relevant_work(x);
        };
        let view = self.params.dist.truncate(x);
        let lam = self.lambda();
        let one = T::one();
        let rho_x = view.rho_x(lam);
        let rho_xbar = view.rho_xbar(lam);
        let j = self.jump_lower_bound(x)?;
        let recycled = (lam - lam_x) * j / (T::lit(2.0) * (one - rho_x));
        let carried = m.excess(lam_x) * (one - rho_xbar) / (one - rho_x);
        let value = base + carried + recycled;
        self.guard(CurveFamily::RecIsqL, x, m.rel_error * carried.abs() / value)?;
        Ok(value)
    }

    pub fn curve(&self, family: CurveFamily, x: T) -> Result<T, BoundsError> {
        match family {
            CurveFamily::Srpt1 => Ok(self.srpt1_relevant_work(x)),
            CurveFamily::MgInf => Ok(self.mginf_relevant_work(x)),
            CurveFamily::SepIsq => self.sep_isq_relevant_work(x),
            CurveFamily::RecIsqL => self.rec_isq_relevant_work_lb(x),
        }
    }

    /// Pointwise maximum over `families`, with the family attaining it.
    /// Families whose evaluation is ill-conditioned at `x` are left out,
    /// which keeps the result a valid lower bound.
    pub fn best_relevant_work(&self, x: T, families: &[CurveFamily]) -> Result<(T, CurveFamily), BoundsError> {
        let mut best: Option<(T, CurveFamily)> = None;
        for &f in families {
            let v = match self.curve(f, x) {
                Ok(v) => v,
                Err(BoundsError::IllConditioned { .. }) => continue,
                Err(e) => return Err(e),
            };
            if best.is_none_or(|(b, _)| v > b) {
                best = Some((v, f));
            }
        }
        best.ok_or_else(|| BoundsError::IllConditioned {
            family: families.first().copied().unwrap_or(CurveFamily::MgInf),
            x: x.to_f64_lossy(),
            rel_error: f64::INFINITY,
        })
    }
}
