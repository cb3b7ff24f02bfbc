//! Descending-speed recursions for the offsets `u_q`, `v_q` and `ℓ_q`.
//!
//! For `q = k-1, …, 1` with `α = k/q` and `u_k = v_k = ℓ_k = 0`:
//!
//! ```text
//! u_q = WI_α[ (k-q)/q + (k/q) λ E[u_{q+1}(S+y)] ]
//! v_q = WI_α[ 2(k-q)/q · y + (k/q) λ E[v_{q+1}(S+y)] ]
//! ℓ_q = WI_α[ k(q-k)/q · C + 2(k-q)/q · y + (k/q) λ E[ℓ_{q+1}(S+y)] ]
//! ```
//!
//! where `WI_α[a](w) = e^{-αλw} ∫_0^w e^{αλy} a(y) dy`.

use thiserror::Error;

use super::{rat, Expr};

pub const DEFAULT_MAX_K: usize = 20;
pub const DEFAULT_MAX_TERMS: usize = 1 << 20;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum BuildError {
    #[error("k = {0} is below the minimum of 2 servers for the test-function recursion")]
    TooFewServers(usize),
    #[error("k = {k} exceeds the configured cap of {max}")]
    TooManyServers { k: usize, max: usize },
    #[error("k = {k}: offset q = {q} has {terms} terms, above the limit of {limit}")]
    TermLimit {
        k: usize,
        q: usize,
        terms: usize,
        limit: usize,
    },
    #[error("k = {k}: term count grew from {prev} to {next} at q = {q}, more than twice per level")]
    Growth {
        k: usize,
        q: usize,
        prev: usize,
        next: usize,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BuildLimits {
    pub max_k: usize,
    pub max_terms: usize,
}

impl Default for BuildLimits {
    fn default() -> Self {
        Self {
            max_k: DEFAULT_MAX_K,
            max_terms: DEFAULT_MAX_TERMS,
        }
    }
}

/// Offsets for one `k`, indexed by `q - 1` for `q ∈ 1..k`.
#[derive(Debug, Clone, PartialEq)]
pub struct TestFunctions {
    pub k: usize,
    pub u: Vec<Expr>,
    pub v: Vec<Expr>,
    pub l: Vec<Expr>,
}

impl TestFunctions {
    pub fn build(k: usize, limits: BuildLimits) -> Result<Self, BuildError> {
        let (u, v) = build_uv(k, limits)?;
        let l = build_l(k, limits)?;
        Ok(Self { k, u, v, l })
    }

    /// `u_q`, or zero for `q = k`.
    pub fn u(&self, q: usize) -> Expr {
        offset(&self.u, q)
    }

    pub fn v(&self, q: usize) -> Expr {
        offset(&self.v, q)
    }

    pub fn l(&self, q: usize) -> Expr {
        offset(&self.l, q)
    }
}

fn offset(list: &[Expr], q: usize) -> Expr {
    assert!(q >= 1 && q <= list.len() + 1, "speed index q = {q} out of range");
    list.get(q - 1).cloned().unwrap_or_default()
}

fn check_k(k: usize, limits: &BuildLimits) -> Result<(), BuildError> {
    if k < 2 {
        return Err(BuildError::TooFewServers(k));
    }
    if k > limits.max_k {
        return Err(BuildError::TooManyServers { k, max: limits.max_k });
    }
    Ok(())
}

/// Runs the recursion with a per-level source term `source(q)` (a function
/// of `y`) and returns the offsets for `q = 1..k-1`.
fn recurse(k: usize, limits: &BuildLimits, source: impl Fn(i64) -> Expr) -> Result<Vec<Expr>, BuildError> {
    check_k(k, limits)?;
    let ki = k as i64;
    let mut out = vec![Expr::zero(); k - 1];
    let mut next = Expr::zero();
    let mut prev_len = 0usize;
    for q in (1..k).rev() {
        let qi = q as i64;
        let carried = next.shift_expectation().mul_lambda(1).scale(&rat(ki, qi));
        let integrand = source(qi).add(&carried);
        let cur = integrand.weight_and_integrate(&rat(ki, qi));
        let len = cur.len();
        if len > limits.max_terms {
            return Err(BuildError::TermLimit {
                k,
                q,
                terms: len,
                limit: limits.max_terms,
            });
        }
        // A carried term splits into at most two (itself and a new e^{-αλw}
        // term); the source adds at most one term not already present.
        if prev_len > 0 && len > 2 * prev_len + 1 {
            return Err(BuildError::Growth {
                k,
                q,
                prev: prev_len,
                next: len,
            });
        }
        prev_len = len;
        out[q - 1] = cur.clone();
        next = cur;
    }
    Ok(out)
}

/// Constant-drift and affine-drift offsets `(u_q, v_q)` for `q = 1..k-1`.
pub fn build_uv(k: usize, limits: BuildLimits) -> Result<(Vec<Expr>, Vec<Expr>), BuildError> {
    let ki = k as i64;
    let u = recurse(k, &limits, |q| Expr::constant(rat(ki - q, q)))?;
    let v = recurse(k, &limits, |q| Expr::w_power(rat(2 * (ki - q), q), 1))?;
    Ok((u, v))
}

/// Modified affine-drift offsets `ℓ_q` with the constant `C` kept symbolic.
pub fn build_l(k: usize, limits: BuildLimits) -> Result<Vec<Expr>, BuildError> {
    let ki = k as i64;
    recurse(k, &limits, |q| {
        Expr::c_power(rat(ki * (q - ki), q), 1).add(&Expr::w_power(rat(2 * (ki - q), q), 1))
    })
}
