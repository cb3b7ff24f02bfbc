//! Exact symbolic algebra for the increasing-speed-queue test functions.
//!
//! An [`Expr`] is a finite sum of terms
//!
//! ```text
//! coeff · λ^m · w^p · e^{-rλw} · Π S̃(qλ) · Π E[S^j] · Π E[S^j e^{-sλS}] · C^c
//! ```
//!
//! with exact rational `coeff`, `r`, `q`, `s`. Terms are kept in a
//! `BTreeMap` keyed by everything except the coefficient, so like terms merge
//! on insertion and iteration order is canonical.

mod bind;
mod build;
mod print;

pub use bind::{eval, BoundExpr, BoundTerm};
pub use build::{build_l, build_uv, BuildError, BuildLimits, TestFunctions, DEFAULT_MAX_K, DEFAULT_MAX_TERMS};
pub use print::{ExprDump, TermDump};

use std::collections::BTreeMap;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Zero};

use crate::dist::binomial;

pub type Rational = BigRational;

pub fn rat(n: i64, d: i64) -> Rational {
    BigRational::new(BigInt::from(n), BigInt::from(d))
}

pub fn int(n: i64) -> Rational {
    BigRational::from_integer(BigInt::from(n))
}

/// Everything about a term except its coefficient.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct TermKey {
    pub lam_pow: i32,
    pub w_pow: u32,
    /// `r` in `e^{-rλw}`.
    pub exp_rate: Rational,
    /// Sorted `q`s, one factor `S̃(qλ)` each.
    pub transform_rates: Vec<Rational>,
    /// Sorted `j`s, one factor `E[S^j]` each.
    pub moment_orders: Vec<u32>,
    /// Sorted `(j, s)`, one factor `E[S^j e^{-sλS}]` each; only produced when
    /// a term carrying both `w^p` and `e^{-rλw}` is shifted.
    pub mixed_factors: Vec<(u32, Rational)>,
    /// Power of the deferred constant `C`.
    pub c_pow: u32,
}

impl TermKey {
    pub fn one() -> Self {
        Self::default()
    }

    /// True when the term does not depend on `w`.
    pub fn is_constant_in_w(&self) -> bool {
        self.w_pow == 0 && self.exp_rate.is_zero()
    }

    fn push_transform(&mut self, q: Rational) {
        let at = self.transform_rates.partition_point(|x| *x <= q);
        self.transform_rates.insert(at, q);
    }

    fn push_moment(&mut self, j: u32) {
        let at = self.moment_orders.partition_point(|x| *x <= j);
        self.moment_orders.insert(at, j);
    }

    fn push_mixed(&mut self, f: (u32, Rational)) {
        let at = self.mixed_factors.partition_point(|x| *x <= f);
        self.mixed_factors.insert(at, f);
    }
}

/// Canonical sum of terms in `w`.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Expr {
    terms: BTreeMap<TermKey, Rational>,
}

impl Expr {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn constant(c: Rational) -> Self {
        Self::term(c, TermKey::one())
    }

    pub fn term(coeff: Rational, key: TermKey) -> Self {
        let mut e = Self::zero();
        e.add_term(key, coeff);
        e
    }

    /// `c · w^p`.
    pub fn w_power(c: Rational, p: u32) -> Self {
        Self::term(
            c,
            TermKey {
                w_pow: p,
                ..TermKey::one()
            },
        )
    }

    /// `c · λ^m · e^{-rλw}`.
    pub fn decay(c: Rational, lam_pow: i32, rate: Rational) -> Self {
        Self::term(
            c,
            TermKey {
                lam_pow,
                exp_rate: rate,
                ..TermKey::one()
            },
        )
    }

    /// `c · C^n`.
    pub fn c_power(c: Rational, n: u32) -> Self {
        Self::term(
            c,
            TermKey {
                c_pow: n,
                ..TermKey::one()
            },
        )
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn terms(&self) -> impl Iterator<Item = (&TermKey, &Rational)> {
        self.terms.iter()
    }

    pub fn coefficient(&self, key: &TermKey) -> Option<&Rational> {
        self.terms.get(key)
    }

    pub fn has_mixed_factors(&self) -> bool {
        self.terms.keys().any(|k| !k.mixed_factors.is_empty())
    }

    pub fn max_c_pow(&self) -> u32 {
        self.terms.keys().map(|k| k.c_pow).max().unwrap_or(0)
    }

    fn add_term(&mut self, key: TermKey, coeff: Rational) {
        if coeff.is_zero() {
            return;
        }
        use std::collections::btree_map::Entry;
        match self.terms.entry(key) {
            Entry::Vacant(v) => {
                v.insert(coeff);
            }
            Entry::Occupied(mut o) => {
                let sum = o.get() + coeff;
                if sum.is_zero() {
                    o.remove();
                } else {
                    *o.get_mut() = sum;
                }
            }
        }
    }

    pub fn add(&self, other: &Expr) -> Expr {
        let mut out = self.clone();
        for (k, c) in &other.terms {
            out.add_term(k.clone(), c.clone());
        }
        out
    }

    pub fn sub(&self, other: &Expr) -> Expr {
        self.add(&other.scale(&int(-1)))
    }

    pub fn scale(&self, c: &Rational) -> Expr {
        if c.is_zero() {
            return Expr::zero();
        }
        Expr {
            terms: self.terms.iter().map(|(k, v)| (k.clone(), v * c)).collect(),
        }
    }

    /// Multiplies every term by `λ^m`.
    pub fn mul_lambda(&self, m: i32) -> Expr {
        self.map_keys(|k| k.lam_pow += m)
    }

    /// Multiplies every term by `C^n`.
    pub fn mul_c(&self, n: u32) -> Expr {
        self.map_keys(|k| k.c_pow += n)
    }

    fn map_keys(&self, f: impl Fn(&mut TermKey)) -> Expr {
        let mut out = Expr::zero();
        for (k, c) in &self.terms {
            let mut k = k.clone();
            f(&mut k);
            out.add_term(k, c.clone());
        }
        out
    }

    /// Substitutes `C = 0`, dropping every term that carries `C`.
    pub fn without_c(&self) -> Expr {
        Expr {
            terms: self
                .terms
                .iter()
                .filter(|(k, _)| k.c_pow == 0)
                .map(|(k, c)| (k.clone(), c.clone()))
                .collect(),
        }
    }

    /// The value at `w = 0` as an expression constant in `w`.
    pub fn at_zero(&self) -> Expr {
        let mut out = Expr::zero();
        for (k, c) in &self.terms {
            if k.w_pow == 0 {
                let mut k = k.clone();
                k.exp_rate = Rational::zero();
                out.add_term(k, c.clone());
            }
        }
        out
    }

    /// Symbolic derivative in `w`.
    pub fn derivative(&self) -> Expr {
        let mut out = Expr::zero();
        for (k, c) in &self.terms {
            if k.w_pow > 0 {
                let mut d = k.clone();
                d.w_pow -= 1;
                out.add_term(d, c * int(i64::from(k.w_pow)));
            }
            if !k.exp_rate.is_zero() {
                let mut d = k.clone();
                d.lam_pow += 1;
                out.add_term(d, -(c * &k.exp_rate));
            }
        }
        out
    }

    /// `y ↦ E[a(S + y)]`, with the result expressed in the same variable.
    ///
    /// A term `w^p e^{-rλw}` becomes `e^{-rλy} Σ_i C(p,i) y^{p-i} E[S^i e^{-rλS}]`,
    /// where the expectation is a transform factor when `i = 0`, a moment
    /// factor when `r = 0`, and a mixed factor otherwise.
    pub fn shift_expectation(&self) -> Expr {
        let mut out = Expr::zero();
        for (k, c) in &self.terms {
            let p = k.w_pow;
            for i in 0..=p {
                let mut nk = k.clone();
                nk.w_pow = p - i;
                let rate_zero = k.exp_rate.is_zero();
                match (i, rate_zero) {
                    (0, true) => {}
                    (0, false) => nk.push_transform(k.exp_rate.clone()),
                    (_, true) => nk.push_moment(i),
                    (_, false) => nk.push_mixed((i, k.exp_rate.clone())),
                }
                let b = int(binomial(p, i) as i64);
                out.add_term(nk, c * b);
            }
        }
        out
    }

    /// `w ↦ e^{-αλw} ∫_0^w e^{αλy} a(y) dy` for a rational `α ≥ 0`.
    ///
    /// With `δ = α - r ≠ 0`, the term `λ^m y^p e^{-rλy}` integrates to
    /// `Σ_i (-1)^i p!/(p-i)! δ^{-(i+1)} λ^{m-i-1} w^{p-i} e^{-rλw}`
    /// minus `(-1)^p p! δ^{-(p+1)} λ^{m-p-1} e^{-αλw}`. The resonant case
    /// `δ = 0` gives `λ^m w^{p+1}/(p+1) e^{-αλw}`. Every output vanishes at
    /// `w = 0`.
    pub fn weight_and_integrate(&self, alpha: &Rational) -> Expr {
        let mut out = Expr::zero();
        for (k, c) in &self.terms {
            let p = k.w_pow;
            let delta = alpha - &k.exp_rate;
            if delta.is_zero() {
                let mut nk = k.clone();
                nk.w_pow = p + 1;
                out.add_term(nk, c / int(i64::from(p + 1)));
                continue;
            }
            let mut falling = int(1); // p!/(p-i)!
            let mut dpow = delta.clone(); // δ^{i+1}
            for i in 0..=p {
                let sign = if i % 2 == 0 { int(1) } else { int(-1) };
                let mut nk = k.clone();
                nk.w_pow = p - i;
                nk.lam_pow = k.lam_pow - (i as i32 + 1);
                out.add_term(nk, c * &sign * &falling / &dpow);
                if i < p {
                    falling *= int(i64::from(p - i));
                    dpow *= &delta;
                }
            }
            // falling = p!, dpow = δ^{p+1}
            let sign = if p % 2 == 0 { int(1) } else { int(-1) };
            let mut nk = k.clone();
            nk.w_pow = 0;
            nk.lam_pow = k.lam_pow - (p as i32 + 1);
            nk.exp_rate = alpha.clone();
            out.add_term(nk, -(c * sign * falling / dpow));
        }
        out
    }

    /// Largest `|coeff|` numerator/denominator bit length, a rough size gauge.
    pub fn max_coeff_bits(&self) -> u64 {
        self.terms
            .values()
            .map(|c| c.numer().bits().max(c.denom().bits()))
            .max()
            .unwrap_or(0)
    }

    pub fn one() -> Expr {
        Expr::constant(Rational::one())
    }
}

#[cfg(test)]
mod tests;
