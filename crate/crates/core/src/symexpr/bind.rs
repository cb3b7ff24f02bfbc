use std::collections::BTreeMap;

use num_traits::ToPrimitive;

use super::{Expr, Rational, TermKey};
use crate::dist::SizeLaw;
use crate::scalar::Scalar;

/// One numeric term `coeff · w^p · e^{-rate·w}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundTerm<T> {
    pub coeff: T,
    /// Sum of the absolute values of the merged symbolic contributions, used
    /// to estimate cancellation error.
    pub magnitude: T,
    pub w_pow: u32,
    pub rate: T,
}

/// An [`Expr`] with `λ`, the size law and `C` substituted: a sum of
/// `c · w^p · e^{-a w}` terms ready for fast evaluation.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct BoundExpr<T> {
    terms: Vec<BoundTerm<T>>,
}

pub(crate) fn to_scalar<T: Scalar>(r: &Rational) -> T {
    T::lit(r.to_f64().unwrap_or(f64::NAN))
}

struct FactorCache<'a, T, L> {
    law: &'a L,
    lambda: T,
    transforms: BTreeMap<Rational, T>,
    moments: BTreeMap<u32, T>,
    mixed: BTreeMap<(u32, Rational), T>,
}

impl<'a, T: Scalar, L: SizeLaw<T>> FactorCache<'a, T, L> {
    fn new(law: &'a L, lambda: T) -> Self {
        Self {
            law,
            lambda,
            transforms: BTreeMap::new(),
            moments: BTreeMap::new(),
            mixed: BTreeMap::new(),
        }
    }

    fn product(&mut self, key: &TermKey, c: T) -> T {
        let mut acc = self.lambda.powi(key.lam_pow);
        for q in &key.transform_rates {
            let (law, lambda) = (self.law, self.lambda);
            acc = acc
                * *self
                    .transforms
                    .entry(q.clone())
                    .or_insert_with(|| law.expect_exp(to_scalar::<T>(q) * lambda));
        }
        for &j in &key.moment_orders {
            let law = self.law;
            acc = acc * *self.moments.entry(j).or_insert_with(|| law.expect_power(j));
        }
        for (j, s) in &key.mixed_factors {
            let (law, lambda) = (self.law, self.lambda);
            acc = acc
                * *self
                    .mixed
                    .entry((*j, s.clone()))
                    .or_insert_with(|| law.expect_power_exp(*j, to_scalar::<T>(s) * lambda));
        }
        if key.c_pow > 0 {
            acc = acc * c.powi(key.c_pow as i32);
        }
        acc
    }
}

impl<T: Scalar> BoundExpr<T> {
    pub fn bind<L: SizeLaw<T>>(e: &Expr, law: &L, lambda: T, c: T) -> Self {
        let mut cache = FactorCache::new(law, lambda);
        let mut merged: BTreeMap<(u32, Rational), (T, T)> = BTreeMap::new();
        for (key, coeff) in e.terms() {
            let v = to_scalar::<T>(coeff) * cache.product(key, c);
            let slot = merged
                .entry((key.w_pow, key.exp_rate.clone()))
                .or_insert((T::zero(), T::zero()));
            slot.0 = slot.0 + v;
            slot.1 = slot.1 + v.abs();
        }
        let terms = merged
            .into_iter()
            .map(|((w_pow, r), (coeff, magnitude))| BoundTerm {
                coeff,
                magnitude,
                w_pow,
                rate: to_scalar::<T>(&r) * lambda,
            })
            .collect();
        Self { terms }
    }

    pub fn terms(&self) -> &[BoundTerm<T>] {
        &self.terms
    }

    pub fn eval(&self, w: T) -> T {
        self.terms.iter().fold(T::zero(), |acc, t| {
            acc + t.coeff * w.powi(t.w_pow as i32) * (-t.rate * w).exp()
        })
    }

    /// Value together with the sum of absolute contributions before any
    /// cancellation, `Σ |c_i| w^p e^{-a w}`.
    pub fn eval_with_magnitude(&self, w: T) -> (T, T) {
        self.terms.iter().fold((T::zero(), T::zero()), |(v, m), t| {
            let basis = w.powi(t.w_pow as i32) * (-t.rate * w).exp();
            (v + t.coeff * basis, m + t.magnitude * basis)
        })
    }

    pub fn derivative(&self, w: T) -> T {
        self.terms.iter().fold(T::zero(), |acc, t| {
            let e = (-t.rate * w).exp();
            let p = t.w_pow as i32;
            let poly = if p > 0 {
                T::lit(f64::from(p)) * w.powi(p - 1)
            } else {
                T::zero()
            };
            acc + t.coeff * e * (poly - t.rate * w.powi(p))
        })
    }
}

/// Evaluates `e` at `w` for the given law, `λ` and `C`.
pub fn eval<T: Scalar, L: SizeLaw<T>>(e: &Expr, law: &L, lambda: T, w: T, c: T) -> T {
    BoundExpr::bind(e, law, lambda, c).eval(w)
}
