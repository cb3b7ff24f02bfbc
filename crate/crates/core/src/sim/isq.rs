//! The increasing-speed queue: one station whose speed rises by `1/k` per
//! arrival up to 1 and drops to 0 when it empties.
//!
//! Optionally integrates the generator of test functions `H(w, q/k)` along
//! the path. On a busy stretch at speed `i = q/k` where work falls from `w0`
//! to `w1`,
//!
//! ```text
//! ∫ G H dt = (λ/i) [A_q(w0) - A_q(w1)] + H_q(w1) - H_q(w0),
//! A_q(w) = ∫_0^w E[H_{q+1}(y + S)] - H_q(y) dy,
//! ```
//!
//! with `H_{k+1} = H_k`; idle time contributes `λ E[H_1(S)]` per unit.

use crate::dist::JobSizeDistribution;
use crate::symexpr::{BoundExpr, Expr, Rational, TestFunctions};

use super::Snapshot;

/// Bound pieces for one test function.
#[derive(Debug, Clone)]
pub(crate) struct GeneratorTerms {
    /// `H_q` for `q = 1..=k`, at index `q - 1`.
    h: Vec<BoundExpr<f64>>,
    a: Vec<BoundExpr<f64>>,
    idle_rate: f64,
}

impl GeneratorTerms {
    /// `offsets[q-1]` is the offset at speed `q/k` for `q < k`; `base` is the
    /// speed-independent part (`w` or `w^2`).
    pub fn new(base: &Expr, offsets: &[Expr], dist: &JobSizeDistribution<f64>, lambda: f64) -> Self {
        let k = offsets.len() + 1;
        let full: Vec<Expr> = (1..=k)
            .map(|q| match offsets.get(q - 1) {
                Some(o) => base.add(o),
                None => base.clone(),
            })
            .collect();
        let zero = Rational::from_integer(0.into());
        let mut h = Vec::with_capacity(k);
        let mut a = Vec::with_capacity(k);
        for q in 1..=k {
            let next = &full[q.min(k - 1)];
            let drift = next.shift_expectation().sub(&full[q - 1]);
            a.push(BoundExpr::bind(&drift.weight_and_integrate(&zero), dist, lambda, 0.0));
            h.push(BoundExpr::bind(&full[q - 1], dist, lambda, 0.0));
        }
        let idle = BoundExpr::bind(&full[0].shift_expectation().at_zero(), dist, lambda, 0.0);
        Self {
            h,
            a,
            idle_rate: lambda * idle.eval(0.0),
        }
    }

    pub fn from_functions(f: &TestFunctions, dist: &JobSizeDistribution<f64>, lambda: f64) -> [Self; 2] {
        [
            Self::new(&Expr::w_power(Rational::from_integer(1.into()), 1), &f.u, dist, lambda),
            Self::new(&Expr::w_power(Rational::from_integer(1.into()), 2), &f.v, dist, lambda),
        ]
    }

    fn busy(&self, q: usize, speed: f64, lambda: f64, w0: f64, w1: f64) -> f64 {
        let (a, h) = (&self.a[q - 1], &self.h[q - 1]);
        lambda / speed * (a.eval(w0) - a.eval(w1)) + h.eval(w1) - h.eval(w0)
    }
}

#[derive(Debug, Clone)]
pub(crate) struct IsqStation {
    k: usize,
    lambda: f64,
    clock: f64,
    work: f64,
    q: usize,
    work_int: f64,
    occupancy: Vec<f64>,
    generators: Vec<GeneratorTerms>,
    gen_int: Vec<f64>,
}

impl IsqStation {
    pub fn new(k: usize, lambda: f64, generators: Vec<GeneratorTerms>) -> Self {
        let n = generators.len();
        Self {
            k,
            lambda,
            clock: 0.0,
            work: 0.0,
            q: 0,
            work_int: 0.0,
            occupancy: vec![0.0; k + 1],
            generators,
            gen_int: vec![0.0; n],
        }
    }

    pub fn work(&self) -> f64 {
        self.work
    }

    fn speed(&self) -> f64 {
        self.q as f64 / self.k as f64
    }

    /// Time until the station empties, or infinity when idle.
    pub fn next_event(&self) -> f64 {
        if self.q == 0 {
            f64::INFINITY
        } else {
            self.work / self.speed()
        }
    }

    pub fn advance(&mut self, tau: f64) {
        if tau <= 0.0 {
            return;
        }
        self.occupancy[self.q] += tau;
        self.clock += tau;
        if self.q == 0 {
            for (g, acc) in self.generators.iter().zip(&mut self.gen_int) {
                *acc += g.idle_rate * tau;
            }
            return;
        }
        let speed = self.speed();
        let w0 = self.work;
        let w1 = (w0 - speed * tau).max(0.0);
        self.work_int += 0.5 * (w0 + w1) * tau;
        for (g, acc) in self.generators.iter().zip(&mut self.gen_int) {
            *acc += g.busy(self.q, speed, self.lambda, w0, w1);
        }
        self.work = w1;
    }

    /// The station empties: speed resets to 0.
    pub fn complete(&mut self) {
        self.work = 0.0;
        self.q = 0;
    }

    pub fn arrive(&mut self, size: f64) {
        self.work += size;
        self.q = (self.q + 1).min(self.k);
    }

    pub fn snapshot(&mut self) -> Snapshot {
        Snapshot {
            time: self.clock,
            work: self.work_int,
            relevant: Vec::new(),
            occupancy: self.occupancy.clone(),
            generator: self.gen_int.clone(),
            stepped: Vec::new(),
        }
    }
}
