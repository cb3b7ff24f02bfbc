//! Seeded Poisson arrival streams.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::dist::JobSizeDistribution;

/// Poisson arrivals at rate `λ` with i.i.d. sizes. Each arrival draws its
/// gap first and its size second, so two streams with the same seed agree
/// arrival by arrival.
#[derive(Debug, Clone)]
pub struct ArrivalStream {
    lambda: f64,
    dist: JobSizeDistribution<f64>,
    rng: ChaCha8Rng,
}

impl ArrivalStream {
    pub fn new(lambda: f64, dist: JobSizeDistribution<f64>, seed: u64) -> Self {
        Self {
            lambda,
            dist,
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    /// `(gap, size)` of the next arrival.
    pub fn next_arrival(&mut self) -> (f64, f64) {
        let u: f64 = self.rng.random();
        let gap = -(1.0 - u).ln() / self.lambda;
        (gap, self.dist.sample(&mut self.rng))
    }
}

impl Iterator for ArrivalStream {
    type Item = (f64, f64);
    fn next(&mut self) -> Option<(f64, f64)> {
        Some(self.next_arrival())
    }
}
