//! Exact time integrals of the relevant work `W_x(t)` on a fixed threshold grid.
//!
//! A job counts toward `W_x` while its remaining size is below `x`. Bucket
//! `b` holds jobs whose remaining size lies in `[x_{b-1}, x_b)`, so such a
//! job contributes to every threshold `m ≥ b`. Waiting jobs never change
//! size and are integrated lazily per bucket; served jobs are integrated
//! per step, with a crossing term for each threshold they pass.

#[derive(Debug, Clone)]
pub struct RelevantWorkMeter {
    xs: Vec<f64>,
    wait_sum: Vec<f64>,
    wait_count: Vec<u64>,
    wait_since: Vec<f64>,
    /// Per bucket: integrals that apply to all thresholds from that bucket up.
    bucket_int: Vec<f64>,
    /// Per threshold: partial integrals from served jobs crossing it.
    point_int: Vec<f64>,
}

impl RelevantWorkMeter {
    /// `xs` must be sorted ascending.
    pub fn new(xs: Vec<f64>) -> Self {
        let n = xs.len();
        Self {
            xs,
            wait_sum: vec![0.0; n + 1],
            wait_count: vec![0; n + 1],
            wait_since: vec![0.0; n + 1],
            bucket_int: vec![0.0; n + 1],
            point_int: vec![0.0; n],
        }
    }

    pub fn thresholds(&self) -> &[f64] {
        &self.xs
    }

    fn bucket(&self, r: f64) -> usize {
        self.xs.partition_point(|&x| x <= r)
    }

    fn settle(&mut self, b: usize, now: f64) {
        self.bucket_int[b] += self.wait_sum[b] * (now - self.wait_since[b]);
        self.wait_since[b] = now;
    }

    pub fn add_waiting(&mut self, r: f64, now: f64) {
        let b = self.bucket(r);
        self.settle(b, now);
        self.wait_sum[b] += r;
        self.wait_count[b] += 1;
    }

    pub fn remove_waiting(&mut self, r: f64, now: f64) {
        let b = self.bucket(r);
        self.settle(b, now);
        self.wait_count[b] -= 1;
        if self.wait_count[b] == 0 {
            self.wait_sum[b] = 0.0;
        } else {
            self.wait_sum[b] -= r;
        }
    }

    /// A served job going from `r0` to `r1 ≤ r0` at rate `rate` over `tau`.
    pub fn served(&mut self, r0: f64, r1: f64, rate: f64, tau: f64) {
        let b0 = self.bucket(r0);
        self.bucket_int[b0] += 0.5 * (r0 + r1) * tau;
        let b1 = self.bucket(r1);
        for m in b1..b0 {
            let x = self.xs[m];
            self.point_int[m] += (x * x - r1 * r1) / (2.0 * rate);
        }
    }

    /// Cumulative `∫ W_x dt` per threshold up to `now`.
    pub fn integrals(&mut self, now: f64) -> Vec<f64> {
        for b in 0..self.wait_sum.len() {
            self.settle(b, now);
        }
        let mut acc = 0.0;
        self.point_int
            .iter()
            .enumerate()
            .map(|(m, p)| {
                acc += self.bucket_int[m];
                acc + p
            })
            .collect()
    }
}
