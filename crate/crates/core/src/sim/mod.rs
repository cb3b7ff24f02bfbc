//! Discrete-event simulation of the M/G/k (SRPT-k, FCFS-k), the
//! increasing-speed queue and the two coupled on one arrival sequence.
//!
//! Time averages exclude the first arrivals (warm-up) and are reported with
//! batch-means confidence intervals. Jobs still present at the last arrival
//! are drained so every recorded job has a response time.

mod isq;
mod meter;
mod mgk;
mod stream;

pub use meter::RelevantWorkMeter;
pub use stream::ArrivalStream;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};
use thiserror::Error;

use crate::bounds::{IsqFunctions, SystemParams};
use crate::dist::JobSizeDistribution;
use crate::symexpr::BuildError;

use isq::{GeneratorTerms, IsqStation};
use mgk::MgkStation;

pub const MIN_ARRIVALS: u64 = 10_000;
pub const DEFAULT_ARRIVALS: u64 = 5_000_000;
pub const DEFAULT_WARMUP_FRACTION: f64 = 0.05;
pub const DEFAULT_BATCHES: usize = 20;
pub const DEFAULT_THRESHOLD_COUNT: usize = 64;
/// Numeric slack allowed when comparing coupled work processes.
pub const COUPLING_SLACK: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    #[error("need at least {min} arrivals, got {got}")]
    TooFewArrivals { got: u64, min: u64 },
    #[error("warm-up fraction must lie in [0, 1), got {0}")]
    BadWarmup(f64),
    #[error("need at least 2 batches, got {0}")]
    TooFewBatches(usize),
    #[error("thresholds must be positive, finite and strictly increasing")]
    BadThresholds,
    #[error("time step must be positive, got {0}")]
    BadTimeStep(f64),
    #[error("the increasing-speed queue needs k >= 2 for test functions, got {0}")]
    NoTestFunctions(usize),
    #[error(transparent)]
    Build(#[from] BuildError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Policy {
    Srpt,
    Fcfs,
}

impl std::fmt::Display for Policy {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Policy::Srpt => "SRPT",
            Policy::Fcfs => "FCFS",
        })
    }
}

impl std::str::FromStr for Policy {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s.to_ascii_uppercase().as_str() {
            "SRPT" => Ok(Policy::Srpt),
            "FCFS" => Ok(Policy::Fcfs),
            _ => Err(format!("unknown policy `{s}`")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimOptions {
    pub n_arrivals: u64,
    pub seed: u64,
    pub warmup_fraction: f64,
    pub batches: usize,
    /// Relevant-work thresholds; the default grid when `None`.
    pub thresholds: Option<Vec<f64>>,
    /// Also estimate `∫ W_x dt` by sampling on a grid of this spacing.
    pub time_step: Option<f64>,
}

impl SimOptions {
    pub fn new(n_arrivals: u64, seed: u64) -> Self {
        Self {
            n_arrivals,
            seed,
            warmup_fraction: DEFAULT_WARMUP_FRACTION,
            batches: DEFAULT_BATCHES,
            thresholds: None,
            time_step: None,
        }
    }

    fn validate(&self) -> Result<(), SimError> {
        if self.n_arrivals < MIN_ARRIVALS {
            return Err(SimError::TooFewArrivals {
                got: self.n_arrivals,
                min: MIN_ARRIVALS,
            });
        }
        if !(0.0..1.0).contains(&self.warmup_fraction) {
            return Err(SimError::BadWarmup(self.warmup_fraction));
        }
        if self.batches < 2 {
            return Err(SimError::TooFewBatches(self.batches));
        }
        if let Some(xs) = &self.thresholds {
            let ok = xs.iter().all(|x| x.is_finite() && *x > 0.0) && xs.windows(2).all(|w| w[0] < w[1]);
            if !ok {
                return Err(SimError::BadThresholds);
            }
        }
        if let Some(dt) = self.time_step {
            if !(dt > 0.0 && dt.is_finite()) {
                return Err(SimError::BadTimeStep(dt));
            }
        }
        Ok(())
    }

    fn plan(&self) -> BatchPlan {
        let n = self.n_arrivals;
        let warmup = (self.warmup_fraction * n as f64).floor() as u64;
        BatchPlan {
            n,
            warmup,
            batch_len: (n - warmup) / self.batches as u64,
            batches: self.batches,
        }
    }
}

/// `count` geometric points spanning `[quantile(0.01), quantile(0.9999)]`.
pub fn default_thresholds(dist: &JobSizeDistribution<f64>, count: usize) -> Vec<f64> {
    let lo = dist.quantile(0.01);
    let hi = dist.quantile(0.9999);
    if count <= 1 || hi <= lo || lo <= 0.0 {
        return vec![hi.max(lo).max(f64::MIN_POSITIVE)];
    }
    let ratio = (hi / lo).powf(1.0 / (count - 1) as f64);
    (0..count).map(|i| lo * ratio.powi(i as i32)).collect()
}

/// Arrival index ranges of the recorded batches.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct BatchPlan {
    n: u64,
    warmup: u64,
    batch_len: u64,
    batches: usize,
}

impl BatchPlan {
    pub fn batch_of(&self, index: u64) -> Option<usize> {
        if index < self.warmup || index >= self.n {
            return None;
        }
        Some((((index - self.warmup) / self.batch_len) as usize).min(self.batches - 1))
    }

    /// Whether a snapshot is due just before arrival `index` (`index = n` is
    /// the end of the horizon).
    fn is_boundary(&self, index: u64) -> bool {
        if index == self.n {
            return true;
        }
        index >= self.warmup
            && (index - self.warmup) % self.batch_len == 0
            && (index - self.warmup) / self.batch_len < self.batches as u64
    }
}

/// Cumulative integrals at one instant.
#[derive(Debug, Clone, Default)]
pub(crate) struct Snapshot {
    time: f64,
    work: f64,
    relevant: Vec<f64>,
    occupancy: Vec<f64>,
    generator: Vec<f64>,
    stepped: Vec<f64>,
}

/// A mean with its 95% confidence half-width from batch means.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub mean: f64,
    pub ci: f64,
}

impl Estimate {
    /// `mean` with a Student-t half-width from the spread of `batches`.
    pub fn from_batches(mean: f64, batches: &[f64]) -> Self {
        let b = batches.len() as f64;
        let avg = batches.iter().sum::<f64>() / b;
        let var = batches.iter().map(|v| (v - avg).powi(2)).sum::<f64>() / (b - 1.0);
        let t = StudentsT::new(0.0, 1.0, b - 1.0)
            .expect("at least two batches")
            .inverse_cdf(0.975);
        Self {
            mean,
            ci: t * (var / b).sqrt(),
        }
    }

    pub fn contains(&self, value: f64) -> bool {
        (self.mean - value).abs() <= self.ci
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RelevantWorkEstimate {
    pub x: f64,
    pub estimate: Estimate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimResult {
    pub k: usize,
    pub lambda: f64,
    pub seed: u64,
    /// `None` for the increasing-speed queue.
    pub policy: Option<Policy>,
    pub mean_response_time: Option<Estimate>,
    pub mean_work: Estimate,
    pub relevant_work: Vec<RelevantWorkEstimate>,
    /// M/G/k: fraction of time with `q` busy servers. Increasing-speed queue:
    /// fraction of time at speed `q/k`.
    pub occupancy: Vec<Estimate>,
    pub arrivals_completed: u64,
    /// Length of the recorded window.
    pub horizon: f64,
    /// Sampled-grid counterpart of `relevant_work` when a time step was set.
    pub stepped_relevant_work: Vec<f64>,
}

trait Station {
    fn next_event(&self) -> f64;
    fn advance(&mut self, tau: f64);
    fn complete(&mut self);
    fn arrive(&mut self, size: f64, index: u64);
    fn snapshot(&mut self) -> Snapshot;
}

impl Station for MgkStation {
    fn next_event(&self) -> f64 {
        MgkStation::next_event(self)
    }
    fn advance(&mut self, tau: f64) {
        MgkStation::advance(self, tau)
    }
    fn complete(&mut self) {
        MgkStation::complete(self)
    }
    fn arrive(&mut self, size: f64, index: u64) {
        MgkStation::arrive(self, size, index)
    }
    fn snapshot(&mut self) -> Snapshot {
        MgkStation::snapshot(self)
    }
}

impl Station for IsqStation {
    fn next_event(&self) -> f64 {
        IsqStation::next_event(self)
    }
    fn advance(&mut self, tau: f64) {
        IsqStation::advance(self, tau)
    }
    fn complete(&mut self) {
        IsqStation::complete(self)
    }
    fn arrive(&mut self, size: f64, _index: u64) {
        IsqStation::arrive(self, size)
    }
    fn snapshot(&mut self) -> Snapshot {
        IsqStation::snapshot(self)
    }
}

/// Feeds `n` arrivals to `station`, snapshotting at batch boundaries, then
/// drains it. Completions win ties with arrivals.
fn drive(station: &mut impl Station, stream: &mut ArrivalStream, plan: &BatchPlan) -> Vec<Snapshot> {
    let mut snaps = Vec::with_capacity(plan.batches + 1);
    for index in 0..=plan.n {
        let (gap, size) = stream.next_arrival();
        let mut left = gap;
        loop {
            let next = station.next_event();
            if next > left {
                break;
            }
            station.advance(next);
            station.complete();
            left -= next;
        }
        station.advance(left);
        if plan.is_boundary(index) {
            snaps.push(station.snapshot());
        }
        if index == plan.n {
            break;
        }
        station.arrive(size, index);
    }
    loop {
        let next = station.next_event();
        if !next.is_finite() {
            break;
        }
        station.advance(next);
        station.complete();
    }
    snaps
}

/// Ratio estimate over the whole window plus batch means of `num / time`.
fn window_estimate(snaps: &[Snapshot], field: impl Fn(&Snapshot) -> f64) -> Estimate {
    let first = &snaps[0];
    let last = &snaps[snaps.len() - 1];
    let mean = (field(last) - field(first)) / (last.time - first.time);
    let batches: Vec<f64> = snaps
        .windows(2)
        .map(|w| (field(&w[1]) - field(&w[0])) / (w[1].time - w[0].time))
        .collect();
    Estimate::from_batches(mean, &batches)
}

fn assemble(
    params: &SystemParams<f64>,
    opts: &SimOptions,
    policy: Option<Policy>,
    snaps: &[Snapshot],
    thresholds: &[f64],
    responses: Option<(&[f64], &[u64])>,
) -> SimResult {
    let mean_work = window_estimate(snaps, |s| s.work);
    let relevant_work = thresholds
        .iter()
        .enumerate()
        .map(|(m, &x)| RelevantWorkEstimate {
            x,
            estimate: window_estimate(snaps, |s| s.relevant[m]),
        })
        .collect();
    let occupancy = (0..=params.k())
        .map(|q| window_estimate(snaps, |s| s.occupancy[q]))
        .collect();
    let horizon = snaps[snaps.len() - 1].time - snaps[0].time;
    let stepped_relevant_work = match (snaps.first(), snaps.last()) {
        (Some(a), Some(b)) if !b.stepped.is_empty() => {
            b.stepped.iter().zip(&a.stepped).map(|(y, x)| (y - x) / horizon).collect()
        }
        _ => Vec::new(),
    };
    let (mean_response_time, arrivals_completed) = match responses {
        Some((sum, count)) => {
            let total: u64 = count.iter().sum();
            let mean = sum.iter().sum::<f64>() / total as f64;
            let batches: Vec<f64> = sum.iter().zip(count).map(|(s, &c)| s / c as f64).collect();
            (Some(Estimate::from_batches(mean, &batches)), total)
        }
        None => (None, opts.n_arrivals),
    };
    SimResult {
        k: params.k(),
        lambda: params.lambda(),
        seed: opts.seed,
        policy,
        mean_response_time,
        mean_work,
        relevant_work,
        occupancy,
        arrivals_completed,
        horizon,
        stepped_relevant_work,
    }
}

pub fn simulate_mgk(params: &SystemParams<f64>, policy: Policy, opts: &SimOptions) -> Result<SimResult, SimError> {
    opts.validate()?;
    let plan = opts.plan();
    let thresholds = opts
        .thresholds
        .clone()
        .unwrap_or_else(|| default_thresholds(params.dist(), DEFAULT_THRESHOLD_COUNT));
    let mut station = MgkStation::new(params.k(), policy, thresholds.clone(), plan, opts.time_step);
    let mut stream = ArrivalStream::new(params.lambda(), *params.dist(), opts.seed);
    let snaps = drive(&mut station, &mut stream, &plan);
    Ok(assemble(params, opts, Some(policy), &snaps, &thresholds, Some(station.responses())))
}

/// Independent runs, one per seed, in parallel; results in seed order.
pub fn simulate_mgk_seeds(
    params: &SystemParams<f64>,
    policy: Policy,
    opts: &SimOptions,
    seeds: &[u64],
) -> Vec<Result<SimResult, SimError>> {
    seeds
        .par_iter()
        .map(|&seed| {
            let o = SimOptions { seed, ..opts.clone() };
            simulate_mgk(params, policy, &o)
        })
        .collect()
}

pub fn simulate_isq(params: &SystemParams<f64>, opts: &SimOptions) -> Result<SimResult, SimError> {
    opts.validate()?;
    let plan = opts.plan();
    let mut station = IsqStation::new(params.k(), params.lambda(), Vec::new());
    let mut stream = ArrivalStream::new(params.lambda(), *params.dist(), opts.seed);
    let snaps = drive(&mut station, &mut stream, &plan);
    Ok(assemble(params, opts, None, &snaps, &[], None))
}

/// Time averages of the generator applied to the constant-drift (`g`) and
/// affine-drift (`h`) test functions along an increasing-speed-queue path.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BarResidual {
    pub g: Estimate,
    pub h: Estimate,
}

pub fn measure_bar_residual(params: &SystemParams<f64>, opts: &SimOptions) -> Result<BarResidual, SimError> {
    opts.validate()?;
    let k = params.k();
    if k < 2 {
        return Err(SimError::NoTestFunctions(k));
    }
    let f = IsqFunctions::shared(k)?;
    let gens = GeneratorTerms::from_functions(&f.functions, params.dist(), params.lambda());
    let plan = opts.plan();
    let mut station = IsqStation::new(k, params.lambda(), gens.to_vec());
    let mut stream = ArrivalStream::new(params.lambda(), *params.dist(), opts.seed);
    let snaps = drive(&mut station, &mut stream, &plan);
    Ok(BarResidual {
        g: window_estimate(&snaps, |s| s.generator[0]),
        h: window_estimate(&snaps, |s| s.generator[1]),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ViolationTrace {
    pub time: f64,
    pub arrival_index: u64,
    pub event: String,
    pub isq_work: f64,
    pub mgk_work: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CouplingReport {
    pub k: usize,
    pub policy: Policy,
    pub seed: u64,
    pub events: u64,
    /// Largest `W_isq - W_k` seen (negative when always strictly below).
    pub max_excess: f64,
    pub violations: u64,
    pub first_violation: Option<ViolationTrace>,
}

/// Runs the M/G/k and the increasing-speed queue on one arrival sequence
/// and compares total work at every event of either system.
pub fn simulate_coupled(params: &SystemParams<f64>, policy: Policy, n_arrivals: u64, seed: u64) -> CouplingReport {
    let plan = BatchPlan {
        n: n_arrivals,
        warmup: 0,
        batch_len: n_arrivals.max(1),
        batches: 1,
    };
    let k = params.k();
    let mut mgk = MgkStation::new(k, policy, Vec::new(), plan, None);
    let mut isq = IsqStation::new(k, params.lambda(), Vec::new());
    let mut stream = ArrivalStream::new(params.lambda(), *params.dist(), seed);
    let mut report = CouplingReport {
        k,
        policy,
        seed,
        events: 0,
        max_excess: 0.0,
        violations: 0,
        first_violation: None,
    };
    let mut clock = 0.0;
    let mut check = |event: &str, clock: f64, index: u64, isq: &IsqStation, mgk: &MgkStation| {
        let (wi, wk) = (isq.work(), mgk.work());
        report.events += 1;
        report.max_excess = report.max_excess.max(wi - wk);
        if wi > wk + COUPLING_SLACK {
            report.violations += 1;
            report.first_violation.get_or_insert_with(|| ViolationTrace {
                time: clock,
                arrival_index: index,
                event: event.to_string(),
                isq_work: wi,
                mgk_work: wk,
            });
        }
    };
    check("start", clock, 0, &isq, &mgk);
    let mut index = 0u64;
    let mut draining = false;
    let (mut gap, mut size) = stream.next_arrival();
    loop {
        let (a, b) = (mgk.next_event(), isq.next_event());
        let next_internal = a.min(b);
        if !draining && gap < next_internal {
            mgk.advance(gap);
            isq.advance(gap);
            clock += gap;
            mgk.arrive(size, index);
            isq.arrive(size);
            check("arrival", clock, index, &isq, &mgk);
            index += 1;
            if index == n_arrivals {
                draining = true;
            } else {
                (gap, size) = stream.next_arrival();
            }
            continue;
        }
        if !next_internal.is_finite() {
            break;
        }
        mgk.advance(next_internal);
        isq.advance(next_internal);
        clock += next_internal;
        gap -= next_internal;
        let label = if a <= b {
            mgk.complete();
            "completion"
        } else {
            isq.complete();
            "empty"
        };
        check(label, clock, index, &isq, &mgk);
    }
    report
}
