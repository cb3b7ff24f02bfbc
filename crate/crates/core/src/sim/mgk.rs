//! The M/G/k with `k` servers of speed `1/k`, under SRPT-k or FCFS-k.

use std::collections::{BTreeMap, VecDeque};

use super::meter::RelevantWorkMeter;
use super::{BatchPlan, Policy, Snapshot};

#[derive(Debug, Clone, Copy)]
struct Job {
    remaining: f64,
    arrival: f64,
    index: u64,
}

/// Waiting-room order key: remaining size (as ordered bits) then arrival index.
type SrptKey = (u64, u64);

fn srpt_key(job: &Job) -> SrptKey {
    (job.remaining.to_bits(), job.index)
}

#[derive(Debug, Clone)]
enum Waiting {
    Srpt(BTreeMap<SrptKey, Job>),
    Fcfs(VecDeque<Job>),
}

#[derive(Debug, Clone)]
pub(crate) struct MgkStation {
    k: usize,
    rate: f64,
    clock: f64,
    served: Vec<Job>,
    waiting: Waiting,
    waiting_work: f64,
    work_int: f64,
    busy_time: Vec<f64>,
    meter: RelevantWorkMeter,
    plan: BatchPlan,
    resp_sum: Vec<f64>,
    resp_count: Vec<u64>,
    /// `(Δt, grid index of the next sample, per-threshold sums)` for the
    /// brute-force sampled estimate of `∫ W_x dt`.
    stepped: Option<(f64, u64, Vec<f64>)>,
}

impl MgkStation {
    pub fn new(k: usize, policy: Policy, thresholds: Vec<f64>, plan: BatchPlan, time_step: Option<f64>) -> Self {
        let n = thresholds.len();
        Self {
            k,
            rate: 1.0 / k as f64,
            clock: 0.0,
            served: Vec::with_capacity(k + 1),
            waiting: match policy {
                Policy::Srpt => Waiting::Srpt(BTreeMap::new()),
                Policy::Fcfs => Waiting::Fcfs(VecDeque::new()),
            },
            waiting_work: 0.0,
            work_int: 0.0,
            busy_time: vec![0.0; k + 1],
            meter: RelevantWorkMeter::new(thresholds),
            resp_sum: vec![0.0; plan.batches],
            resp_count: vec![0; plan.batches],
            plan,
            stepped: time_step.map(|dt| (dt, 1, vec![0.0; n])),
        }
    }

    pub fn work(&self) -> f64 {
        self.waiting_work + self.served.iter().map(|j| j.remaining).sum::<f64>()
    }

    pub fn in_system(&self) -> usize {
        self.served.len()
            + match &self.waiting {
                Waiting::Srpt(m) => m.len(),
                Waiting::Fcfs(q) => q.len(),
            }
    }

    /// Time until the next completion, or infinity when idle.
    pub fn next_event(&self) -> f64 {
        self.served
            .iter()
            .map(|j| j.remaining / self.rate)
            .fold(f64::INFINITY, f64::min)
    }

    pub fn advance(&mut self, tau: f64) {
        if tau <= 0.0 {
            return;
        }
        if self.stepped.is_some() {
            self.sample_grid(tau);
        }
        let start = self.clock;
        self.busy_time[self.served.len()] += tau;
        let mut served_int = 0.0;
        for j in &mut self.served {
            let r0 = j.remaining;
            let r1 = (r0 - self.rate * tau).max(0.0);
            self.meter.served(r0, r1, self.rate, tau);
            served_int += 0.5 * (r0 + r1) * tau;
            j.remaining = r1;
        }
        self.work_int += served_int + self.waiting_work * tau;
        self.clock = start + tau;
    }

    fn sample_grid(&mut self, tau: f64) {
        let (dt, mut next, mut sums) = self.stepped.take().unwrap();
        let end = self.clock + tau;
        let xs = self.meter.thresholds().to_vec();
        while next as f64 * dt <= end {
            let s = next as f64 * dt - self.clock;
            let mut add = |r: f64| {
                for (m, &x) in xs.iter().enumerate() {
                    if r < x {
                        sums[m] += r * dt;
                    }
                }
            };
            for j in &self.served {
                add((j.remaining - self.rate * s).max(0.0));
            }
            match &self.waiting {
                Waiting::Srpt(w) => w.values().for_each(|j| add(j.remaining)),
                Waiting::Fcfs(w) => w.iter().for_each(|j| add(j.remaining)),
            }
            next += 1;
        }
        self.stepped = Some((dt, next, sums));
    }

    /// Completes the served job with least remaining size and refills.
    pub fn complete(&mut self) {
        let Some(pos) = (0..self.served.len()).min_by(|&a, &b| {
            let (ja, jb) = (&self.served[a], &self.served[b]);
            ja.remaining.total_cmp(&jb.remaining).then(ja.index.cmp(&jb.index))
        }) else {
            return;
        };
        let done = self.served.swap_remove(pos);
        if let Some(b) = self.plan.batch_of(done.index) {
            self.resp_sum[b] += self.clock - done.arrival;
            self.resp_count[b] += 1;
        }
        if let Some(next) = self.pop_waiting() {
            self.served.push(next);
        }
    }

    fn pop_waiting(&mut self) -> Option<Job> {
        let job = match &mut self.waiting {
            Waiting::Srpt(m) => m.pop_first().map(|(_, j)| j),
            Waiting::Fcfs(q) => q.pop_front(),
        }?;
        self.meter.remove_waiting(job.remaining, self.clock);
        self.waiting_work -= job.remaining;
        if self.in_system() == self.served.len() {
            self.waiting_work = 0.0;
        }
        Some(job)
    }

    fn push_waiting(&mut self, job: Job) {
        self.meter.add_waiting(job.remaining, self.clock);
        self.waiting_work += job.remaining;
        match &mut self.waiting {
            Waiting::Srpt(m) => {
                m.insert(srpt_key(&job), job);
            }
            Waiting::Fcfs(q) => q.push_back(job),
        }
    }

    pub fn arrive(&mut self, size: f64, index: u64) {
        let job = Job {
            remaining: size,
            arrival: self.clock,
            index,
        };
        if self.served.len() < self.k {
            self.served.push(job);
            return;
        }
        if let Waiting::Srpt(_) = self.waiting {
            // Preempt the served job with the most remaining size (latest
            // arrival on ties) when the newcomer is strictly smaller.
            let pos = (0..self.served.len())
                .max_by(|&a, &b| {
                    let (ja, jb) = (&self.served[a], &self.served[b]);
                    ja.remaining.total_cmp(&jb.remaining).then(ja.index.cmp(&jb.index))
                })
                .expect("k >= 1 jobs in service");
            if size < self.served[pos].remaining {
                let bumped = std::mem::replace(&mut self.served[pos], job);
                self.push_waiting(bumped);
                return;
            }
        }
        self.push_waiting(job);
    }

    pub fn snapshot(&mut self) -> Snapshot {
        Snapshot {
            time: self.clock,
            work: self.work_int,
            relevant: self.meter.integrals(self.clock),
            occupancy: self.busy_time.clone(),
            generator: Vec::new(),
            stepped: self.stepped.as_ref().map(|s| s.2.clone()).unwrap_or_default(),
        }
    }

    pub fn responses(&self) -> (&[f64], &[u64]) {
        (&self.resp_sum, &self.resp_count)
    }
}
