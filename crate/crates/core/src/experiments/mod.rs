//! Load sweeps: bounds and simulations over a load grid, written as CSV
//! with a JSON sidecar, plus the derived uncertainty-region curves.

mod config;
mod verify;

pub use config::{default_rho_grid, BoundKind, ConfigError, ExperimentConfig, SimConfig, Tolerances};
pub use verify::{run_verify, Check};

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::mpsc;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bounds::{BoundModel, BoundsError, JumpOptions, SystemParams, MAX_REL_CANCELLATION};
use crate::sim::{simulate_mgk, SimError, SimOptions, COUPLING_SLACK};
use crate::wine::{bound_suite, naive_bounds, wine_integrate, WineError, ISQ, ISQ_RECYCLING, MIXEX};

pub const SCHEMA_VERSION: u32 = 1;
pub const SWEEP_CSV: &str = "sweep.csv";
pub const SIDECAR_JSON: &str = "sweep.json";
pub const UIR_CSV: &str = "uir.csv";

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Bounds(#[from] BoundsError),
    #[error(transparent)]
    Wine(#[from] WineError),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error("degenerate uncertainty region: upper bound {upper} is not above prior lower bound {prior}")]
    DegenerateRegion { prior: f64, upper: f64 },
    #[error("row {row}: missing value for `{column}`")]
    MissingColumn { row: usize, column: &'static str },
    #[error("load round trip failed: lambda * E[S] = {got}, expected {rho}")]
    LoadRoundTrip { rho: f64, got: f64 },
    #[error("I/O on {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> ExperimentError + '_ {
    move |source| ExperimentError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Fraction of the gap between `prior_lower` and `upper` closed by `novel_lower`.
pub fn uir(novel_lower: f64, prior_lower: f64, upper: f64) -> Result<f64, ExperimentError> {
    if !(upper > prior_lower) {
        return Err(ExperimentError::DegenerateRegion {
            prior: prior_lower,
            upper,
        });
    }
    Ok((novel_lower - prior_lower) / (upper - prior_lower))
}

/// NaN when any input is missing or the region is degenerate.
fn uir_or_nan(novel: f64, prior: f64, upper: f64) -> f64 {
    if novel.is_nan() || prior.is_nan() || upper.is_nan() {
        return f64::NAN;
    }
    uir(novel, prior, upper).unwrap_or(f64::NAN)
}

/// One CSV row; column order is the file schema.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub k: usize,
    pub dist: String,
    pub scv: f64,
    pub rho: f64,
    pub naive_lb: f64,
    pub mixex_lb: f64,
    pub isq_lb: f64,
    pub isqrec_lb: f64,
    pub sim_srptk_mean: f64,
    pub sim_srptk_ci: f64,
    pub uir_mixex_vs_naive: f64,
    pub uir_isq_vs_mixex: f64,
    pub uir_isqrec_vs_mixex: f64,
    pub seed: u64,
    pub runtime_s: f64,
}

impl SweepRow {
    fn empty(cfg: &ExperimentConfig, rho: f64, seed: u64) -> Self {
        Self {
            k: cfg.k,
            dist: cfg.dist.to_string(),
            scv: cfg.dist.scv(),
            rho,
            naive_lb: f64::NAN,
            mixex_lb: f64::NAN,
            isq_lb: f64::NAN,
            isqrec_lb: f64::NAN,
            sim_srptk_mean: f64::NAN,
            sim_srptk_ci: f64::NAN,
            uir_mixex_vs_naive: f64::NAN,
            uir_isq_vs_mixex: f64::NAN,
            uir_isqrec_vs_mixex: f64::NAN,
            seed,
            runtime_s: 0.0,
        }
    }

    fn fill_uir(&mut self) {
        let up = self.sim_srptk_mean;
        self.uir_mixex_vs_naive = uir_or_nan(self.mixex_lb, self.naive_lb, up);
        self.uir_isq_vs_mixex = uir_or_nan(self.isq_lb, self.mixex_lb, up);
        self.uir_isqrec_vs_mixex = uir_or_nan(self.isqrec_lb, self.mixex_lb, up);
    }

    /// Ordering invariants, with `slack` for quadrature error.
    pub fn violations(&self, slack: f64) -> Vec<String> {
        let mut out = Vec::new();
        let chain = [
            ("naive_lb", self.naive_lb),
            ("mixex_lb", self.mixex_lb),
            ("isq_lb", self.isq_lb),
            ("isqrec_lb", self.isqrec_lb),
        ];
        let present: Vec<_> = chain.iter().filter(|c| !c.1.is_nan()).collect();
        for w in present.windows(2) {
            if w[0].1 > w[1].1 + slack {
                out.push(format!("{} = {} exceeds {} = {}", w[0].0, w[0].1, w[1].0, w[1].1));
            }
        }
        for (name, v) in [
            ("uir_mixex_vs_naive", self.uir_mixex_vs_naive),
            ("uir_isq_vs_mixex", self.uir_isq_vs_mixex),
            ("uir_isqrec_vs_mixex", self.uir_isqrec_vs_mixex),
        ] {
            if v > 1.0 {
                out.push(format!("{name} = {v} is above 1"));
            }
        }
        out
    }
}

/// Analytic bounds at one load, NaN for bounds not requested.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundValues {
    pub naive: f64,
    pub mixex: f64,
    pub isq: f64,
    pub isq_recycling: f64,
}

pub fn compute_bounds(cfg: &ExperimentConfig, rho: f64) -> Result<BoundValues, ExperimentError> {
    let params = SystemParams::from_load(cfg.k, rho, cfg.dist)?;
    let got = params.lambda() * cfg.dist.mean();
    if (got - rho).abs() > 1e-12 {
        return Err(ExperimentError::LoadRoundTrip { rho, got });
    }
    let model = BoundModel::new(params)?.with_jump_options(JumpOptions {
        assume_conjecture: cfg.assume_jump_conjecture,
        tol: cfg.tolerances.jump,
        ..JumpOptions::default()
    });
    let tol = cfg.tolerances.wine;
    let want = |b: BoundKind| cfg.bounds.contains(&b);
    let mut out = BoundValues {
        naive: f64::NAN,
        mixex: f64::NAN,
        isq: f64::NAN,
        isq_recycling: f64::NAN,
    };
    if want(BoundKind::Naive) {
        out.naive = naive_bounds(&model, tol)?.value;
    }
    if BoundKind::ALL[1..].iter().all(|b| want(*b)) {
        let s = bound_suite(&model, tol)?;
        out.mixex = s.mixex.value;
        out.isq = s.isq.value;
        out.isq_recycling = s.isq_recycling.value;
        return Ok(out);
    }
    if want(BoundKind::Mixex) {
        out.mixex = wine_integrate(&model, &MIXEX, tol)?.value;
    }
    if want(BoundKind::Isq) {
        out.isq = wine_integrate(&model, &ISQ, tol)?.value;
    }
    if want(BoundKind::IsqRecycling) {
        out.isq_recycling = wine_integrate(&model, &ISQ_RECYCLING, tol)?.value;
    }
    Ok(out)
}

fn sim_options(cfg: &ExperimentConfig, seed: u64) -> SimOptions {
    SimOptions {
        warmup_fraction: cfg.sim.warmup_fraction,
        batches: cfg.sim.batches,
        ..SimOptions::new(cfg.n_arrivals, seed)
    }
}

fn run_row(cfg: &ExperimentConfig, rho: f64, seed: u64, bounds: &BoundValues) -> Result<SweepRow, ExperimentError> {
    let start = Instant::now();
    let mut row = SweepRow::empty(cfg, rho, seed);
    row.naive_lb = bounds.naive;
    row.mixex_lb = bounds.mixex;
    row.isq_lb = bounds.isq;
    row.isqrec_lb = bounds.isq_recycling;
    if cfg.sim.enabled {
        let params = SystemParams::from_load(cfg.k, rho, cfg.dist)?;
        let r = simulate_mgk(&params, cfg.sim.policy, &sim_options(cfg, seed))?;
        let t = r.mean_response_time.expect("M/G/k runs record response times");
        row.sim_srptk_mean = t.mean;
        row.sim_srptk_ci = t.ci;
    }
    row.fill_uir();
    row.runtime_s = start.elapsed().as_secs_f64();
    Ok(row)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RowFailure {
    pub rho: f64,
    pub seed: u64,
    pub error: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToleranceRecord {
    pub wine: f64,
    pub jump: f64,
    pub coupling_slack: f64,
    pub max_rel_cancellation: f64,
}

/// Provenance written next to the CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sidecar {
    pub schema_version: u32,
    pub library_version: String,
    pub config: ExperimentConfig,
    pub seeds: Vec<u64>,
    pub tolerances: ToleranceRecord,
    pub assume_jump_conjecture: bool,
    pub warmup_fraction: f64,
    pub ci_method: String,
    pub rows_written: usize,
    pub failures: Vec<RowFailure>,
    pub invariant_violations: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepOutcome {
    pub rows: Vec<SweepRow>,
    pub failures: Vec<RowFailure>,
    pub violations: Vec<String>,
    pub csv_path: PathBuf,
    pub sidecar_path: PathBuf,
    pub uir_path: PathBuf,
}

/// Runs every `(ρ, seed)` row in parallel and writes them in grid order as
/// they become available. A failed row is written with NaN values and
/// reported in the sidecar.
pub fn run_sweep(cfg: &ExperimentConfig) -> Result<SweepOutcome, ExperimentError> {
    cfg.validate()?;
    let out_dir = &cfg.output;
    fs::create_dir_all(out_dir).map_err(io_err(out_dir))?;
    let csv_path = out_dir.join(SWEEP_CSV);
    let mut writer = csv::Writer::from_path(&csv_path)?;

    let tasks: Vec<(f64, u64)> = cfg
        .rho_grid
        .iter()
        .flat_map(|&rho| cfg.seeds.iter().map(move |&s| (rho, s)))
        .collect();
    let (tx, rx) = mpsc::channel::<(usize, Result<SweepRow, ExperimentError>)>();
    let slack = 2.0 * cfg.tolerances.wine;

    let (rows, failures, violations, write_err) = std::thread::scope(|scope| {
        let tasks = &tasks;
        let csv_path = &csv_path;
        let writer_thread = scope.spawn(move || {
            let mut rows = Vec::with_capacity(tasks.len());
            let mut failures = Vec::new();
            let mut violations = Vec::new();
            let mut write_err: Option<ExperimentError> = None;
            let mut pending = BTreeMap::new();
            let mut next = 0;
            for (i, res) in rx {
                pending.insert(i, res);
                while let Some(res) = pending.remove(&next) {
                    let (rho, seed) = tasks[next];
                    let row = match res {
                        Ok(row) => row,
                        Err(e) => {
                            failures.push(RowFailure {
                                rho,
                                seed,
                                error: e.to_string(),
                            });
                            SweepRow::empty(cfg, rho, seed)
                        }
                    };
                    for v in row.violations(slack) {
                        violations.push(format!("rho = {rho}, seed = {seed}: {v}"));
                    }
                    let flushed = writer
                        .serialize(&row)
                        .map_err(ExperimentError::from)
                        .and_then(|_| writer.flush().map_err(io_err(csv_path)));
                    if let Err(e) = flushed {
                        write_err.get_or_insert(e);
                    }
                    rows.push(row);
                    next += 1;
                }
            }
            (rows, failures, violations, write_err)
        });
        tasks.par_iter().enumerate().for_each_with(tx, |tx, (i, &(rho, seed))| {
            // Bounds depend on the load only; each row computes its own so
            // rows stay independent.
            let res = compute_bounds(cfg, rho).and_then(|b| run_row(cfg, rho, seed, &b));
            let _ = tx.send((i, res));
        });
        writer_thread.join().expect("writer thread panicked")
    });
    if let Some(e) = write_err {
        return Err(e);
    }

    let sidecar = Sidecar {
        schema_version: SCHEMA_VERSION,
        library_version: env!("CARGO_PKG_VERSION").to_string(),
        config: cfg.clone(),
        seeds: cfg.seeds.clone(),
        tolerances: ToleranceRecord {
            wine: cfg.tolerances.wine,
            jump: cfg.tolerances.jump,
            coupling_slack: COUPLING_SLACK,
            max_rel_cancellation: MAX_REL_CANCELLATION,
        },
        assume_jump_conjecture: cfg.assume_jump_conjecture,
        warmup_fraction: cfg.sim.warmup_fraction,
        ci_method: format!("{} batch means, Student-t 95% half-width", cfg.sim.batches),
        rows_written: rows.len(),
        failures: failures.clone(),
        invariant_violations: violations.clone(),
    };
    let sidecar_path = out_dir.join(SIDECAR_JSON);
    let text = serde_json::to_string_pretty(&sidecar)?;
    fs::write(&sidecar_path, text + "\n").map_err(io_err(&sidecar_path))?;

    let uir_path = out_dir.join(UIR_CSV);
    if cfg.sim.enabled && BoundKind::ALL.iter().all(|b| cfg.bounds.contains(b)) {
        let complete: Vec<SweepRow> = rows
            .iter()
            .filter(|r| !failures.iter().any(|f| f.rho == r.rho && f.seed == r.seed))
            .cloned()
            .collect();
        let points = report_uir_curves(&complete)?;
        write_uir_csv(&uir_path, &points)?;
    }
    Ok(SweepOutcome {
        rows,
        failures,
        violations,
        csv_path,
        sidecar_path,
        uir_path,
    })
}

pub fn read_rows(path: &Path) -> Result<Vec<SweepRow>, ExperimentError> {
    let mut r = csv::Reader::from_path(path)?;
    Ok(r.deserialize().collect::<Result<_, _>>()?)
}

/// UIR curves at one load, pooled over seeds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UirPoint {
    pub k: usize,
    pub dist: String,
    pub scv: f64,
    pub rho: f64,
    pub seeds: usize,
    pub upper: f64,
    pub uir_mixex_vs_naive: f64,
    pub uir_isq_vs_mixex: f64,
    pub uir_isqrec_vs_mixex: f64,
    pub uir_isq_vs_naive: f64,
    pub uir_isqrec_vs_naive: f64,
}

/// Per-load UIRs. The upper bound is the simulated mean averaged over the
/// seeds at that load; the naive prior is the larger single-family bound.
pub fn report_uir_curves(rows: &[SweepRow]) -> Result<Vec<UirPoint>, ExperimentError> {
    let need = |i: usize, name: &'static str, v: f64| {
        if v.is_nan() {
            Err(ExperimentError::MissingColumn { row: i, column: name })
        } else {
            Ok(v)
        }
    };
    let mut groups: BTreeMap<(usize, String, u64), Vec<(usize, &SweepRow)>> = BTreeMap::new();
    for (i, r) in rows.iter().enumerate() {
        groups
            .entry((r.k, r.dist.clone(), r.rho.to_bits()))
            .or_default()
            .push((i, r));
    }
    let mut out = Vec::with_capacity(groups.len());
    for group in groups.values() {
        let (i0, first) = group[0];
        let naive = need(i0, "naive_lb", first.naive_lb)?;
        let mixex = need(i0, "mixex_lb", first.mixex_lb)?;
        let isq = need(i0, "isq_lb", first.isq_lb)?;
        let rec = need(i0, "isqrec_lb", first.isqrec_lb)?;
        let mut upper = 0.0;
        for &(i, r) in group {
            upper += need(i, "sim_srptk_mean", r.sim_srptk_mean)?;
        }
        upper /= group.len() as f64;
        out.push(UirPoint {
            k: first.k,
            dist: first.dist.clone(),
            scv: first.scv,
            rho: first.rho,
            seeds: group.len(),
            upper,
            uir_mixex_vs_naive: uir_or_nan(mixex, naive, upper),
            uir_isq_vs_mixex: uir_or_nan(isq, mixex, upper),
            uir_isqrec_vs_mixex: uir_or_nan(rec, mixex, upper),
            uir_isq_vs_naive: uir_or_nan(isq, naive, upper),
            uir_isqrec_vs_naive: uir_or_nan(rec, naive, upper),
        });
    }
    out.sort_by(|a, b| (a.k, &a.dist, a.rho).partial_cmp(&(b.k, &b.dist, b.rho)).unwrap());
    Ok(out)
}

pub fn write_uir_csv(path: &Path, points: &[UirPoint]) -> Result<(), ExperimentError> {
    let mut w = csv::Writer::from_path(path)?;
    for p in points {
        w.serialize(p)?;
    }
    w.flush().map_err(io_err(path))?;
    Ok(())
}

/// Largest value of `field` over the points, ignoring NaN.
pub fn peak(points: &[UirPoint], field: impl Fn(&UirPoint) -> f64) -> Option<(f64, f64)> {
    points
        .iter()
        .map(|p| (p.rho, field(p)))
        .filter(|(_, v)| !v.is_nan())
        .max_by(|a, b| a.1.total_cmp(&b.1))
}

/// Analytic bounds only, one line per load; simulation columns are NaN.
pub fn run_bounds(cfg: &ExperimentConfig, out: &mut impl Write) -> Result<Vec<SweepRow>, ExperimentError> {
    cfg.validate()?;
    let mut rows = Vec::new();
    let mut w = csv::Writer::from_writer(out);
    for &rho in &cfg.rho_grid {
        let start = Instant::now();
        let b = compute_bounds(cfg, rho)?;
        let mut row = SweepRow::empty(cfg, rho, 0);
        row.naive_lb = b.naive;
        row.mixex_lb = b.mixex;
        row.isq_lb = b.isq;
        row.isqrec_lb = b.isq_recycling;
        row.runtime_s = start.elapsed().as_secs_f64();
        w.serialize(&row)?;
        w.flush().map_err(|source| ExperimentError::Io {
            path: PathBuf::from("<stdout>"),
            source,
        })?;
        rows.push(row);
    }
    Ok(rows)
}
