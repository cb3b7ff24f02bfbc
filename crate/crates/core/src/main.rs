use std::fs;
use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use mgk_bounds::bounds::{JumpOptions, SystemParams};
use mgk_bounds::experiments::{run_bounds, run_sweep, run_verify, ExperimentConfig};
use mgk_bounds::sim::{simulate_mgk, SimOptions, SimResult};
use mgk_bounds::symexpr::{BuildLimits, TestFunctions};
use mgk_bounds::wine::DEFAULT_TOL;

#[derive(Parser)]
#[command(version, about = "Lower bounds and simulation for M/G/k mean response time")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// TOML experiment configuration.
    #[arg(long)]
    config: PathBuf,
    /// Output directory, overriding the config.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Single seed, overriding the config's seed list.
    #[arg(long)]
    seed: Option<u64>,
    /// Take the recycling jump bound as x^2 for every k (unproven for k >= 3).
    #[arg(long)]
    assume_jump_conjecture: bool,
    /// WINE quadrature tolerance in time units.
    #[arg(long)]
    tol: Option<f64>,
}

impl Common {
    fn load(&self) -> Result<ExperimentConfig> {
        let mut cfg =
            ExperimentConfig::load(&self.config).with_context(|| format!("loading {}", self.config.display()))?;
        if let Some(out) = &self.out {
            cfg.output = out.clone();
        }
        if let Some(seed) = self.seed {
            cfg.seeds = vec![seed];
        }
        if self.assume_jump_conjecture {
            cfg.assume_jump_conjecture = true;
        }
        if let Some(tol) = self.tol {
            cfg.tolerances.wine = tol;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Analytic bounds over the load grid, as CSV.
    Bounds(Common),
    /// Simulate the M/G/k at each load and seed; one JSON record per run.
    Simulate(Common),
    /// Bounds and simulations over the grid with CSV, JSON sidecar and UIR curves.
    Sweep(Common),
    /// Run the fast invariant checks.
    Verify {
        #[arg(long)]
        tol: Option<f64>,
        #[arg(long)]
        assume_jump_conjecture: bool,
    },
    /// Print the symbolic test-function offsets for `k` servers.
    PrintTestfn {
        #[arg(long)]
        k: usize,
        /// Emit JSON instead of text.
        #[arg(long)]
        json: bool,
    },
}

#[derive(Serialize)]
struct RunRecord<'a> {
    config: &'a ExperimentConfig,
    rho: f64,
    result: &'a SimResult,
}

fn simulate(cfg: &ExperimentConfig) -> Result<()> {
    fs::create_dir_all(&cfg.output)?;
    let path = cfg.output.join("runs.jsonl");
    let mut file = fs::File::create(&path).with_context(|| format!("creating {}", path.display()))?;
    for &rho in &cfg.rho_grid {
        let params = SystemParams::from_load(cfg.k, rho, cfg.dist)?;
        for &seed in &cfg.seeds {
            let opts = SimOptions {
                warmup_fraction: cfg.sim.warmup_fraction,
                batches: cfg.sim.batches,
                ..SimOptions::new(cfg.n_arrivals, seed)
            };
            let result = simulate_mgk(&params, cfg.sim.policy, &opts)?;
            let line = serde_json::to_string(&RunRecord {
                config: cfg,
                rho,
                result: &result,
            })?;
            writeln!(file, "{line}")?;
            file.flush()?;
            let t = result.mean_response_time.expect("response times are recorded");
            println!("rho={rho} seed={seed} E[T]={:.6} ± {:.6}", t.mean, t.ci);
        }
    }
    Ok(())
}

fn print_testfn(k: usize, json: bool) -> Result<()> {
    let f = TestFunctions::build(k, BuildLimits::default())?;
    if json {
        let dump: Vec<_> = (1..k)
            .map(|q| {
                serde_json::json!({
                    "q": q,
                    "u": f.u(q).dump(),
                    "v": f.v(q).dump(),
                    "l": f.l(q).dump(),
                })
            })
            .collect();
        println!("{}", serde_json::to_string_pretty(&dump)?);
        return Ok(());
    }
    for q in 1..k {
        for (name, e) in [("u", f.u(q)), ("v", f.v(q)), ("l", f.l(q))] {
            println!("{name}_{q} (k = {k}, {} terms):\n{e}\n", e.len());
        }
    }
    Ok(())
}

fn run(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::Bounds(c) => {
            let cfg = c.load()?;
            fs::create_dir_all(&cfg.output)?;
            let mut buf = Vec::new();
            run_bounds(&cfg, &mut buf)?;
            fs::write(cfg.output.join("bounds.csv"), &buf)?;
            std::io::stdout().write_all(&buf)?;
            Ok(true)
        }
        Command::Simulate(c) => {
            simulate(&c.load()?)?;
            Ok(true)
        }
        Command::Sweep(c) => {
            let cfg = c.load()?;
            let out = run_sweep(&cfg)?;
            println!("wrote {} rows to {}", out.rows.len(), out.csv_path.display());
            for f in &out.failures {
                eprintln!("row rho={} seed={} failed: {}", f.rho, f.seed, f.error);
            }
            for v in &out.violations {
                eprintln!("invariant violated: {v}");
            }
            Ok(out.failures.is_empty() && out.violations.is_empty())
        }
        Command::Verify {
            tol,
            assume_jump_conjecture,
        } => {
            let tol = tol.unwrap_or(DEFAULT_TOL);
            if !(tol > 0.0) {
                bail!("--tol must be positive");
            }
            let jump = JumpOptions {
                assume_conjecture: assume_jump_conjecture,
                ..JumpOptions::default()
            };
            let checks = run_verify(tol, jump);
            for c in &checks {
                println!("{} {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
            }
            Ok(checks.iter().all(|c| c.passed))
        }
        Command::PrintTestfn { k, json } => {
            print_testfn(k, json)?;
            Ok(true)
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
