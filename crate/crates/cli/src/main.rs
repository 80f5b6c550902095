//! `burgers-lab`: runs and validates stochastic Burgers experiments described by a TOML file.
//!
//! Exit status: 0 when every check passes, 1 on an invariant violation, 2 on a
//! configuration error, 3 on a numeric failure. Failures print one line
//! `<kind>: <reason>` on stderr.

// `!(x > 0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod config;
mod experiments;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use burgers_core::mclab::default_probe;
use burgers_core::noise::{assumption_report, correction_fields};
use clap::{Parser, Subcommand};
use sha2::{Digest, Sha256};
use toml::{Table, Value};

use config::ExperimentConfig;
use experiments::Outcome;

#[derive(Debug, thiserror::Error)]
pub enum Failure {
    #[error("config-error: {0}")]
    Config(String),
    #[error("numeric-error: {0}")]
    Numeric(String),
    #[error("invariant-violation: {0}")]
    Invariant(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Config(_) => 2,
            Failure::Numeric(_) => 3,
            Failure::Invariant(_) => 1,
        }
    }
}

impl From<burgers_core::Error> for Failure {
    fn from(e: burgers_core::Error) -> Self {
        use burgers_core::Error;
        match e {
            Error::InvalidParameter(m) | Error::Parse(m) => Failure::Config(m),
            other => Failure::Numeric(other.to_string()),
        }
    }
}

#[derive(Parser)]
#[command(name = "burgers-lab", version, about = "Stochastic Burgers' experiments with transport noise")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the configured experiment and write a manifest and CSVs.
    Run(Args),
    /// Check the configuration and print noise and grid diagnostics.
    Validate(Args),
}

#[derive(clap::Args)]
struct Args {
    #[arg(long, value_name = "PATH")]
    config: PathBuf,
    /// Output directory; overrides `output` in the config.
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Master seed; overrides `seed` in the config.
    #[arg(long, value_name = "U64")]
    seed: Option<u64>,
    /// Worker threads; defaults to the available parallelism.
    #[arg(long, value_name = "N", env = "WORKERS")]
    workers: Option<usize>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run(a) => run(&a),
        Command::Validate(a) => validate(&a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            let line = f.to_string().replace('\n', " ");
            eprintln!("{line}");
            ExitCode::from(f.code())
        }
    }
}

fn workers(a: &Args) -> Result<usize, Failure> {
    match a.workers {
        Some(0) => Err(Failure::Config("workers must be ≥ 1".into())),
        Some(n) => Ok(n),
        None => Ok(std::thread::available_parallelism().map_or(1, |n| n.get())),
    }
}

fn run(a: &Args) -> Result<(), Failure> {
    let (cfg, raw) = config::load(&a.config)?;
    let seed = a.seed.unwrap_or(cfg.seed);
    let out_dir = a
        .out
        .clone()
        .or_else(|| cfg.output.as_ref().map(|o| cfg.base_dir.join(o)))
        .ok_or_else(|| Failure::Config("no output directory: pass --out or set output".into()))?;
    let n_workers = workers(a)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(n_workers)
        .build()
        .map_err(|e| Failure::Config(format!("cannot start {n_workers} workers: {e}")))?;
    let outcome = pool.install(|| experiments::run(&cfg, seed, &out_dir))?;
    write_manifest(&out_dir, &cfg, &raw, seed, n_workers, &outcome)?;
    let failed: Vec<_> = outcome.checks.iter().filter(|c| !c.passed).collect();
    if let Some(first) = failed.first() {
        let names: Vec<&str> = failed.iter().map(|c| c.name.as_str()).collect();
        return Err(Failure::Invariant(format!("{}: {}", names.join(","), first.detail)));
    }
    Ok(())
}

fn write_manifest(dir: &Path, cfg: &ExperimentConfig, raw: &[u8], seed: u64, n_workers: usize, outcome: &Outcome) -> Result<(), Failure> {
    let hash: String = Sha256::digest(raw).iter().map(|b| format!("{b:02x}")).collect();
    let echo: Table = std::str::from_utf8(raw)
        .ok()
        .and_then(|s| s.parse().ok())
        .unwrap_or_default();
    let mut m = Table::new();
    m.insert("code_version".into(), format!("{} {}", env!("CARGO_PKG_NAME"), env!("CARGO_PKG_VERSION")).into());
    m.insert("experiment".into(), cfg.experiment.as_str().into());
    m.insert("config_sha256".into(), hash.into());
    // u64 seeds above i64::MAX do not fit a TOML integer
    m.insert("master_seed".into(), seed.to_string().into());
    m.insert("workers".into(), (n_workers as i64).into());
    let passed = outcome.checks.iter().all(|c| c.passed);
    m.insert("status".into(), if passed { "pass" } else { "fail" }.into());
    m.insert("outputs".into(), Value::Array(outcome.outputs.iter().map(|o| Value::from(o.as_str())).collect()));
    let mut summary = Table::new();
    for (k, v) in &outcome.summary {
        summary.insert(k.clone(), v.clone());
    }
    m.insert("summary".into(), summary.into());
    let checks = outcome
        .checks
        .iter()
        .map(|c| {
            let mut t = Table::new();
            t.insert("name".into(), c.name.as_str().into());
            t.insert("passed".into(), c.passed.into());
            t.insert("detail".into(), c.detail.as_str().into());
            Value::Table(t)
        })
        .collect();
    m.insert("checks".into(), Value::Array(checks));
    m.insert("config".into(), echo.into());
    let text = toml::to_string(&m).map_err(|e| Failure::Numeric(format!("manifest: {e}")))?;
    let path = dir.join("manifest.toml");
    std::fs::write(&path, text).map_err(|e| Failure::Config(format!("cannot write {}: {e}", path.display())))
}

fn validate(a: &Args) -> Result<(), Failure> {
    let (cfg, _) = config::load(&a.config)?;
    workers(a)?;
    let basis = cfg.basis()?;
    let domain = cfg.domain();
    let center = match cfg.experiment {
        config::ExperimentKind::SlopeMoments => cfg.slope.x0,
        _ => 0.0,
    };
    let probe = default_probe(&domain, center, cfg.probe_points);
    let cf = correction_fields(&basis, &probe)?;
    let rep = assumption_report(&basis, &probe)?;
    let (psi_min, psi_max) = cf.psi_range();
    let grid = cfg.grid_times()?;
    // `+ 0.0` turns the −0 of an empty sum into 0
    let show = |k: &str, v: f64| println!("{k} = {}", v + 0.0);
    println!("experiment = {}", cfg.experiment.as_str());
    println!("modes = {}", basis.len());
    println!("steps = {}", grid.n_steps);
    show("C", cf.psi_lower_bound);
    show("D", cf.psi_upper_bound);
    show("psi_min", psi_min);
    show("psi_max", psi_max);
    show("sum_lipschitz_sq", rep.sum_lipschitz_sq);
    show("sum_growth_sq", rep.sum_growth_sq);
    show("phi_lipschitz", rep.phi_lipschitz);
    show("phi_growth", rep.phi_growth);
    println!("assumptions = {}", if rep.pass { "pass" } else { "fail" });
    if let (Some(g), Some(length)) = (cfg.grid.as_ref(), cfg.period()) {
        // advective CFL of u0, and the three-sigma transport displacement per step in cells
        let dx = length / g.n as f64;
        let profile = cfg.profile()?;
        let umax = (0..g.n).map(|i| profile.u0(i as f64 * dx).abs()).fold(0.0, f64::max);
        let xi_max = probe
            .iter()
            .map(|&x| basis.modes().iter().map(|m| m.values(x).xi.abs()).sum::<f64>())
            .fold(0.0, f64::max);
        let dt = grid.dt();
        show("dx", dx);
        show("cfl", umax * dt / dx);
        show("noise_cells_per_step", 3.0 * xi_max * dt.sqrt() / dx);
    }
    if !rep.pass {
        return Err(Failure::Config("noise basis fails the regularity check".into()));
    }
    Ok(())
}
