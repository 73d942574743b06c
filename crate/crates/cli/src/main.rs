//! `egf run <config.json>`: run one scenario and write diagnostics, snapshots and
//! check reports.
//!
//! Exit codes: 0 all requested checks pass, 1 a check failed (or the run broke
//! down numerically), 2 configuration error, 3 the closedness hypothesis fails.
//! `EGF_THREADS` sets the worker thread count.

mod config;
mod output;
mod plot;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use egf_core::{run_named_check, EgfError};

use config::{Overrides, ScenarioConfig};

#[derive(Parser)]
#[command(name = "egf", version, about = "Extrinsic geometric flow scenario runner")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the scenario described by a JSON file.
    Run {
        config: PathBuf,
        /// Output directory; overrides `output.dir`.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Points along every fiber axis; overrides `fiber_points`.
        #[arg(long)]
        grid: Option<usize>,
        /// Skip the finite-difference comparison.
        #[arg(long)]
        no_oracle: bool,
        /// Also write diagnostics.svg.
        #[arg(long)]
        plot: bool,
    },
}

#[derive(Debug)]
pub enum Failure {
    Config(String),
    Hypothesis(String),
    Run(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Run(_) => 1,
            Failure::Config(_) => 2,
            Failure::Hypothesis(_) => 3,
        }
    }
}

impl From<EgfError> for Failure {
    fn from(e: EgfError) -> Self {
        match e {
            EgfError::HypothesisViolation { .. } => Failure::Hypothesis(e.to_string()),
            EgfError::Input(_) | EgfError::DimensionMismatch { .. } | EgfError::UnsupportedScenario(_) => {
                Failure::Config(e.to_string())
            }
            EgfError::Numerical(_) | EgfError::UndefinedRate(_) => Failure::Run(e.to_string()),
        }
    }
}

fn init_threads() -> Result<(), Failure> {
    let Ok(v) = std::env::var("EGF_THREADS") else {
        return Ok(());
    };
    let n: usize = v
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| Failure::Config(format!("EGF_THREADS must be a positive integer, got '{v}'")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| Failure::Run(e.to_string()))
}

fn run(path: PathBuf, over: Overrides) -> Result<bool, Failure> {
    init_threads()?;
    let cfg = ScenarioConfig::load(&path)?;
    let dir = path.parent().map(PathBuf::from).unwrap_or_default();
    let prepared = cfg.prepare(&dir, &over)?;
    let traj = prepared.flow.run()?;

    let mut reports = Vec::new();
    for name in &prepared.checks {
        reports.extend(run_named_check(name, &prepared.flow, &traj)?);
    }
    let svg = prepared
        .plot
        .then(|| plot::diagnostics_svg(&output::diagnostic_rows(&traj)));
    output::write_all(&prepared.out_dir, &traj, &reports, prepared.snapshots, svg)
        .map_err(|e| Failure::Run(format!("writing {}: {e}", prepared.out_dir.display())))?;

    let failed: Vec<_> = reports.iter().filter(|r| !r.pass).collect();
    for r in &failed {
        eprintln!(
            "FAIL {} at t = {}: residual {:e} > {:e}",
            r.name, r.sample_time, r.residual, r.tolerance
        );
    }
    eprintln!(
        "{} samples written to {}; {} check reports, {} failed",
        traj.states.len(),
        prepared.out_dir.display(),
        reports.len(),
        failed.len()
    );
    Ok(failed.is_empty())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let Command::Run {
        config,
        out,
        grid,
        no_oracle,
        plot,
    } = cli.command;
    let over = Overrides {
        out,
        grid,
        no_oracle,
        plot,
    };
    match run(config, over) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(f) => {
            let msg = match &f {
                Failure::Config(m) => format!("config error: {m}"),
                Failure::Hypothesis(m) => m.clone(),
                Failure::Run(m) => format!("run failed: {m}"),
            };
            eprintln!("egf: {msg}");
            ExitCode::from(f.code())
        }
    }
}
