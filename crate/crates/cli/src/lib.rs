//! Command-line front end: argument parsing, config loading, dispatch and
//! result files.

pub mod config;

use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};
use spde_lab::experiments::{
    run_burgers_bound, run_burgers_sim, run_contraction_probe, run_ergodicity, run_maximal_inequality,
    run_reaction_diffusion, run_selftest, run_small_set_visit, run_wasserstein_contraction, simulate_trajectories,
    summarize, ExperimentReport,
};
use spde_lab::par::Executor;

pub use config::RunConfig;

#[derive(Debug, Parser)]
#[command(
    name = "spde-lab",
    version,
    about = "Monte Carlo experiments for the stochastic heat equation"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,

    /// TOML or JSON config with one section per experiment.
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,

    /// Output directory; defaults to `results/<experiment>`.
    #[arg(long, global = true, value_name = "DIR")]
    pub out: Option<PathBuf>,

    /// Base seed; overrides the config file.
    #[arg(long, global = true, env = "SPDE_LAB_SEED", value_name = "U64")]
    pub seed: Option<u64>,

    /// Worker threads; 0 uses the available parallelism.
    #[arg(long, global = true, default_value_t = 0, value_name = "N")]
    pub workers: usize,

    /// Overrides the number of Monte Carlo paths or samples.
    #[arg(long, global = true, value_name = "N")]
    pub paths: Option<usize>,

    /// Suppress the summary on stdout.
    #[arg(long, global = true)]
    pub quiet: bool,

    /// Also write one CSV per trajectory (simulate only).
    #[arg(long, global = true)]
    pub dump_paths: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Plain trajectories with summary statistics.
    Simulate,
    /// Coupled-pair contraction probe with Girsanov accounting.
    Couple,
    /// Damped stochastic convolution decay in the damping rate.
    Maxineq,
    /// Wasserstein contraction at a fixed time.
    Wcontract,
    /// Visit probability of a small ball from a large sphere.
    Smallset,
    /// Lyapunov fit and exponential convergence to equilibrium.
    Ergodic,
    /// Burgers operator bound; `--sim` runs the stochastic Burgers equation instead.
    Burgers {
        #[arg(long)]
        sim: bool,
    },
    /// Reaction-diffusion moments and continuity in the initial condition.
    Rd,
    /// Fast oracle-backed checks from every experiment.
    Selftest,
}

/// Experiment selector without subcommand-specific flags.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Experiment {
    Simulate,
    Couple,
    Maxineq,
    Wcontract,
    Smallset,
    Ergodic,
    Burgers,
    Rd,
    Selftest,
}

impl Experiment {
    pub fn name(self) -> &'static str {
        match self {
            Experiment::Simulate => "simulate",
            Experiment::Couple => "couple",
            Experiment::Maxineq => "maxineq",
            Experiment::Wcontract => "wcontract",
            Experiment::Smallset => "smallset",
            Experiment::Ergodic => "ergodic",
            Experiment::Burgers => "burgers",
            Experiment::Rd => "rd",
            Experiment::Selftest => "selftest",
        }
    }
}

impl From<Command> for Experiment {
    fn from(c: Command) -> Self {
        match c {
            Command::Simulate => Experiment::Simulate,
            Command::Couple => Experiment::Couple,
            Command::Maxineq => Experiment::Maxineq,
            Command::Wcontract => Experiment::Wcontract,
            Command::Smallset => Experiment::Smallset,
            Command::Ergodic => Experiment::Ergodic,
            Command::Burgers { .. } => Experiment::Burgers,
            Command::Rd => Experiment::Rd,
            Command::Selftest => Experiment::Selftest,
        }
    }
}

/// Exit status of a completed invocation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Passed,
    Failed,
}

impl Outcome {
    pub fn code(self) -> i32 {
        match self {
            Outcome::Passed => 0,
            Outcome::Failed => 1,
        }
    }
}

/// Config after applying command-line overrides and eager validation.
pub fn resolve_config(cli: &Cli) -> Result<RunConfig> {
    let mut cfg = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    let experiment = Experiment::from(cli.command);
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(paths) = cli.paths {
        cfg.override_paths(experiment, paths);
    }
    cfg.validate(experiment)?;
    Ok(cfg)
}

fn dispatch(command: Command, cfg: &RunConfig, out: &Path, dump_paths: bool) -> Result<ExperimentReport> {
    let seed = cfg.seed;
    let report = match command {
        Command::Simulate => {
            let trajectories = simulate_trajectories(&cfg.simulate, seed)?;
            if dump_paths {
                let dir = out.join("paths");
                fs::create_dir_all(&dir)?;
                for (i, t) in trajectories.iter().enumerate() {
                    let file = File::create(dir.join(format!("path_{i:05}.csv")))?;
                    t.write_csv(BufWriter::new(file), None)?;
                }
            }
            summarize(&cfg.simulate, seed, &trajectories)
        }
        Command::Couple => run_contraction_probe(&cfg.couple, seed)?,
        Command::Maxineq => run_maximal_inequality(&cfg.maxineq, seed)?,
        Command::Wcontract => run_wasserstein_contraction(&cfg.wcontract, seed)?,
        Command::Smallset => run_small_set_visit(&cfg.smallset, seed)?,
        Command::Ergodic => run_ergodicity(&cfg.ergodic, seed)?,
        Command::Burgers { sim: false } => run_burgers_bound(&cfg.burgers.bound, seed)?,
        Command::Burgers { sim: true } => run_burgers_sim(&cfg.burgers.sim, seed)?,
        Command::Rd => run_reaction_diffusion(&cfg.rd, seed)?,
        Command::Selftest => run_selftest(seed)?,
    };
    if dump_paths && command != Command::Simulate {
        log::warn!("--dump-paths only applies to `simulate`; ignored");
    }
    Ok(report)
}

/// Writes `report.json` and `metrics.csv` into `out`.
pub fn write_outputs(report: &ExperimentReport, out: &Path) -> Result<()> {
    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    let json = File::create(out.join("report.json"))?;
    serde_json::to_writer_pretty(BufWriter::new(json), report)?;
    let csv = File::create(out.join("metrics.csv"))?;
    report.write_metrics_csv(BufWriter::new(csv))?;
    Ok(())
}

/// Full invocation: config, run, outputs. Errors map to exit code 2.
pub fn run(cli: &Cli) -> Result<Outcome> {
    let cfg = resolve_config(cli)?;
    let experiment = Experiment::from(cli.command);
    let out = cli
        .out
        .clone()
        .unwrap_or_else(|| Path::new("results").join(experiment.name()));
    let executor = Executor::new(cli.workers);
    log::info!(
        "{} with seed {} on {} workers",
        experiment.name(),
        cfg.seed,
        executor.workers()
    );
    let report = executor.install(|| dispatch(cli.command, &cfg, &out, cli.dump_paths))?;
    write_outputs(&report, &out)?;
    if !cli.quiet {
        println!("{}", report.summary());
        println!("results written to {}", out.display());
    }
    Ok(if report.passed() {
        Outcome::Passed
    } else {
        Outcome::Failed
    })
}
