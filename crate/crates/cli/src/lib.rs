//! Batch front end: analyses of patient-level CSV files, simulation of
//! operating characteristics, bootstrap bias correction and goodness of fit.

pub mod commands;
pub mod config;
pub mod data;
pub mod error;
pub mod output;

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use config::{parse_methods, Config};
use error::CliError;

#[derive(Debug, Parser)]
#[command(name = "lvcomp", version, about = "Latent variable analyses of composite responder endpoints")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct Common {
    /// Settings file (`key = value` lines).
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Methods to run, e.g. `latent,augbin,binary`.
    #[arg(long)]
    pub methods: Option<String>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Worker threads; defaults to the available parallelism.
    #[arg(long)]
    pub threads: Option<usize>,
    /// Output directory. Without it the main table goes to stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Estimate the treatment effect with each method.
    Analyze {
        #[arg(long)]
        data: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Operating characteristics of a scenario.
    Simulate {
        /// Preset name; overrides `scenario` in the config.
        #[arg(long)]
        scenario: Option<String>,
        #[arg(long)]
        nsim: Option<usize>,
        #[command(flatten)]
        common: Common,
    },
    /// Bootstrap bias-corrected estimates and percentile intervals.
    Bootstrap {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        nboot: Option<usize>,
        #[command(flatten)]
        common: Common,
    },
    /// Modified Pearson residuals of the latent model fit.
    Gof {
        #[arg(long)]
        data: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Write one simulated trial as a CSV data file.
    Generate {
        #[arg(long)]
        scenario: Option<String>,
        #[command(flatten)]
        common: Common,
    },
}

impl Command {
    fn common(&self) -> &Common {
        match self {
            Command::Analyze { common, .. }
            | Command::Simulate { common, .. }
            | Command::Bootstrap { common, .. }
            | Command::Gof { common, .. }
            | Command::Generate { common, .. } => common,
        }
    }
}

fn load_config(common: &Common) -> Result<Config, CliError> {
    let mut cfg = match &common.config {
        Some(p) => {
            let text = std::fs::read_to_string(p)
                .map_err(|e| CliError::Input(format!("{}: {e}", p.display())))?;
            Config::parse(&text)?
        }
        None => Config::default(),
    };
    if let Some(s) = common.seed {
        cfg.seed = s;
    }
    if let Some(m) = &common.methods {
        cfg.methods = parse_methods(m)?;
    }
    Ok(cfg)
}

fn generate(cfg: &Config, out: Option<&Path>) -> Result<(), CliError> {
    let sc = cfg.scenario()?;
    let d = lvcomp::simulation::generate_dataset(&sc, cfg.seed)?;
    let text = data::write_dataset(&d);
    match out {
        Some(p) => std::fs::write(p, text)
            .map_err(|e| CliError::Input(format!("{}: {e}", p.display()))),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

/// Runs a parsed command line. Reports are written before a failure is
/// returned, so a convergence failure still leaves its outputs behind.
pub fn run(cli: Cli) -> Result<(), CliError> {
    let common = cli.command.common();
    if let Some(n) = common.threads {
        if n == 0 {
            return Err(CliError::Input("--threads must be positive".into()));
        }
        // fails only if a pool already exists, e.g. on a second call in-process
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    let mut cfg = load_config(common)?;
    let out = common.out.as_deref();
    let outcome = match &cli.command {
        Command::Analyze { data, .. } => commands::analyze(data, &cfg)?,
        Command::Simulate { scenario, nsim, .. } => {
            if let Some(s) = scenario {
                cfg.scenario = s.clone();
            }
            if let Some(n) = nsim {
                cfg.n_sim = *n;
            }
            commands::simulate(&cfg)?
        }
        Command::Bootstrap { data, nboot, .. } => {
            if let Some(n) = nboot {
                cfg.n_boot = *n;
            }
            commands::bootstrap(data, &cfg)?
        }
        Command::Gof { data, .. } => commands::gof(data, &cfg)?,
        Command::Generate { scenario, .. } => {
            if let Some(s) = scenario {
                cfg.scenario = s.clone();
            }
            return generate(&cfg, out);
        }
    };
    outcome.report.write(out)?;
    outcome.failure.map_or(Ok(()), Err)
}
