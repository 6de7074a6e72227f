//! `ianet`: generate, analyse and sweep random interference networks.
//!
//! Exit status is 0 on success, 2 on a configuration error and 3 when a
//! valid configuration fails at run time.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use commands::{Format, Output};
use config::Failure;

#[derive(Parser, Debug)]
#[command(
    name = "ianet",
    version,
    about = "Monte Carlo experiments on random Gaussian interference networks"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// JSON config document.
    #[arg(long, short, global = true)]
    config: Option<PathBuf>,

    /// Override a config value, e.g. `--set network.n=50`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    overrides: Vec<String>,

    /// Output file (a directory for `gen --format csv`); stdout if absent.
    #[arg(long, short, global = true)]
    out: Option<PathBuf>,

    #[arg(long, value_enum, default_value = "json", global = true)]
    format: Format,

    /// Shorthand for `--set network.seed=N`.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Worker threads; defaults to the number of cores. Results do not depend on it.
    #[arg(long, global = true)]
    workers: Option<usize>,
}

#[derive(Subcommand, Debug, Clone, PartialEq, Eq)]
enum Command {
    /// Sample node positions and channel gains.
    Gen,
    /// Detect bottleneck links and their U/V statistics.
    Analyze,
    /// Lower bound and matching upper bound on the sum capacity.
    Bounds,
    /// Simulate ergodic interference alignment.
    Eia,
    /// Replicated sweep over network sizes.
    Sweep {
        /// Also write one CSV row per (n, replicate) here.
        #[arg(long)]
        instances: Option<PathBuf>,
    },
    /// Monte Carlo estimate of the per-user limit E.
    #[command(name = "estimate-e")]
    EstimateE,
}

fn run(cli: Cli) -> Result<(), Failure> {
    if let (Some(out), Some(cfg)) = (&cli.out, &cli.config) {
        if same_file(out, cfg) {
            return Err(Failure::config("--out", "refusing to overwrite the config file"));
        }
    }
    let cfg = config::load(cli.config.as_deref(), &cli.overrides, cli.seed)?;
    let instances = match &cli.command {
        Command::Sweep { instances } => instances.clone(),
        _ => None,
    };
    let out = Output {
        path: cli.out,
        format: cli.format,
        instances,
    };
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(w) = cli.workers {
        if w == 0 {
            return Err(Failure::config("--workers", "must be at least 1"));
        }
        pool = pool.num_threads(w);
    }
    let pool = pool.build().map_err(|e| Failure::Runtime(e.to_string()))?;
    pool.install(|| match cli.command {
        Command::Gen => commands::gen(&cfg, &out),
        Command::Analyze => commands::analyze(&cfg, &out),
        Command::Bounds => commands::bounds(&cfg, &out),
        Command::Eia => commands::eia(&cfg, &out),
        Command::Sweep { .. } => commands::sweep(&cfg, &out),
        Command::EstimateE => commands::estimate_e(&cfg, &out),
    })
}

fn same_file(a: &std::path::Path, b: &std::path::Path) -> bool {
    match (a.canonicalize(), b.canonicalize()) {
        (Ok(a), Ok(b)) => a == b,
        _ => false,
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("ianet: {f}");
            ExitCode::from(f.exit_code() as u8)
        }
    }
}
