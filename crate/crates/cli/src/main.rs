//! `wgpca`: geodesic PCA of one-dimensional distributions from the command
//! line. Every subcommand writes plot-ready CSV/JSON into one output
//! directory together with `run.json`.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod commands;
mod config;
mod error;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::json;
use wgpca::gpca::Method;

use config::{parse_method, parse_omega, Omega, RunConfig};
use error::CliError;
use output::OutputDir;

#[derive(Parser)]
#[command(
    name = "wgpca",
    version,
    about = "Geodesic PCA of distributions in Wasserstein space"
)]
struct Cli {
    #[command(flatten)]
    common: Common,

    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Number of quantile knots.
    #[arg(long, global = true)]
    grid: Option<usize>,

    /// Support bounds `lo,hi` (use `inf`/`-inf` for open ends).
    #[arg(long, global = true, allow_hyphen_values = true, value_parser = parse_omega)]
    omega: Option<Omega>,

    /// Number of components.
    #[arg(long, global = true)]
    k: Option<usize>,

    /// gpca-global, gpca-nested or fpca.
    #[arg(long, global = true, value_parser = parse_method)]
    method: Option<Method>,

    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Output directory [default: $WGPCA_OUT/<command> or wgpca-out/<command>].
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// JSON run configuration; flags take precedence over it.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Mode parameters, comma separated.
    #[arg(long, global = true, value_delimiter = ',', allow_hyphen_values = true)]
    tau: Option<Vec<f64>>,

    /// Cells of every density curve.
    #[arg(long, global = true)]
    cells: Option<usize>,

    /// More log output (repeat for debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
}

#[derive(Subcommand)]
enum Command {
    /// Resolve an input manifest onto the grid and write a quantile bundle.
    Ingest { manifest: PathBuf },
    /// Wasserstein barycenter: quantiles and density.
    Barycenter { input: PathBuf },
    /// Principal components, scores, explained variance and mode curves.
    Gpca { input: PathBuf },
    /// Geodesic PCA against linear PCA of densities.
    Compare { input: PathBuf },
    /// Interpolation between two records along the Wasserstein geodesic.
    Geodesic {
        input: PathBuf,
        from: String,
        to: String,
        #[arg(long)]
        steps: Option<usize>,
    },
    /// Barycenter and cost convergence on random location-scale data.
    Consistency {
        /// Sample sizes, comma separated.
        #[arg(long, value_delimiter = ',')]
        schedule: Option<Vec<usize>>,
        #[arg(long)]
        trials: Option<usize>,
    },
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Ingest { .. } => "ingest",
            Command::Barycenter { .. } => "barycenter",
            Command::Gpca { .. } => "gpca",
            Command::Compare { .. } => "compare",
            Command::Geodesic { .. } => "geodesic",
            Command::Consistency { .. } => "consistency",
        }
    }
}

/// Defaults, then the config file, then flags. Returns whether the grid was
/// chosen explicitly.
fn resolve(common: &Common, command: &Command) -> Result<(RunConfig, bool), CliError> {
    let mut cfg = match &common.config {
        Some(p) => RunConfig::from_file(p)?,
        None => RunConfig::default(),
    };
    let from_file = common.config.is_some() && {
        let d = RunConfig::default();
        cfg.grid != d.grid || cfg.omega != d.omega
    };
    let explicit = from_file || common.grid.is_some() || common.omega.is_some();
    if let Some(m) = common.grid {
        cfg.grid = m;
    }
    if let Some(o) = common.omega {
        cfg.omega = o;
    }
    if let Some(k) = common.k {
        cfg.k = k;
    }
    if let Some(m) = common.method {
        cfg.method = m;
    }
    if let Some(s) = common.seed {
        cfg.seed = s;
    }
    if let Some(o) = &common.out {
        cfg.out = Some(o.clone());
    }
    if let Some(t) = &common.tau {
        cfg.taus = t.clone();
    }
    if let Some(c) = common.cells {
        cfg.density_cells = c;
    }
    match command {
        Command::Geodesic { steps: Some(s), .. } => cfg.steps = *s,
        Command::Consistency { schedule, trials } => {
            if let Some(s) = schedule {
                cfg.consistency.schedule = s.clone();
            }
            if let Some(t) = trials {
                cfg.consistency.trials = *t;
            }
        }
        _ => {}
    }
    cfg.validate()?;
    Ok((cfg, explicit))
}

fn run(cli: Cli) -> Result<(), CliError> {
    let (mut cfg, grid_explicit) = resolve(&cli.common, &cli.command)?;
    let name = cli.command.name();
    let dir = cfg.out_dir(name);
    let mut args = json!({});
    let (inputs, dataset_checksum, mut out) = match &cli.command {
        Command::Ingest { manifest } => {
            args = json!({ "manifest": manifest });
            let mut out = OutputDir::create(dir)?;
            let input = commands::ingest(manifest, &cfg, &mut out)?;
            (vec![input], None, out)
        }
        Command::Consistency { .. } => {
            let mut out = OutputDir::create(dir)?;
            commands::consistency(&cfg, &mut out)?;
            (Vec::new(), None, out)
        }
        Command::Barycenter { input }
        | Command::Gpca { input }
        | Command::Compare { input }
        | Command::Geodesic { input, .. } => {
            let data = commands::load_input(input, &mut cfg, grid_explicit)?;
            let mut out = OutputDir::create(dir)?;
            args = json!({ "input": input });
            match &cli.command {
                Command::Barycenter { .. } => commands::barycenter(&data, &cfg, &mut out)?,
                Command::Gpca { .. } => commands::gpca(&data, &cfg, &mut out)?,
                Command::Compare { .. } => commands::compare(&data, &cfg, &mut out)?,
                Command::Geodesic { from, to, .. } => {
                    args = json!({ "input": input, "from": from, "to": to });
                    commands::geodesic(&data, from, to, &cfg, &mut out)?
                }
                _ => unreachable!(),
            }
            (data.inputs, Some(data.dataset_checksum), out)
        }
    };
    let outputs = out.written().to_vec();
    let run = json!({
        "tool": "wgpca",
        "version": env!("CARGO_PKG_VERSION"),
        "command": name,
        "args": args,
        "config": cfg,
        "inputs": inputs,
        "dataset_checksum": dataset_checksum,
        "outputs": outputs,
    });
    out.write_json("run.json", &run)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = e.exit_code();
            let _ = e.print();
            return ExitCode::from(code as u8);
        }
    };
    let level = match cli.common.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
