//! `econorder`: enumerate, solve, sample, fit, map and check economic orders.
//!
//! Exit codes: 0 success, 2 infeasible, 3 non-convergence, 4 cap exceeded,
//! 1 anything else. Errors are written to stderr as one JSON line.

mod commands;
mod config;
mod error;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use econorder::empirics::{SampleFormat, DEFAULT_BINS, DEFAULT_TAIL_QUANTILE};
use econorder::{Regime, SamplerMode};

use crate::commands::ProductionArgs;
use crate::config::{Overrides, RunConfig};
use crate::error::CliError;

#[derive(Parser)]
#[command(name = "econorder", version, about = "Spontaneous economic orders from equally likely outcomes")]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// TOML run configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Seed; repeat for several runs.
    #[arg(long = "seed", global = true)]
    seeds: Vec<u64>,

    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Competition regime: mon (I = 0) or per (I = 1).
    #[arg(long, global = true, value_parser = parse_regime)]
    regime: Option<Regime>,

    /// Macro scale lambda.
    #[arg(long, global = true)]
    lambda: Option<f64>,

    /// Upper tail share dropped by the exponential fit.
    #[arg(long = "tail-quantile", global = true)]
    tail_quantile: Option<f64>,
}

#[derive(Subcommand)]
enum Command {
    /// Catalog every feasible order with its multiplicity and exact probability.
    Enumerate,
    /// Solve for the maximum-multiplicity occupancy and its macro parameters.
    Solve,
    /// Draw equally likely outcomes and tabulate order frequencies.
    Sample {
        /// Draws per seed (default: run.draws).
        #[arg(long)]
        draws: Option<u64>,
        #[arg(long, value_enum, default_value = "auto")]
        mode: ModeArg,
    },
    /// Fit exponential and Bose-Einstein laws to revenue data.
    Fit {
        data: PathBuf,
        #[arg(long, value_enum, default_value = "one-column")]
        format: FormatArg,
        /// Histogram bins for the Bose-Einstein fit.
        #[arg(long)]
        bins: Option<usize>,
    },
    /// Macro parameters, technology and the entropy identity.
    Macro {
        #[arg(long, requires_all = ["capital", "exponents"])]
        labor: Option<f64>,
        #[arg(long, requires_all = ["labor", "exponents"])]
        capital: Option<f64>,
        /// Production exponents x y z.
        #[arg(long, num_args = 3, value_names = ["X", "Y", "Z"], requires_all = ["labor", "capital"])]
        exponents: Option<Vec<f64>>,
    },
    /// Run the oracle, identity and convergence suites.
    Check {
        #[arg(long, hide = true)]
        inject_fault: Option<String>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Auto,
    Exact,
    Markov,
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    OneColumn,
    ValueCount,
}

fn parse_regime(s: &str) -> Result<Regime, String> {
    match s {
        "mon" => Ok(Regime::Monopolistic),
        "per" => Ok(Regime::Perfect),
        _ => Err(format!("expected mon or per, got {s:?}")),
    }
}

fn overrides(cli: &Cli) -> Overrides {
    Overrides {
        seeds: cli.seeds.clone(),
        out: cli.out.clone(),
        regime: cli.regime,
        lambda: cli.lambda,
        tail_quantile: cli.tail_quantile,
    }
}

fn load(cli: &Cli) -> Result<RunConfig, CliError> {
    match &cli.config {
        Some(path) => RunConfig::load(path, &overrides(cli)),
        None => Err(CliError::Config { field: "--config".into(), message: "this command needs a config file".into() }),
    }
}

fn run(cli: &Cli) -> Result<Vec<PathBuf>, CliError> {
    match &cli.command {
        Command::Enumerate => commands::enumerate(&load(cli)?),
        Command::Solve => commands::solve(&load(cli)?),
        Command::Sample { draws, mode } => {
            let config = load(cli)?;
            let draws = draws.unwrap_or(config.draws);
            if draws == 0 {
                return Err(CliError::Config { field: "--draws".into(), message: "must be positive".into() });
            }
            let mode = match mode {
                ModeArg::Auto => SamplerMode::Auto,
                ModeArg::Exact => SamplerMode::Exact,
                ModeArg::Markov => SamplerMode::Markov,
            };
            commands::sample(&config, draws, mode)
        }
        Command::Fit { data, format, bins } => {
            let config = cli.config.as_ref().map(|_| load(cli)).transpose()?;
            let tail_quantile = cli
                .tail_quantile
                .or(config.as_ref().map(|c| c.tail_quantile))
                .unwrap_or(DEFAULT_TAIL_QUANTILE);
            if !(0.0..=0.2).contains(&tail_quantile) {
                return Err(CliError::Config { field: "--tail-quantile".into(), message: "must lie in [0, 0.2]".into() });
            }
            let bins = bins.or(config.as_ref().map(|c| c.bins)).unwrap_or(DEFAULT_BINS);
            let out = match (&cli.out, &config) {
                (Some(o), _) => o.clone(),
                (None, Some(c)) => c.output_dir.clone(),
                (None, None) => PathBuf::from("out"),
            };
            let format = match format {
                FormatArg::OneColumn => SampleFormat::OneColumn,
                FormatArg::ValueCount => SampleFormat::ValueCount,
            };
            commands::fit(data, format, tail_quantile, bins, &out)
        }
        Command::Macro { labor, capital, exponents } => {
            let production = match (labor, capital, exponents) {
                (Some(l), Some(k), Some(e)) => Some(ProductionArgs { labor: *l, capital: *k, exponents: [e[0], e[1], e[2]] }),
                _ => None,
            };
            commands::macro_cmd(&load(cli)?, production)
        }
        Command::Check { inject_fault } => {
            let fault = inject_fault.as_deref().map(commands::parse_order).transpose()?;
            commands::check(&load(cli)?, fault)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => e.exit(),
        Err(e) => {
            let message = e.to_string();
            let body = serde_json::json!({
                "error": { "kind": "usage", "exit_code": 1, "message": message.trim() }
            });
            eprintln!("{body}");
            return ExitCode::from(1);
        }
    };
    match run(&cli) {
        Ok(paths) => {
            for p in paths {
                println!("{}", p.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("{}", e.to_json());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
