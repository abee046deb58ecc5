//! Command-line front end: scenario validation, pricing, interval and hedge
//! reports, parameter sweeps and engine cross-checks.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use xva_core::report::{self, RunReport};
use xva_core::scenario::{ScenarioConfig, SweepAxis, SCHEMA_MD};
use xva_core::XvaError;

#[derive(Parser)]
#[command(
    name = "xva",
    about = "Valuation adjustments for European claims under funding, repo and collateral rate asymmetry with bilateral default risk",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check the no-arbitrage rate conditions of a scenario
    Validate { file: PathBuf },
    /// Price the claim and write xva.csv
    Price {
        file: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Buyer/seller solves and the no-arbitrage interval (interval.csv)
    Interval {
        file: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Replicating positions at inception (hedge.csv)
    Hedge {
        file: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Parameter sweep over one or more axes (sweep.csv)
    Sweep {
        file: PathBuf,
        /// Axis spec, e.g. --axis r_f=0.05:0.10:0.005 or --axis alpha=0,0.5,1
        #[arg(long = "axis", required = true)]
        axes: Vec<String>,
        #[command(flatten)]
        common: Common,
    },
    /// Price with every applicable engine and compare (crosscheck.csv)
    Crosscheck {
        file: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Write the scenario file schema (schema.md)
    Schema {
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
}

#[derive(clap::Args)]
struct Common {
    /// Output directory for CSV artifacts
    #[arg(long, default_value = ".")]
    out: PathBuf,
    /// Run even when the no-arbitrage rate checks fail
    #[arg(long)]
    force: bool,
}

/// Error message plus the exit code it maps to.
struct Failure(String, i32);

impl From<XvaError> for Failure {
    fn from(e: XvaError) -> Self {
        Failure(e.to_string(), report::exit_code_for(&e))
    }
}

fn load(file: &PathBuf) -> Result<ScenarioConfig, Failure> {
    let text = std::fs::read_to_string(file).map_err(|e| {
        Failure(
            format!("cannot read {}: {e}", file.display()),
            report::EXIT_VALIDATION,
        )
    })?;
    Ok(ScenarioConfig::from_json(&text)?)
}

fn run(cli: &Cli) -> Result<RunReport, Failure> {
    match &cli.command {
        Command::Validate { file } => {
            let config = load(file)?;
            let r = report::run_validate(&config)?;
            if r.exit_code == report::EXIT_OK {
                println!("ok: all rate conditions hold");
            }
            Ok(r)
        }
        Command::Price { file, common } => {
            Ok(report::run_price(&load(file)?, &common.out, common.force)?)
        }
        Command::Interval { file, common } => Ok(report::run_interval(
            &load(file)?,
            &common.out,
            common.force,
        )?),
        Command::Hedge { file, common } => {
            Ok(report::run_hedge(&load(file)?, &common.out, common.force)?)
        }
        Command::Sweep { file, axes, common } => {
            let config = load(file)?;
            let axes = axes
                .iter()
                .map(|a| SweepAxis::parse(a))
                .collect::<Result<Vec<_>, _>>()?;
            Ok(report::run_sweep(
                &config,
                &axes,
                &common.out,
                common.force,
            )?)
        }
        Command::Crosscheck { file, common } => Ok(report::run_crosscheck(
            &load(file)?,
            &common.out,
            common.force,
        )?),
        Command::Schema { out } => {
            std::fs::create_dir_all(out).map_err(XvaError::from)?;
            let path = out.join("schema.md");
            std::fs::write(&path, SCHEMA_MD).map_err(XvaError::from)?;
            let mut r = RunReport::default();
            r.artifacts.push(path);
            Ok(r)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(report) => {
            for message in &report.messages {
                eprintln!("{message}");
            }
            for artifact in &report.artifacts {
                println!("wrote {}", artifact.display());
            }
            ExitCode::from(report.exit_code as u8)
        }
        Err(Failure(message, code)) => {
            eprintln!("error: {message}");
            ExitCode::from(code as u8)
        }
    }
}
