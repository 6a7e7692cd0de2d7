//! `infotree` command-line front end.
//!
//! Exit codes: 0 success, 2 input or validation error, 3 numerical or solver
//! error. Errors are written to stderr as one JSON object.

mod commands;
mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;

#[derive(Debug, Parser)]
#[command(name = "infotree", version, about = "Option prices for traders with private information")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, clap::Args)]
struct Common {
    /// Run configuration (`key = value` lines).
    #[arg(long)]
    config: PathBuf,
    /// Overrides the configured seed.
    #[arg(long)]
    seed: Option<u64>,
    /// prop1, prop2, prop3, prop4, mv, logstable or lattice:MODE.
    #[arg(long, default_value = "prop1")]
    model: String,
    /// Output file; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Price the configured option.
    Price {
        #[command(flatten)]
        common: Common,
    },
    /// Lattice against closed form over a list of step counts.
    Converge {
        #[command(flatten)]
        common: Common,
        /// Comma-separated step counts.
        #[arg(long, default_value = "64,256,1024,4096")]
        n_list: String,
    },
    /// Implied information surface of an option chain.
    Calibrate {
        #[command(flatten)]
        common: Common,
        /// Chain CSV: strike,maturity_years,mid_price,spot,rate,vol.
        #[arg(long)]
        chain: PathBuf,
    },
    /// Seeded samples: subordinated paths, informed payoffs or the arbitrage diagnostic.
    Simulate {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum)]
        kind: SimKind,
        #[arg(long, default_value_t = 1000)]
        count: usize,
    },
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum SimKind {
    Paths,
    Payoffs,
    Diagnostic,
}

/// Error reported on stderr with its exit code.
#[derive(Debug, Serialize)]
pub struct CliError {
    #[serde(skip)]
    pub code: u8,
    pub kind: &'static str,
    pub message: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_dt: Option<f64>,
}

impl CliError {
    pub fn config(message: impl Into<String>) -> Self {
        CliError {
            code: 2,
            kind: "invalid_input",
            message: message.into(),
            max_dt: None,
        }
    }

    pub fn io(path: &std::path::Path, e: std::io::Error) -> Self {
        CliError {
            code: 2,
            kind: "io",
            message: format!("{}: {e}", path.display()),
            max_dt: None,
        }
    }

    pub fn numerical(message: impl Into<String>) -> Self {
        CliError {
            code: 3,
            kind: "numerical",
            message: message.into(),
            max_dt: None,
        }
    }
}

impl From<infotree::Error> for CliError {
    fn from(e: infotree::Error) -> Self {
        use infotree::Error as E;
        let kind = match &e {
            E::InvalidParameter { .. } => "invalid_parameter",
            E::ProbabilityOutOfRange { .. } => "probability_out_of_range",
            E::InformedOutOfRange { .. } => "informed_out_of_range",
            E::InadmissibleStep { .. } => "inadmissible_step",
            E::NonRecombining { .. } => "non_recombining",
            E::OutOfBand { .. } => "out_of_band",
            E::NoConvergence { .. } => "no_convergence",
            E::InsufficientData(_) => "insufficient_data",
            E::DegenerateDesign(_) => "degenerate_design",
            E::LengthMismatch { .. } => "length_mismatch",
        };
        let max_dt = match &e {
            E::InadmissibleStep { max_dt, .. } => Some(*max_dt),
            E::ProbabilityOutOfRange { max_dt, .. } => *max_dt,
            _ => None,
        };
        CliError {
            code: if e.is_validation() { 2 } else { 3 },
            kind,
            message: e.to_string(),
            max_dt,
        }
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Price { common } => commands::price(&common.into_ctx()?),
        Command::Converge { common, n_list } => commands::converge(&common.into_ctx()?, &n_list),
        Command::Calibrate { common, chain } => commands::calibrate(&common.into_ctx()?, &chain),
        Command::Simulate { common, kind, count } => commands::simulate(&common.into_ctx()?, kind, count),
    }
}

impl Common {
    fn into_ctx(self) -> Result<commands::Ctx, CliError> {
        let text = std::fs::read_to_string(&self.config).map_err(|e| CliError::io(&self.config, e))?;
        let config = config::RunConfig::parse(&text)?;
        let seed = self.seed.unwrap_or(config.seed);
        Ok(commands::Ctx {
            config,
            seed,
            model: self.model,
            out: self.out,
        })
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                print!("{e}");
                return ExitCode::SUCCESS;
            }
            let err = CliError::config(e.to_string().trim_end());
            eprintln!("{}", output::error_json(&err));
            return ExitCode::from(2);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("{}", output::error_json(&err));
            ExitCode::from(err.code)
        }
    }
}
