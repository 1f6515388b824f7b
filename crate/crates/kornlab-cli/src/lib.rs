//! Command-line front end for `kornlab`: bound tables, figure data,
//! verification and reproducible parameter runs.

pub mod commands;
pub mod config;
pub mod error;
pub mod output;
pub mod verify;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::commands::Family;
use crate::config::{parse_p_grid, Format, RunConfig};
use crate::error::{CliError, Result};
use crate::output::write_text;

#[derive(Debug, Parser)]
#[command(name = "kornlab", version, about = "Sharp constants for Korn-type inequalities")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[command(flatten)]
    pub flags: Flags,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Riesz and Korn bounds over a p grid.
    Bounds,
    /// Run the invariant suite; exit 1 on any failure.
    Verify,
    /// Write the figure data into --out (a directory).
    Figures,
    /// Closed-form witness quotients, optionally against the sampled field (--n).
    Witness,
    /// Korn identity residuals and quotients of seeded random fields.
    SpectralCheck,
    /// Bellman iteration table and dyadic tree search.
    Bellman,
    /// Planar two-direction convexification of the Korn integrand.
    Envelope,
    /// Gamma moments behind the witness bounds.
    Radial,
    /// Simonenko indices and Korn constants for Young functions.
    Orlicz,
    /// Finite-dimensional tensor constants.
    TensorConstants,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum FamilyArg {
    Power,
    Mixed,
    Tlog,
    Table,
}

#[derive(Debug, Args)]
pub struct Flags {
    /// Single exponent; overrides --p-grid.
    #[arg(long, global = true)]
    pub p: Option<f64>,
    /// Exponents as "a,b,c" or "lo:hi:count".
    #[arg(long, global = true)]
    pub p_grid: Option<String>,
    #[arg(long, global = true)]
    pub d: Option<usize>,
    /// Grid size (points per axis or cells, depending on the command).
    #[arg(long, global = true)]
    pub n: Option<usize>,
    #[arg(long, global = true)]
    pub k: Option<u32>,
    #[arg(long, global = true)]
    pub depth: Option<usize>,
    #[arg(long, global = true)]
    pub sweeps: Option<usize>,
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Output file, or directory for `figures`.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
    /// Flip one identity in `verify` to check that failures are reported.
    #[arg(long, global = true)]
    pub self_test_negate: bool,
    #[arg(long, global = true, value_enum, default_value_t = FamilyArg::Mixed)]
    pub family: FamilyArg,
    #[arg(long, global = true, default_value_t = 1.0)]
    pub lambda: f64,
    /// CSV of (t, phi, dphi) rows for `--family table`.
    #[arg(long, global = true)]
    pub table: Option<PathBuf>,
}

fn default_grid(command: &Command, family: FamilyArg) -> &'static str {
    match command {
        Command::Bounds | Command::Figures => "1.1:8:70",
        Command::Witness => "2,3,4",
        Command::SpectralCheck => "1.5,2,4",
        Command::Bellman | Command::Envelope => "4",
        Command::Radial => "2,3,4,8",
        Command::Orlicz if family == FamilyArg::Power => "2,3,4",
        Command::Orlicz => "1.2,1.5,1.8,2",
        Command::Verify | Command::TensorConstants => "2",
    }
}

fn command_name(command: &Command) -> &'static str {
    match command {
        Command::Bounds => "bounds",
        Command::Verify => "verify",
        Command::Figures => "figures",
        Command::Witness => "witness",
        Command::SpectralCheck => "spectral-check",
        Command::Bellman => "bellman",
        Command::Envelope => "envelope",
        Command::Radial => "radial",
        Command::Orlicz => "orlicz",
        Command::TensorConstants => "tensor-constants",
    }
}

pub fn run_config(cli: &Cli) -> Result<RunConfig> {
    let f = &cli.flags;
    let p_grid = match (f.p, &f.p_grid) {
        (Some(p), _) => parse_p_grid(&p.to_string())?,
        (None, Some(g)) => parse_p_grid(g)?,
        (None, None) => parse_p_grid(default_grid(&cli.command, f.family))?,
    };
    Ok(RunConfig {
        command: command_name(&cli.command).to_string(),
        p_grid,
        d: f.d,
        grid_n: f.n,
        k: f.k,
        depth: f.depth,
        sweeps: f.sweeps,
        seed: f.seed,
        output_path: f.out.clone(),
        format: f.format,
    })
}

/// What to print and the exit status.
#[derive(Debug)]
pub struct Outcome {
    pub stdout: String,
    pub exit_code: i32,
}

pub fn run(cli: &Cli) -> Result<Outcome> {
    let config = run_config(cli)?;
    if let Command::Verify = cli.command {
        let checks = verify::verify(config.seed, cli.flags.self_test_negate);
        let text = match config.format {
            Format::Csv => verify::report(&checks),
            Format::Json => serde_json::to_string_pretty(&checks).expect("json") + "\n",
        };
        let failed = checks.iter().filter(|c| !c.pass).count();
        let stdout = emit(&config, text)?;
        return Ok(Outcome { stdout, exit_code: if failed == 0 { 0 } else { 1 } });
    }
    let table = match cli.command {
        Command::Bounds => commands::bounds(&config)?,
        Command::Figures => {
            let index = commands::figures(&config)?;
            // The payload went to files; only the index is printed.
            let mut cfg = config.clone();
            cfg.output_path = None;
            return Ok(Outcome { stdout: index.render(&cfg), exit_code: 0 });
        }
        Command::Witness => commands::witness(&config)?,
        Command::SpectralCheck => commands::spectral_check(&config)?,
        Command::Bellman => commands::bellman(&config)?,
        Command::Envelope => commands::envelope(&config)?,
        Command::Radial => commands::radial(&config)?,
        Command::Orlicz => {
            let family = match cli.flags.family {
                FamilyArg::Power => Family::Power,
                FamilyArg::Mixed => Family::Mixed { lambda: cli.flags.lambda },
                FamilyArg::Tlog => Family::TLog,
                FamilyArg::Table => Family::Table(
                    cli.flags.table.clone().ok_or_else(|| CliError::Usage("--family table needs --table".into()))?,
                ),
            };
            commands::orlicz(&config, &family)?
        }
        Command::TensorConstants => commands::tensor_constants(&config)?,
        Command::Verify => unreachable!("handled above"),
    };
    let text = table.render(&config);
    Ok(Outcome { stdout: emit(&config, text)?, exit_code: 0 })
}

/// Writes to --out when given, otherwise returns the text for stdout.
fn emit(config: &RunConfig, text: String) -> Result<String> {
    match &config.output_path {
        Some(path) => {
            write_text(path, &text)?;
            Ok(String::new())
        }
        None => Ok(text),
    }
}
