//! `relsz`: command-line front end for the relsz library.
//!
//! Every subcommand writes one JSON report (or a CSV for `sweep`) that
//! embeds the configuration that produced it. Exit codes: 0 on success,
//! 1 when a computation breaks an internal check, 2 on bad input or a
//! violated precondition, 3 when a resource budget is exceeded.

mod commands;
mod measure;
mod output;
mod sweep;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use relsz::forms::LfcMode;
use relsz::regularity::OracleMode;
use relsz::Error;
use serde::Serialize;

#[derive(Parser, Debug)]
#[command(name = "relsz", version, about = "Finite-scale relative hypergraph removal and regularity")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug, Serialize)]
#[serde(tag = "command", rename_all = "kebab-case")]
pub enum Command {
    /// Check the linear forms condition for a measure.
    Lfc(commands::LfcArgs),
    /// Gowers uniformity norms of a measure on Z_N and of its balanced part.
    Gowers(commands::GowersArgs),
    /// k-term progression density of a measure on Z_N.
    ApDensity(commands::ApDensityArgs),
    /// Build the hypergraph of an arithmetic pattern.
    Reduce(commands::ReduceArgs),
    /// The corner graphs of a random corner-free set.
    CornerGraphs(commands::CornerGraphsArgs),
    /// Weak regularity decomposition of every edge of a weighted hypergraph.
    RegDecompose(commands::RegDecomposeArgs),
    /// Compare the H-densities of g and a dense model g̃.
    Count(commands::CountArgs),
    /// Relative removal of copies of H from g.
    Removal(commands::RemovalArgs),
    /// Run a grid of measurements and write one CSV row per cell.
    Sweep(sweep::SweepArgs),
}

/// Flags shared by every subcommand.
#[derive(Args, Debug, Clone, Serialize)]
pub struct Common {
    /// Seed for every random choice.
    #[arg(long, env = "RELSZ_SEED", default_value_t = 0)]
    pub seed: u64,
    /// Largest intermediate tensor, as log2 of its entry count.
    #[arg(long, default_value_t = 27)]
    pub memory_log2: u32,
    /// Largest pattern enumeration, as log2 of the pattern count.
    #[arg(long, default_value_t = 24)]
    pub pattern_cap_log2: u32,
    /// Write the report here instead of standard output.
    #[arg(long, visible_alias = "report")]
    pub out: Option<PathBuf>,
    /// Include per-item listings in reports.
    #[arg(long)]
    pub verbose: bool,
}

#[derive(ValueEnum, Clone, Copy, Debug, Serialize, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
pub enum ModeArg {
    Full,
    Weak,
    Sampled,
}

#[derive(ValueEnum, Clone, Copy, Debug, Serialize, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
pub enum OracleArg {
    Exact,
    Ascent,
}

impl OracleArg {
    pub fn mode(self, seed: u64, restarts: usize) -> OracleMode {
        match self {
            OracleArg::Exact => OracleMode::Exact,
            OracleArg::Ascent => OracleMode::Ascent { seed, restarts },
        }
    }
}

impl ModeArg {
    pub fn mode(self, edge: usize, samples: usize, seed: u64) -> LfcMode {
        match self {
            ModeArg::Full => LfcMode::Full,
            ModeArg::Weak => LfcMode::Weak { edge },
            ModeArg::Sampled => LfcMode::Sampled { samples, seed },
        }
    }
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Resource(_) => 3,
        Error::Numeric(_) | Error::Invariant(_) => 1,
        _ => 2,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match commands::dispatch(&cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("relsz: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
