mod commands;
mod config;
mod error;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use crate::commands::Kind;
use crate::error::{CliError, CliResult};

/// Anisotropic Minkowski contents: estimates, exact perimeters, generators and
/// diagnostics. Outputs are CSV and JSON files in --out.
#[derive(Parser)]
#[command(name = "mcontent", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// JSON configuration document.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Overrides the config's seed.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Output directory.
    #[arg(long, global = true, default_value = ".")]
    out: PathBuf,

    /// Worker threads; 0 picks one per core.
    #[arg(long, global = true, default_value_t = 0)]
    threads: usize,
}

#[derive(Subcommand)]
enum Command {
    /// Outer Q-Minkowski content of a shape, packing or scene over an r-schedule.
    Estimate,
    /// Minkowski content λ(E ⊕ rQ)/(2r) of a thin sheet.
    Content,
    /// Exact anisotropic perimeters P_Q, P_◊Q and the isotropic perimeter.
    Perimeter,
    /// Ball packings and the product/scene constructions.
    Generate {
        #[arg(value_enum)]
        kind: Kind,
    },
    /// AFP condition relative to a plane, or the isotropic diagnostic.
    Afp {
        #[arg(long)]
        isotropic: bool,
    },
    /// Covariogram along u and its one-sided derivative at 0.
    Covariogram,
}

fn run(cli: Cli) -> CliResult<Vec<PathBuf>> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(cli.threads)
        .build_global()
        .map_err(|e| CliError::Config(format!("cannot start {} threads: {e}", cli.threads)))?;
    let path = cli.config.as_deref();
    let outputs = match cli.command {
        Command::Estimate | Command::Content => {
            let mut cfg: config::EstimateConfig = config::load(path)?;
            cfg.seed = cli.seed.unwrap_or(cfg.seed);
            commands::estimate(cfg, path, matches!(cli.command, Command::Content))?
        }
        Command::Perimeter => commands::perimeter(config::load(path)?)?,
        Command::Generate { kind } => {
            let mut cfg: config::GenerateConfig = config::load(path)?;
            cfg.seed = cli.seed.unwrap_or(cfg.seed);
            commands::generate(kind, cfg)?
        }
        Command::Afp { isotropic } => {
            let mut cfg: config::AfpConfig = config::load(path)?;
            cfg.seed = cli.seed.unwrap_or(cfg.seed);
            cfg.isotropic |= isotropic;
            commands::afp(cfg, path)?
        }
        Command::Covariogram => {
            let mut cfg: config::CovariogramConfig = config::load(path)?;
            cfg.seed = cli.seed.unwrap_or(cfg.seed);
            commands::covariogram(cfg)?
        }
    };
    outputs.commit(&cli.out)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(files) => {
            for f in files {
                println!("{}", f.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("mcontent: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
