mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};

use config::Settings;

#[derive(Parser, Debug)]
#[command(name = "nhgauge", version, about = "Batch experiments on interacting non-Hermitian boson chains")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// TOML file with the same keys as the long flags (`L`, `N`, `gl`, ...).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(flatten)]
    settings: Settings,
}

#[derive(Subcommand, Debug, Clone, Copy)]
enum Command {
    /// Eigenvalues with residuals and per-state cluster weights.
    Spectrum,
    /// Many-body winding number around a base point (periodic chains).
    Winding,
    /// Density-density correlator rows for every eigenstate.
    Correlator,
    /// Edge accumulation of right eigenstates.
    Skin,
    /// Effective doublon chain compared against the bound sector.
    Doublon,
    /// Reality criterion against the doublon spectrum on a coupling grid.
    PhaseDiagram,
    /// Stroboscopic propagation against the effective Hamiltonian.
    Floquet,
}

impl Command {
    fn name(self) -> &'static str {
        match self {
            Command::Spectrum => "spectrum",
            Command::Winding => "winding",
            Command::Correlator => "correlator",
            Command::Skin => "skin",
            Command::Doublon => "doublon",
            Command::PhaseDiagram => "phase-diagram",
            Command::Floquet => "floquet",
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    let file = match &cli.config {
        Some(path) => Settings::from_file(path)?,
        None => Settings::default(),
    };
    let name = cli.command.name();
    let settings = file.overlaid(&cli.settings).resolve(name)?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(settings.threads.unwrap_or(0))
        .build_global()
        .context("starting the thread pool")?;
    let out = settings.out.clone().unwrap_or_default();
    std::fs::create_dir_all(&out).with_context(|| format!("creating {}", out.display()))?;
    commands::execute(name, &settings, &out)
}

fn exit_code(err: &anyhow::Error) -> u8 {
    let numerical = err.chain().filter_map(|e| e.downcast_ref::<nhgauge::Error>()).any(|e| e.is_numerical());
    if numerical {
        2
    } else {
        1
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(exit_code(&err))
        }
    }
}
