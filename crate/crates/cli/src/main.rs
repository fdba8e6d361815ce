//! `gridtune` — inverter current-control episodes, safe PI-gain tuning,
//! landscape sweeps, and surrogate dumps from a single binary.

mod commands;
mod config;

use clap::{Parser, Subcommand};
use commands::CliError;
use config::{CliConfig, Mode};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "gridtune",
    version,
    about = "Grid-forming inverter PI current control: simulation and safe gain tuning"
)]
struct Cli {
    /// Key=value config file; built-in defaults apply when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Override the rng_seed config key (stamped into output files).
    #[arg(long, global = true)]
    seed: Option<u64>,

    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run one episode at fixed gains and write the waveform CSV.
    Episode {
        /// Proportional gain (default: seed_kp from config).
        #[arg(long)]
        kp: Option<f64>,
        /// Integral gain (default: seed_ki from config).
        #[arg(long)]
        ki: Option<f64>,
        /// Output CSV path.
        #[arg(long, default_value = "episode.csv")]
        out: PathBuf,
    },
    /// Run the safe tuning loop; writes history.csv and gp_ep{k}.csv files.
    Tune {
        /// Search space: "1d" (Ki only) or "2d" (Kp and Ki).
        #[arg(long, value_enum)]
        mode: Mode,
        /// Output directory (created if missing).
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
    /// Sweep the gain box on a uniform grid and write kp,ki,j rows.
    Landscape {
        /// Grid resolution: "KPxKI" (e.g. 60x60) or one count for both axes.
        #[arg(long)]
        resolution: Option<String>,
        /// Output CSV path.
        #[arg(long, default_value = "landscape.csv")]
        out: PathBuf,
    },
    /// Rebuild the surrogate after a recorded episode and dump it over the grid.
    GpDump {
        /// history.csv produced by the tune command.
        #[arg(long)]
        history: PathBuf,
        /// Episode whose post-measurement state to reconstruct (0 = seed).
        #[arg(long)]
        episode_index: usize,
        /// Output CSV path.
        #[arg(long, default_value = "gp_dump.csv")]
        out: PathBuf,
    },
}

fn load_config(cli: &Cli) -> Result<CliConfig, CliError> {
    let mut cfg = match &cli.config {
        Some(path) => CliConfig::from_file(path).map_err(CliError::Usage)?,
        None => CliConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.rng_seed = seed;
    }
    Ok(cfg)
}

fn run(cli: &Cli) -> Result<(), CliError> {
    let cfg = load_config(cli)?;
    match &cli.cmd {
        Cmd::Episode { kp, ki, out } => commands::cmd_episode(&cfg, *kp, *ki, out),
        Cmd::Tune { mode, out } => commands::cmd_tune(&cfg, *mode, out),
        Cmd::Landscape { resolution, out } => {
            commands::cmd_landscape(&cfg, resolution.as_deref(), out)
        }
        Cmd::GpDump { history, episode_index, out } => {
            commands::cmd_gp_dump(&cfg, history, *episode_index, out)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // clap's message already distinguishes --help/--version from
            // genuine usage errors; map the latter to exit code 1.
            let is_help = matches!(
                e.kind(),
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion
            );
            let _ = e.print();
            return if is_help { ExitCode::SUCCESS } else { ExitCode::from(1) };
        }
    };
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(err.code() as u8)
        }
    }
}
