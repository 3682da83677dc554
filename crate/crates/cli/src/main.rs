//! Batch pipeline driver: simulation, ingestion, identification, tracking,
//! environmental correlation, level statistics, event extraction, tilt and
//! reporting. Exit codes: 0 success, 1 usage/config error, 2 data error,
//! 3 insufficient data.

mod commands;
mod config;
mod error;
mod manifest;
mod svg;

use std::path::PathBuf;

use clap::error::ErrorKind;
use clap::{Parser, Subcommand};

use commands::identify::Method;
use error::CliResult;

#[derive(Parser)]
#[command(
    name = "ambvib",
    version,
    about = "Ambient vibration monitoring pipeline",
    propagate_version = true
)]
struct Cli {
    /// Pipeline configuration (TOML); builtin defaults when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic campaign with a ground-truth sidecar.
    Simulate {
        /// ambient | base-drive | quiet-city | bells.
        #[arg(long)]
        scenario: Option<String>,
        #[arg(long)]
        duration_s: Option<f64>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Normalize a raw waveform CSV into the campaign layout.
    Ingest {
        #[arg(long)]
        raw: PathBuf,
        /// Digitizer gain, volts per count.
        #[arg(long, default_value_t = 1.0)]
        gain: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Hourly modal identification (SSI or CMIF).
    Identify {
        #[arg(long, value_enum, default_value = "ssi")]
        method: Method,
        /// Campaign directory (default: $AMBVIB_ROOT, then the config).
        data: Option<PathBuf>,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Assign per-window estimates to baseline modes.
    Track {
        #[arg(long)]
        modes: PathBuf,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Correlate a trajectory with an environmental series.
    Correlate {
        #[arg(long)]
        traj: PathBuf,
        #[arg(long, default_value = "f1")]
        label: String,
        #[arg(long)]
        env: Option<PathBuf>,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Hourly maxima and daily averages of acceleration levels.
    Levels {
        data: Option<PathBuf>,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// STA/LTA and teleseism detection with catalog matching.
    Events {
        data: Option<PathBuf>,
        #[arg(long)]
        catalog: Option<PathBuf>,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Low-frequency tilt and the x/y daily phase shift.
    Tilt {
        data: Option<PathBuf>,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Time-frequency power matrix of one channel.
    Spectrogram {
        data: Option<PathBuf>,
        #[arg(long)]
        channel: Option<String>,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Per-mode campaign summary table (and optional SVG).
    Report {
        #[arg(long)]
        traj: PathBuf,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        #[arg(long)]
        svg: bool,
    },
}

fn run(cli: Cli) -> CliResult<()> {
    let lc = config::load(cli.config.as_deref())?;
    match cli.command {
        Command::Simulate { scenario, duration_s, seed, out } => {
            commands::simulate::run(&lc, scenario.as_deref(), duration_s, seed, &out)
        }
        Command::Ingest { raw, gain, out } => commands::ingest::run(&lc, &raw, gain, &out),
        Command::Identify { method, data, out } => {
            let data = commands::resolve_data_dir(data, &lc.config);
            commands::identify::run(&lc, method, &data, &out)
        }
        Command::Track { modes, out } => commands::track::run(&lc, &modes, &out),
        Command::Correlate { traj, label, env, out } => {
            commands::correlate::run(&lc, &traj, &label, env.as_deref(), &out)
        }
        Command::Levels { data, out } => {
            let data = commands::resolve_data_dir(data, &lc.config);
            commands::levels::run(&lc, &data, &out)
        }
        Command::Events { data, catalog, out } => {
            let data = commands::resolve_data_dir(data, &lc.config);
            commands::events::run(&lc, &data, catalog.as_deref(), &out)
        }
        Command::Tilt { data, out } => {
            let data = commands::resolve_data_dir(data, &lc.config);
            commands::tilt::run(&lc, &data, &out)
        }
        Command::Spectrogram { data, channel, out } => {
            let data = commands::resolve_data_dir(data, &lc.config);
            commands::spectrogram::run(&lc, &data, channel.as_deref(), &out)
        }
        Command::Report { traj, out, svg } => commands::report::run(&lc, &traj, &out, svg),
    }
}

fn main() {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            std::process::exit(code);
        }
    };
    if let Err(e) = run(cli) {
        eprintln!("error: {e}");
        std::process::exit(e.exit_code());
    }
}
