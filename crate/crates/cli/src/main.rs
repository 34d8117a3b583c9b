mod commands;
mod config;
mod plot;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser)]
#[command(name = "blindsr", version, about = "Blind super-resolution user detection and channel estimation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one trial and dump every artifact.
    Simulate(RunArgs),
    /// Monte-Carlo sweep over SNR or antenna count.
    Sweep(RunArgs),
    /// Write the dual polynomial norm on its evaluation grid.
    Spectrum(RunArgs),
    /// Run one of the built-in experiment presets.
    Demo(RunArgs),
    /// Cross-check the dual solver against the on-grid primal oracle.
    Oracle(RunArgs),
}

#[derive(Clone, Copy, ValueEnum)]
pub enum Preset {
    Exp1,
    Exp2,
}

impl Preset {
    fn name(self) -> &'static str {
        match self {
            Preset::Exp1 => "exp1",
            Preset::Exp2 => "exp2",
        }
    }
}

#[derive(Args, Clone, Default)]
pub struct RunArgs {
    /// JSON experiment config; flags override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Master seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Trials per sweep point.
    #[arg(long)]
    trials: Option<usize>,
    /// Comma-separated SNR values in dB (`inf` for noiseless).
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    snr: Option<Vec<f64>>,
    /// Comma-separated antenna counts.
    #[arg(long, value_delimiter = ',')]
    antennas: Option<Vec<usize>>,
    /// Worker threads (0 = all cores).
    #[arg(long)]
    jobs: Option<usize>,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    #[arg(long, value_enum)]
    preset: Option<Preset>,
    /// Angle estimator by registry name.
    #[arg(long)]
    estimator: Option<String>,
    /// Record per-trial wall-clock time (makes output non-reproducible).
    #[arg(long)]
    timing: bool,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Simulate(a) => commands::simulate(&a),
        Command::Sweep(a) => commands::sweep(&a),
        Command::Spectrum(a) => commands::spectrum(&a),
        Command::Demo(a) => commands::demo(&a),
        Command::Oracle(a) => commands::oracle(&a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
