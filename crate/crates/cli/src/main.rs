use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use qlg_cli::{load, run, Command, RunError};

#[derive(Parser)]
#[command(
    name = "qlg",
    version,
    about = "Quantum lattice gas simulator for the 1D/2D Burgers equation"
)]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// 1D lattice run, snapshots every `stride` steps
    Simulate1d(Flags),
    /// 2D lattice run
    Simulate2d(Flags),
    /// 1D finite-difference reference
    Fdm1d(Flags),
    /// 2D finite-difference reference
    Fdm2d(Flags),
    /// Cole-Hopf series solution sampled on the 1D grid
    Analytic(Flags),
    /// Measured and predicted viscosity over a range of theta
    ViscositySweep(Flags),
    /// Largest density jump over theta, grid sizes and horizons
    SteepnessSweep(Flags),
    /// MSE of a 1D lattice run against both analytic viscosities
    CompareAnalytic(Flags),
    /// L2 difference between 2D lattice and finite-difference runs
    #[command(name = "compare-2d")]
    Compare2d(Flags),
}

#[derive(Args)]
struct Flags {
    /// TOML config, or a manifest.json from an earlier run
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Dotted key override, e.g. collision.theta=1.2 (repeatable)
    #[arg(long = "override", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    /// Worker threads (default: all cores)
    #[arg(long)]
    threads: Option<usize>,
    /// Also write a gnuplot script for the outputs
    #[arg(long)]
    gnuplot: bool,
}

impl Cmd {
    fn split(self) -> (Command, Flags) {
        match self {
            Cmd::Simulate1d(f) => (Command::Simulate1d, f),
            Cmd::Simulate2d(f) => (Command::Simulate2d, f),
            Cmd::Fdm1d(f) => (Command::Fdm1d, f),
            Cmd::Fdm2d(f) => (Command::Fdm2d, f),
            Cmd::Analytic(f) => (Command::Analytic, f),
            Cmd::ViscositySweep(f) => (Command::ViscositySweep, f),
            Cmd::SteepnessSweep(f) => (Command::SteepnessSweep, f),
            Cmd::CompareAnalytic(f) => (Command::CompareAnalytic, f),
            Cmd::Compare2d(f) => (Command::Compare2d, f),
        }
    }
}

fn execute(command: Command, flags: &Flags) -> Result<(), RunError> {
    let cfg = load(flags.config.as_deref(), &flags.overrides)?;
    let report = run(command, &cfg, &flags.out, flags.gnuplot)?;
    eprintln!(
        "{}: wrote {} files to {} ({})",
        command.name(),
        report.outputs.len(),
        flags.out.display(),
        report.manifest.display()
    );
    Ok(())
}

fn main() -> ExitCode {
    let (command, flags) = Cli::parse().command.split();
    if let Some(n) = flags.threads {
        if n == 0 {
            eprintln!("error: --threads must be at least 1");
            return ExitCode::from(1);
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: --threads: {e}");
            return ExitCode::from(1);
        }
    }
    match execute(command, &flags) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
