use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use stringnet_cli::commands;
use stringnet_cli::config::SpectrumConfig;
use stringnet_cli::{exit, CliError, RunConfig};

#[derive(Parser)]
#[command(name = "stringnet", version, about = "Damped wave networks on trees: timing, simulation and spectra")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check topology and well-posedness.
    Validate(Common),
    /// Clearing times, root and tree times, predicted extinction.
    Timing(Common),
    /// Run the characteristic simulator and write traces.
    Simulate(Common),
    /// Eigenvalue ladder and optional damping sweep.
    Spectrum(Common),
    /// Compare the simulator with the finite-difference solver.
    Crosscheck(Common),
}

#[derive(Args)]
struct Common {
    #[arg(long, value_name = "PATH")]
    config: PathBuf,
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
    #[arg(long)]
    dt: Option<f64>,
    #[arg(long)]
    horizon: Option<f64>,
    #[arg(long)]
    epsilon: Option<f64>,
    #[arg(long)]
    stride: Option<usize>,
    /// alpha1=START:STOP:STEP[,alpha2=START:STOP:STEP]
    #[arg(long, value_name = "SPEC")]
    sweep: Option<String>,
}

impl Common {
    fn load(&self) -> Result<RunConfig, CliError> {
        let mut cfg = RunConfig::load(&self.config)?;
        if self.out.is_some() {
            cfg.output = self.out.clone();
        }
        cfg.dt = self.dt.or(cfg.dt);
        cfg.horizon = self.horizon.or(cfg.horizon);
        cfg.epsilon = self.epsilon.or(cfg.epsilon);
        cfg.stride = self.stride.unwrap_or(cfg.stride);
        if let Some(sweep) = &self.sweep {
            cfg.spectrum.get_or_insert_with(SpectrumConfig::default).sweep = Some(sweep.clone());
        }
        Ok(cfg)
    }
}

fn dispatch(command: Command) -> Result<(), CliError> {
    let stdout = std::io::stdout();
    let mut out = stdout.lock();
    match command {
        Command::Validate(c) => commands::validate(&c.load()?, &mut out).map(drop),
        Command::Timing(c) => commands::timing(&c.load()?, &mut out).map(drop),
        Command::Simulate(c) => commands::simulate(&c.load()?, &mut out).map(drop),
        Command::Spectrum(c) => commands::spectrum(&c.load()?, &mut out).map(drop),
        Command::Crosscheck(c) => commands::crosscheck_command(&c.load()?, &mut out).map(drop),
    }?;
    out.flush().map_err(|e| CliError::io("<stdout>", e))
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            // clap uses 2 for usage errors, which here means ill-posed.
            return ExitCode::from(if e.use_stderr() { exit::CONFIG as u8 } else { exit::OK as u8 });
        }
    };
    match dispatch(cli.command) {
        Ok(()) => ExitCode::from(exit::OK as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
