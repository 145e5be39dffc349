use std::io;
use std::path::PathBuf;

use thiserror::Error;

use stringnet::charsim::SimError;
use stringnet::fdref::FdError;
use stringnet::network::NetworkError;
use stringnet::scattering::ScatterError;
use stringnet::spectrum::SpectrumError;

/// Process exit codes.
pub mod exit {
    pub const OK: i32 = 0;
    pub const CONFIG: i32 = 1;
    pub const ILL_POSED: i32 = 2;
    pub const TOPOLOGY: i32 = 3;
    pub const TIMESTEP: i32 = 4;
    pub const IO: i32 = 5;
}

#[derive(Debug, Error)]
pub enum CliError {
    /// Bad or missing config value; `field` is a dotted path into the file.
    #[error("{file}: {field}: {message}")]
    Config {
        file: String,
        field: String,
        message: String,
    },
    #[error(transparent)]
    Network(#[from] NetworkError),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Spectrum(#[from] SpectrumError),
    #[error(transparent)]
    Fd(#[from] FdError),
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: io::Error },
}

impl CliError {
    pub fn config(file: &str, field: impl Into<String>, message: impl Into<String>) -> Self {
        CliError::Config {
            file: file.to_string(),
            field: field.into(),
            message: message.into(),
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: io::Error) -> Self {
        CliError::Io {
            path: path.into(),
            source,
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config { .. } => exit::CONFIG,
            CliError::Network(e) => network_code(e),
            CliError::Sim(e) => sim_code(e),
            CliError::Spectrum(SpectrumError::IllPosedAlpha { .. }) => exit::ILL_POSED,
            CliError::Spectrum(_) => exit::CONFIG,
            CliError::Fd(FdError::CourantViolation { .. }) => exit::TIMESTEP,
            CliError::Fd(FdError::Sim(e)) => sim_code(e),
            CliError::Fd(_) => exit::CONFIG,
            CliError::Io { .. } => exit::IO,
        }
    }
}

fn network_code(e: &NetworkError) -> i32 {
    match e {
        NetworkError::IllPosedAlpha { .. } => exit::ILL_POSED,
        e if e.is_topology() => exit::TOPOLOGY,
        _ => exit::CONFIG,
    }
}

fn sim_code(e: &SimError) -> i32 {
    match e {
        e if e.is_timestep() => exit::TIMESTEP,
        SimError::Scatter(ScatterError::SingularJunction { .. }) => exit::ILL_POSED,
        _ => exit::CONFIG,
    }
}
