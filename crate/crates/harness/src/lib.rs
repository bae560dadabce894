//! Experiment harness for the tank lab: the mixed online/offline control
//! loop, fault-scenario protocols, CSV logging, and chart output.

pub mod config;
pub mod experiments;
pub mod plot;
pub mod report;
pub mod run;

use thiserror::Error;

use tanklab_core::agent::{AgentError, BufferError};
use tanklab_core::env::EnvError;
use tanklab_core::nn::NnError;
use tanklab_core::sim::SimError;
use tanklab_core::surrogate::SurrogateError;

/// Process exit code for configuration problems.
pub const EXIT_CONFIG: u8 = 1;
/// Process exit code for I/O and malformed-file problems.
pub const EXIT_IO: u8 = 2;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error(transparent)]
    Config(#[from] config::ConfigError),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Env(#[from] EnvError),
    #[error(transparent)]
    Agent(#[from] AgentError),
    #[error(transparent)]
    Buffer(#[from] BufferError),
    #[error(transparent)]
    Nn(#[from] NnError),
    #[error(transparent)]
    Surrogate(#[from] SurrogateError),
    #[error("io failed for {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("bad csv at {path}:{line}: {message}")]
    Csv { path: String, line: usize, message: String },
}

impl HarnessError {
    /// Maps the error to the CLI exit code: I/O and file-format problems
    /// exit 2, everything else is a configuration error and exits 1.
    pub fn exit_code(&self) -> u8 {
        match self {
            HarnessError::Io { .. } | HarnessError::Csv { .. } => EXIT_IO,
            HarnessError::Nn(NnError::Io { .. }) => EXIT_IO,
            HarnessError::Surrogate(SurrogateError::Io { .. })
            | HarnessError::Surrogate(SurrogateError::Csv { .. }) => EXIT_IO,
            _ => EXIT_CONFIG,
        }
    }
}
