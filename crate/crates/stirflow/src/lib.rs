//! Experiment runner and command-line plumbing for `stirflow-core`.
//!
//! A JSON [`config::ExperimentConfig`] describes one stirring experiment.
//! [`run::run`] builds the flow, runs the selected diagnostics and writes
//! CSV and JSON artifacts; [`acceptance`] holds the reference checks.

pub mod acceptance;
pub mod config;
pub mod output;
pub mod provenance;
pub mod run;

use std::path::PathBuf;

use stirflow_core::braid::BraidError;
use stirflow_core::diagnostics::DiagnosticsError;
use stirflow_core::field::FieldError;
use stirflow_core::protocol::ProtocolError;
use stirflow_core::transport::TransportError;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("cannot read {}: {source}", .path.display())]
    Read {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("cannot write {}: {source}", .path.display())]
    Write {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{0}")]
    Config(String),
    #[error("braid: {0}")]
    Braid(#[from] BraidError),
    #[error("protocol: {0}")]
    Protocol(#[from] ProtocolError),
    #[error("field: {0}")]
    Field(#[from] FieldError),
    #[error("transport: {0}")]
    Transport(#[from] TransportError),
    #[error("diagnostics: {0}")]
    Diagnostics(#[from] DiagnosticsError),
    #[error("{} threshold(s) failed: {}", .0.len(), .0.join("; "))]
    Thresholds(Vec<String>),
}

impl Error {
    /// Process exit status: 2 for bad input, 3 for numerical failures,
    /// 1 for failed thresholds.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Read { .. } | Error::Write { .. } | Error::Config(_) => 2,
            Error::Braid(_) | Error::Protocol(_) => 2,
            Error::Field(_) | Error::Transport(_) | Error::Diagnostics(_) => 3,
            Error::Thresholds(_) => 1,
        }
    }
}
