//! Monte Carlo orchestration: scenario configs, multi-run simulations,
//! parameter sweeps and file output.

pub mod config;
pub mod output;
pub mod scenario;
pub mod sweep;

pub use config::{ResolvedConfig, ScenarioConfig};
pub use scenario::{compare_sse_steady, run_scenario, RunRecord, ScenarioResult, ScenarioSummary, SseComparison};
pub use sweep::{sweep_mismatch, sweep_omega_bias, sweep_omega_optbias, sweep_tau_n, OptimalBiasSweep, SweepPoint, SweepResult};

use crate::bath::BathError;
use crate::cpt::CptError;
use crate::crlb::CrlbError;
use crate::estimators::EstimatorError;
use crate::photon::PhotonError;
use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("config: {0}")]
    Config(String),
    #[error("io: {0}")]
    Io(String),
    #[error(transparent)]
    Cpt(#[from] CptError),
    #[error(transparent)]
    Bath(#[from] BathError),
    #[error(transparent)]
    Photon(#[from] PhotonError),
    #[error(transparent)]
    Estimator(#[from] EstimatorError),
    #[error(transparent)]
    Crlb(#[from] CrlbError),
    #[error("run {run}: {source}")]
    Run {
        run: usize,
        #[source]
        source: Box<HarnessError>,
    },
}

impl From<std::io::Error> for HarnessError {
    fn from(e: std::io::Error) -> Self {
        HarnessError::Io(e.to_string())
    }
}

impl From<serde_json::Error> for HarnessError {
    fn from(e: serde_json::Error) -> Self {
        HarnessError::Io(e.to_string())
    }
}

/// Machine-readable form written to stderr by the CLI.
#[derive(Debug, Serialize)]
pub struct ErrorReport {
    pub error: &'static str,
    pub message: String,
}

impl HarnessError {
    pub fn kind(&self) -> &'static str {
        match self {
            HarnessError::Config(_) => "config",
            HarnessError::Io(_) => "io",
            HarnessError::Cpt(_) => "cpt",
            HarnessError::Bath(_) => "bath",
            HarnessError::Photon(_) => "photon",
            HarnessError::Estimator(_) => "estimator",
            HarnessError::Crlb(_) => "crlb",
            HarnessError::Run { source, .. } => source.kind(),
        }
    }

    pub fn report(&self) -> ErrorReport {
        ErrorReport { error: self.kind(), message: self.to_string() }
    }

    pub(crate) fn in_run(self, run: usize) -> Self {
        HarnessError::Run { run, source: Box::new(self) }
    }
}
