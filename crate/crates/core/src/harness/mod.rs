//! End-to-end experiment harness: scenario simulation, the graph estimator
//! and the RTK-only baseline, RMS evaluation against ground truth, and the
//! elevation-mask sweep with its CSV artifacts.

mod estimate;
mod metrics;
mod sim;
mod sweep;

pub use estimate::{
    proposed_states, run_proposed, run_rtk_only_baseline, solve_epochs, validate_fixes,
    EpochSolve, FixValidation, SeriesPoint,
};
pub use metrics::{evaluate, truth_rows, MetricsReport};
pub use sim::{apply_mask, simulate, MaskedWorld, SimulatedWorld};
pub use sweep::{run_mask_sweep, ExperimentConfig, SweepOutcome};

use crate::csvio::CsvError;
use crate::graph::GraphError;
use crate::scenario::ScenarioError;
use crate::truck::TruckError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
    #[error(transparent)]
    Truck(#[from] TruckError),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Csv(#[from] CsvError),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("no overlapping epochs between series and ground truth")]
    EmptyOverlap,
    #[error("estimation failed: {0}")]
    EstimationFailed(String),
    #[error("invalid config: {0}")]
    Config(String),
}

/// Which estimator to run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EstimatorKind {
    Proposed,
    RtkOnly,
}

impl EstimatorKind {
    pub fn name(&self) -> &'static str {
        match self {
            EstimatorKind::Proposed => "proposed",
            EstimatorKind::RtkOnly => "rtk_only",
        }
    }
}
