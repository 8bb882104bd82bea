//! Double-difference RTK engine.
//!
//! The pipeline per epoch and receiver pair: form double differences against
//! a per-system reference satellite ([`form_double_differences`]), solve the
//! float least-squares problem over (baseline, ambiguities)
//! ([`float_solution`]), resolve the ambiguities to integers by
//! decorrelated integer least squares ([`resolve_ambiguities`]), validate
//! with the ratio test, and re-solve the baseline with the integers held
//! fixed. The same machinery runs against the fixed base station
//! ([`rtk_solve`]) and between two rover antennas with one of them acting as
//! a moving base ([`moving_base_solve`]). [`doppler_velocity`] estimates the
//! receiver velocity from Doppler, and [`single_point_position`] provides
//! the pseudorange-only initialization.

mod dd;
mod lambda;
mod lsq;
mod solve;

pub use dd::form_double_differences;
pub use lambda::resolve_ambiguities;
pub use lsq::{doppler_velocity, float_solution, single_point_position};
pub use solve::{moving_base_solve, rtk_solve};

use crate::sky::SatelliteId;
use nalgebra::{DMatrix, DVector, Vector3};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum RtkError {
    #[error("insufficient satellites: need {needed}, have {got}")]
    InsufficientSatellites { needed: usize, got: usize },
    #[error("singular geometry: normal matrix condition {condition:.3e}")]
    SingularGeometry { condition: f64 },
    #[error("no convergence after {0} iterations")]
    NoConvergence(usize),
    #[error("ambiguity search exceeded {0} candidates")]
    SearchOverflow(usize),
    #[error("covariance is not positive definite")]
    NotPositiveDefinite,
    #[error("satellite {0} missing from sky data")]
    MissingSatellite(SatelliteId),
}

/// Solver settings with the conventional defaults.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct RtkConfig {
    /// Per-observation carrier phase sigma used for weighting, meters.
    pub phase_sigma_m: f64,
    /// Per-observation pseudorange sigma used for weighting, meters.
    pub code_sigma_m: f64,
    /// Ratio-test acceptance threshold.
    pub ratio_threshold: f64,
    /// Float-stage iteration cap.
    pub max_iterations: usize,
    /// Float-stage convergence threshold on the position update, meters.
    pub convergence_m: f64,
    /// Normalized chi-square gate on fixed-solution phase residuals; a fix
    /// whose residuals exceed it is downgraded to float.
    pub residual_gate: f64,
}

impl Default for RtkConfig {
    fn default() -> Self {
        Self {
            phase_sigma_m: 0.005,
            code_sigma_m: 0.5,
            ratio_threshold: 3.0,
            max_iterations: 20,
            convergence_m: 1e-4,
            residual_gate: 25.0,
        }
    }
}

/// One double-difference observation. `reference` is the highest-elevation
/// common satellite of its system for the epoch; differences are
/// (rover - base) then (reference - other).
#[derive(Debug, Clone, Copy)]
pub struct DdObservation {
    pub reference: SatelliteId,
    pub other: SatelliteId,
    pub dd_phase_m: f64,
    pub dd_pseudorange_m: f64,
    pub wavelength_m: f64,
    pub elevation_ref_deg: f64,
    pub elevation_other_deg: f64,
}

impl DdObservation {
    /// Modeled DD variance from the elevation-dependent per-observation
    /// model, for a given per-observation sigma.
    pub fn dd_variance(&self, sigma: f64) -> f64 {
        let s2 = sigma * sigma;
        let inv = |el_deg: f64| {
            let s = el_deg.to_radians().sin();
            1.0 / (s * s)
        };
        2.0 * s2 * (inv(self.elevation_ref_deg) + inv(self.elevation_other_deg))
    }
}

/// Float least-squares solution over (baseline, DD ambiguities).
#[derive(Debug, Clone)]
pub struct FloatSolution {
    /// Rover-minus-base vector, ENU meters.
    pub baseline: Vector3<f64>,
    /// Converged rover position, ENU meters.
    pub rover_position: Vector3<f64>,
    /// Float DD ambiguities, cycles, ordered like the DD list.
    pub float_ambiguities: DVector<f64>,
    /// Covariance over (baseline, ambiguities), symmetric positive definite.
    pub covariance: DMatrix<f64>,
}

impl FloatSolution {
    /// Marginal covariance of the ambiguity block.
    pub fn ambiguity_covariance(&self) -> DMatrix<f64> {
        let n = self.float_ambiguities.len();
        self.covariance.view((3, 3), (n, n)).into_owned()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FixStatus {
    Fix,
    Float,
    None,
}

impl std::fmt::Display for FixStatus {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            FixStatus::Fix => write!(f, "FIX"),
            FixStatus::Float => write!(f, "FLOAT"),
            FixStatus::None => write!(f, "NONE"),
        }
    }
}

/// Result of an RTK solve (fixed-base or moving-base).
#[derive(Debug, Clone)]
pub struct RtkSolution {
    /// Rover-minus-base vector, ENU meters.
    pub baseline: Vector3<f64>,
    /// Rover position (base position plus baseline), ENU meters.
    pub rover_position: Vector3<f64>,
    pub status: FixStatus,
    /// Ratio-test statistic (second-best over best ambiguity residual).
    pub ratio: f64,
    /// Integer DD ambiguities when status is FIX, ordered like `sat_pairs`.
    pub fixed_ambiguities: Option<Vec<i64>>,
    /// (reference, other) per DD, for diagnostics and truth validation.
    pub sat_pairs: Vec<(SatelliteId, SatelliteId)>,
    /// Distinct satellites used.
    pub n_sats: usize,
    /// Why the solve produced no solution, when status is NONE.
    pub diagnostic: Option<RtkError>,
}

impl RtkSolution {
    pub(crate) fn none(diagnostic: RtkError) -> Self {
        Self {
            baseline: Vector3::zeros(),
            rover_position: Vector3::zeros(),
            status: FixStatus::None,
            ratio: 0.0,
            fixed_ambiguities: None,
            sat_pairs: Vec::new(),
            n_sats: 0,
            diagnostic: Some(diagnostic),
        }
    }
}

/// Receiver velocity from an epoch of Doppler observations.
#[derive(Debug, Clone, Copy)]
pub struct VelocitySolution {
    /// ENU velocity, m/s.
    pub velocity: Vector3<f64>,
    /// Estimated receiver clock drift, range-rate units (m/s).
    pub clock_drift_mps: f64,
    pub n_sats: usize,
}

/// Ratio-test acceptance: the fix is trusted when the second-best integer
/// candidate is at least `threshold` times worse than the best.
pub fn ratio_test(ratio: f64, threshold: f64) -> bool {
    ratio >= threshold
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ratio_test_boundary_is_accepted() {
        assert!(ratio_test(3.0, 3.0));
        assert!(!ratio_test(2.9, 3.0));
        assert!(ratio_test(f64::INFINITY, 3.0));
    }
}
