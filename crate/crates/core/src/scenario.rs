//! Scenario asset files: the site, base station, constellation orbit table,
//! trajectory and error budget that define a reproducible simulation.
//!
//! Assets are TOML (key-value sections plus an orbit table). The default
//! scenario is generated programmatically and also ships as a versioned
//! asset file; a round-trip test keeps the two in sync.

use crate::geodesy::{EnuPoint, GeodeticPoint};
use crate::obs::ErrorBudget;
use crate::sky::{build_constellation, OrbitSpec, SystemCounts};
use crate::truck::{AntennaGeometry, TrajectorySpec};
use serde::{Deserialize, Serialize};
use std::path::Path;
use thiserror::Error;

/// Current asset format version.
pub const SCENARIO_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("parse error: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("serialize error: {0}")]
    Serialize(#[from] toml::ser::Error),
    #[error("unsupported scenario version {found} (expected {SCENARIO_VERSION})")]
    Version { found: u32 },
    #[error("invalid scenario: {0}")]
    Invalid(String),
}

/// A complete simulation scenario.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub version: u32,
    /// ENU origin; also the base station location (the base antenna sits
    /// `base_height_m` above it).
    pub site: GeodeticPoint,
    pub base_height_m: f64,
    pub duration_s: f64,
    pub rate_hz: f64,
    /// Elevation mask applied even in "no mask" runs; receivers do not track
    /// at the horizon.
    pub base_mask_deg: f64,
    pub seed: u64,
    pub budget: ErrorBudget,
    pub geometry: AntennaGeometry,
    pub trajectory: TrajectorySpec,
    pub orbits: Vec<OrbitSpec>,
}

impl Scenario {
    /// The default 60 s, 10 Hz scenario with the tuned 24-satellite
    /// constellation and the S-curve trajectory.
    pub fn default_scenario() -> Self {
        let site = GeodeticPoint::new(38.25, 140.85, 120.0);
        let seed = 42;
        let trajectory = TrajectorySpec::default_s_curve();
        let duration_s = trajectory.duration_s();
        Self {
            version: SCENARIO_VERSION,
            site,
            base_height_m: 1.5,
            duration_s,
            rate_hz: 10.0,
            base_mask_deg: 10.0,
            seed,
            budget: ErrorBudget::default(),
            geometry: AntennaGeometry::default(),
            trajectory,
            orbits: build_constellation(seed, &SystemCounts::default(), &site),
        }
    }

    /// Base station antenna position in the scenario's ENU frame.
    pub fn base_position(&self) -> EnuPoint {
        EnuPoint::new(0.0, 0.0, self.base_height_m)
    }

    pub fn n_epochs(&self) -> usize {
        (self.duration_s * self.rate_hz).round() as usize + 1
    }

    pub fn dt(&self) -> f64 {
        1.0 / self.rate_hz
    }

    pub fn epoch_time(&self, epoch: usize) -> f64 {
        epoch as f64 / self.rate_hz
    }

    fn validate(&self) -> Result<(), ScenarioError> {
        if self.version != SCENARIO_VERSION {
            return Err(ScenarioError::Version {
                found: self.version,
            });
        }
        if !(self.rate_hz.is_finite() && self.rate_hz > 0.0)
            || !(self.duration_s.is_finite() && self.duration_s > 0.0)
        {
            return Err(ScenarioError::Invalid(
                "rate_hz and duration_s must be positive".into(),
            ));
        }
        if !(0.0..90.0).contains(&self.base_mask_deg) {
            return Err(ScenarioError::Invalid(format!(
                "base_mask_deg {} outside [0, 90)",
                self.base_mask_deg
            )));
        }
        if self.orbits.is_empty() {
            return Err(ScenarioError::Invalid("empty orbit table".into()));
        }
        Ok(())
    }

    pub fn to_toml_string(&self) -> Result<String, ScenarioError> {
        Ok(toml::to_string_pretty(self)?)
    }

    pub fn from_toml_str(s: &str) -> Result<Self, ScenarioError> {
        let scenario: Scenario = toml::from_str(s)?;
        scenario.validate()?;
        Ok(scenario)
    }

    pub fn save(&self, path: &Path) -> Result<(), ScenarioError> {
        std::fs::write(path, self.to_toml_string()?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, ScenarioError> {
        Self::from_toml_str(&std::fs::read_to_string(path)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_round_trips_through_toml() {
        let scenario = Scenario::default_scenario();
        let text = scenario.to_toml_string().unwrap();
        let back = Scenario::from_toml_str(&text).unwrap();
        assert_eq!(scenario, back);
    }

    #[test]
    fn default_scenario_shape() {
        let s = Scenario::default_scenario();
        assert_eq!(s.n_epochs(), 601);
        assert_eq!(s.orbits.len(), 24);
        assert!((s.dt() - 0.1).abs() < 1e-15);
    }

    /// The shipped asset must stay in sync with the programmatic default.
    #[test]
    fn shipped_asset_matches_programmatic_default() {
        let path = std::path::Path::new(env!("CARGO_MANIFEST_DIR"))
            .join("assets/default_scenario.toml");
        let shipped = Scenario::load(&path).unwrap();
        assert_eq!(shipped, Scenario::default_scenario());
    }

    #[test]
    fn version_mismatch_is_rejected() {
        let mut s = Scenario::default_scenario();
        s.version = 99;
        let text = toml::to_string_pretty(&s).unwrap();
        assert!(matches!(
            Scenario::from_toml_str(&text),
            Err(ScenarioError::Version { found: 99 })
        ));
    }

    #[test]
    fn bad_mask_is_rejected() {
        let mut s = Scenario::default_scenario();
        s.base_mask_deg = 95.0;
        let text = toml::to_string_pretty(&s).unwrap();
        assert!(matches!(
            Scenario::from_toml_str(&text),
            Err(ScenarioError::Invalid(_))
        ));
    }
}
