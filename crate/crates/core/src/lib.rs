//! State estimation for articulated six-wheeled dump trucks from four GNSS
//! antennas.
//!
//! The crate has three layers:
//!
//! * a synthetic world: [`sky`] (satellite constellation and visibility),
//!   [`truck`] (articulated kinematics and ground-truth trajectories) and
//!   [`obs`] (carrier phase / pseudorange / Doppler synthesis with a
//!   configurable error budget);
//! * an estimator: [`rtk`] (double-difference RTK with integer ambiguity
//!   resolution, moving-base RTK between antennas, Doppler velocity) and
//!   [`graph`] (factor graph over per-epoch antenna positions, dogleg
//!   trust-region solver);
//! * an experiment layer: [`scenario`] (asset files), [`harness`]
//!   (RTK-only baseline vs. graph estimator, elevation-mask sweeps, RMS
//!   metrics) and [`csvio`] (the CSV formats shared with the CLI).
//!
//! All estimation runs in a local east-north-up frame anchored at the fixed
//! base station ([`geodesy`]).

pub mod angle;
pub mod csvio;
pub mod geodesy;
pub mod graph;
pub mod harness;
pub mod obs;
pub mod rng;
pub mod rtk;
pub mod scenario;
pub mod sky;
pub mod truck;

pub use geodesy::{EcefPoint, EnuPoint, GeodeticPoint};
pub use scenario::Scenario;
