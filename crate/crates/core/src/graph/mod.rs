//! Factor graph over per-epoch antenna positions and its nonlinear
//! least-squares solver.
//!
//! Each epoch contributes one 12-dimensional node: the ENU positions of
//! antennas 1-4 stacked as `[x1 y1 z1 x2 y2 z2 x3 y3 z3 x4 y4 z4]`. Four
//! factor kinds constrain the nodes: RTK position (antenna to base+baseline,
//! FIX only), moving-base RTK (antenna-to-antenna vector, FIX only), Doppler
//! velocity (displacement between consecutive epochs), and baseline length
//! (the fixed antenna separations on each truck section, added every epoch).
//! The weighted sum of squared residuals is minimized by a dogleg
//! trust-region method over the block-tridiagonal normal equations.

mod factors;
mod solver;

pub use factors::{Factor, FactorKind};
pub use solver::optimize;

use crate::geodesy::EnuPoint;
use crate::rtk::{FixStatus, RtkSolution, VelocitySolution};
use crate::truck::{AntennaGeometry, AntennaSet, TruckError};
use nalgebra::{SVector, Vector3};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// One epoch node: four stacked antenna positions.
pub type EpochState = SVector<f64, 12>;

/// Antenna pairs for moving-base RTK, 0-indexed, in enumeration order.
pub const ANTENNA_PAIRS: [(usize, usize); 6] = [(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)];

#[derive(Debug, Clone, Error, PartialEq)]
pub enum GraphError {
    #[error("epoch {0} does not exist (graph has {1})")]
    MissingEpoch(usize, usize),
    #[error("factor requires a FIX solution, got {0}")]
    NotFixed(FixStatus),
    #[error(
        "gauge deficient: {unanchored} of {total} antenna nodes are in components without any \
         absolute position factor"
    )]
    GaugeDeficient { unanchored: usize, total: usize },
    #[error("numerical failure: {0}")]
    NumericalFailure(String),
    #[error("initial states: expected {expected} epochs, got {got}")]
    BadInitial { expected: usize, got: usize },
}

/// Solver and weighting settings.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct GraphSettings {
    pub max_iterations: usize,
    /// Relative objective-decrease termination threshold.
    pub objective_tolerance: f64,
    /// Gradient-norm termination threshold.
    pub gradient_tolerance: f64,
    pub initial_trust_radius: f64,
    /// RTK position factor sigma, meters.
    pub rtk_sigma_m: f64,
    /// Moving-base vector factor sigma, meters.
    pub moving_base_sigma_m: f64,
    /// Doppler velocity sigma, m/s; the displacement residual is weighted by
    /// sigma * dt.
    pub velocity_sigma_mps: f64,
    /// Baseline length sigma, meters.
    pub baseline_sigma_m: f64,
    /// Collapse the two baseline-length residuals into their printed scalar
    /// sum (ablation switch; allows sign cancellation between the front and
    /// rear errors).
    pub baseline_scalar_form: bool,
}

impl Default for GraphSettings {
    fn default() -> Self {
        Self {
            max_iterations: 100,
            objective_tolerance: 1e-10,
            gradient_tolerance: 1e-8,
            initial_trust_radius: 100.0,
            rtk_sigma_m: 0.1,
            moving_base_sigma_m: 0.1,
            velocity_sigma_mps: 0.1,
            baseline_sigma_m: 0.01,
            baseline_scalar_form: false,
        }
    }
}

/// Report of one optimization run.
#[derive(Debug, Clone)]
pub struct SolveReport {
    pub iterations: usize,
    pub initial_objective: f64,
    pub final_objective: f64,
    pub converged: bool,
    /// Unweighted residual RMS per factor kind, native units.
    pub residual_rms: Vec<(FactorKind, f64)>,
}

impl std::fmt::Display for SolveReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        writeln!(
            f,
            "optimization {} after {} iterations",
            if self.converged {
                "converged"
            } else {
                "did not converge"
            },
            self.iterations
        )?;
        writeln!(
            f,
            "objective {:.6e} -> {:.6e}",
            self.initial_objective, self.final_objective
        )?;
        for (kind, rms) in &self.residual_rms {
            writeln!(f, "  {kind:?} residual RMS: {rms:.6}")?;
        }
        Ok(())
    }
}

/// The factor graph: an epoch count, a factor list and solver settings.
#[derive(Debug, Clone)]
pub struct FactorGraph {
    n_epochs: usize,
    factors: Vec<Factor>,
    pub settings: GraphSettings,
}

impl FactorGraph {
    pub fn new(n_epochs: usize, settings: GraphSettings) -> Self {
        Self {
            n_epochs,
            factors: Vec::new(),
            settings,
        }
    }

    pub fn n_epochs(&self) -> usize {
        self.n_epochs
    }

    pub fn factors(&self) -> &[Factor] {
        &self.factors
    }

    fn check_epoch(&self, epoch: usize) -> Result<(), GraphError> {
        if epoch >= self.n_epochs {
            return Err(GraphError::MissingEpoch(epoch, self.n_epochs));
        }
        Ok(())
    }

    /// Absolute position constraint on one antenna from a FIX RTK solution:
    /// the measurement is base position plus baseline.
    pub fn add_rtk_factor(
        &mut self,
        epoch: usize,
        antenna: usize,
        solution: &RtkSolution,
        base_pos: &Vector3<f64>,
    ) -> Result<(), GraphError> {
        self.check_epoch(epoch)?;
        if solution.status != FixStatus::Fix {
            return Err(GraphError::NotFixed(solution.status));
        }
        self.factors.push(Factor::Rtk {
            epoch,
            antenna,
            measured: base_pos + solution.baseline,
            sigma: self.settings.rtk_sigma_m,
        });
        Ok(())
    }

    /// Relative vector constraint between two antennas of the same epoch
    /// from a FIX moving-base solution (measured = to minus from).
    pub fn add_moving_base_factor(
        &mut self,
        epoch: usize,
        from: usize,
        to: usize,
        solution: &RtkSolution,
    ) -> Result<(), GraphError> {
        self.check_epoch(epoch)?;
        if solution.status != FixStatus::Fix {
            return Err(GraphError::NotFixed(solution.status));
        }
        self.factors.push(Factor::MovingBase {
            epoch,
            from,
            to,
            measured: solution.baseline,
            sigma: self.settings.moving_base_sigma_m,
        });
        Ok(())
    }

    /// Displacement constraint between epochs (epoch-1, epoch) for one
    /// antenna: the Doppler velocity times dt.
    pub fn add_velocity_factor(
        &mut self,
        epoch: usize,
        antenna: usize,
        velocity: &VelocitySolution,
        dt: f64,
    ) -> Result<(), GraphError> {
        self.check_epoch(epoch)?;
        if epoch == 0 {
            return Err(GraphError::MissingEpoch(0, self.n_epochs));
        }
        self.factors.push(Factor::DopplerVelocity {
            epoch,
            antenna,
            displacement: velocity.velocity * dt,
            sigma: self.settings.velocity_sigma_mps * dt,
        });
        Ok(())
    }

    /// Antenna-separation constraint; valid at every epoch.
    pub fn add_baseline_factor(
        &mut self,
        epoch: usize,
        geom: &AntennaGeometry,
    ) -> Result<(), GraphError> {
        self.check_epoch(epoch)?;
        self.factors.push(Factor::BaselineLength {
            epoch,
            l12: geom.l12,
            l34: geom.l34,
            sigma: self.settings.baseline_sigma_m,
            scalar_form: self.settings.baseline_scalar_form,
        });
        Ok(())
    }

    /// Verifies that every antenna node is connected (through relative
    /// factors) to at least one absolute position factor.
    pub fn check_gauge(&self) -> Result<(), GraphError> {
        let total = self.n_epochs * 4;
        if total == 0 {
            return Ok(());
        }
        let mut uf = UnionFind::new(total);
        let mut anchored = vec![false; total];
        let atom = |epoch: usize, antenna: usize| epoch * 4 + antenna;
        for f in &self.factors {
            match f {
                Factor::Rtk { epoch, antenna, .. } => anchored[atom(*epoch, *antenna)] = true,
                Factor::MovingBase {
                    epoch, from, to, ..
                } => uf.union(atom(*epoch, *from), atom(*epoch, *to)),
                Factor::DopplerVelocity { epoch, antenna, .. } => {
                    uf.union(atom(*epoch - 1, *antenna), atom(*epoch, *antenna))
                }
                Factor::BaselineLength {
                    epoch, scalar_form, ..
                } => {
                    uf.union(atom(*epoch, 0), atom(*epoch, 1));
                    uf.union(atom(*epoch, 2), atom(*epoch, 3));
                    if *scalar_form {
                        uf.union(atom(*epoch, 0), atom(*epoch, 2));
                    }
                }
            }
        }
        let mut root_anchored = vec![false; total];
        for (i, &a) in anchored.iter().enumerate() {
            if a {
                root_anchored[uf.find(i)] = true;
            }
        }
        let unanchored = (0..total).filter(|&i| !root_anchored[uf.find(i)]).count();
        if unanchored > 0 {
            return Err(GraphError::GaugeDeficient { unanchored, total });
        }
        Ok(())
    }
}

struct UnionFind {
    parent: Vec<usize>,
}

impl UnionFind {
    fn new(n: usize) -> Self {
        Self {
            parent: (0..n).collect(),
        }
    }

    fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            self.parent[ra] = rb;
        }
    }
}

/// Assembles the full graph from per-epoch solver outputs: RTK factors for
/// FIX antennas, moving-base factors for FIX pairs, a baseline factor every
/// epoch, and velocity factors between consecutive epochs wherever a
/// Doppler solution exists.
pub fn build_graph(
    rtk_results: &[[Option<RtkSolution>; 4]],
    mvbase_results: &[[Option<RtkSolution>; 6]],
    velocities: &[[Option<VelocitySolution>; 4]],
    geom: &AntennaGeometry,
    base_pos: &Vector3<f64>,
    dt: f64,
    settings: GraphSettings,
) -> Result<FactorGraph, GraphError> {
    let n = rtk_results.len();
    assert_eq!(mvbase_results.len(), n, "epoch-aligned inputs required");
    assert_eq!(velocities.len(), n, "epoch-aligned inputs required");
    let mut graph = FactorGraph::new(n, settings);
    for epoch in 0..n {
        for (antenna, sol) in rtk_results[epoch].iter().enumerate() {
            if let Some(sol) = sol {
                if sol.status == FixStatus::Fix {
                    graph.add_rtk_factor(epoch, antenna, sol, base_pos)?;
                }
            }
        }
        for (k, sol) in mvbase_results[epoch].iter().enumerate() {
            if let Some(sol) = sol {
                if sol.status == FixStatus::Fix {
                    let (from, to) = ANTENNA_PAIRS[k];
                    graph.add_moving_base_factor(epoch, from, to, sol)?;
                }
            }
        }
        graph.add_baseline_factor(epoch, geom)?;
        if epoch > 0 {
            for (antenna, vel) in velocities[epoch].iter().enumerate() {
                if let Some(vel) = vel {
                    graph.add_velocity_factor(epoch, antenna, vel, dt)?;
                }
            }
        }
    }
    graph.check_gauge()?;
    Ok(graph)
}

/// Truck pose extracted from one optimized epoch state.
#[derive(Debug, Clone, Copy)]
pub struct TruckPose {
    pub position: EnuPoint,
    pub articulated_deg: f64,
    pub front_heading_deg: f64,
    pub rear_heading_deg: f64,
}

/// Splits an epoch state into an antenna set.
pub fn state_to_antennas(state: &EpochState) -> AntennaSet {
    let p = |j: usize| EnuPoint::new(state[3 * j], state[3 * j + 1], state[3 * j + 2]);
    AntennaSet {
        epoch: 0,
        positions: [p(0), p(1), p(2), p(3)],
    }
}

/// Packs antenna positions into an epoch state.
pub fn antennas_to_state(set: &AntennaSet) -> EpochState {
    let mut s = EpochState::zeros();
    for (j, p) in set.positions.iter().enumerate() {
        s[3 * j] = p.e;
        s[3 * j + 1] = p.n;
        s[3 * j + 2] = p.u;
    }
    s
}

/// Truck position and articulated angle per optimized epoch.
pub fn extract_truck_series(states: &[EpochState]) -> Result<Vec<TruckPose>, TruckError> {
    states
        .iter()
        .map(|s| {
            let set = state_to_antennas(s);
            Ok(TruckPose {
                position: crate::truck::truck_position(&set),
                articulated_deg: crate::truck::articulated_angle(&set)?,
                front_heading_deg: crate::truck::front_heading(&set)?,
                rear_heading_deg: crate::truck::rear_heading(&set)?,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fix_solution(baseline: Vector3<f64>) -> RtkSolution {
        RtkSolution {
            baseline,
            rover_position: baseline,
            status: FixStatus::Fix,
            ratio: 10.0,
            fixed_ambiguities: Some(vec![]),
            sat_pairs: vec![],
            n_sats: 8,
            diagnostic: None,
        }
    }

    #[test]
    fn non_fix_solutions_are_rejected() {
        let mut graph = FactorGraph::new(2, GraphSettings::default());
        let mut sol = fix_solution(Vector3::zeros());
        sol.status = FixStatus::Float;
        assert!(matches!(
            graph.add_rtk_factor(0, 0, &sol, &Vector3::zeros()),
            Err(GraphError::NotFixed(FixStatus::Float))
        ));
        assert!(matches!(
            graph.add_moving_base_factor(1, 0, 1, &sol),
            Err(GraphError::NotFixed(FixStatus::Float))
        ));
    }

    #[test]
    fn velocity_factor_requires_previous_epoch() {
        let mut graph = FactorGraph::new(3, GraphSettings::default());
        let vel = VelocitySolution {
            velocity: Vector3::zeros(),
            clock_drift_mps: 0.0,
            n_sats: 8,
        };
        assert!(matches!(
            graph.add_velocity_factor(0, 0, &vel, 0.1),
            Err(GraphError::MissingEpoch(0, 3))
        ));
        assert!(graph.add_velocity_factor(1, 0, &vel, 0.1).is_ok());
        assert!(matches!(
            graph.add_velocity_factor(7, 0, &vel, 0.1),
            Err(GraphError::MissingEpoch(7, 3))
        ));
    }

    #[test]
    fn gauge_deficiency_is_detected_without_rtk() {
        let geom = AntennaGeometry::default();
        let mut graph = FactorGraph::new(2, GraphSettings::default());
        for epoch in 0..2 {
            graph.add_baseline_factor(epoch, &geom).unwrap();
            for (from, to) in ANTENNA_PAIRS {
                graph
                    .add_moving_base_factor(epoch, from, to, &fix_solution(Vector3::x()))
                    .unwrap();
            }
        }
        assert!(matches!(
            graph.check_gauge(),
            Err(GraphError::GaugeDeficient {
                unanchored: 8,
                total: 8
            })
        ));
    }

    #[test]
    fn one_anchor_bridges_connected_epochs() {
        let geom = AntennaGeometry::default();
        let mut graph = FactorGraph::new(3, GraphSettings::default());
        let vel = VelocitySolution {
            velocity: Vector3::zeros(),
            clock_drift_mps: 0.0,
            n_sats: 8,
        };
        for epoch in 0..3 {
            graph.add_baseline_factor(epoch, &geom).unwrap();
            // Front-rear coupling through one moving-base pair.
            graph
                .add_moving_base_factor(epoch, 1, 2, &fix_solution(Vector3::x()))
                .unwrap();
        }
        for epoch in 1..3 {
            for antenna in 0..4 {
                graph.add_velocity_factor(epoch, antenna, &vel, 0.1).unwrap();
            }
        }
        // Without any RTK anchor: deficient.
        assert!(graph.check_gauge().is_err());
        // One anchor anywhere fixes the whole connected component.
        graph
            .add_rtk_factor(1, 3, &fix_solution(Vector3::new(5.0, 6.0, 7.0)), &Vector3::zeros())
            .unwrap();
        assert!(graph.check_gauge().is_ok());
    }

    #[test]
    fn factor_counting_contract() {
        // All-FIX epochs: counts bounded by 4E rtk, 6E moving-base,
        // E baseline, 4(E-1) velocity.
        let e = 4usize;
        let geom = AntennaGeometry::default();
        let rtk: Vec<[Option<RtkSolution>; 4]> = (0..e)
            .map(|_| std::array::from_fn(|_| Some(fix_solution(Vector3::x()))))
            .collect();
        let mv: Vec<[Option<RtkSolution>; 6]> = (0..e)
            .map(|_| std::array::from_fn(|_| Some(fix_solution(Vector3::x()))))
            .collect();
        let vel: Vec<[Option<VelocitySolution>; 4]> = (0..e)
            .map(|_| {
                std::array::from_fn(|_| {
                    Some(VelocitySolution {
                        velocity: Vector3::zeros(),
                        clock_drift_mps: 0.0,
                        n_sats: 9,
                    })
                })
            })
            .collect();
        let graph = build_graph(
            &rtk,
            &mv,
            &vel,
            &geom,
            &Vector3::zeros(),
            0.1,
            GraphSettings::default(),
        )
        .unwrap();
        let count = |kind: FactorKind| {
            graph
                .factors()
                .iter()
                .filter(|f| f.kind() == kind)
                .count()
        };
        assert_eq!(count(FactorKind::Rtk), 4 * e);
        assert_eq!(count(FactorKind::MovingBase), 6 * e);
        assert_eq!(count(FactorKind::BaselineLength), e);
        assert_eq!(count(FactorKind::DopplerVelocity), 4 * (e - 1));
    }
}
