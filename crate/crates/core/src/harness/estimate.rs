//! The two estimators: per-epoch RTK machinery shared by both, the RTK-only
//! baseline, and the proposed factor-graph smoother.

use super::sim::{receiver_of, split_by_receiver};
use super::{HarnessError, MaskedWorld};
use crate::geodesy::EnuPoint;
use crate::graph::{
    build_graph, extract_truck_series, optimize, EpochState, GraphSettings, ANTENNA_PAIRS,
};
use crate::obs::{GnssObservation, ReceiverId};
use crate::rtk::{
    doppler_velocity, moving_base_solve, rtk_solve, single_point_position, FixStatus, RtkConfig,
    RtkSolution, VelocitySolution,
};
use crate::sky::EnuSky;
use crate::truck::AntennaSet;
use crate::graph::SolveReport;
use nalgebra::Vector3;
use rayon::prelude::*;

/// All per-epoch solver outputs.
pub struct EpochSolve {
    pub epoch: usize,
    pub t: f64,
    pub rtk: [Option<RtkSolution>; 4],
    pub mvbase: [Option<RtkSolution>; 6],
    pub velocity: [Option<VelocitySolution>; 4],
    pub spp: [Option<Vector3<f64>>; 4],
}

impl EpochSolve {
    pub fn n_fix_antennas(&self) -> usize {
        self.rtk
            .iter()
            .flatten()
            .filter(|s| s.status == FixStatus::Fix)
            .count()
    }

    pub fn n_fix_pairs(&self) -> usize {
        self.mvbase
            .iter()
            .flatten()
            .filter(|s| s.status == FixStatus::Fix)
            .count()
    }

    pub fn n_velocities(&self) -> usize {
        self.velocity.iter().flatten().count()
    }
}

/// Runs the per-epoch RTK stage for every epoch: SPP initialization,
/// fixed-base RTK per antenna, moving-base RTK per antenna pair, Doppler
/// velocity per antenna. Epochs are independent and solved in parallel;
/// output order is deterministic.
pub fn solve_epochs(
    observations: &[Vec<GnssObservation>],
    skies: &[EnuSky],
    base_pos: &Vector3<f64>,
    dt: f64,
    config: &RtkConfig,
) -> Vec<EpochSolve> {
    observations
        .par_iter()
        .zip(skies.par_iter())
        .enumerate()
        .map(|(epoch, (obs, sky))| {
            let by_rcv = split_by_receiver(obs);
            let base_obs = &by_rcv[0];
            let t = obs.first().map(|o| o.t).unwrap_or(epoch as f64 * dt);

            let spp: [Option<Vector3<f64>>; 4] = std::array::from_fn(|j| {
                single_point_position(&by_rcv[j + 1], sky, base_pos).ok()
            });

            let rtk: [Option<RtkSolution>; 4] = std::array::from_fn(|j| {
                let approx = spp[j].unwrap_or(*base_pos);
                Some(rtk_solve(
                    &by_rcv[j + 1],
                    base_obs,
                    sky,
                    &approx,
                    base_pos,
                    config,
                ))
            });

            // Best available position per antenna for moving-base seeds.
            let approx_of = |j: usize| -> Vector3<f64> {
                match &rtk[j] {
                    Some(sol) if sol.status != FixStatus::None => sol.rover_position,
                    _ => spp[j].unwrap_or(*base_pos),
                }
            };

            let mvbase: [Option<RtkSolution>; 6] = std::array::from_fn(|k| {
                let (a, b) = ANTENNA_PAIRS[k];
                Some(moving_base_solve(
                    &by_rcv[a + 1],
                    &by_rcv[b + 1],
                    sky,
                    &approx_of(a),
                    &approx_of(b),
                    config,
                ))
            });

            let velocity: [Option<VelocitySolution>; 4] = std::array::from_fn(|j| {
                doppler_velocity(&by_rcv[j + 1], sky, &approx_of(j)).ok()
            });

            EpochSolve {
                epoch,
                t,
                rtk,
                mvbase,
                velocity,
                spp,
            }
        })
        .collect()
}

/// One epoch of an estimated truck series.
#[derive(Debug, Clone)]
pub struct SeriesPoint {
    pub epoch: usize,
    pub t: f64,
    pub position: Option<EnuPoint>,
    pub articulated_deg: Option<f64>,
    pub n_fix_antennas: usize,
    pub n_fix_pairs: usize,
    pub n_velocities: usize,
}

impl SeriesPoint {
    pub fn status_flags(&self) -> String {
        format!(
            "{}:{}:{}",
            self.n_fix_antennas, self.n_fix_pairs, self.n_velocities
        )
    }
}

/// Conventional baseline: independent RTK per antenna, no graph. FLOAT
/// positions stand in when FIX is unavailable, so accuracy degrades rather
/// than gaps (gaps are recorded when a solve produced nothing at all).
pub fn run_rtk_only_baseline(solves: &[EpochSolve]) -> Vec<SeriesPoint> {
    solves
        .iter()
        .map(|s| {
            let pos = |j: usize| -> Option<Vector3<f64>> {
                s.rtk[j].as_ref().and_then(|sol| match sol.status {
                    FixStatus::None => None,
                    _ => Some(sol.rover_position),
                })
            };
            let position = match (pos(0), pos(1)) {
                (Some(p1), Some(p2)) => Some(EnuPoint::from_vector((p1 + p2) / 2.0)),
                _ => None,
            };
            let articulated_deg = match (pos(0), pos(1), pos(2), pos(3)) {
                (Some(p1), Some(p2), Some(p3), Some(p4)) => {
                    let set = AntennaSet {
                        epoch: s.epoch,
                        positions: [
                            EnuPoint::from_vector(p1),
                            EnuPoint::from_vector(p2),
                            EnuPoint::from_vector(p3),
                            EnuPoint::from_vector(p4),
                        ],
                    };
                    crate::truck::articulated_angle(&set).ok()
                }
                _ => None,
            };
            SeriesPoint {
                epoch: s.epoch,
                t: s.t,
                position,
                articulated_deg,
                n_fix_antennas: s.n_fix_antennas(),
                n_fix_pairs: 0,
                n_velocities: 0,
            }
        })
        .collect()
}

/// Initial epoch states for the optimizer: FIX RTK positions where
/// available, else dead reckoning from the last initialized epoch via the
/// Doppler velocity, else the pseudorange point solution.
fn initial_states(solves: &[EpochSolve], base_pos: &Vector3<f64>, dt: f64) -> Vec<EpochState> {
    let n = solves.len();
    let mut states = vec![EpochState::zeros(); n];
    let mut prev: [Option<Vector3<f64>>; 4] = [None; 4];
    for (i, s) in solves.iter().enumerate() {
        for j in 0..4 {
            let fix_pos = s.rtk[j].as_ref().and_then(|sol| {
                (sol.status == FixStatus::Fix).then_some(sol.rover_position)
            });
            let estimate = fix_pos
                .or_else(|| {
                    prev[j].and_then(|p| {
                        s.velocity[j].as_ref().map(|v| p + v.velocity * dt)
                    })
                })
                .or(s.spp[j])
                .or(prev[j])
                .unwrap_or(*base_pos);
            states[i][3 * j] = estimate.x;
            states[i][3 * j + 1] = estimate.y;
            states[i][3 * j + 2] = estimate.z;
            prev[j] = Some(estimate);
        }
    }
    states
}

/// The graph stage of the proposed method: per-epoch RTK products assembled
/// into the factor graph and optimized by dogleg. Returns the optimized
/// epoch states and the solve report.
pub fn proposed_states(
    solves: &[EpochSolve],
    geometry: &crate::truck::AntennaGeometry,
    base_pos: &Vector3<f64>,
    dt: f64,
    settings: GraphSettings,
) -> Result<(Vec<EpochState>, SolveReport), HarnessError> {
    let rtk: Vec<[Option<RtkSolution>; 4]> = solves.iter().map(|s| s.rtk.clone()).collect();
    let mvbase: Vec<[Option<RtkSolution>; 6]> = solves.iter().map(|s| s.mvbase.clone()).collect();
    let velocity: Vec<[Option<VelocitySolution>; 4]> =
        solves.iter().map(|s| s.velocity).collect();

    let graph = build_graph(&rtk, &mvbase, &velocity, geometry, base_pos, dt, settings)?;
    let initial = initial_states(solves, base_pos, dt);
    let (states, report) = optimize(&graph, &initial)?;
    if !report.converged {
        log::warn!(
            "optimizer did not converge in {} iterations (objective {:.3e} -> {:.3e})",
            report.iterations,
            report.initial_objective,
            report.final_objective
        );
    }
    Ok((states, report))
}

/// The proposed method end to end: graph optimization followed by truck
/// pose extraction.
pub fn run_proposed(
    solves: &[EpochSolve],
    geometry: &crate::truck::AntennaGeometry,
    base_pos: &Vector3<f64>,
    dt: f64,
    settings: GraphSettings,
) -> Result<(Vec<SeriesPoint>, SolveReport), HarnessError> {
    let (states, report) = proposed_states(solves, geometry, base_pos, dt, settings)?;
    let poses = extract_truck_series(&states)?;
    let series = solves
        .iter()
        .zip(&poses)
        .map(|(s, pose)| SeriesPoint {
            epoch: s.epoch,
            t: s.t,
            position: Some(pose.position),
            articulated_deg: Some(pose.articulated_deg),
            n_fix_antennas: s.n_fix_antennas(),
            n_fix_pairs: s.n_fix_pairs(),
            n_velocities: s.n_velocities(),
        })
        .collect();
    Ok((series, report))
}

/// Fix-correctness accounting against the simulator's ambiguity truth.
#[derive(Debug, Default, Clone, Copy)]
pub struct FixValidation {
    pub n_fix: usize,
    pub n_wrong: usize,
}

impl FixValidation {
    pub fn wrong_rate(&self) -> f64 {
        if self.n_fix == 0 {
            0.0
        } else {
            self.n_wrong as f64 / self.n_fix as f64
        }
    }
}

/// Checks every FIX solution's integers against the double difference of
/// the simulator's ambiguity table. Wrong fixes are logged.
pub fn validate_fixes(solves: &[EpochSolve], masked: &MaskedWorld<'_>) -> FixValidation {
    let ambi = &masked.world.ambiguities;
    let mut v = FixValidation::default();
    let mut check = |sol: &RtkSolution, rover: ReceiverId, base: ReceiverId, t: f64, label: String| {
        if sol.status != FixStatus::Fix {
            return;
        }
        v.n_fix += 1;
        let fixed = sol.fixed_ambiguities.as_ref().expect("FIX carries integers");
        let wrong = sol.sat_pairs.iter().enumerate().any(|(k, (r, o))| {
            let dd_truth = (ambi.ambiguity(rover, *r, t) - ambi.ambiguity(base, *r, t))
                - (ambi.ambiguity(rover, *o, t) - ambi.ambiguity(base, *o, t));
            fixed[k] != dd_truth
        });
        if wrong {
            v.n_wrong += 1;
            log::warn!("incorrect fix at t={t:.1}s ({label})");
        }
    };
    for s in solves {
        for (j, sol) in s.rtk.iter().enumerate() {
            if let Some(sol) = sol {
                check(
                    sol,
                    receiver_of(j + 1),
                    ReceiverId::Base,
                    s.t,
                    format!("antenna {}", j + 1),
                );
            }
        }
        for (k, sol) in s.mvbase.iter().enumerate() {
            if let Some(sol) = sol {
                let (a, b) = ANTENNA_PAIRS[k];
                check(
                    sol,
                    receiver_of(b + 1),
                    receiver_of(a + 1),
                    s.t,
                    format!("pair {}-{}", a + 1, b + 1),
                );
            }
        }
    }
    v
}
