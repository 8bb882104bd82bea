//! RTK solve drivers: float stage, integer resolution, ratio test, fixed
//! baseline. Fixed-base and moving-base solves share the same pipeline.

use super::lsq::fixed_baseline;
use super::{
    float_solution, form_double_differences, ratio_test, resolve_ambiguities, FixStatus,
    RtkConfig, RtkSolution,
};
use crate::obs::GnssObservation;
use crate::sky::EnuSky;
use nalgebra::Vector3;
use std::collections::BTreeSet;

fn solve_pipeline(
    rover_obs: &[GnssObservation],
    base_obs: &[GnssObservation],
    sky: &EnuSky,
    rover_approx: &Vector3<f64>,
    base_pos: &Vector3<f64>,
    config: &RtkConfig,
) -> RtkSolution {
    let dds = match form_double_differences(rover_obs, base_obs) {
        Ok(dds) => dds,
        Err(e) => return RtkSolution::none(e),
    };
    let sat_pairs: Vec<_> = dds.iter().map(|d| (d.reference, d.other)).collect();
    let n_sats = dds
        .iter()
        .flat_map(|d| [d.reference, d.other])
        .collect::<BTreeSet<_>>()
        .len();

    let float = match float_solution(&dds, sky, rover_approx, base_pos, config) {
        Ok(f) => f,
        Err(e) => return RtkSolution::none(e),
    };

    let float_result = |ratio: f64| RtkSolution {
        baseline: float.baseline,
        rover_position: float.rover_position,
        status: FixStatus::Float,
        ratio,
        fixed_ambiguities: None,
        sat_pairs: sat_pairs.clone(),
        n_sats,
        diagnostic: None,
    };

    let (best, _, ratio) =
        match resolve_ambiguities(&float.float_ambiguities, &float.ambiguity_covariance()) {
            Ok(r) => r,
            Err(_) => return float_result(0.0),
        };

    if !ratio_test(ratio, config.ratio_threshold) {
        return float_result(ratio);
    }

    match fixed_baseline(&dds, sky, &float.rover_position, base_pos, &best, config) {
        Ok((position, chi2)) if chi2 <= config.residual_gate => RtkSolution {
            baseline: position - base_pos,
            rover_position: position,
            status: FixStatus::Fix,
            ratio,
            fixed_ambiguities: Some(best),
            sat_pairs,
            n_sats,
            diagnostic: None,
        },
        Ok(_) => float_result(ratio),
        Err(_) => float_result(ratio),
    }
}

/// RTK against the fixed base station: returns the rover-minus-base vector
/// with FIX status when the ratio test passes, FLOAT otherwise, and NONE
/// (with a diagnostic) when no solution could be formed.
pub fn rtk_solve(
    rover_obs: &[GnssObservation],
    base_obs: &[GnssObservation],
    sky: &EnuSky,
    rover_approx: &Vector3<f64>,
    base_pos: &Vector3<f64>,
    config: &RtkConfig,
) -> RtkSolution {
    solve_pipeline(rover_obs, base_obs, sky, rover_approx, base_pos, config)
}

/// Moving-base RTK between two rover antennas: antenna `a` acts as the base
/// at its current approximate position. The returned baseline is the
/// b-minus-a vector; its accuracy is insensitive to the absolute error of
/// `approx_a` because only relative geometry enters the double differences.
pub fn moving_base_solve(
    obs_a: &[GnssObservation],
    obs_b: &[GnssObservation],
    sky: &EnuSky,
    approx_a: &Vector3<f64>,
    approx_b: &Vector3<f64>,
    config: &RtkConfig,
) -> RtkSolution {
    solve_pipeline(obs_b, obs_a, sky, approx_b, approx_a, config)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geodesy::{geodetic_to_ecef, EnuPoint, GeodeticPoint};
    use crate::obs::{
        synthesize_epoch, AmbiguityTable, ClockSeries, ErrorBudget, ReceiverId, WAVELENGTH_M,
    };
    use crate::rtk::{doppler_velocity, RtkError};
    use crate::sky::{build_constellation, visible_sky, SystemCounts};
    use crate::truck::{antenna_positions, AntennaGeometry, TruckState};

    fn site() -> GeodeticPoint {
        GeodeticPoint::new(38.25, 140.85, 120.0)
    }

    struct World {
        sky: EnuSky,
        obs: Vec<crate::obs::GnssObservation>,
        antennas: crate::truck::AntennaSet,
        base: EnuPoint,
        ambi: AmbiguityTable,
    }

    fn world(budget: &ErrorBudget, t: f64, epoch: usize, vel: [f64; 3]) -> World {
        let orbits = build_constellation(42, &SystemCounts::default(), &site());
        let rcv = geodetic_to_ecef(&site());
        let sky = EnuSky::from_view(&visible_sky(&orbits, t, &rcv, &site(), 10.0), &site());
        let state = TruckState {
            t,
            front_ref: EnuPoint::new(180.0, 40.0, 0.0),
            front_heading_deg: 75.0,
            rear_heading_deg: 60.0,
            articulated_deg: 15.0,
            speed_mps: 0.0,
            front_yaw_rate: 0.0,
            artic_rate: 0.0,
        };
        let antennas = antenna_positions(&state, &AntennaGeometry::default());
        let base = EnuPoint::new(0.0, 0.0, 1.5);
        let sats: Vec<_> = sky.sats.iter().map(|s| s.id).collect();
        let ambi = AmbiguityTable::generate(17, &sats);
        let clocks = ClockSeries::generate(budget, epoch + 1, 0.1);
        let v = nalgebra::Vector3::new(vel[0], vel[1], vel[2]);
        let obs = synthesize_epoch(
            &sky, &antennas, &[v; 4], &base, budget, &ambi, &clocks, epoch, t,
        );
        World {
            sky,
            obs,
            antennas,
            base,
            ambi,
        }
    }

    fn obs_of(w: &World, rcv: ReceiverId) -> Vec<crate::obs::GnssObservation> {
        w.obs.iter().filter(|o| o.receiver == rcv).cloned().collect()
    }

    #[test]
    fn noise_free_solve_is_exact_fix() {
        let w = world(&ErrorBudget::noise_free(1), 5.0, 50, [0.0; 3]);
        let rover = obs_of(&w, ReceiverId::Antenna(1));
        let base_obs = obs_of(&w, ReceiverId::Base);
        let truth = w.antennas.positions[0].as_vector();
        // Start from a deliberately wrong approximate position.
        let approx = truth + nalgebra::Vector3::new(8.0, -5.0, 3.0);
        let sol = rtk_solve(
            &rover,
            &base_obs,
            &w.sky,
            &approx,
            &w.base.as_vector(),
            &RtkConfig::default(),
        );
        assert_eq!(sol.status, FixStatus::Fix, "diag {:?}", sol.diagnostic);
        assert!((sol.rover_position - truth).norm() < 1e-6);
        assert!(sol.ratio.is_infinite() || sol.ratio > 1e6);
    }

    #[test]
    fn noise_free_float_ambiguities_are_integers() {
        let w = world(&ErrorBudget::noise_free(2), 7.0, 70, [0.0; 3]);
        let rover = obs_of(&w, ReceiverId::Antenna(3));
        let base_obs = obs_of(&w, ReceiverId::Base);
        let dds = form_double_differences(&rover, &base_obs).unwrap();
        let truth = w.antennas.positions[2].as_vector();
        let float = float_solution(
            &dds,
            &w.sky,
            &(truth + nalgebra::Vector3::new(3.0, 3.0, -2.0)),
            &w.base.as_vector(),
            &RtkConfig::default(),
        )
        .unwrap();
        assert!((float.rover_position - truth).norm() < 1e-6);
        for a in float.float_ambiguities.iter() {
            assert!((a - a.round()).abs() < 1e-6, "float ambiguity {a}");
        }
    }

    #[test]
    fn fixed_ambiguities_match_simulator_truth() {
        let w = world(&ErrorBudget::default(), 5.0, 50, [0.0; 3]);
        let rover_id = ReceiverId::Antenna(2);
        let rover = obs_of(&w, rover_id);
        let base_obs = obs_of(&w, ReceiverId::Base);
        let truth = w.antennas.positions[1].as_vector();
        let sol = rtk_solve(
            &rover,
            &base_obs,
            &w.sky,
            &(truth + nalgebra::Vector3::new(2.0, -2.0, 1.0)),
            &w.base.as_vector(),
            &RtkConfig::default(),
        );
        assert_eq!(sol.status, FixStatus::Fix);
        let fixed = sol.fixed_ambiguities.as_ref().unwrap();
        for (k, (reference, other)) in sol.sat_pairs.iter().enumerate() {
            let dd_truth = (w.ambi.ambiguity(rover_id, *reference, 5.0)
                - w.ambi.ambiguity(ReceiverId::Base, *reference, 5.0))
                - (w.ambi.ambiguity(rover_id, *other, 5.0)
                    - w.ambi.ambiguity(ReceiverId::Base, *other, 5.0));
            assert_eq!(fixed[k], dd_truth, "pair {reference}-{other}");
        }
        assert!((sol.rover_position - truth).norm() < 0.03);
    }

    #[test]
    fn moving_base_recovers_antenna_separation_exactly() {
        let w = world(&ErrorBudget::noise_free(3), 2.0, 20, [0.0; 3]);
        let a = obs_of(&w, ReceiverId::Antenna(1));
        let b = obs_of(&w, ReceiverId::Antenna(2));
        let pa = w.antennas.positions[0].as_vector();
        let pb = w.antennas.positions[1].as_vector();
        let sol = moving_base_solve(
            &a,
            &b,
            &w.sky,
            &(pa + nalgebra::Vector3::new(4.0, 4.0, 0.0)),
            &(pb + nalgebra::Vector3::new(-3.0, 2.0, 1.0)),
            &RtkConfig::default(),
        );
        assert_eq!(sol.status, FixStatus::Fix);
        assert!((sol.baseline.norm() - 3.0).abs() < 1e-6);
        assert!((sol.baseline - (pb - pa)).norm() < 1e-6);
    }

    #[test]
    fn moving_base_is_antisymmetric() {
        let w = world(&ErrorBudget::default(), 9.0, 90, [0.0; 3]);
        let a = obs_of(&w, ReceiverId::Antenna(1));
        let b = obs_of(&w, ReceiverId::Antenna(4));
        let pa = w.antennas.positions[0].as_vector();
        let pb = w.antennas.positions[3].as_vector();
        let cfg = RtkConfig::default();
        let ab = moving_base_solve(&a, &b, &w.sky, &pa, &pb, &cfg);
        let ba = moving_base_solve(&b, &a, &w.sky, &pb, &pa, &cfg);
        assert_eq!(ab.status, FixStatus::Fix);
        assert_eq!(ba.status, FixStatus::Fix);
        assert!(
            (ab.baseline + ba.baseline).norm() < 1e-6,
            "ab {:?} ba {:?}",
            ab.baseline,
            ba.baseline
        );
    }

    #[test]
    fn default_noise_epoch_fixes_with_centimeter_error() {
        let mut worst: f64 = 0.0;
        let mut fixes = 0;
        for (k, epoch) in [10usize, 150, 300, 450].iter().enumerate() {
            let t = *epoch as f64 * 0.1;
            let budget = ErrorBudget {
                seed: 100 + k as u64,
                ..ErrorBudget::default()
            };
            let w = world(&budget, t, *epoch, [0.0; 3]);
            let rover = obs_of(&w, ReceiverId::Antenna(1));
            let base_obs = obs_of(&w, ReceiverId::Base);
            let truth = w.antennas.positions[0].as_vector();
            let sol = rtk_solve(
                &rover,
                &base_obs,
                &w.sky,
                &(truth + nalgebra::Vector3::new(1.0, 1.0, 1.0)),
                &w.base.as_vector(),
                &RtkConfig::default(),
            );
            if sol.status == FixStatus::Fix {
                fixes += 1;
                worst = worst.max((sol.rover_position - truth).norm());
            }
        }
        assert!(fixes >= 3, "only {fixes}/4 epochs fixed");
        assert!(worst < 0.03, "worst fixed error {worst}");
    }

    #[test]
    fn insufficient_dds_reported_as_none() {
        let w = world(&ErrorBudget::noise_free(4), 1.0, 10, [0.0; 3]);
        let rover: Vec<_> = obs_of(&w, ReceiverId::Antenna(1))
            .into_iter()
            .take(3)
            .collect();
        let base_obs = obs_of(&w, ReceiverId::Base);
        let sol = rtk_solve(
            &rover,
            &base_obs,
            &w.sky,
            &w.antennas.positions[0].as_vector(),
            &w.base.as_vector(),
            &RtkConfig::default(),
        );
        assert_eq!(sol.status, FixStatus::None);
        assert!(matches!(
            sol.diagnostic,
            Some(RtkError::InsufficientSatellites { .. })
        ));
    }

    #[test]
    fn static_antenna_has_zero_velocity() {
        let w = world(&ErrorBudget::noise_free(5), 4.0, 40, [0.0; 3]);
        let obs = obs_of(&w, ReceiverId::Antenna(2));
        let sol = doppler_velocity(&obs, &w.sky, &w.antennas.positions[1].as_vector()).unwrap();
        assert!(sol.velocity.norm() < 1e-9, "v = {:?}", sol.velocity);
    }

    #[test]
    fn truck_speed_recovered_exactly() {
        // 10 km/h = 2.777... m/s eastward.
        let v = 10.0 / 3.6;
        let w = world(&ErrorBudget::noise_free(6), 4.0, 40, [v, 0.0, 0.0]);
        let obs = obs_of(&w, ReceiverId::Antenna(1));
        let sol = doppler_velocity(&obs, &w.sky, &w.antennas.positions[0].as_vector()).unwrap();
        assert!((sol.velocity.norm() - v).abs() < 1e-6);
        assert!((sol.velocity.x - v).abs() < 1e-6);
    }

    #[test]
    fn doppler_noise_propagates_at_dop_scale() {
        // Monte-Carlo: default Doppler noise with ~24 satellites should give
        // velocity errors of a few cm/s RMS.
        let mut sum_sq = 0.0;
        let n = 200;
        for k in 0..n {
            let budget = ErrorBudget {
                seed: 500 + k as u64,
                ..ErrorBudget::default()
            };
            let w = world(&budget, 8.0, 80, [1.0, 2.0, 0.0]);
            let obs = obs_of(&w, ReceiverId::Antenna(1));
            let sol =
                doppler_velocity(&obs, &w.sky, &w.antennas.positions[0].as_vector()).unwrap();
            // Remove the known clock-drift-free truth.
            let err = sol.velocity - nalgebra::Vector3::new(1.0, 2.0, 0.0);
            sum_sq += err.norm_squared();
        }
        let rms = (sum_sq / n as f64).sqrt();
        assert!(rms < 0.05, "velocity RMS {rms}");
    }

    #[test]
    fn spp_initializes_within_meters() {
        let w = world(&ErrorBudget::default(), 5.0, 50, [0.0; 3]);
        let obs = obs_of(&w, ReceiverId::Antenna(1));
        let truth = w.antennas.positions[0].as_vector();
        // Converge from far away; unmodeled atmosphere leaves a meter-level
        // bias, which is fine for an initialization.
        let spp = crate::rtk::single_point_position(
            &obs,
            &w.sky,
            &nalgebra::Vector3::new(-5000.0, 4000.0, 100.0),
        )
        .unwrap();
        assert!((spp - truth).norm() < 30.0, "spp error {}", (spp - truth).norm());
    }

    #[test]
    fn wavelength_is_l1_class() {
        assert!((0.18..=0.26).contains(&WAVELENGTH_M));
        assert!((WAVELENGTH_M - 0.1903).abs() < 1e-4);
    }
}
