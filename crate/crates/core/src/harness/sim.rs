//! Scenario simulation: ground truth, per-epoch skies and the observation
//! stream, plus elevation masking.

use super::HarnessError;
use crate::geodesy::enu_to_ecef;
use crate::obs::{
    synthesize_epoch, AmbiguityTable, ClockSeries, GnssObservation, ReceiverId,
};
use crate::scenario::Scenario;
use crate::sky::{visible_sky, EnuSky, SatelliteId};
use crate::truck::{antenna_positions, antenna_velocities, simulate_trajectory, AntennaSet, TruckState};
use nalgebra::Vector3;

/// A fully simulated scenario at the base elevation mask.
pub struct SimulatedWorld {
    pub scenario: Scenario,
    pub truth_states: Vec<TruckState>,
    pub truth_antennas: Vec<AntennaSet>,
    /// Per-epoch observations for all five receivers.
    pub observations: Vec<Vec<GnssObservation>>,
    /// Per-epoch sky (ENU frame) at the base mask, seen from the base.
    pub skies: Vec<EnuSky>,
    pub ambiguities: AmbiguityTable,
}

/// Observations and skies after applying a (higher) elevation mask.
/// Masking only removes satellites; every surviving observation is
/// bit-identical to the base-mask stream.
pub struct MaskedWorld<'a> {
    pub world: &'a SimulatedWorld,
    pub mask_deg: f64,
    pub observations: Vec<Vec<GnssObservation>>,
    pub skies: Vec<EnuSky>,
}

/// Simulates the scenario: trajectory, satellite visibility at the base
/// mask, and the full observation stream.
pub fn simulate(scenario: &Scenario) -> Result<SimulatedWorld, HarnessError> {
    let truth_states = simulate_trajectory(&scenario.trajectory, &scenario.geometry, scenario.rate_hz)?;
    let n_epochs = truth_states.len();
    let dt = scenario.dt();

    let truth_antennas: Vec<AntennaSet> = truth_states
        .iter()
        .enumerate()
        .map(|(i, s)| {
            let mut set = antenna_positions(s, &scenario.geometry);
            set.epoch = i;
            set
        })
        .collect();

    let base = scenario.base_position();
    let base_ecef = enu_to_ecef(&base, &scenario.site);
    let sat_ids: Vec<SatelliteId> = scenario.orbits.iter().map(|o| o.id).collect();
    let ambiguities = AmbiguityTable::generate(scenario.budget.seed, &sat_ids);
    let clocks = ClockSeries::generate(&scenario.budget, n_epochs, dt);

    let mut skies = Vec::with_capacity(n_epochs);
    let mut observations = Vec::with_capacity(n_epochs);
    for epoch in 0..n_epochs {
        let t = scenario.epoch_time(epoch);
        let view = visible_sky(
            &scenario.orbits,
            t,
            &base_ecef,
            &scenario.site,
            scenario.base_mask_deg,
        );
        let sky = EnuSky::from_view(&view, &scenario.site);

        // Doppler encodes the displacement rate over the preceding epoch
        // interval; epoch 0 uses the instantaneous velocity.
        let vels: [Vector3<f64>; 4] = if epoch == 0 {
            antenna_velocities(&truth_states[0], &scenario.geometry)
        } else {
            std::array::from_fn(|j| {
                (truth_antennas[epoch].positions[j].as_vector()
                    - truth_antennas[epoch - 1].positions[j].as_vector())
                    / dt
            })
        };

        observations.push(synthesize_epoch(
            &sky,
            &truth_antennas[epoch],
            &vels,
            &base,
            &scenario.budget,
            &ambiguities,
            &clocks,
            epoch,
            t,
        ));
        skies.push(sky);
    }

    Ok(SimulatedWorld {
        scenario: scenario.clone(),
        truth_states,
        truth_antennas,
        observations,
        skies,
        ambiguities,
    })
}

/// Filters the world down to satellites above `mask_deg` (site elevation).
pub fn apply_mask(world: &SimulatedWorld, mask_deg: f64) -> MaskedWorld<'_> {
    let mut observations = Vec::with_capacity(world.observations.len());
    let mut skies = Vec::with_capacity(world.skies.len());
    for (sky, obs) in world.skies.iter().zip(&world.observations) {
        let keep: Vec<SatelliteId> = sky
            .sats
            .iter()
            .filter(|s| s.elevation_deg > mask_deg)
            .map(|s| s.id)
            .collect();
        skies.push(EnuSky {
            sats: sky
                .sats
                .iter()
                .filter(|s| keep.contains(&s.id))
                .cloned()
                .collect(),
        });
        observations.push(
            obs.iter()
                .filter(|o| keep.contains(&o.sat))
                .cloned()
                .collect(),
        );
    }
    MaskedWorld {
        world,
        mask_deg,
        observations,
        skies,
    }
}

/// Splits one epoch's observations by receiver.
pub(super) fn split_by_receiver(obs: &[GnssObservation]) -> [Vec<GnssObservation>; 5] {
    let mut out: [Vec<GnssObservation>; 5] = Default::default();
    for o in obs {
        out[o.receiver.ordinal()].push(*o);
    }
    out
}

/// Receiver index helper: `0` is the base, `1..=4` the antennas.
pub(super) fn receiver_of(ordinal: usize) -> ReceiverId {
    match ordinal {
        0 => ReceiverId::Base,
        j => ReceiverId::Antenna(j as u8),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_world_shape() {
        let scenario = Scenario::default_scenario();
        let world = simulate(&scenario).unwrap();
        assert_eq!(world.truth_states.len(), 601);
        assert_eq!(world.observations.len(), 601);
        // Every epoch has 5 receivers x visible satellites.
        for (sky, obs) in world.skies.iter().zip(&world.observations) {
            assert_eq!(obs.len(), 5 * sky.len());
        }
    }

    #[test]
    fn masking_preserves_surviving_draws() {
        let scenario = Scenario::default_scenario();
        let world = simulate(&scenario).unwrap();
        let masked = apply_mask(&world, 35.0);
        for (epoch, obs) in masked.observations.iter().enumerate() {
            for o in obs {
                let original = world.observations[epoch]
                    .iter()
                    .find(|b| b.receiver == o.receiver && b.sat == o.sat)
                    .expect("masked observation exists in base stream");
                assert_eq!(o, original);
            }
        }
        // Counts shrink.
        assert!(masked.observations[0].len() < world.observations[0].len());
    }

    #[test]
    fn mask_sets_nest_per_epoch() {
        let scenario = Scenario::default_scenario();
        let world = simulate(&scenario).unwrap();
        let m35 = apply_mask(&world, 35.0);
        let m45 = apply_mask(&world, 45.0);
        for epoch in 0..world.skies.len() {
            let ids45: Vec<_> = m45.skies[epoch].sats.iter().map(|s| s.id).collect();
            let ids35: Vec<_> = m35.skies[epoch].sats.iter().map(|s| s.id).collect();
            assert!(ids45.iter().all(|id| ids35.contains(id)));
        }
    }
}
