//! Double-difference formation.

use super::{DdObservation, RtkError};
use crate::obs::GnssObservation;
use crate::sky::GnssSystem;
use std::collections::BTreeMap;

/// Forms double differences between a rover and a base observation set.
///
/// Single differences (rover minus base) are taken per common satellite,
/// then differenced against the highest-elevation common satellite of the
/// same system (mixed constellations are never differenced across systems).
/// Output is ordered by system, then satellite index.
pub fn form_double_differences(
    rover_obs: &[GnssObservation],
    base_obs: &[GnssObservation],
) -> Result<Vec<DdObservation>, RtkError> {
    struct Single {
        sd_phase: f64,
        sd_pr: f64,
        wavelength: f64,
        elevation: f64,
    }

    let mut by_system: BTreeMap<GnssSystem, BTreeMap<u8, Single>> = BTreeMap::new();
    let mut common = 0usize;
    for r in rover_obs {
        if let Some(b) = base_obs.iter().find(|b| b.sat == r.sat) {
            common += 1;
            by_system.entry(r.sat.system).or_default().insert(
                r.sat.index,
                Single {
                    sd_phase: r.carrier_phase_m - b.carrier_phase_m,
                    sd_pr: r.pseudorange_m - b.pseudorange_m,
                    wavelength: r.wavelength_m,
                    elevation: r.elevation_deg,
                },
            );
        }
    }
    if common < 2 {
        return Err(RtkError::InsufficientSatellites {
            needed: 2,
            got: common,
        });
    }

    let mut out = Vec::new();
    for (system, sats) in &by_system {
        if sats.len() < 2 {
            continue;
        }
        let (ref_idx, reference) = sats
            .iter()
            .max_by(|a, b| a.1.elevation.partial_cmp(&b.1.elevation).unwrap())
            .map(|(idx, s)| (*idx, s))
            .unwrap();
        for (idx, s) in sats {
            if *idx == ref_idx {
                continue;
            }
            out.push(DdObservation {
                reference: crate::sky::SatelliteId::new(*system, ref_idx),
                other: crate::sky::SatelliteId::new(*system, *idx),
                dd_phase_m: reference.sd_phase - s.sd_phase,
                dd_pseudorange_m: reference.sd_pr - s.sd_pr,
                wavelength_m: s.wavelength,
                elevation_ref_deg: reference.elevation,
                elevation_other_deg: s.elevation,
            });
        }
    }
    if out.is_empty() {
        return Err(RtkError::InsufficientSatellites {
            needed: 2,
            got: common,
        });
    }
    Ok(out)
}
