//! CSV schemas shared between the library, the CLI and external tooling.
//!
//! Fixed headers:
//! * observations: `t,antenna,system,sat,phase_m,pr_m,dopp_mps,elev_deg,wavelength`
//! * ground truth: `t,e,n,u,heading_f,heading_r,angle`
//! * estimate series: `t,e,n,u,angle,status_flags`
//! * metrics: `estimator,mask,pos_rms_m,angle_rms_deg,fix_rate`
//! * per-epoch errors: `t,pos_err_m,angle_err_deg`
//! * RTK diagnostics: `t,pair,status,ratio,n_sats,baseline_e,baseline_n,baseline_u`
//!
//! Observation files written here are also the estimator's input format, so
//! externally produced data with the same schema can be fed in.

use crate::obs::{GnssObservation, ReceiverId};
use crate::sky::{GnssSystem, SatelliteId};
use serde::{Deserialize, Serialize};
use std::path::Path;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CsvError {
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("bad field: {0}")]
    BadField(String),
}

#[derive(Debug, Serialize, Deserialize)]
struct ObsRow {
    t: f64,
    antenna: String,
    system: String,
    sat: u8,
    phase_m: f64,
    pr_m: f64,
    dopp_mps: f64,
    elev_deg: f64,
    wavelength: f64,
}

fn receiver_from_str(s: &str) -> Result<ReceiverId, CsvError> {
    match s {
        "BASE" => Ok(ReceiverId::Base),
        _ => s
            .parse::<u8>()
            .ok()
            .filter(|j| (1..=4).contains(j))
            .map(ReceiverId::Antenna)
            .ok_or_else(|| CsvError::BadField(format!("antenna '{s}'"))),
    }
}

fn system_from_str(s: &str) -> Result<GnssSystem, CsvError> {
    let mut chars = s.chars();
    match (chars.next().and_then(GnssSystem::from_code), chars.next()) {
        (Some(sys), None) => Ok(sys),
        _ => Err(CsvError::BadField(format!("system '{s}'"))),
    }
}

pub fn write_observations(path: &Path, obs: &[GnssObservation]) -> Result<(), CsvError> {
    let mut w = csv::Writer::from_path(path)?;
    for o in obs {
        w.serialize(ObsRow {
            t: o.t,
            antenna: o.receiver.to_string(),
            system: o.sat.system.code().to_string(),
            sat: o.sat.index,
            phase_m: o.carrier_phase_m,
            pr_m: o.pseudorange_m,
            dopp_mps: o.doppler_range_rate_mps,
            elev_deg: o.elevation_deg,
            wavelength: o.wavelength_m,
        })?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_observations(path: &Path) -> Result<Vec<GnssObservation>, CsvError> {
    let mut r = csv::Reader::from_path(path)?;
    let mut out = Vec::new();
    for row in r.deserialize::<ObsRow>() {
        let row = row?;
        out.push(GnssObservation {
            receiver: receiver_from_str(&row.antenna)?,
            sat: SatelliteId::new(system_from_str(&row.system)?, row.sat),
            t: row.t,
            carrier_phase_m: row.phase_m,
            pseudorange_m: row.pr_m,
            doppler_range_rate_mps: row.dopp_mps,
            wavelength_m: row.wavelength,
            elevation_deg: row.elev_deg,
        });
    }
    Ok(out)
}

/// Ground-truth row: truck position (midpoint of antennas 1,2), section
/// headings and articulated angle.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct TruthRow {
    pub t: f64,
    pub e: f64,
    pub n: f64,
    pub u: f64,
    pub heading_f: f64,
    pub heading_r: f64,
    pub angle: f64,
}

/// Estimated series row. `status_flags` is `fixAnt:fixPair:vel` counts for
/// the epoch (for the RTK-only estimator the pair and velocity counts stay
/// zero).
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct SeriesRow {
    pub t: f64,
    pub e: f64,
    pub n: f64,
    pub u: f64,
    pub angle: f64,
    pub status_flags: String,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct MetricsRow {
    pub estimator: String,
    pub mask: f64,
    pub pos_rms_m: f64,
    pub angle_rms_deg: f64,
    pub fix_rate: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct EpochErrorRow {
    pub t: f64,
    pub pos_err_m: f64,
    pub angle_err_deg: f64,
}

/// Per-epoch, per-pair RTK diagnostic row. `pair` is `1`..`4` for the
/// fixed-base solves and `a-b` for moving-base pairs.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct RtkDiagRow {
    pub t: f64,
    pub pair: String,
    pub status: String,
    pub ratio: f64,
    pub n_sats: usize,
    pub baseline_e: f64,
    pub baseline_n: f64,
    pub baseline_u: f64,
}

/// One-row machine-readable form of a [`crate::graph::SolveReport`].
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct SolveReportRow {
    pub iterations: usize,
    pub initial_objective: f64,
    pub final_objective: f64,
    pub converged: bool,
    pub rtk_rms_m: f64,
    pub moving_base_rms_m: f64,
    pub velocity_rms_m: f64,
    pub baseline_rms_m: f64,
}

pub fn write_rows<T: Serialize>(path: &Path, rows: &[T]) -> Result<(), CsvError> {
    let mut w = csv::Writer::from_path(path)?;
    for row in rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_rows<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Vec<T>, CsvError> {
    let mut r = csv::Reader::from_path(path)?;
    let mut out = Vec::new();
    for row in r.deserialize::<T>() {
        out.push(row?);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn observation_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("obs.csv");
        let obs = vec![
            GnssObservation {
                receiver: ReceiverId::Base,
                sat: SatelliteId::new(GnssSystem::Gps, 7),
                t: 0.1,
                carrier_phase_m: 22_345_678.901_234,
                pseudorange_m: 22_345_690.12,
                doppler_range_rate_mps: -512.25,
                wavelength_m: crate::obs::WAVELENGTH_M,
                elevation_deg: 54.3,
            },
            GnssObservation {
                receiver: ReceiverId::Antenna(3),
                sat: SatelliteId::new(GnssSystem::Qzss, 1),
                t: 0.1,
                carrier_phase_m: 23_345_678.5,
                pseudorange_m: 23_345_690.0,
                doppler_range_rate_mps: 88.0,
                wavelength_m: crate::obs::WAVELENGTH_M,
                elevation_deg: 81.0,
            },
        ];
        write_observations(&path, &obs).unwrap();
        let back = read_observations(&path).unwrap();
        assert_eq!(obs, back);
    }

    #[test]
    fn bad_antenna_field_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("obs.csv");
        std::fs::write(
            &path,
            "t,antenna,system,sat,phase_m,pr_m,dopp_mps,elev_deg,wavelength\n0.0,9,G,1,1,1,1,45,0.19\n",
        )
        .unwrap();
        assert!(matches!(
            read_observations(&path),
            Err(CsvError::BadField(_))
        ));
    }

    proptest! {
        // Floats survive the CSV round trip bit-exactly (shortest
        // round-trip formatting).
        #[test]
        fn float_fields_round_trip(
            t in 0.0f64..600.0,
            phase in 2.0e7f64..3.0e7,
            dopp in -800.0f64..800.0,
        ) {
            let dir = tempfile::tempdir().unwrap();
            let path = dir.path().join("obs.csv");
            let obs = vec![GnssObservation {
                receiver: ReceiverId::Antenna(1),
                sat: SatelliteId::new(GnssSystem::Galileo, 12),
                t,
                carrier_phase_m: phase,
                pseudorange_m: phase + 10.0,
                doppler_range_rate_mps: dopp,
                wavelength_m: crate::obs::WAVELENGTH_M,
                elevation_deg: 33.0,
            }];
            write_observations(&path, &obs).unwrap();
            let back = read_observations(&path).unwrap();
            prop_assert_eq!(obs, back);
        }
    }
}
