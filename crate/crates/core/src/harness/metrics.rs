//! RMS evaluation of an estimated series against ground truth.

use super::estimate::{EpochSolve, SeriesPoint};
use super::{HarnessError, SimulatedWorld};
use crate::angle;
use crate::csvio::{EpochErrorRow, TruthRow};
use crate::rtk::FixStatus;
use crate::truck::truck_position;

/// Per-cell metrics: one estimator on one observation stream.
#[derive(Debug, Clone)]
pub struct MetricsReport {
    /// 3D position RMS over epochs with position output, meters.
    pub pos_rms_m: f64,
    /// Wrap-aware articulated-angle RMS over epochs with angle output,
    /// degrees.
    pub angle_rms_deg: f64,
    pub n_epochs: usize,
    pub n_position_epochs: usize,
    pub n_angle_epochs: usize,
    /// FIX fraction of the fixed-base RTK solves, per antenna.
    pub fix_rate_per_antenna: [f64; 4],
    /// FIX fraction of the moving-base solves, per pair.
    pub fix_rate_per_pair: [f64; 6],
    pub per_epoch: Vec<EpochErrorRow>,
}

impl MetricsReport {
    /// Aggregate fix rate: mean of the per-antenna rates.
    pub fn fix_rate(&self) -> f64 {
        self.fix_rate_per_antenna.iter().sum::<f64>() / 4.0
    }
}

/// Ground-truth rows in the CSV contract: truck position from the true
/// antennas 1,2 midpoint, section headings and articulated angle.
pub fn truth_rows(world: &SimulatedWorld) -> Vec<TruthRow> {
    world
        .truth_states
        .iter()
        .zip(&world.truth_antennas)
        .map(|(s, set)| {
            let p = truck_position(set);
            TruthRow {
                t: s.t,
                e: p.e,
                n: p.n,
                u: p.u,
                heading_f: s.front_heading_deg,
                heading_r: s.rear_heading_deg,
                angle: s.articulated_deg,
            }
        })
        .collect()
}

/// Compares a series against truth rows, aligned by epoch index. Fix-rate
/// statistics come from the per-epoch solves when provided.
pub fn evaluate(
    series: &[SeriesPoint],
    truth: &[TruthRow],
    solves: Option<&[EpochSolve]>,
) -> Result<MetricsReport, HarnessError> {
    let n = series.len().min(truth.len());
    if n == 0 {
        return Err(HarnessError::EmptyOverlap);
    }

    let mut pos_sq = 0.0;
    let mut n_pos = 0usize;
    let mut angle_sq = 0.0;
    let mut n_angle = 0usize;
    let mut per_epoch = Vec::with_capacity(n);
    for (point, truth_row) in series.iter().zip(truth.iter()).take(n) {
        let mut row = EpochErrorRow {
            t: truth_row.t,
            pos_err_m: f64::NAN,
            angle_err_deg: f64::NAN,
        };
        if let Some(p) = &point.position {
            let de = p.e - truth_row.e;
            let dn = p.n - truth_row.n;
            let du = p.u - truth_row.u;
            let err = (de * de + dn * dn + du * du).sqrt();
            pos_sq += err * err;
            n_pos += 1;
            row.pos_err_m = err;
        }
        if let Some(a) = point.articulated_deg {
            let err = angle::diff_deg(a, truth_row.angle);
            angle_sq += err * err;
            n_angle += 1;
            row.angle_err_deg = err;
        }
        per_epoch.push(row);
    }
    if n_pos == 0 && n_angle == 0 {
        return Err(HarnessError::EmptyOverlap);
    }

    let mut fix_rate_per_antenna = [0.0f64; 4];
    let mut fix_rate_per_pair = [0.0f64; 6];
    if let Some(solves) = solves {
        let total = solves.len().max(1) as f64;
        for s in solves {
            for (j, sol) in s.rtk.iter().enumerate() {
                if matches!(sol, Some(sol) if sol.status == FixStatus::Fix) {
                    fix_rate_per_antenna[j] += 1.0;
                }
            }
            for (k, sol) in s.mvbase.iter().enumerate() {
                if matches!(sol, Some(sol) if sol.status == FixStatus::Fix) {
                    fix_rate_per_pair[k] += 1.0;
                }
            }
        }
        for r in &mut fix_rate_per_antenna {
            *r /= total;
        }
        for r in &mut fix_rate_per_pair {
            *r /= total;
        }
    }

    Ok(MetricsReport {
        pos_rms_m: if n_pos > 0 {
            (pos_sq / n_pos as f64).sqrt()
        } else {
            0.0
        },
        angle_rms_deg: if n_angle > 0 {
            (angle_sq / n_angle as f64).sqrt()
        } else {
            0.0
        },
        n_epochs: n,
        n_position_epochs: n_pos,
        n_angle_epochs: n_angle,
        fix_rate_per_antenna,
        fix_rate_per_pair,
        per_epoch,
    })
}
