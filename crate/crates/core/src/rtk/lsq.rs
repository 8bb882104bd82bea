//! Least-squares stages: the float (baseline, ambiguity) solution, the
//! fixed-ambiguity baseline polish, Doppler velocity, and pseudorange single
//! point positioning.

use super::{DdObservation, FloatSolution, RtkConfig, RtkError, VelocitySolution};
use crate::obs::{GnssObservation, SPEED_OF_LIGHT};
use crate::sky::EnuSky;
use nalgebra::{DMatrix, DVector, Matrix4, Vector3, Vector4};

/// Condition-number bound treated as singular geometry.
const CONDITION_LIMIT: f64 = 1e12;

/// Inverse of the DD measurement covariance for one observable type.
///
/// Single-difference variances follow the elevation model
/// `v(el) = 2 sigma^2 / sin^2(el)`; a double difference then has variance
/// `v(el_ref) + v(el_other)` and, within a system, covariance `v(el_ref)`
/// with every other DD through the shared reference satellite. The blocks
/// are per system (no cross-system differencing) and depend only on the
/// elevations, so the weight is computed once per solve.
pub(super) fn dd_weight_matrix(dds: &[DdObservation], sigma: f64) -> Option<DMatrix<f64>> {
    let n = dds.len();
    let sd_var = |el_deg: f64| {
        let s = el_deg.to_radians().sin();
        2.0 * sigma * sigma / (s * s)
    };
    let mut cov = DMatrix::<f64>::zeros(n, n);
    let mut start = 0usize;
    while start < n {
        let system = dds[start].reference.system;
        let mut end = start;
        while end < n && dds[end].reference.system == system {
            end += 1;
        }
        let v_ref = sd_var(dds[start].elevation_ref_deg);
        for j in start..end {
            for k in start..end {
                cov[(j, k)] = v_ref;
            }
            cov[(j, j)] += sd_var(dds[j].elevation_other_deg);
        }
        start = end;
    }
    Some(cov.cholesky()?.inverse())
}

struct DdGeometry {
    /// Partial of the DD range with respect to the rover position.
    h: Vector3<f64>,
    /// Modeled DD range at the current rover position.
    ddr: f64,
}

fn dd_geometry(
    dd: &DdObservation,
    sky: &EnuSky,
    rover: &Vector3<f64>,
    base: &Vector3<f64>,
) -> Result<DdGeometry, RtkError> {
    let s_ref = sky
        .get(dd.reference)
        .ok_or(RtkError::MissingSatellite(dd.reference))?
        .position;
    let s_oth = sky
        .get(dd.other)
        .ok_or(RtkError::MissingSatellite(dd.other))?
        .position;
    let r_ref_rov = (s_ref - rover).norm();
    let r_oth_rov = (s_oth - rover).norm();
    let r_ref_base = (s_ref - base).norm();
    let r_oth_base = (s_oth - base).norm();
    let u_ref = (s_ref - rover) / r_ref_rov;
    let u_oth = (s_oth - rover) / r_oth_rov;
    Ok(DdGeometry {
        h: u_oth - u_ref,
        ddr: (r_ref_rov - r_ref_base) - (r_oth_rov - r_oth_base),
    })
}

/// Iterated linearized least squares over (baseline, float ambiguities),
/// using DD phase weighted by the elevation-dependent correlated covariance
/// and DD pseudorange to separate the ambiguities.
pub fn float_solution(
    dds: &[DdObservation],
    sky: &EnuSky,
    rover_approx: &Vector3<f64>,
    base_pos: &Vector3<f64>,
    config: &RtkConfig,
) -> Result<FloatSolution, RtkError> {
    let n = dds.len();
    if n < 4 {
        return Err(RtkError::InsufficientSatellites { needed: 4, got: n });
    }
    let dim = 3 + n;
    let mut x = *rover_approx;

    let w_phase = dd_weight_matrix(dds, config.phase_sigma_m).ok_or(RtkError::NotPositiveDefinite)?;
    let w_code = dd_weight_matrix(dds, config.code_sigma_m).ok_or(RtkError::NotPositiveDefinite)?;

    for iteration in 0..config.max_iterations {
        // Rows j: phase misclosure with an ambiguity column; rows also feed
        // the code system through the shared geometry block.
        let mut a_phase = DMatrix::<f64>::zeros(n, dim);
        let mut a_code = DMatrix::<f64>::zeros(n, dim);
        let mut z_phase = DVector::<f64>::zeros(n);
        let mut z_code = DVector::<f64>::zeros(n);
        for (j, dd) in dds.iter().enumerate() {
            let geom = dd_geometry(dd, sky, &x, base_pos)?;
            for k in 0..3 {
                a_phase[(j, k)] = geom.h[k];
                a_code[(j, k)] = geom.h[k];
            }
            a_phase[(j, 3 + j)] = dd.wavelength_m;
            z_phase[j] = dd.dd_phase_m - geom.ddr;
            z_code[j] = dd.dd_pseudorange_m - geom.ddr;
        }

        let apw = a_phase.transpose() * &w_phase;
        let acw = a_code.transpose() * &w_code;
        let normal = &apw * &a_phase + &acw * &a_code;
        let rhs = &apw * &z_phase + &acw * &z_code;

        if iteration == 0 {
            let eigen = normal.clone().symmetric_eigenvalues();
            let max = eigen.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let min = eigen.iter().cloned().fold(f64::INFINITY, f64::min);
            if !min.is_finite() || min <= 0.0 || max / min > CONDITION_LIMIT {
                return Err(RtkError::SingularGeometry {
                    condition: if min > 0.0 { max / min } else { f64::INFINITY },
                });
            }
        }

        let chol = normal
            .clone()
            .cholesky()
            .ok_or(RtkError::NotPositiveDefinite)?;
        let delta = chol.solve(&rhs);
        let dx = Vector3::new(delta[0], delta[1], delta[2]);
        x += dx;

        if dx.norm() < config.convergence_m {
            let covariance = chol.inverse();
            let float_ambiguities = DVector::from_iterator(n, (0..n).map(|j| delta[3 + j]));
            return Ok(FloatSolution {
                baseline: x - base_pos,
                rover_position: x,
                float_ambiguities,
                covariance,
            });
        }
    }
    Err(RtkError::NoConvergence(config.max_iterations))
}

/// Gauss-Newton baseline polish on DD phase with the ambiguities held at
/// their fixed integers. Returns the rover position and the normalized
/// chi-square of the post-fit phase residuals.
pub(super) fn fixed_baseline(
    dds: &[DdObservation],
    sky: &EnuSky,
    start: &Vector3<f64>,
    base_pos: &Vector3<f64>,
    fixed: &[i64],
    config: &RtkConfig,
) -> Result<(Vector3<f64>, f64), RtkError> {
    let n = dds.len();
    let w_phase =
        dd_weight_matrix(dds, config.phase_sigma_m).ok_or(RtkError::NotPositiveDefinite)?;
    let mut x = *start;
    let residuals = |x: &Vector3<f64>| -> Result<(DMatrix<f64>, DVector<f64>), RtkError> {
        let mut a = DMatrix::<f64>::zeros(n, 3);
        let mut r = DVector::<f64>::zeros(n);
        for (j, dd) in dds.iter().enumerate() {
            let geom = dd_geometry(dd, sky, x, base_pos)?;
            for k in 0..3 {
                a[(j, k)] = geom.h[k];
            }
            r[j] = dd.dd_phase_m - geom.ddr - dd.wavelength_m * fixed[j] as f64;
        }
        Ok((a, r))
    };
    for _ in 0..30 {
        let (a, r) = residuals(&x)?;
        let awt = a.transpose() * &w_phase;
        let normal = &awt * &a;
        let rhs = &awt * &r;
        let chol = normal.cholesky().ok_or(RtkError::NotPositiveDefinite)?;
        let delta = chol.solve(&rhs);
        let dx = Vector3::new(delta[0], delta[1], delta[2]);
        x += dx;
        if dx.norm() < 1e-9 {
            break;
        }
    }
    let (_, r) = residuals(&x)?;
    let chi2 = (r.transpose() * &w_phase * &r)[(0, 0)] / n as f64;
    Ok((x, chi2))
}

/// Least squares over (3D velocity, clock drift) from one antenna's Doppler
/// observations: per satellite, the measured range rate minus the satellite
/// velocity projection equals the line-of-sight projection of the receiver
/// velocity plus a common drift.
pub fn doppler_velocity(
    obs: &[GnssObservation],
    sky: &EnuSky,
    approx: &Vector3<f64>,
) -> Result<VelocitySolution, RtkError> {
    let mut normal = Matrix4::<f64>::zeros();
    let mut rhs = Vector4::<f64>::zeros();
    let mut n_sats = 0usize;
    for o in obs {
        let Some(sat) = sky.get(o.sat) else {
            continue;
        };
        let los = sat.position - approx;
        let u = los / los.norm();
        // dopp = u . (v_sat - v_rcv) + drift  =>  -u . v_rcv + drift = dopp - u . v_sat
        let row = Vector4::new(-u.x, -u.y, -u.z, 1.0);
        let z = o.doppler_range_rate_mps - u.dot(&sat.velocity);
        normal += row * row.transpose();
        rhs += row * z;
        n_sats += 1;
    }
    if n_sats < 4 {
        return Err(RtkError::InsufficientSatellites {
            needed: 4,
            got: n_sats,
        });
    }
    let chol = nalgebra::Cholesky::new(normal).ok_or(RtkError::SingularGeometry {
        condition: f64::INFINITY,
    })?;
    let sol = chol.solve(&rhs);
    Ok(VelocitySolution {
        velocity: Vector3::new(sol[0], sol[1], sol[2]),
        clock_drift_mps: sol[3],
        n_sats,
    })
}

/// Iterated pseudorange point solution over (position, receiver clock).
/// Satellite clocks are corrected from the sky data; atmospheric delays are
/// left unmodeled, so the result is meter-level and serves as an
/// initialization.
pub fn single_point_position(
    obs: &[GnssObservation],
    sky: &EnuSky,
    initial: &Vector3<f64>,
) -> Result<Vector3<f64>, RtkError> {
    let usable: Vec<(&GnssObservation, &crate::sky::EnuSatellite)> = obs
        .iter()
        .filter_map(|o| sky.get(o.sat).map(|s| (o, s)))
        .collect();
    if usable.len() < 4 {
        return Err(RtkError::InsufficientSatellites {
            needed: 4,
            got: usable.len(),
        });
    }
    let mut x = *initial;
    for _ in 0..10 {
        let mut normal = Matrix4::<f64>::zeros();
        let mut rhs = Vector4::<f64>::zeros();
        for (o, sat) in &usable {
            let los = sat.position - x;
            let r = los.norm();
            let u = los / r;
            let row = Vector4::new(-u.x, -u.y, -u.z, 1.0);
            let z = o.pseudorange_m + SPEED_OF_LIGHT * sat.clock_offset_s - r;
            normal += row * row.transpose();
            rhs += row * z;
        }
        let chol = nalgebra::Cholesky::new(normal).ok_or(RtkError::SingularGeometry {
            condition: f64::INFINITY,
        })?;
        let sol = chol.solve(&rhs);
        let dx = Vector3::new(sol[0], sol[1], sol[2]);
        x += dx;
        if dx.norm() < 1e-4 {
            break;
        }
    }
    Ok(x)
}
