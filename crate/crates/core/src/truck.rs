//! Articulated-truck kinematics: antenna geometry, ground-truth trajectory
//! generation, and extraction of truck position and articulated angle from
//! antenna positions.
//!
//! The truck is two rigid sections joined by a vertical hinge. Antennas 1,2
//! sit on the front section, 3,4 on the rear, each pair along its section's
//! longitudinal axis, so the pair direction is the section heading. Headings
//! are measured in the horizontal ENU plane, counterclockwise from east, in
//! degrees.

use crate::angle;
use crate::geodesy::EnuPoint;
use nalgebra::Vector3;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum TruckError {
    /// An antenna pair has no usable horizontal direction.
    #[error("degenerate geometry: antenna pair {pair} horizontal separation {sep_m} m < 1e-6 m")]
    DegenerateGeometry { pair: &'static str, sep_m: f64 },
    /// Trajectory description is empty or contains non-finite values.
    #[error("invalid path: {0}")]
    InvalidPath(String),
}

/// Rigid placement of the four antennas on the two sections.
///
/// Offsets are body-frame (x forward along the section axis, y left, z up)
/// relative to each section's reference point; the front reference point is
/// the midpoint of antennas 1 and 2. The hinge sits `joint_setback_front`
/// behind the front reference and `joint_setback_rear` ahead of the rear
/// reference.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AntennaGeometry {
    /// Front-pair separation, meters.
    pub l12: f64,
    /// Rear-pair separation, meters.
    pub l34: f64,
    pub front_offsets: [[f64; 3]; 2],
    pub rear_offsets: [[f64; 3]; 2],
    /// Distance from the front reference point back to the hinge, meters.
    pub joint_setback_front: f64,
    /// Distance from the hinge back to the rear reference point, meters.
    pub joint_setback_rear: f64,
}

impl Default for AntennaGeometry {
    /// HM400-scale defaults: 3 m pair separations, antennas 3.5 m above
    /// ground. The real separations are site-measured; these are stand-ins.
    fn default() -> Self {
        Self::symmetric(3.0, 3.0, 3.5)
    }
}

impl AntennaGeometry {
    /// Pairs placed symmetrically along each section axis at height `h`.
    pub fn symmetric(l12: f64, l34: f64, h: f64) -> Self {
        Self {
            l12,
            l34,
            front_offsets: [[-l12 / 2.0, 0.0, h], [l12 / 2.0, 0.0, h]],
            rear_offsets: [[-l34 / 2.0, 0.0, h], [l34 / 2.0, 0.0, h]],
            joint_setback_front: 2.5,
            joint_setback_rear: 3.5,
        }
    }
}

/// Ground-truth truck state at one instant. Also carries the rates needed to
/// derive exact antenna velocities.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct TruckState {
    pub t: f64,
    pub front_ref: EnuPoint,
    pub front_heading_deg: f64,
    pub rear_heading_deg: f64,
    pub articulated_deg: f64,
    pub speed_mps: f64,
    /// Front-section yaw rate, rad/s.
    pub front_yaw_rate: f64,
    /// Articulation rate, rad/s.
    pub artic_rate: f64,
}

/// Positions of antennas 1-4 at one epoch (1,2 front; 3,4 rear).
#[derive(Debug, Clone, Copy)]
pub struct AntennaSet {
    pub epoch: usize,
    pub positions: [EnuPoint; 4],
}

fn heading_unit(theta: f64) -> Vector3<f64> {
    Vector3::new(theta.cos(), theta.sin(), 0.0)
}

fn rotate_z(theta: f64, v: &[f64; 3]) -> Vector3<f64> {
    let (s, c) = theta.sin_cos();
    Vector3::new(c * v[0] - s * v[1], s * v[0] + c * v[1], v[2])
}

/// z-axis cross product, the velocity of a rotating lever arm.
fn z_cross(v: Vector3<f64>) -> Vector3<f64> {
    Vector3::new(-v.y, v.x, 0.0)
}

fn rear_ref(state: &TruckState, geom: &AntennaGeometry) -> Vector3<f64> {
    let theta_f = state.front_heading_deg.to_radians();
    let theta_r = state.rear_heading_deg.to_radians();
    let joint = state.front_ref.as_vector() - geom.joint_setback_front * heading_unit(theta_f);
    joint - geom.joint_setback_rear * heading_unit(theta_r)
}

/// Rigid-body placement of the four antennas for a truck state.
pub fn antenna_positions(state: &TruckState, geom: &AntennaGeometry) -> AntennaSet {
    let theta_f = state.front_heading_deg.to_radians();
    let theta_r = state.rear_heading_deg.to_radians();
    let front = state.front_ref.as_vector();
    let rear = rear_ref(state, geom);
    let pos = [
        front + rotate_z(theta_f, &geom.front_offsets[0]),
        front + rotate_z(theta_f, &geom.front_offsets[1]),
        rear + rotate_z(theta_r, &geom.rear_offsets[0]),
        rear + rotate_z(theta_r, &geom.rear_offsets[1]),
    ];
    AntennaSet {
        epoch: 0,
        positions: pos.map(EnuPoint::from_vector),
    }
}

/// Exact antenna velocities for a truck state, from the rigid-body motion of
/// each section.
pub fn antenna_velocities(state: &TruckState, geom: &AntennaGeometry) -> [Vector3<f64>; 4] {
    let theta_f = state.front_heading_deg.to_radians();
    let theta_r = state.rear_heading_deg.to_radians();
    let yaw_f = state.front_yaw_rate;
    let yaw_r = state.front_yaw_rate - state.artic_rate;
    let normal = |theta: f64| Vector3::new(-theta.sin(), theta.cos(), 0.0);

    let v_front = state.speed_mps * heading_unit(theta_f);
    let v_joint = v_front - geom.joint_setback_front * yaw_f * normal(theta_f);
    let v_rear = v_joint - geom.joint_setback_rear * yaw_r * normal(theta_r);

    [
        v_front + yaw_f * z_cross(rotate_z(theta_f, &geom.front_offsets[0])),
        v_front + yaw_f * z_cross(rotate_z(theta_f, &geom.front_offsets[1])),
        v_rear + yaw_r * z_cross(rotate_z(theta_r, &geom.rear_offsets[0])),
        v_rear + yaw_r * z_cross(rotate_z(theta_r, &geom.rear_offsets[1])),
    ]
}

/// Truck position: component-wise midpoint of antennas 1 and 2.
pub fn truck_position(set: &AntennaSet) -> EnuPoint {
    let m = (set.positions[0].as_vector() + set.positions[1].as_vector()) / 2.0;
    EnuPoint::from_vector(m)
}

fn pair_heading_deg(a: &EnuPoint, b: &EnuPoint, pair: &'static str) -> Result<f64, TruckError> {
    let de = b.e - a.e;
    let dn = b.n - a.n;
    let sep = (de * de + dn * dn).sqrt();
    if sep < 1e-6 {
        return Err(TruckError::DegenerateGeometry { pair, sep_m: sep });
    }
    Ok(dn.atan2(de).to_degrees())
}

/// Heading of the front antenna pair (1 -> 2), degrees CCW from east.
pub fn front_heading(set: &AntennaSet) -> Result<f64, TruckError> {
    pair_heading_deg(&set.positions[0], &set.positions[1], "1-2")
}

/// Heading of the rear antenna pair (3 -> 4), degrees CCW from east.
pub fn rear_heading(set: &AntennaSet) -> Result<f64, TruckError> {
    pair_heading_deg(&set.positions[2], &set.positions[3], "3-4")
}

/// Articulated angle: front-pair heading minus rear-pair heading, computed
/// on horizontal components only and wrapped to (-180, 180] degrees.
pub fn articulated_angle(set: &AntennaSet) -> Result<f64, TruckError> {
    Ok(angle::diff_deg(front_heading(set)?, rear_heading(set)?))
}

/// One steering-profile segment: hold `target_deg` as the commanded
/// articulation for `duration_s` (the actual angle slews toward it at the
/// configured rate).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SteeringSegment {
    pub duration_s: f64,
    pub target_deg: f64,
}

/// Trajectory description: constant speed plus a slew-limited articulation
/// profile.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectorySpec {
    pub speed_mps: f64,
    /// Articulation slew rate bound, deg/s.
    pub artic_slew_deg_s: f64,
    /// Physical articulation limit, deg.
    pub artic_limit_deg: f64,
    pub start_e: f64,
    pub start_n: f64,
    pub start_heading_deg: f64,
    pub segments: Vec<SteeringSegment>,
}

impl TrajectorySpec {
    /// The default scenario: 60 s at 10 km/h with alternating ±20°
    /// articulation targets (an S-curve of left and right turns).
    pub fn default_s_curve() -> Self {
        Self {
            speed_mps: 10.0 / 3.6,
            artic_slew_deg_s: 10.0,
            artic_limit_deg: 45.0,
            start_e: 200.0,
            start_n: 0.0,
            start_heading_deg: 90.0,
            segments: vec![
                SteeringSegment {
                    duration_s: 5.0,
                    target_deg: 0.0,
                },
                SteeringSegment {
                    duration_s: 12.0,
                    target_deg: 20.0,
                },
                SteeringSegment {
                    duration_s: 13.0,
                    target_deg: -20.0,
                },
                SteeringSegment {
                    duration_s: 12.0,
                    target_deg: 20.0,
                },
                SteeringSegment {
                    duration_s: 13.0,
                    target_deg: -20.0,
                },
                SteeringSegment {
                    duration_s: 5.0,
                    target_deg: 0.0,
                },
            ],
        }
    }

    pub fn duration_s(&self) -> f64 {
        self.segments.iter().map(|s| s.duration_s).sum()
    }

    fn validate(&self) -> Result<(), TruckError> {
        if self.segments.is_empty() {
            return Err(TruckError::InvalidPath("no steering segments".into()));
        }
        let finite = self.speed_mps.is_finite()
            && self.artic_slew_deg_s.is_finite()
            && self.artic_limit_deg.is_finite()
            && self.start_e.is_finite()
            && self.start_n.is_finite()
            && self.start_heading_deg.is_finite()
            && self
                .segments
                .iter()
                .all(|s| s.duration_s.is_finite() && s.duration_s > 0.0 && s.target_deg.is_finite());
        if !finite {
            return Err(TruckError::InvalidPath(
                "non-finite or non-positive value in trajectory spec".into(),
            ));
        }
        if self.artic_slew_deg_s <= 0.0 || self.artic_limit_deg <= 0.0 {
            return Err(TruckError::InvalidPath(
                "slew rate and articulation limit must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// Piecewise-linear articulation profile: the slew-limited response to the
/// segment targets. Breakpoints carry (t, angle_rad, rate_rad_s on [t, next)).
struct ArticProfile {
    breakpoints: Vec<(f64, f64, f64)>,
}

impl ArticProfile {
    fn build(spec: &TrajectorySpec) -> Self {
        let slew = spec.artic_slew_deg_s.to_radians();
        let limit = spec.artic_limit_deg.to_radians();
        let mut breakpoints = Vec::new();
        let mut t = 0.0;
        let mut gamma = 0.0_f64;
        for seg in &spec.segments {
            let target = seg.target_deg.to_radians().clamp(-limit, limit);
            let t_end = t + seg.duration_s;
            let gap = target - gamma;
            let ramp = (gap.abs() / slew).min(seg.duration_s);
            if ramp > 0.0 {
                breakpoints.push((t, gamma, slew.copysign(gap)));
                gamma += slew.copysign(gap) * ramp;
                t += ramp;
            }
            if t < t_end {
                breakpoints.push((t, gamma, 0.0));
                t = t_end;
            }
        }
        breakpoints.push((t, gamma, 0.0));
        Self { breakpoints }
    }

    /// (angle_rad, rate_rad_s) at time t.
    fn eval(&self, t: f64) -> (f64, f64) {
        let idx = match self
            .breakpoints
            .binary_search_by(|bp| bp.0.partial_cmp(&t).unwrap())
        {
            Ok(i) => i,
            Err(0) => 0,
            Err(i) => i - 1,
        };
        let (t0, g0, rate) = self.breakpoints[idx];
        (g0 + rate * (t - t0), rate)
    }

    fn kink_times(&self) -> impl Iterator<Item = f64> + '_ {
        self.breakpoints.iter().map(|bp| bp.0)
    }
}

/// Front-section yaw rate for the hinged two-section model: the rear axle
/// rolls without lateral slip, which couples heading rate to articulation.
fn front_yaw_rate(
    speed: f64,
    gamma: f64,
    gamma_rate: f64,
    l_front: f64,
    l_rear: f64,
) -> f64 {
    (speed * gamma.sin() + l_rear * gamma_rate) / (l_front * gamma.cos() + l_rear)
}

/// Generates a kinematically consistent ground-truth series at `rate_hz`.
///
/// The front reference integrates speed along the front heading; the front
/// yaw rate follows from the no-slip hinge model; the rear heading is the
/// front heading minus the articulation profile.
pub fn simulate_trajectory(
    spec: &TrajectorySpec,
    geom: &AntennaGeometry,
    rate_hz: f64,
) -> Result<Vec<TruckState>, TruckError> {
    spec.validate()?;
    if !rate_hz.is_finite() || rate_hz <= 0.0 {
        return Err(TruckError::InvalidPath(format!(
            "rate_hz must be positive, got {rate_hz}"
        )));
    }

    let profile = ArticProfile::build(spec);
    let duration = spec.duration_s();
    let n_epochs = (duration * rate_hz).round() as usize + 1;

    // Integration step boundaries: epoch grid plus articulation kinks, so no
    // RK4 step straddles a rate discontinuity, subdivided to <= 10 ms.
    let mut boundaries: Vec<f64> = (0..n_epochs).map(|i| i as f64 / rate_hz).collect();
    boundaries.extend(profile.kink_times().filter(|&t| t > 0.0 && t < duration));
    boundaries.sort_by(|a, b| a.partial_cmp(b).unwrap());
    boundaries.dedup_by(|a, b| (*a - *b).abs() < 1e-12);

    let v = spec.speed_mps;
    let lf = geom.joint_setback_front;
    let lr = geom.joint_setback_rear;
    // State: (theta_f, e, n).
    let deriv = |t: f64, theta: f64| {
        let (gamma, gamma_rate) = profile.eval(t);
        let yaw = front_yaw_rate(v, gamma, gamma_rate, lf, lr);
        (yaw, v * theta.cos(), v * theta.sin())
    };

    let mut theta = spec.start_heading_deg.to_radians();
    let mut e = spec.start_e;
    let mut n = spec.start_n;
    let mut out = Vec::with_capacity(n_epochs);
    let mut epoch = 0usize;

    let record = |t: f64, theta: f64, e: f64, n: f64, epoch: usize| {
        let (gamma, gamma_rate) = profile.eval(t);
        let yaw = front_yaw_rate(v, gamma, gamma_rate, lf, lr);
        let front_heading_deg = theta.to_degrees();
        TruckState {
            t: epoch as f64 / rate_hz,
            front_ref: EnuPoint::new(e, n, 0.0),
            front_heading_deg,
            rear_heading_deg: front_heading_deg - gamma.to_degrees(),
            articulated_deg: gamma.to_degrees(),
            speed_mps: v,
            front_yaw_rate: yaw,
            artic_rate: gamma_rate,
        }
    };

    out.push(record(0.0, theta, e, n, epoch));
    epoch += 1;
    let next_grid = |epoch: usize| epoch as f64 / rate_hz;

    for w in boundaries.windows(2) {
        let (t0, t1) = (w[0], w[1]);
        let span = t1 - t0;
        let n_sub = (span / 0.01).ceil().max(1.0) as usize;
        let h = span / n_sub as f64;
        for k in 0..n_sub {
            let t = t0 + k as f64 * h;
            let (k1t, k1e, k1n) = deriv(t, theta);
            let (k2t, k2e, k2n) = deriv(t + h / 2.0, theta + h / 2.0 * k1t);
            let (k3t, k3e, k3n) = deriv(t + h / 2.0, theta + h / 2.0 * k2t);
            let (k4t, k4e, k4n) = deriv(t + h, theta + h * k3t);
            theta += h / 6.0 * (k1t + 2.0 * k2t + 2.0 * k3t + k4t);
            e += h / 6.0 * (k1e + 2.0 * k2e + 2.0 * k3e + k4e);
            n += h / 6.0 * (k1n + 2.0 * k2n + 2.0 * k3n + k4n);
        }
        if epoch < n_epochs && (t1 - next_grid(epoch)).abs() < 1e-9 {
            out.push(record(t1, theta, e, n, epoch));
            epoch += 1;
        }
    }

    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn state(
        e: f64,
        n: f64,
        front_heading_deg: f64,
        articulated_deg: f64,
    ) -> TruckState {
        TruckState {
            t: 0.0,
            front_ref: EnuPoint::new(e, n, 0.0),
            front_heading_deg,
            rear_heading_deg: front_heading_deg - articulated_deg,
            articulated_deg,
            speed_mps: 0.0,
            front_yaw_rate: 0.0,
            artic_rate: 0.0,
        }
    }

    #[test]
    fn identity_pose_places_antennas_at_offsets() {
        let geom = AntennaGeometry::default();
        let set = antenna_positions(&state(0.0, 0.0, 0.0, 0.0), &geom);
        assert_abs_diff_eq!(set.positions[0].e, -1.5, epsilon = 1e-12);
        assert_abs_diff_eq!(set.positions[1].e, 1.5, epsilon = 1e-12);
        assert_abs_diff_eq!(set.positions[0].u, 3.5, epsilon = 1e-12);
        // Rear reference sits joint_setback_front + joint_setback_rear behind.
        assert_abs_diff_eq!(set.positions[2].e, -6.0 - 1.5, epsilon = 1e-12);
        assert_abs_diff_eq!(set.positions[3].e, -6.0 + 1.5, epsilon = 1e-12);
    }

    #[test]
    fn midpoint_position() {
        let set = AntennaSet {
            epoch: 0,
            positions: [
                EnuPoint::new(0.0, 0.0, 0.0),
                EnuPoint::new(2.0, 0.0, 0.0),
                EnuPoint::new(-5.0, 0.0, 0.0),
                EnuPoint::new(-3.0, 0.0, 0.0),
            ],
        };
        let p = truck_position(&set);
        assert_abs_diff_eq!(p.e, 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(p.n, 0.0, epsilon = 1e-15);
    }

    #[test]
    fn constructed_thirty_degree_articulation() {
        let geom = AntennaGeometry::default();
        let set = antenna_positions(&state(3.0, -7.0, 55.0, 30.0), &geom);
        assert_abs_diff_eq!(articulated_angle(&set).unwrap(), 30.0, epsilon = 1e-9);
    }

    #[test]
    fn degenerate_pair_is_rejected() {
        let mut set = antenna_positions(&state(0.0, 0.0, 0.0, 0.0), &AntennaGeometry::default());
        set.positions[1] = EnuPoint::new(set.positions[0].e, set.positions[0].n, 9.0);
        assert!(matches!(
            articulated_angle(&set),
            Err(TruckError::DegenerateGeometry { .. })
        ));
    }

    #[test]
    fn rigid_pair_distances_hold_for_any_state() {
        let geom = AntennaGeometry::default();
        for k in 0..100 {
            let s = state(
                (k as f64) * 1.3,
                (k as f64) * -0.7,
                k as f64 * 7.0,
                ((k % 9) as f64 - 4.0) * 10.0,
            );
            let set = antenna_positions(&s, &geom);
            let d12 = (set.positions[1].as_vector() - set.positions[0].as_vector()).norm();
            let d34 = (set.positions[3].as_vector() - set.positions[2].as_vector()).norm();
            assert_abs_diff_eq!(d12, geom.l12, epsilon = 1e-9);
            assert_abs_diff_eq!(d34, geom.l34, epsilon = 1e-9);
        }
    }

    #[test]
    fn straight_line_has_exact_length() {
        let spec = TrajectorySpec {
            speed_mps: 2.0,
            artic_slew_deg_s: 10.0,
            artic_limit_deg: 45.0,
            start_e: 0.0,
            start_n: 0.0,
            start_heading_deg: 30.0,
            segments: vec![SteeringSegment {
                duration_s: 20.0,
                target_deg: 0.0,
            }],
        };
        let series = simulate_trajectory(&spec, &AntennaGeometry::default(), 10.0).unwrap();
        let first = series.first().unwrap().front_ref.as_vector();
        let last = series.last().unwrap().front_ref.as_vector();
        assert_abs_diff_eq!((last - first).norm(), 40.0, epsilon = 1e-6);
    }

    #[test]
    fn default_profile_round_trips_through_antennas() {
        let geom = AntennaGeometry::default();
        let spec = TrajectorySpec::default_s_curve();
        let series = simulate_trajectory(&spec, &geom, 10.0).unwrap();
        assert_eq!(series.len(), 601);
        for s in &series {
            assert!(s.articulated_deg.abs() <= spec.artic_limit_deg + 1e-12);
            let set = antenna_positions(s, &geom);
            let extracted = articulated_angle(&set).unwrap();
            assert_abs_diff_eq!(extracted, s.articulated_deg, epsilon = 1e-9);
        }
    }

    #[test]
    fn antenna_velocities_match_finite_differences() {
        let geom = AntennaGeometry::default();
        let spec = TrajectorySpec::default_s_curve();
        // Fine grid so central differences of positions approximate the
        // velocity well away from slew kinks.
        let series = simulate_trajectory(&spec, &geom, 1000.0).unwrap();
        let dt = 1e-3;
        let mut checked = 0;
        for i in (1000..series.len() - 1000).step_by(997) {
            let s = &series[i];
            // Skip epochs near articulation-rate kinks.
            if (series[i - 1].artic_rate - series[i + 1].artic_rate).abs() > 1e-12 {
                continue;
            }
            let before = antenna_positions(&series[i - 1], &geom);
            let after = antenna_positions(&series[i + 1], &geom);
            let vel = antenna_velocities(s, &geom);
            for (a, v) in vel.iter().enumerate() {
                let fd = (after.positions[a].as_vector() - before.positions[a].as_vector())
                    / (2.0 * dt);
                assert!(
                    (fd - v).norm() < 1e-4,
                    "antenna {a} epoch {i}: fd {fd:?} vs analytic {v:?}"
                );
            }
            checked += 1;
        }
        assert!(checked > 10);
    }

    #[test]
    fn empty_spec_is_invalid() {
        let spec = TrajectorySpec {
            segments: vec![],
            ..TrajectorySpec::default_s_curve()
        };
        assert!(matches!(
            simulate_trajectory(&spec, &AntennaGeometry::default(), 10.0),
            Err(TruckError::InvalidPath(_))
        ));
    }

    proptest! {
        // Forward placement then extraction recovers the articulated angle.
        #[test]
        fn extraction_inverts_placement(
            e in -500.0f64..500.0,
            n in -500.0f64..500.0,
            heading in -180.0f64..180.0,
            artic in -89.0f64..89.0,
        ) {
            let geom = AntennaGeometry::default();
            let set = antenna_positions(&state(e, n, heading, artic), &geom);
            let got = articulated_angle(&set).unwrap();
            prop_assert!((got - artic).abs() < 1e-9, "got {got}, want {artic}");
        }

        // Uniform vertical offset cannot change the articulated angle.
        #[test]
        fn vertical_offset_invariance(
            heading in -180.0f64..180.0,
            artic in -44.0f64..44.0,
            dz in -100.0f64..100.0,
        ) {
            let geom = AntennaGeometry::default();
            let mut set = antenna_positions(&state(0.0, 0.0, heading, artic), &geom);
            let base = articulated_angle(&set).unwrap();
            for p in &mut set.positions {
                p.u += dz;
            }
            let shifted = articulated_angle(&set).unwrap();
            prop_assert!((base - shifted).abs() < 1e-12);
        }

        // Translation equivariance of the midpoint position.
        #[test]
        fn translation_equivariance(
            de in -100.0f64..100.0,
            dn in -100.0f64..100.0,
            du in -10.0f64..10.0,
        ) {
            let geom = AntennaGeometry::default();
            let mut set = antenna_positions(&state(1.0, 2.0, 25.0, 10.0), &geom);
            let before = truck_position(&set).as_vector();
            for p in &mut set.positions {
                p.e += de;
                p.n += dn;
                p.u += du;
            }
            let after = truck_position(&set).as_vector();
            let shift = Vector3::new(de, dn, du);
            prop_assert!((after - before - shift).norm() < 1e-9);
        }
    }
}
