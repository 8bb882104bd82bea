//! Local-frame geometry: WGS-84 geodetic, Earth-centered Earth-fixed (ECEF)
//! and local east-north-up (ENU) coordinates.
//!
//! All estimation in this crate happens in an ENU frame anchored at the fixed
//! base station; ECEF exists to place satellites and the site consistently.
//! Conversions are pure functions over value types.

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

/// WGS-84 semi-major axis, meters.
pub const WGS84_A: f64 = 6_378_137.0;
/// WGS-84 flattening.
pub const WGS84_F: f64 = 1.0 / 298.257_223_563;
/// WGS-84 first eccentricity squared.
pub const WGS84_E2: f64 = WGS84_F * (2.0 - WGS84_F);

/// Earth-centered Earth-fixed point, meters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EcefPoint {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl EcefPoint {
    pub fn new(x: f64, y: f64, z: f64) -> Self {
        Self { x, y, z }
    }

    pub fn as_vector(&self) -> Vector3<f64> {
        Vector3::new(self.x, self.y, self.z)
    }

    pub fn from_vector(v: Vector3<f64>) -> Self {
        Self::new(v.x, v.y, v.z)
    }
}

/// Point in a local east-north-up frame, meters. The anchoring origin is
/// carried by whatever dataset the point belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnuPoint {
    pub e: f64,
    pub n: f64,
    pub u: f64,
}

impl EnuPoint {
    pub fn new(e: f64, n: f64, u: f64) -> Self {
        Self { e, n, u }
    }

    pub fn as_vector(&self) -> Vector3<f64> {
        Vector3::new(self.e, self.n, self.u)
    }

    pub fn from_vector(v: Vector3<f64>) -> Self {
        Self::new(v.x, v.y, v.z)
    }
}

/// Geodetic point on the WGS-84 ellipsoid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeodeticPoint {
    /// Latitude in degrees, [-90, 90].
    pub lat_deg: f64,
    /// Longitude in degrees, [-180, 180].
    pub lon_deg: f64,
    /// Height above the ellipsoid, meters.
    pub height_m: f64,
}

impl GeodeticPoint {
    pub fn new(lat_deg: f64, lon_deg: f64, height_m: f64) -> Self {
        Self {
            lat_deg,
            lon_deg,
            height_m,
        }
    }
}

/// Closed-form WGS-84 forward transform.
pub fn geodetic_to_ecef(p: &GeodeticPoint) -> EcefPoint {
    let lat = p.lat_deg.to_radians();
    let lon = p.lon_deg.to_radians();
    let (sin_lat, cos_lat) = lat.sin_cos();
    let (sin_lon, cos_lon) = lon.sin_cos();
    // Prime-vertical radius of curvature.
    let n = WGS84_A / (1.0 - WGS84_E2 * sin_lat * sin_lat).sqrt();
    EcefPoint::new(
        (n + p.height_m) * cos_lat * cos_lon,
        (n + p.height_m) * cos_lat * sin_lon,
        (n * (1.0 - WGS84_E2) + p.height_m) * sin_lat,
    )
}

/// Inverse transform via bounded fixed-point iteration on the latitude
/// (at most 10 iterations, 1e-12 rad convergence). Sufficient at ground
/// heights; not intended for deep-space points.
pub fn ecef_to_geodetic(p: &EcefPoint) -> GeodeticPoint {
    let rho = (p.x * p.x + p.y * p.y).sqrt();
    let lon = p.y.atan2(p.x);
    if rho < 1e-9 {
        // On the polar axis.
        let b = WGS84_A * (1.0 - WGS84_F);
        return GeodeticPoint::new(90.0_f64.copysign(p.z), lon.to_degrees(), p.z.abs() - b);
    }
    let mut lat = (p.z / (rho * (1.0 - WGS84_E2))).atan();
    for _ in 0..10 {
        let sin_lat = lat.sin();
        let n = WGS84_A / (1.0 - WGS84_E2 * sin_lat * sin_lat).sqrt();
        let h = rho / lat.cos() - n;
        let next = (p.z / (rho * (1.0 - WGS84_E2 * n / (n + h)))).atan();
        let delta = (next - lat).abs();
        lat = next;
        if delta < 1e-12 {
            break;
        }
    }
    let sin_lat = lat.sin();
    let n = WGS84_A / (1.0 - WGS84_E2 * sin_lat * sin_lat).sqrt();
    let h = rho / lat.cos() - n;
    GeodeticPoint::new(lat.to_degrees(), lon.to_degrees(), h)
}

/// Rotation taking ECEF deltas into the ENU frame at `origin`.
pub fn enu_rotation(origin: &GeodeticPoint) -> Matrix3<f64> {
    let lat = origin.lat_deg.to_radians();
    let lon = origin.lon_deg.to_radians();
    let (sin_lat, cos_lat) = lat.sin_cos();
    let (sin_lon, cos_lon) = lon.sin_cos();
    Matrix3::new(
        -sin_lon,
        cos_lon,
        0.0,
        -sin_lat * cos_lon,
        -sin_lat * sin_lon,
        cos_lat,
        cos_lat * cos_lon,
        cos_lat * sin_lon,
        sin_lat,
    )
}

/// Rotation + translation into the local tangent frame at `origin`.
pub fn ecef_to_enu(p: &EcefPoint, origin: &GeodeticPoint) -> EnuPoint {
    let o = geodetic_to_ecef(origin);
    let d = p.as_vector() - o.as_vector();
    EnuPoint::from_vector(enu_rotation(origin) * d)
}

/// Inverse of [`ecef_to_enu`].
pub fn enu_to_ecef(p: &EnuPoint, origin: &GeodeticPoint) -> EcefPoint {
    let o = geodetic_to_ecef(origin);
    let d = enu_rotation(origin).transpose() * p.as_vector();
    EcefPoint::from_vector(o.as_vector() + d)
}

/// Rotates an ECEF-frame vector (e.g. a satellite velocity) into the ENU
/// axes at `origin`. No translation.
pub fn ecef_vector_to_enu(v: &Vector3<f64>, origin: &GeodeticPoint) -> Vector3<f64> {
    enu_rotation(origin) * v
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const B: f64 = WGS84_A * (1.0 - WGS84_F);

    #[test]
    fn equator_prime_meridian_maps_to_semi_major_axis() {
        let p = geodetic_to_ecef(&GeodeticPoint::new(0.0, 0.0, 0.0));
        assert!((p.x - WGS84_A).abs() < 1e-9);
        assert!(p.y.abs() < 1e-9);
        assert!(p.z.abs() < 1e-9);
    }

    #[test]
    fn north_pole_maps_to_semi_minor_axis() {
        let p = geodetic_to_ecef(&GeodeticPoint::new(90.0, 0.0, 0.0));
        assert!(p.x.abs() < 1e-9);
        assert!(p.y.abs() < 1e-9);
        assert!((p.z - B).abs() < 1e-9);
    }

    #[test]
    fn origin_maps_to_enu_zero() {
        let origin = GeodeticPoint::new(38.25, 140.85, 120.0);
        let enu = ecef_to_enu(&geodetic_to_ecef(&origin), &origin);
        assert!(enu.as_vector().norm() < 1e-9);
    }

    #[test]
    fn point_due_east_has_east_coordinate() {
        let origin = GeodeticPoint::new(38.25, 140.85, 120.0);
        // Perturb longitude by the arc corresponding to ~100 m at this latitude.
        let lat = origin.lat_deg.to_radians();
        let n = WGS84_A / (1.0 - WGS84_E2 * lat.sin().powi(2)).sqrt();
        let arc = 100.0 / ((n + origin.height_m) * lat.cos());
        let east = GeodeticPoint::new(
            origin.lat_deg,
            origin.lon_deg + arc.to_degrees(),
            origin.height_m,
        );
        let enu = ecef_to_enu(&geodetic_to_ecef(&east), &origin);
        assert!((enu.e - 100.0).abs() < 1e-2, "e = {}", enu.e);
        assert!(enu.n.abs() < 1e-2, "n = {}", enu.n);
        assert!(enu.u.abs() < 1e-2, "u = {}", enu.u);
    }

    proptest! {
        // Round trip geodetic -> ECEF -> geodetic with the iterative inverse
        // as the oracle for the forward transform.
        #[test]
        fn geodetic_ecef_round_trip(
            lat in -85.0f64..85.0,
            lon in -180.0f64..180.0,
            h in -100.0f64..5000.0,
        ) {
            let g = GeodeticPoint::new(lat, lon, h);
            let back = ecef_to_geodetic(&geodetic_to_ecef(&g));
            prop_assert!((back.lat_deg - lat).abs() < 1e-9);
            prop_assert!(crate::angle::diff_deg(back.lon_deg, lon).abs() < 1e-9);
            prop_assert!((back.height_m - h).abs() < 1e-4);
        }

        #[test]
        fn enu_ecef_round_trip(
            lat in -85.0f64..85.0,
            lon in -180.0f64..180.0,
            h in -100.0f64..5000.0,
            e in -5e3f64..5e3,
            n in -5e3f64..5e3,
            u in -5e2f64..5e2,
        ) {
            let origin = GeodeticPoint::new(lat, lon, h);
            let p = EnuPoint::new(e, n, u);
            let back = ecef_to_enu(&enu_to_ecef(&p, &origin), &origin);
            prop_assert!((back.as_vector() - p.as_vector()).norm() < 1e-6);
        }

        // ENU conversion is an isometry: pairwise distances preserved.
        #[test]
        fn enu_preserves_distances(
            lat in -85.0f64..85.0,
            lon in -180.0f64..180.0,
            e1 in -5e3f64..5e3, n1 in -5e3f64..5e3, u1 in -5e2f64..5e2,
            e2 in -5e3f64..5e3, n2 in -5e3f64..5e3, u2 in -5e2f64..5e2,
        ) {
            let origin = GeodeticPoint::new(lat, lon, 50.0);
            let a = EnuPoint::new(e1, n1, u1);
            let b = EnuPoint::new(e2, n2, u2);
            let da = enu_to_ecef(&a, &origin).as_vector();
            let db = enu_to_ecef(&b, &origin).as_vector();
            let d_ecef = (da - db).norm();
            let d_enu = (a.as_vector() - b.as_vector()).norm();
            prop_assert!((d_ecef - d_enu).abs() < 1e-6 * d_enu.max(1.0));
        }
    }
}
