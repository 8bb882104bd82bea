//! Synthetic multi-constellation satellite sky: deterministic circular
//! orbits, per-epoch satellite states, elevation/azimuth geometry and
//! elevation masking.
//!
//! Orbits are circular and propagate in an inertial approximation (earth
//! rotation is ignored inside a desk-scale scenario of a few minutes), which
//! keeps ECEF and the orbit frame identical. The default constellation is
//! tuned so that the visible-satellite counts under 10°/35°/45° masks match
//! the experiment design this crate reproduces (about 24/16/13 satellites).

use crate::geodesy::{
    ecef_to_enu, enu_rotation, geodetic_to_ecef, EcefPoint, GeodeticPoint,
};
use crate::rng;
use nalgebra::Vector3;
use rand::Rng;
use serde::{Deserialize, Serialize};

/// Standard gravitational parameter of Earth, m^3/s^2.
pub const EARTH_MU: f64 = 3.986_004_418e14;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum GnssSystem {
    Gps,
    BeiDou,
    Galileo,
    Qzss,
}

impl GnssSystem {
    pub const ALL: [GnssSystem; 4] = [
        GnssSystem::Gps,
        GnssSystem::BeiDou,
        GnssSystem::Galileo,
        GnssSystem::Qzss,
    ];

    /// One-letter code used in CSV output (RINEX convention).
    pub fn code(&self) -> char {
        match self {
            GnssSystem::Gps => 'G',
            GnssSystem::BeiDou => 'C',
            GnssSystem::Galileo => 'E',
            GnssSystem::Qzss => 'J',
        }
    }

    pub fn from_code(c: char) -> Option<Self> {
        match c {
            'G' => Some(GnssSystem::Gps),
            'C' => Some(GnssSystem::BeiDou),
            'E' => Some(GnssSystem::Galileo),
            'J' => Some(GnssSystem::Qzss),
            _ => None,
        }
    }

    /// Nominal circular-orbit radius, meters. QZSS is modeled as a
    /// high-elevation MEO-like slot rather than a true elliptical orbit.
    pub fn orbit_radius_m(&self) -> f64 {
        match self {
            GnssSystem::Gps | GnssSystem::Qzss => 26_560e3,
            GnssSystem::BeiDou => 27_900e3,
            GnssSystem::Galileo => 29_600e3,
        }
    }

    fn nominal_inclination_deg(&self) -> f64 {
        match self {
            GnssSystem::Gps | GnssSystem::BeiDou => 55.0,
            GnssSystem::Galileo => 56.0,
            GnssSystem::Qzss => 43.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct SatelliteId {
    pub system: GnssSystem,
    /// 1-based index within the constellation.
    pub index: u8,
}

impl SatelliteId {
    pub fn new(system: GnssSystem, index: u8) -> Self {
        Self { system, index }
    }
}

impl std::fmt::Display for SatelliteId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}{:02}", self.system.code(), self.index)
    }
}

/// Circular orbit of one satellite.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OrbitSpec {
    pub id: SatelliteId,
    pub semi_major_axis_m: f64,
    pub inclination_deg: f64,
    pub raan_deg: f64,
    pub phase_at_t0_deg: f64,
    /// Mean motion, rad/s; follows from the semi-major axis by Kepler's
    /// third law.
    pub angular_rate_rad_s: f64,
    /// Satellite clock offset, seconds (known to the estimator, as if from
    /// broadcast ephemeris).
    pub clock_offset_s: f64,
}

impl OrbitSpec {
    pub fn new(
        id: SatelliteId,
        semi_major_axis_m: f64,
        inclination_deg: f64,
        raan_deg: f64,
        phase_at_t0_deg: f64,
        clock_offset_s: f64,
    ) -> Self {
        Self {
            id,
            semi_major_axis_m,
            inclination_deg,
            raan_deg,
            phase_at_t0_deg,
            angular_rate_rad_s: (EARTH_MU / semi_major_axis_m.powi(3)).sqrt(),
            clock_offset_s,
        }
    }
}

/// Instantaneous satellite position/velocity in ECEF.
#[derive(Debug, Clone, Copy)]
pub struct SatelliteState {
    pub id: SatelliteId,
    pub position: EcefPoint,
    pub velocity_mps: Vector3<f64>,
    pub clock_offset_s: f64,
}

/// One visible satellite in a [`SkyView`].
#[derive(Debug, Clone, Copy)]
pub struct SkyEntry {
    pub id: SatelliteId,
    pub elevation_deg: f64,
    pub azimuth_deg: f64,
    pub state: SatelliteState,
}

/// Satellites above the applied elevation mask at one epoch, sorted by id.
#[derive(Debug, Clone)]
pub struct SkyView {
    pub mask_deg: f64,
    pub entries: Vec<SkyEntry>,
}

impl SkyView {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, id: SatelliteId) -> Option<&SkyEntry> {
        self.entries.iter().find(|e| e.id == id)
    }
}

/// One satellite expressed in the local ENU frame: what range, line-of-sight
/// and Doppler computations actually consume.
#[derive(Debug, Clone, Copy)]
pub struct EnuSatellite {
    pub id: SatelliteId,
    /// Position in the ENU frame, meters.
    pub position: Vector3<f64>,
    /// Velocity rotated into the ENU axes, m/s.
    pub velocity: Vector3<f64>,
    pub clock_offset_s: f64,
    /// Elevation as seen from the sky view's receiver, degrees.
    pub elevation_deg: f64,
    pub azimuth_deg: f64,
}

/// A [`SkyView`] projected into the ENU frame at `origin`; sorted by id.
#[derive(Debug, Clone)]
pub struct EnuSky {
    pub sats: Vec<EnuSatellite>,
}

impl EnuSky {
    pub fn from_view(view: &SkyView, origin: &GeodeticPoint) -> Self {
        let rot = enu_rotation(origin);
        let o = geodetic_to_ecef(origin).as_vector();
        let sats = view
            .entries
            .iter()
            .map(|e| EnuSatellite {
                id: e.id,
                position: rot * (e.state.position.as_vector() - o),
                velocity: rot * e.state.velocity_mps,
                clock_offset_s: e.state.clock_offset_s,
                elevation_deg: e.elevation_deg,
                azimuth_deg: e.azimuth_deg,
            })
            .collect();
        Self { sats }
    }

    pub fn get(&self, id: SatelliteId) -> Option<&EnuSatellite> {
        self.sats.iter().find(|s| s.id == id)
    }

    pub fn len(&self) -> usize {
        self.sats.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sats.is_empty()
    }
}

/// Satellites per system for constellation construction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SystemCounts {
    pub gps: usize,
    pub beidou: usize,
    pub galileo: usize,
    pub qzss: usize,
}

impl Default for SystemCounts {
    /// Tuned so the default site sees ~24 satellites above 10°, ~16 above
    /// 35° and ~13 above 45°.
    fn default() -> Self {
        Self {
            gps: 9,
            beidou: 7,
            galileo: 6,
            qzss: 2,
        }
    }
}

impl SystemCounts {
    pub fn total(&self) -> usize {
        self.gps + self.beidou + self.galileo + self.qzss
    }
}

/// Elevation bands (degrees) that the constellation builder fills. The split
/// mirrors the visible-count profile the experiments need: satellites that
/// survive a 45° mask, ones that survive 35° only, and low ones that only
/// the 10° base mask keeps. Bands are kept azimuth-stratified and the high
/// band moderately low so that dilution of precision stays reasonable even
/// when only the high band survives.
const HIGH_BAND: (f64, f64) = (47.5, 66.0);
const MID_BAND: (f64, f64) = (37.5, 42.5);
const LOW_BAND: (f64, f64) = (20.0, 32.0);

/// Builds a deterministic constellation whose satellites, seen from `site`
/// at t = 0, scatter across the three elevation bands in 13:3:8 proportion.
pub fn build_constellation(
    seed: u64,
    counts: &SystemCounts,
    site: &GeodeticPoint,
) -> Vec<OrbitSpec> {
    let total = counts.total();
    if total == 0 {
        return Vec::new();
    }

    let n_high = ((total as f64 * 13.0 / 24.0).round() as usize).min(total);
    let n_mid = ((total as f64 * 3.0 / 24.0).round() as usize).min(total - n_high);
    let n_low = total - n_high - n_mid;

    // Target (elevation, azimuth) slots, highest elevation first. Elevations
    // sweep each band; azimuths follow a golden-angle sequence over the
    // elevation-sorted slots, so satellites adjacent in elevation end up far
    // apart in azimuth. Keeping every pairwise angular separation large is
    // what makes single-epoch ambiguity validation sharp: near-coincident
    // satellites create cheap integer confusions.
    let mut elevations: Vec<f64> = Vec::with_capacity(total);
    let band_slots = |band: (f64, f64), n: usize, tag: u64, out: &mut Vec<f64>| {
        for k in 0..n {
            let mut rng = rng::stream(seed, &[tag, k as u64]);
            let frac = if n == 1 {
                0.5
            } else {
                k as f64 / (n - 1) as f64
            };
            out.push(band.0 + frac * (band.1 - band.0) + rng.random_range(-1.0..1.0));
        }
    };
    band_slots(HIGH_BAND, n_high, 1, &mut elevations);
    band_slots(MID_BAND, n_mid, 2, &mut elevations);
    band_slots(LOW_BAND, n_low, 3, &mut elevations);
    elevations.sort_by(|a, b| b.partial_cmp(a).unwrap());
    let slots: Vec<(f64, f64)> = elevations
        .into_iter()
        .enumerate()
        .map(|(k, el)| {
            let mut rng = rng::stream(seed, &[5, k as u64]);
            let az = (k as f64 * 222.492 + rng.random_range(-5.0..5.0)).rem_euclid(360.0);
            (el, az)
        })
        .collect();

    // QZSS takes the highest slots (quasi-zenith); the rest are spread
    // proportionally with a quota accumulator.
    let mut assignment: Vec<GnssSystem> = Vec::with_capacity(total);
    assignment.extend(std::iter::repeat_n(GnssSystem::Qzss, counts.qzss));
    let spread = [
        (GnssSystem::Gps, counts.gps),
        (GnssSystem::BeiDou, counts.beidou),
        (GnssSystem::Galileo, counts.galileo),
    ];
    let n_rest: usize = spread.iter().map(|(_, c)| c).sum();
    let mut acc = [0.0f64; 3];
    let mut remaining = [counts.gps, counts.beidou, counts.galileo];
    for _ in 0..n_rest {
        for (i, (_, c)) in spread.iter().enumerate() {
            acc[i] += *c as f64 / n_rest as f64;
        }
        let pick = (0..3)
            .filter(|&i| remaining[i] > 0)
            .max_by(|&a, &b| acc[a].partial_cmp(&acc[b]).unwrap())
            .expect("quota accounting");
        acc[pick] -= 1.0;
        remaining[pick] -= 1;
        assignment.push(spread[pick].0);
    }

    let site_ecef = geodetic_to_ecef(site).as_vector();
    let rot_t = enu_rotation(site).transpose();
    let mut index_per_system = std::collections::BTreeMap::new();
    let mut orbits = Vec::with_capacity(total);
    for (k, ((el, az), system)) in slots.iter().zip(assignment.iter()).enumerate() {
        let idx = index_per_system.entry(*system).or_insert(0u8);
        *idx += 1;
        let id = SatelliteId::new(*system, *idx);

        // Line of sight in ENU, then ECEF.
        let (el_r, az_r) = (el.to_radians(), az.to_radians());
        let d_enu = Vector3::new(
            el_r.cos() * az_r.sin(),
            el_r.cos() * az_r.cos(),
            el_r.sin(),
        );
        let d = rot_t * d_enu;

        // Range along the ray to the orbit sphere.
        let a = system.orbit_radius_m();
        let sd = site_ecef.dot(&d);
        let s = -sd + (sd * sd + a * a - site_ecef.norm_squared()).sqrt();
        let p = site_ecef + s * d;

        // Fit (raan, phase) of a circular orbit through p at the system's
        // nominal inclination (raised if the point is poleward of it).
        let phi = (p.z / a).asin();
        let lam = p.y.atan2(p.x);
        let incl = system
            .nominal_inclination_deg()
            .max(phi.to_degrees().abs() + 5.0)
            .to_radians();
        let su = (phi.sin() / incl.sin()).clamp(-1.0, 1.0);
        let u = if k % 2 == 0 {
            su.asin()
        } else {
            std::f64::consts::PI - su.asin()
        };
        let raan = lam - (u.sin() * incl.cos()).atan2(u.cos());

        let clock: f64 = rng::stream(seed, &[4, k as u64]).random_range(-1e-4..1e-4);
        orbits.push(OrbitSpec::new(
            id,
            a,
            incl.to_degrees(),
            raan.to_degrees().rem_euclid(360.0),
            u.to_degrees().rem_euclid(360.0),
            clock,
        ));
    }
    orbits.sort_by_key(|o| o.id);
    orbits
}

/// Position on the circular orbit at time `t`; velocity is the analytic time
/// derivative.
pub fn satellite_state_at(orbit: &OrbitSpec, t: f64) -> SatelliteState {
    let u = orbit.phase_at_t0_deg.to_radians() + orbit.angular_rate_rad_s * t;
    let (su, cu) = u.sin_cos();
    let (so, co) = orbit.raan_deg.to_radians().sin_cos();
    let (si, ci) = orbit.inclination_deg.to_radians().sin_cos();
    let a = orbit.semi_major_axis_m;
    let n = orbit.angular_rate_rad_s;
    let position = EcefPoint::new(
        a * (co * cu - so * su * ci),
        a * (so * cu + co * su * ci),
        a * su * si,
    );
    let velocity_mps = Vector3::new(
        n * a * (-co * su - so * cu * ci),
        n * a * (-so * su + co * cu * ci),
        n * a * cu * si,
    );
    SatelliteState {
        id: orbit.id,
        position,
        velocity_mps,
        clock_offset_s: orbit.clock_offset_s,
    }
}

/// Elevation and azimuth of the receiver-to-satellite line of sight in the
/// ENU frame at `origin`. Azimuth is degrees clockwise from north, [0, 360).
pub fn elevation_azimuth(
    sat: &SatelliteState,
    receiver: &EcefPoint,
    origin: &GeodeticPoint,
) -> (f64, f64) {
    let sat_enu = ecef_to_enu(&sat.position, origin).as_vector();
    let rcv_enu = ecef_to_enu(receiver, origin).as_vector();
    let los = sat_enu - rcv_enu;
    let horiz = (los.x * los.x + los.y * los.y).sqrt();
    let el = los.z.atan2(horiz).to_degrees();
    let az = los.x.atan2(los.y).to_degrees().rem_euclid(360.0);
    (el, az)
}

/// Satellites with elevation strictly above `mask_deg` as seen from
/// `receiver`, sorted by satellite id.
pub fn visible_sky(
    constellation: &[OrbitSpec],
    t: f64,
    receiver: &EcefPoint,
    origin: &GeodeticPoint,
    mask_deg: f64,
) -> SkyView {
    let mut entries = Vec::new();
    for orbit in constellation {
        let state = satellite_state_at(orbit, t);
        let (el, az) = elevation_azimuth(&state, receiver, origin);
        if el > mask_deg {
            entries.push(SkyEntry {
                id: orbit.id,
                elevation_deg: el,
                azimuth_deg: az,
                state,
            });
        }
    }
    entries.sort_by_key(|e| e.id);
    SkyView { mask_deg, entries }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geodesy::enu_to_ecef;
    use crate::geodesy::EnuPoint;

    fn site() -> GeodeticPoint {
        GeodeticPoint::new(38.25, 140.85, 120.0)
    }

    #[test]
    fn zero_counts_give_empty_constellation() {
        let counts = SystemCounts {
            gps: 0,
            beidou: 0,
            galileo: 0,
            qzss: 0,
        };
        assert!(build_constellation(42, &counts, &site()).is_empty());
    }

    #[test]
    fn same_seed_is_identical() {
        let a = build_constellation(42, &SystemCounts::default(), &site());
        let b = build_constellation(42, &SystemCounts::default(), &site());
        assert_eq!(a, b);
    }

    #[test]
    fn orbit_radius_is_constant() {
        let orbits = build_constellation(42, &SystemCounts::default(), &site());
        for o in &orbits {
            for k in 0..20 {
                let s = satellite_state_at(o, k as f64 * 37.0);
                let r = s.position.as_vector().norm();
                assert!((r - o.semi_major_axis_m).abs() < 1e-3, "{} at {r}", o.id);
            }
        }
    }

    #[test]
    fn phase_at_t0_matches_position() {
        let o = OrbitSpec::new(
            SatelliteId::new(GnssSystem::Gps, 1),
            26_560e3,
            0.0,
            0.0,
            90.0,
            0.0,
        );
        let s = satellite_state_at(&o, 0.0);
        assert!(s.position.x.abs() < 1e-6);
        assert!((s.position.y - 26_560e3).abs() < 1e-6);
    }

    #[test]
    fn velocity_matches_finite_difference() {
        let orbits = build_constellation(42, &SystemCounts::default(), &site());
        let dt = 1e-3;
        for o in &orbits {
            for k in 0..5 {
                let t = k as f64 * 13.7;
                let before = satellite_state_at(o, t - dt).position.as_vector();
                let after = satellite_state_at(o, t + dt).position.as_vector();
                let fd = (after - before) / (2.0 * dt);
                let v = satellite_state_at(o, t).velocity_mps;
                assert!((fd - v).norm() < 1e-3, "{}: {:?} vs {:?}", o.id, fd, v);
            }
        }
    }

    #[test]
    fn zenith_satellite_has_ninety_elevation() {
        let origin = site();
        let rcv = geodetic_to_ecef(&origin);
        let sat_pos = enu_to_ecef(&EnuPoint::new(0.0, 0.0, 2.0e7), &origin);
        let sat = SatelliteState {
            id: SatelliteId::new(GnssSystem::Gps, 1),
            position: sat_pos,
            velocity_mps: Vector3::zeros(),
            clock_offset_s: 0.0,
        };
        let (el, _) = elevation_azimuth(&sat, &rcv, &origin);
        assert!((el - 90.0).abs() < 1e-9);
    }

    #[test]
    fn due_north_horizon_satellite() {
        let origin = site();
        let rcv = geodetic_to_ecef(&origin);
        let sat_pos = enu_to_ecef(&EnuPoint::new(0.0, 2.0e7, 0.0), &origin);
        let sat = SatelliteState {
            id: SatelliteId::new(GnssSystem::Gps, 1),
            position: sat_pos,
            velocity_mps: Vector3::zeros(),
            clock_offset_s: 0.0,
        };
        let (el, az) = elevation_azimuth(&sat, &rcv, &origin);
        assert!(el.abs() < 1e-9, "el = {el}");
        assert!(az.abs() < 1e-9 || (az - 360.0).abs() < 1e-9, "az = {az}");
    }

    // Independent oracle: angles from ECEF dot products against the local
    // basis vectors derived directly from the origin's latitude/longitude.
    #[test]
    fn elevation_azimuth_matches_dot_product_oracle() {
        let origin = site();
        let rcv = geodetic_to_ecef(&origin);
        let (lat, lon) = (origin.lat_deg.to_radians(), origin.lon_deg.to_radians());
        let up = Vector3::new(lat.cos() * lon.cos(), lat.cos() * lon.sin(), lat.sin());
        let east = Vector3::new(-lon.sin(), lon.cos(), 0.0);
        let north = up.cross(&east).normalize();

        let orbits = build_constellation(7, &SystemCounts::default(), &site());
        let mut checked = 0;
        for o in &orbits {
            for k in 0..5 {
                let s = satellite_state_at(o, k as f64 * 11.0);
                let los = (s.position.as_vector() - rcv.as_vector()).normalize();
                let el_oracle = los.dot(&up).asin().to_degrees();
                let az_oracle = los
                    .dot(&east)
                    .atan2(los.dot(&north))
                    .to_degrees()
                    .rem_euclid(360.0);
                let (el, az) = elevation_azimuth(&s, &rcv, &origin);
                assert!((el - el_oracle).abs() < 1e-9, "{}", o.id);
                assert!(
                    crate::angle::diff_deg(az, az_oracle).abs() < 1e-9,
                    "{}: {az} vs {az_oracle}",
                    o.id
                );
                checked += 1;
            }
        }
        assert!(checked >= 100);
    }

    #[test]
    fn mask_sets_are_nested() {
        let orbits = build_constellation(42, &SystemCounts::default(), &site());
        let rcv = geodetic_to_ecef(&site());
        for k in 0..60 {
            let t = k as f64;
            let ids = |mask: f64| -> Vec<SatelliteId> {
                visible_sky(&orbits, t, &rcv, &site(), mask)
                    .entries
                    .iter()
                    .map(|e| e.id)
                    .collect()
            };
            let v10 = ids(10.0);
            let v35 = ids(35.0);
            let v45 = ids(45.0);
            assert!(v45.iter().all(|id| v35.contains(id)));
            assert!(v35.iter().all(|id| v10.contains(id)));
        }
    }

    #[test]
    fn default_visible_counts_match_experiment_profile() {
        let orbits = build_constellation(42, &SystemCounts::default(), &site());
        let rcv = geodetic_to_ecef(&site());
        let mut sums = [0.0f64; 3];
        let n = 601;
        for k in 0..n {
            let t = k as f64 * 0.1;
            for (j, mask) in [10.0, 35.0, 45.0].iter().enumerate() {
                sums[j] += visible_sky(&orbits, t, &rcv, &site(), *mask).len() as f64;
            }
        }
        let avg: Vec<f64> = sums.iter().map(|s| s / n as f64).collect();
        assert!((avg[0] - 24.0).abs() <= 3.0, "10° mask avg {}", avg[0]);
        assert!((avg[1] - 16.0).abs() <= 3.0, "35° mask avg {}", avg[1]);
        assert!((avg[2] - 13.0).abs() <= 3.0, "45° mask avg {}", avg[2]);
    }

    #[test]
    fn near_zenith_mask_keeps_only_zenith_satellite() {
        // One synthetic zenith satellite plus the default constellation.
        let origin = site();
        let rcv = geodetic_to_ecef(&origin);
        let zenith_pos = enu_to_ecef(&EnuPoint::new(0.0, 10.0, 2.656e7), &origin);
        let phi = (zenith_pos.z / zenith_pos.as_vector().norm()).asin();
        let orbit = OrbitSpec::new(
            SatelliteId::new(GnssSystem::Qzss, 9),
            zenith_pos.as_vector().norm(),
            phi.to_degrees().abs() + 2.0,
            0.0,
            0.0,
            0.0,
        );
        // Re-fit raan/phase so the orbit passes through the zenith point.
        let incl = orbit.inclination_deg.to_radians();
        let u = (phi.sin() / incl.sin()).asin();
        let lam = zenith_pos.y.atan2(zenith_pos.x);
        let raan = lam - (u.sin() * incl.cos()).atan2(u.cos());
        let orbit = OrbitSpec::new(
            orbit.id,
            orbit.semi_major_axis_m,
            orbit.inclination_deg,
            raan.to_degrees(),
            u.to_degrees(),
            0.0,
        );

        let mut constellation = build_constellation(42, &SystemCounts::default(), &origin);
        constellation.push(orbit);
        let view = visible_sky(&constellation, 0.0, &rcv, &origin, 89.9);
        assert_eq!(view.len(), 1);
        assert_eq!(view.entries[0].id, orbit.id);
    }
}
