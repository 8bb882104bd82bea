//! GNSS observation synthesis: carrier phase, pseudorange and Doppler for
//! the four rover antennas and the fixed base station.
//!
//! Carrier phase is kept in range units (meters) with the integer ambiguity
//! entering as `wavelength * N`. Ionospheric and tropospheric delays are
//! mapped from zenith values by a 1/sin(elevation) obliquity evaluated at
//! the site, identically for all five receivers of an epoch, so
//! double differences cancel them to machine precision. Receiver clocks are
//! per-receiver random walks; measurement noise comes from counter-based
//! streams keyed by (epoch, receiver, satellite), so masking or parallel
//! synthesis never changes a surviving draw.
//!
//! The Doppler observable is a delta-range rate: the antenna velocity it
//! encodes is the epoch-to-epoch displacement rate (the carrier-smoothed
//! quantity receivers report between samples), projected with epoch-time
//! satellite geometry. An epoch-0 observation falls back to the
//! instantaneous antenna velocity.

use crate::geodesy::EnuPoint;
use crate::rng;
use crate::sky::{EnuSky, SatelliteId};
use crate::truck::AntennaSet;
use nalgebra::Vector3;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use thiserror::Error;

/// Speed of light, m/s.
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Single-frequency carrier wavelength used for every system, meters
/// (L1-class, nominally 0.1903 m). Snapped to a multiple of 2^-20 m so that
/// `wavelength * N` adds onto a MEO-scale range without rounding; see
/// [`quantize_correction`].
pub const WAVELENGTH_M: f64 = 199_544.0 / 1_048_576.0;

#[derive(Debug, Error, PartialEq)]
pub enum ObsError {
    #[error("cycle slip delta must be nonzero")]
    ZeroSlipDelta,
}

/// Receiver identity: rover antennas 1-4 or the fixed base station.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ReceiverId {
    Base,
    Antenna(u8),
}

impl ReceiverId {
    /// Stable ordinal used in counter-based noise streams: base 0,
    /// antennas 1-4.
    pub fn ordinal(&self) -> usize {
        match self {
            ReceiverId::Base => 0,
            ReceiverId::Antenna(j) => *j as usize,
        }
    }

    pub const ALL: [ReceiverId; 5] = [
        ReceiverId::Base,
        ReceiverId::Antenna(1),
        ReceiverId::Antenna(2),
        ReceiverId::Antenna(3),
        ReceiverId::Antenna(4),
    ];
}

impl std::fmt::Display for ReceiverId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ReceiverId::Base => write!(f, "BASE"),
            ReceiverId::Antenna(j) => write!(f, "{j}"),
        }
    }
}

/// Measurement error budget. All standard deviations are 1-sigma.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ErrorBudget {
    pub carrier_phase_noise_std_m: f64,
    pub pseudorange_noise_std_m: f64,
    pub doppler_noise_std_mps: f64,
    pub iono_zenith_delay_m: f64,
    pub tropo_zenith_delay_m: f64,
    /// Receiver clock random-walk intensity, s/sqrt(s).
    pub receiver_clock_walk_std: f64,
    pub seed: u64,
    /// Optional low-elevation noise inflation by 1/sin(elevation); stands in
    /// for multipath. Off by default.
    pub elevation_noise_inflation: bool,
}

impl Default for ErrorBudget {
    fn default() -> Self {
        Self {
            carrier_phase_noise_std_m: 0.005,
            pseudorange_noise_std_m: 0.5,
            doppler_noise_std_mps: 0.02,
            iono_zenith_delay_m: 2.0,
            tropo_zenith_delay_m: 2.4,
            receiver_clock_walk_std: 1e-9,
            seed: 42,
            elevation_noise_inflation: false,
        }
    }
}

impl ErrorBudget {
    /// Everything zeroed: observations become exact geometry.
    pub fn noise_free(seed: u64) -> Self {
        Self {
            carrier_phase_noise_std_m: 0.0,
            pseudorange_noise_std_m: 0.0,
            doppler_noise_std_mps: 0.0,
            iono_zenith_delay_m: 0.0,
            tropo_zenith_delay_m: 0.0,
            receiver_clock_walk_std: 0.0,
            seed,
            elevation_noise_inflation: false,
        }
    }
}

/// One synthesized (or loaded) observation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GnssObservation {
    pub receiver: ReceiverId,
    pub sat: SatelliteId,
    pub t: f64,
    /// Carrier phase in range units, meters.
    pub carrier_phase_m: f64,
    pub pseudorange_m: f64,
    pub doppler_range_rate_mps: f64,
    pub wavelength_m: f64,
    /// Elevation at this receiver, degrees.
    pub elevation_deg: f64,
}

/// A scripted integer jump in one receiver/satellite ambiguity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CycleSlip {
    pub receiver: ReceiverId,
    pub sat: SatelliteId,
    pub t_slip: f64,
    pub delta: i64,
}

/// Integer carrier-phase ambiguities per (receiver, satellite), constant
/// across a scenario unless a scripted cycle slip is injected.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct AmbiguityTable {
    base: BTreeMap<(ReceiverId, SatelliteId), i64>,
    slips: Vec<CycleSlip>,
}

impl AmbiguityTable {
    /// All-zero table; missing entries read as zero.
    pub fn zero() -> Self {
        Self::default()
    }

    /// Random integers in [-1000, 1000] for every (receiver, satellite)
    /// pair, deterministic in the seed.
    pub fn generate(seed: u64, sats: &[SatelliteId]) -> Self {
        let mut base = BTreeMap::new();
        for rcv in ReceiverId::ALL {
            for (k, sat) in sats.iter().enumerate() {
                let mut rng = rng::stream(seed, &[0xa3b1, rcv.ordinal() as u64, k as u64]);
                base.insert((rcv, *sat), rng.random_range(-1000..=1000));
            }
        }
        Self {
            base,
            slips: Vec::new(),
        }
    }

    /// Ambiguity for (receiver, sat) at time `t`, slips applied.
    pub fn ambiguity(&self, receiver: ReceiverId, sat: SatelliteId, t: f64) -> i64 {
        let mut n = self.base.get(&(receiver, sat)).copied().unwrap_or(0);
        for slip in &self.slips {
            if slip.receiver == receiver && slip.sat == sat && t >= slip.t_slip {
                n += slip.delta;
            }
        }
        n
    }

    /// Returns a table where the ambiguity of (receiver, sat) changes by
    /// `delta` from `t_slip` on.
    pub fn inject_cycle_slip(
        &self,
        receiver: ReceiverId,
        sat: SatelliteId,
        t_slip: f64,
        delta: i64,
    ) -> Result<Self, ObsError> {
        if delta == 0 {
            return Err(ObsError::ZeroSlipDelta);
        }
        let mut out = self.clone();
        out.slips.push(CycleSlip {
            receiver,
            sat,
            t_slip,
            delta,
        });
        Ok(out)
    }
}

/// Receiver clock offsets and drifts for every epoch of a scenario,
/// generated once so that parallel epoch synthesis stays deterministic.
#[derive(Debug, Clone)]
pub struct ClockSeries {
    /// offsets[epoch][receiver ordinal], seconds.
    offsets: Vec<[f64; 5]>,
    /// drifts[epoch][receiver ordinal], s/s, valid over the epoch's
    /// preceding interval.
    drifts: Vec<[f64; 5]>,
}

impl ClockSeries {
    /// Random walks from zero with the budget's intensity.
    pub fn generate(budget: &ErrorBudget, n_epochs: usize, dt: f64) -> Self {
        let step_std = budget.receiver_clock_walk_std * dt.sqrt();
        let mut offsets = Vec::with_capacity(n_epochs);
        let mut drifts = Vec::with_capacity(n_epochs);
        let mut state = [0.0f64; 5];
        for epoch in 0..n_epochs {
            let mut drift = [0.0f64; 5];
            if epoch > 0 {
                for (r, s) in state.iter_mut().enumerate() {
                    let w: f64 = rng::stream(budget.seed, &[0xc10c, r as u64, epoch as u64])
                        .sample(StandardNormal);
                    let inc = step_std * w;
                    *s += inc;
                    drift[r] = inc / dt;
                }
            }
            offsets.push(state);
            drifts.push(drift);
        }
        Self { offsets, drifts }
    }

    pub fn offset(&self, epoch: usize, receiver: ReceiverId) -> f64 {
        self.offsets[epoch][receiver.ordinal()]
    }

    pub fn drift(&self, epoch: usize, receiver: ReceiverId) -> f64 {
        self.drifts[epoch][receiver.ordinal()]
    }

    pub fn len(&self) -> usize {
        self.offsets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.offsets.is_empty()
    }
}

fn sat_coord(sat: &SatelliteId) -> u64 {
    (sat.system as u64) << 8 | sat.index as u64
}

/// Snaps one correction term to a multiple of 2^-20 m (about a micrometre).
///
/// Ranges to MEO satellites live in the f64 binade [2^24, 2^25) m, whose
/// mantissa spacing is 2^-28 m. Corrections that are exact multiples of
/// 2^-20 and below 2^16 m in magnitude sum and add onto the range without
/// any rounding, so a term shared between two observations cancels
/// bit-exactly when they are differenced. Applied per term (clock, sat
/// clock, atmosphere, noise), it keeps double differences equal to DD range
/// plus wavelength * DD integer at the 1e-13 m level while perturbing each
/// observable 9 orders of magnitude below the phase noise floor.
fn quantize_correction(x: f64) -> f64 {
    const SCALE: f64 = 1_048_576.0; // 2^20
    debug_assert!(x.abs() < 65_536.0, "correction {x} m out of range");
    (x * SCALE).round() / SCALE
}

/// Synthesizes one epoch of observations for the four antennas and the base.
///
/// `antenna_velocities` is the antenna velocity encoded into Doppler (the
/// displacement rate over the preceding interval, or the instantaneous
/// velocity at epoch 0). The base station is static at `base`.
#[allow(clippy::too_many_arguments)]
pub fn synthesize_epoch(
    sky: &EnuSky,
    antennas: &AntennaSet,
    antenna_velocities: &[Vector3<f64>; 4],
    base: &EnuPoint,
    budget: &ErrorBudget,
    ambi: &AmbiguityTable,
    clocks: &ClockSeries,
    epoch: usize,
    t: f64,
) -> Vec<GnssObservation> {
    let mut out = Vec::with_capacity(5 * sky.len());
    for rcv in ReceiverId::ALL {
        let (pos, vel) = match rcv {
            ReceiverId::Base => (base.as_vector(), Vector3::zeros()),
            ReceiverId::Antenna(j) => (
                antennas.positions[(j - 1) as usize].as_vector(),
                antenna_velocities[(j - 1) as usize],
            ),
        };
        let clk = clocks.offset(epoch, rcv);
        let drift = clocks.drift(epoch, rcv);
        for sat in &sky.sats {
            let los = sat.position - pos;
            let range = los.norm();
            let unit = los / range;
            let elevation_deg = unit.z.asin().to_degrees();

            // Common atmosphere, mapped at the site elevation so it is
            // identical across receivers and cancels in double differences.
            let obliquity = 1.0 / sat.elevation_deg.to_radians().sin();
            let iono = budget.iono_zenith_delay_m * obliquity;
            let tropo = budget.tropo_zenith_delay_m * obliquity;

            let rcv_clock = quantize_correction(SPEED_OF_LIGHT * clk);
            let sat_clock = quantize_correction(SPEED_OF_LIGHT * sat.clock_offset_s);
            let n = ambi.ambiguity(rcv, sat.id, t) as f64;

            let mut stream = rng::stream(
                budget.seed,
                &[0x0b5e, epoch as u64, rcv.ordinal() as u64, sat_coord(&sat.id)],
            );
            let inflation = if budget.elevation_noise_inflation {
                1.0 / elevation_deg.to_radians().sin()
            } else {
                1.0
            };
            let e_phase: f64 = stream.sample::<f64, _>(StandardNormal)
                * budget.carrier_phase_noise_std_m
                * inflation;
            let e_pr: f64 = stream.sample::<f64, _>(StandardNormal)
                * budget.pseudorange_noise_std_m
                * inflation;
            let e_dopp: f64 = stream.sample::<f64, _>(StandardNormal)
                * budget.doppler_noise_std_mps
                * inflation;

            let range_rate = unit.dot(&(sat.velocity - vel));
            let phase_corr = WAVELENGTH_M * n + rcv_clock - sat_clock
                + quantize_correction(tropo - iono)
                + quantize_correction(e_phase);
            let pr_corr = rcv_clock - sat_clock
                + quantize_correction(tropo + iono)
                + quantize_correction(e_pr);

            out.push(GnssObservation {
                receiver: rcv,
                sat: sat.id,
                t,
                carrier_phase_m: range + phase_corr,
                pseudorange_m: range + pr_corr,
                doppler_range_rate_mps: range_rate + SPEED_OF_LIGHT * drift + e_dopp,
                wavelength_m: WAVELENGTH_M,
                elevation_deg,
            });
        }
    }
    out
}
