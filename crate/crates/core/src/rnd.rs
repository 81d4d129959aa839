//! Ranked neighbor discovery: the TIK timing gate, the distance estimate a
//! receiver derives from a probe, and the five-level trust rank.
//!
//! All arithmetic is exact. Time is carried as integer picoseconds and
//! distance as integer picometers, so a propagation speed in meters per
//! second times a picosecond interval is a picometer count with no rounding.

use std::fmt;

use thiserror::Error;

use crate::NodeId;

const PM_PER_MM: u64 = 1_000_000_000;
const PS_PER_S: f64 = 1.0e12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RndError {
    #[error("{name} must be finite, got {value}")]
    NonFinite { name: &'static str, value: f64 },
    #[error("{name} out of domain: {reason}")]
    Domain { name: &'static str, reason: &'static str },
}

/// Which way the clock-skew allowance enters the distance estimate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum SkewSign {
    /// `d' = v * (t_r - t_s - dt)`, the form used by RND.
    #[default]
    Paper,
    /// `d' = v * (t_r - t_s + dt)`, a conservative bound that never
    /// under-estimates when clocks disagree by up to `dt`.
    UpperBound,
}

/// Physical and protocol timing constants of one scenario.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct TimingParams {
    /// Maximum clock disagreement between any two nodes, in picoseconds.
    pub clock_skew_ps: i64,
    /// Time to transmit the MAC, in picoseconds.
    pub mac_time_ps: i64,
    /// Time to transmit a whole packet, in picoseconds.
    pub packet_time_ps: i64,
    /// Propagation speed in meters per second.
    pub light_speed: u64,
    /// Nominal transmission range `T` in millimeters.
    pub range_mm: u64,
    pub skew_sign: SkewSign,
}

pub const SPEED_OF_LIGHT: u64 = 299_792_458;

impl TimingParams {
    pub fn validate(&self) -> Result<(), RndError> {
        if self.clock_skew_ps < 0 {
            return Err(RndError::Domain { name: "delta_t", reason: "must be >= 0" });
        }
        if self.mac_time_ps < 0 {
            return Err(RndError::Domain { name: "t_mac", reason: "must be >= 0" });
        }
        if self.packet_time_ps <= 0 {
            return Err(RndError::Domain { name: "t_pkt", reason: "must be > 0" });
        }
        if self.light_speed == 0 {
            return Err(RndError::Domain { name: "v_light", reason: "must be > 0" });
        }
        if self.range_mm == 0 {
            return Err(RndError::Domain { name: "range", reason: "must be > 0" });
        }
        Ok(())
    }

    /// Builds parameters from SI values (seconds, m/s, meters), rounding to
    /// the nearest picosecond / millimeter.
    pub fn from_seconds(
        delta_t: f64,
        t_mac: f64,
        t_pkt: f64,
        v_light: f64,
        range_m: f64,
    ) -> Result<Self, RndError> {
        let light_speed = finite("v_light", v_light)?;
        if !(light_speed >= 0.5 && light_speed < u64::MAX as f64) {
            return Err(RndError::Domain { name: "v_light", reason: "must be > 0" });
        }
        let range = finite("range", range_m)? * 1000.0;
        if !(range >= 0.5 && range < u64::MAX as f64) {
            return Err(RndError::Domain { name: "range", reason: "must be > 0" });
        }
        let params = TimingParams {
            clock_skew_ps: seconds_to_ps("delta_t", delta_t)?,
            mac_time_ps: seconds_to_ps("t_mac", t_mac)?,
            packet_time_ps: seconds_to_ps("t_pkt", t_pkt)?,
            light_speed: light_speed.round() as u64,
            range_mm: range.round() as u64,
            skew_sign: SkewSign::Paper,
        };
        params.validate()?;
        Ok(params)
    }
}

fn finite(name: &'static str, value: f64) -> Result<f64, RndError> {
    if value.is_finite() {
        Ok(value)
    } else {
        Err(RndError::NonFinite { name, value })
    }
}

fn seconds_to_ps(name: &'static str, seconds: f64) -> Result<i64, RndError> {
    let ps = (finite(name, seconds)? * PS_PER_S).round();
    if ps.abs() >= i64::MAX as f64 {
        return Err(RndError::Domain { name, reason: "exceeds picosecond range" });
    }
    Ok(ps as i64)
}

/// Local send and receive timestamps of one probe, in picoseconds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ProbeTiming {
    pub sent_ps: i64,
    pub received_ps: i64,
}

impl ProbeTiming {
    pub fn from_seconds(t_s: f64, t_r: f64) -> Result<Self, RndError> {
        Ok(ProbeTiming {
            sent_ps: seconds_to_ps("t_s", t_s)?,
            received_ps: seconds_to_ps("t_r", t_r)?,
        })
    }
}

/// A non-negative distance with picometer resolution.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct Distance(u64);

impl Distance {
    pub const ZERO: Distance = Distance(0);

    pub fn from_picometers(pm: u64) -> Self {
        Distance(pm)
    }

    pub fn from_mm(mm: u64) -> Self {
        Distance(mm.saturating_mul(PM_PER_MM))
    }

    pub fn from_meters(meters: f64) -> Result<Self, RndError> {
        let pm = finite("d_prime", meters)? * 1.0e12;
        if pm < 0.0 {
            return Err(RndError::Domain { name: "d_prime", reason: "must be >= 0" });
        }
        if pm >= u64::MAX as f64 {
            return Err(RndError::Domain { name: "d_prime", reason: "exceeds representable distance" });
        }
        Ok(Distance(pm.round() as u64))
    }

    pub fn picometers(self) -> u64 {
        self.0
    }

    pub fn meters(self) -> f64 {
        self.0 as f64 / 1.0e12
    }
}

impl fmt::Display for Distance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:.3} m", self.meters())
    }
}

/// Trust rank of a neighbor; 0 is untrusted, 4 is the closest band.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Rank(u8);

impl Rank {
    pub const UNTRUSTED: Rank = Rank(0);
    pub const MAX: Rank = Rank(4);

    pub fn new(value: u8) -> Option<Rank> {
        (value <= 4).then_some(Rank(value))
    }

    pub fn value(self) -> u8 {
        self.0
    }
}

impl fmt::Display for Rank {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

/// What a node learned about one neighbor from its probe.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct NeighborRecord {
    pub neighbor: NodeId,
    pub d_prime: Distance,
    pub rank: Rank,
}

/// TIK acceptance: the MAC must be fully received before the sender can
/// have disclosed the key, `t_r + T_mac < t_s - dt + T_mac + T_pkt`.
///
/// Evaluated in the printed form; `T_mac` appears on both sides and cancels.
pub fn tesla_condition(timing: ProbeTiming, params: &TimingParams) -> bool {
    let t_r = i128::from(timing.received_ps);
    let t_s = i128::from(timing.sent_ps);
    let mac = i128::from(params.mac_time_ps);
    let lhs = t_r + mac;
    let rhs = t_s - i128::from(params.clock_skew_ps) + mac + i128::from(params.packet_time_ps);
    lhs < rhs
}

/// Distance estimate `v * (t_r - t_s -/+ dt)`, clamped at zero.
pub fn estimate_distance(timing: ProbeTiming, params: &TimingParams) -> Distance {
    let skew = i128::from(params.clock_skew_ps);
    let elapsed = i128::from(timing.received_ps) - i128::from(timing.sent_ps);
    let interval = match params.skew_sign {
        SkewSign::Paper => elapsed - skew,
        SkewSign::UpperBound => elapsed + skew,
    };
    let raw = i128::from(params.light_speed) * interval;
    if raw <= 0 {
        Distance::ZERO
    } else {
        Distance(u64::try_from(raw).unwrap_or(u64::MAX))
    }
}

/// Maps an estimated distance onto the rank bands of a range `T`:
///
/// | d'                  | rank |
/// |---------------------|------|
/// | d' <= T/4           | 4    |
/// | T/4 < d' <= T/2     | 3    |
/// | T/2 < d' <= 3T/4    | 2    |
/// | 3T/4 < d' <= T      | 1    |
/// | d' > T              | 0    |
pub fn assign_rank(d_prime: Distance, range_mm: u64) -> Rank {
    let d = u128::from(d_prime.0);
    let t = u128::from(range_mm) * u128::from(PM_PER_MM);
    let value = if 4 * d <= t {
        4
    } else if 2 * d <= t {
        3
    } else if 4 * d <= 3 * t {
        2
    } else if d <= t {
        1
    } else {
        0
    };
    Rank(value)
}

/// Ranks a distance given in meters against a range in meters.
pub fn assign_rank_meters(d_prime: f64, range_m: f64) -> Result<Rank, RndError> {
    let d = Distance::from_meters(d_prime)?;
    let range_mm = finite("range", range_m)? * 1000.0;
    if !(range_mm >= 0.5 && range_mm < u64::MAX as f64) {
        return Err(RndError::Domain { name: "range", reason: "must be > 0" });
    }
    Ok(assign_rank(d, range_mm.round() as u64))
}

/// Runs the timing gate and, when it passes, produces the ranked record.
/// `None` means the probe was rejected and nothing is learned.
pub fn process_probe(
    timing: ProbeTiming,
    neighbor: NodeId,
    params: &TimingParams,
) -> Option<NeighborRecord> {
    if !tesla_condition(timing, params) {
        return None;
    }
    let d_prime = estimate_distance(timing, params);
    Some(NeighborRecord {
        neighbor,
        d_prime,
        rank: assign_rank(d_prime, params.range_mm),
    })
}
