//! Integer simulation time.
//!
//! All simulator arithmetic runs on integer picoseconds: exact at
//! 100 Gbit/s byte granularity (one byte is 80 ps) and free of float
//! drift over long runs. Conversion to and from seconds happens only at
//! the configuration and reporting boundary.

use std::fmt;
use std::ops::{Add, AddAssign, Sub};

pub const PS_PER_SEC: u64 = 1_000_000_000_000;

/// Absolute simulation time in picoseconds since the start of the run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct SimTime(pub u64);

impl SimTime {
    pub const ZERO: SimTime = SimTime(0);

    /// Convert from seconds, rounding to the nearest picosecond.
    pub fn from_secs(secs: f64) -> SimTime {
        assert!(secs.is_finite() && secs >= 0.0, "time must be finite and non-negative");
        SimTime((secs * PS_PER_SEC as f64).round() as u64)
    }

    pub fn as_secs(self) -> f64 {
        self.0 as f64 / PS_PER_SEC as f64
    }

    pub fn as_ps(self) -> u64 {
        self.0
    }
}

impl Add<u64> for SimTime {
    type Output = SimTime;
    fn add(self, ps: u64) -> SimTime {
        SimTime(self.0 + ps)
    }
}

impl AddAssign<u64> for SimTime {
    fn add_assign(&mut self, ps: u64) {
        self.0 += ps;
    }
}

impl Sub<SimTime> for SimTime {
    type Output = u64;
    fn sub(self, earlier: SimTime) -> u64 {
        self.0.checked_sub(earlier.0).expect("time went backwards")
    }
}

impl fmt::Display for SimTime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Duration in picoseconds to serialize `bytes` at `bandwidth` bytes/s,
/// rounded to the nearest picosecond. Exact integer arithmetic.
pub fn wire_time_ps(bytes: u64, bandwidth: u64) -> u64 {
    assert!(bandwidth > 0);
    let num = bytes as u128 * PS_PER_SEC as u128 + bandwidth as u128 / 2;
    (num / bandwidth as u128) as u64
}

/// Seconds to whole picoseconds (rounded).
pub fn ps_from_secs(secs: f64) -> u64 {
    SimTime::from_secs(secs).0
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn wire_time_is_exact_at_line_rate() {
        // 12.5 GB/s: one byte is exactly 80 ps
        assert_eq!(wire_time_ps(1, 12_500_000_000), 80);
        assert_eq!(wire_time_ps(1538, 12_500_000_000), 1538 * 80);
        assert_eq!(wire_time_ps(0, 12_500_000_000), 0);
    }

    #[test]
    fn wire_time_rounds_to_nearest() {
        // 3 bytes at 14 GB/s = 214.28.. ps
        assert_eq!(wire_time_ps(3, 14_000_000_000), 214);
    }

    #[test]
    fn seconds_round_trip() {
        let t = SimTime::from_secs(2.5e-6);
        assert_eq!(t.0, 2_500_000);
        assert!((t.as_secs() - 2.5e-6).abs() < 1e-18);
    }
}
