//! Protocol-specific constants for BB84, the six-state protocol and PBC00.
//!
//! Each protocol fixes how the single-photon phase error rate follows from the
//! bit error rate, which Y error rates remain admissible, what fraction of
//! received signals survive sifting, and how many detectors Bob runs.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::QkdError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Protocol {
    #[serde(rename = "bb84")]
    Bb84,
    #[serde(rename = "six-state")]
    SixState,
    #[serde(rename = "pbc00")]
    Pbc00,
}

impl Protocol {
    pub const ALL: [Protocol; 3] = [Protocol::Bb84, Protocol::SixState, Protocol::Pbc00];

    /// Name used in config files and on the command line.
    pub fn as_str(self) -> &'static str {
        match self {
            Protocol::Bb84 => "bb84",
            Protocol::SixState => "six-state",
            Protocol::Pbc00 => "pbc00",
        }
    }

    pub fn spec(self) -> ProtocolSpec {
        match self {
            Protocol::Bb84 => ProtocolSpec {
                protocol: self,
                phase_ratio: 1.0,
                y_range: YErrorRange::Proportional { lo: 0.0, hi: 2.0 },
                detector_count: 2,
                dark_conclusive_multiplier: 2.0,
            },
            Protocol::SixState => ProtocolSpec {
                protocol: self,
                phase_ratio: 1.0,
                y_range: YErrorRange::Pinned,
                detector_count: 2,
                dark_conclusive_multiplier: 2.0,
            },
            // Three detectors, but a dark count is conclusive only for two of
            // the three announced bases: 3C * 2/3 = 2C.
            Protocol::Pbc00 => ProtocolSpec {
                protocol: self,
                phase_ratio: 1.25,
                y_range: YErrorRange::Proportional { lo: 0.25, hi: 2.25 },
                detector_count: 3,
                dark_conclusive_multiplier: 2.0,
            },
        }
    }
}

impl fmt::Display for Protocol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Protocol {
    type Err = QkdError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "bb84" => Ok(Protocol::Bb84),
            "six-state" => Ok(Protocol::SixState),
            "pbc00" => Ok(Protocol::Pbc00),
            other => Err(QkdError::InvalidInput(format!(
                "unknown protocol {other:?} (expected one of bb84, six-state, pbc00)"
            ))),
        }
    }
}

/// Admissible single-photon Y error rates as a function of the bit error rate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum YErrorRange {
    /// `e_y = e_x` exactly.
    Pinned,
    /// `lo * e_x <= e_y <= hi * e_x`.
    Proportional { lo: f64, hi: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProtocolSpec {
    pub protocol: Protocol,
    /// `e_z = phase_ratio * e_x` on single-photon results.
    pub phase_ratio: f64,
    pub y_range: YErrorRange,
    pub detector_count: u32,
    /// `m` in `p_dk ~= m * C * (1 - eta)`.
    pub dark_conclusive_multiplier: f64,
}

impl ProtocolSpec {
    pub fn name(&self) -> &'static str {
        self.protocol.as_str()
    }

    /// Phase error rate implied by a single-photon bit error rate.
    pub fn phase_error(&self, e_x: f64) -> f64 {
        self.phase_ratio * e_x
    }

    /// Closed interval of admissible Y error rates, before feasibility clipping.
    pub fn y_interval(&self, e_x: f64) -> (f64, f64) {
        match self.y_range {
            YErrorRange::Pinned => (e_x, e_x),
            YErrorRange::Proportional { lo, hi } => (lo * e_x, hi * e_x),
        }
    }

    /// Fraction of received signals kept after sifting.
    ///
    /// BB84 and the six-state protocol use strongly biased basis choices and
    /// are taken at the asymptotic limit of 1.
    pub fn conclusive_factor(&self, e_x: f64) -> f64 {
        match self.protocol {
            Protocol::Bb84 | Protocol::SixState => 1.0,
            Protocol::Pbc00 => 1.0 / (2.0 - e_x),
        }
    }

    /// Largest bit error rate for which the implied phase error rate is a probability.
    pub fn max_bit_error(&self) -> f64 {
        (1.0 / self.phase_ratio).min(1.0)
    }
}

/// The three supported protocols, in a fixed order.
pub fn protocol_catalog() -> Vec<ProtocolSpec> {
    Protocol::ALL.iter().map(|p| p.spec()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn catalog_contents() {
        let cat = protocol_catalog();
        assert_eq!(cat.len(), 3);
        let pbc = Protocol::Pbc00.spec();
        assert_eq!(pbc.phase_ratio, 1.25);
        assert_eq!(pbc.detector_count, 3);
        assert_eq!(pbc.dark_conclusive_multiplier, 2.0);
        assert_eq!(pbc.y_interval(0.4), (0.1, 0.9));
        assert_eq!(Protocol::Bb84.spec().y_interval(0.1), (0.0, 0.2));
        assert_eq!(Protocol::SixState.spec().y_interval(0.1), (0.1, 0.1));
        assert_eq!(Protocol::Bb84.spec().conclusive_factor(0.3), 1.0);
    }

    #[test]
    fn conclusive_factor_values() {
        let pbc = Protocol::Pbc00.spec();
        assert_eq!(pbc.conclusive_factor(0.0), 0.5);
        assert_eq!(pbc.conclusive_factor(1.0), 1.0);
        assert_eq!(Protocol::SixState.spec().conclusive_factor(0.1), 1.0);
    }

    #[test]
    fn pbc00_factor_increasing_and_bounded() {
        let pbc = Protocol::Pbc00.spec();
        let mut prev = 0.0;
        for i in 0..=500 {
            let e = 0.5 * i as f64 / 500.0;
            let cf = pbc.conclusive_factor(e);
            assert!(cf > prev);
            assert!((0.5..=2.0 / 3.0 + 1e-15).contains(&cf));
            prev = cf;
        }
    }

    #[test]
    fn y_interval_ordered() {
        for spec in protocol_catalog() {
            for i in 0..=100 {
                let (lo, hi) = spec.y_interval(i as f64 / 100.0);
                assert!(lo <= hi);
            }
        }
    }

    #[test]
    fn names_round_trip() {
        for p in Protocol::ALL {
            assert_eq!(p.as_str().parse::<Protocol>().unwrap(), p);
        }
        assert!("b92".parse::<Protocol>().is_err());
    }
}
