//! Secret key generation rates.
//!
//! Every rate here is a per-pulse quantity and may come out negative; callers
//! clamp for display. Five bounds are provided:
//!
//! * [`rate_shor_preskill`]: `p_c [1 - H(e_x) - H(e_z|e_x)]`, no source imperfections.
//! * [`rate_gllp`]: the multi-photon-aware bound that lumps dark counts in
//!   with whichever pulse class they landed on.
//! * [`rate_bob`] / [`rate_alice`]: dark-count-aware bounds that grant Eve no
//!   information on dark-count results (Bob's key) or on vacuum-pulse results
//!   (Alice's key).
//! * [`rate_improved`]: the larger of the two.
//!
//! Phase-error entropies are always the protocol's worst case over the
//! admissible Y error rates, see
//! [`worst_case_conditional_phase_entropy`].

use serde::Serialize;

use crate::entropy::{binary_entropy, worst_case_conditional_phase_entropy};
use crate::error::{check_probability, QkdError, Result};
use crate::numeric::{bisect_boundary, bisect_root};
use crate::protocols::ProtocolSpec;
use crate::scenario::Scenario;

/// Bit error rate of a dark-count result: a uniformly random bit.
pub const DARK_COUNT_BIT_ERROR: f64 = 0.5;

/// Default cap for [`max_distance`], in km.
pub const DEFAULT_DISTANCE_CAP_KM: f64 = 1.0e4;

const THRESHOLD_TOL: f64 = 1e-9;
const DISTANCE_TOL_KM: f64 = 0.01;

/// Per-pulse decomposition of conclusive results.
///
/// `p_sq`, `p_mq`, `p_emp` and `p_dk` are the rates of conclusive results from
/// qubit states of single-photon pulses, qubit states of multi-photon pulses,
/// qubit states arriving on empty pulses, and dark counts. `omega0`/`omega1`
/// are the fractions of all conclusive results that came from empty and
/// single-photon pulses, dark counts included, and `e_x_single` is the bit
/// error rate over the single-photon-pulse class.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RateBreakdown {
    pub p_emp: f64,
    pub p_sq: f64,
    pub p_mq: f64,
    pub p_dk: f64,
    pub omega0: f64,
    pub omega1: f64,
    /// Bit error rate over all conclusive results.
    pub e_x: f64,
    /// Bit error rate over single-photon qubit-state results.
    pub e_x_sq: f64,
    pub e_x_single: f64,
}

impl RateBreakdown {
    /// Total conclusive rate.
    pub fn p_c(&self) -> f64 {
        self.p_emp + self.p_sq + self.p_mq + self.p_dk
    }

    /// Bit error rate of dark-count results, fixed at one half.
    pub fn e_x_dk(&self) -> f64 {
        DARK_COUNT_BIT_ERROR
    }

    /// Fraction of conclusive results caused by dark counts.
    pub fn dark_fraction(&self) -> f64 {
        self.p_dk / self.p_c()
    }

    pub fn validate(&self) -> Result<()> {
        let rates = [
            ("p_emp", self.p_emp),
            ("p_sq", self.p_sq),
            ("p_mq", self.p_mq),
            ("p_dk", self.p_dk),
            ("omega0", self.omega0),
            ("omega1", self.omega1),
        ];
        for (name, v) in rates {
            if !(v.is_finite() && v >= 0.0) {
                return Err(QkdError::InvalidInput(format!("{name} = {v} must be >= 0")));
            }
        }
        if !(self.p_c() > 0.0) {
            return Err(QkdError::InvalidInput("no conclusive results (p_c = 0)".into()));
        }
        if self.omega0 + self.omega1 > 1.0 + 1e-12 {
            return Err(QkdError::InvalidInput(format!(
                "omega0 + omega1 = {} exceeds 1",
                self.omega0 + self.omega1
            )));
        }
        check_probability("e_x", self.e_x)?;
        check_probability("e_x_sq", self.e_x_sq)?;
        check_probability("e_x_single", self.e_x_single)?;
        Ok(())
    }
}

/// Key rate with no source imperfections and no dark-count special-casing.
pub fn rate_shor_preskill(p_c: f64, e_x: f64, spec: &ProtocolSpec) -> Result<f64> {
    if !(p_c > 0.0) {
        return Err(QkdError::Domain {
            name: "p_c",
            value: p_c,
            domain: "(0, inf)",
        });
    }
    let h_bit = binary_entropy(e_x)?;
    let h_phase = worst_case_conditional_phase_entropy(spec, e_x)?;
    Ok(p_c * (1.0 - h_bit - h_phase))
}

/// Multi-photon-aware rate from explicit class fractions.
///
/// `e_x_single` is only consulted when `omega1 > 0`.
pub fn gllp_rate(
    p_c: f64,
    omega0: f64,
    omega1: f64,
    e_x: f64,
    e_x_single: f64,
    spec: &ProtocolSpec,
) -> Result<f64> {
    let h_bit = binary_entropy(e_x)?;
    let leak = if omega1 > 0.0 {
        omega1 * worst_case_conditional_phase_entropy(spec, e_x_single)?
    } else {
        0.0
    };
    Ok(p_c * (omega0 + omega1 - h_bit - leak))
}

pub fn rate_gllp(b: &RateBreakdown, spec: &ProtocolSpec) -> Result<f64> {
    gllp_rate(b.p_c(), b.omega0, b.omega1, b.e_x, b.e_x_single, spec)
}

fn single_photon_terms(b: &RateBreakdown, spec: &ProtocolSpec) -> Result<(f64, f64)> {
    let p_c = b.p_c();
    let corrected = p_c * binary_entropy(b.e_x)?;
    let leaked = b.p_sq * worst_case_conditional_phase_entropy(spec, b.e_x_sq)?;
    Ok((corrected, leaked))
}

/// Dark-count-aware bound on Bob's key.
pub fn rate_bob(b: &RateBreakdown, spec: &ProtocolSpec) -> Result<f64> {
    let (corrected, leaked) = single_photon_terms(b, spec)?;
    Ok(b.p_sq + b.p_dk - corrected - leaked)
}

/// Dark-count-aware bound on Alice's key.
pub fn rate_alice(b: &RateBreakdown, spec: &ProtocolSpec) -> Result<f64> {
    let (corrected, leaked) = single_photon_terms(b, spec)?;
    Ok(b.p_sq + b.p_c() * b.omega0 - corrected - leaked)
}

pub fn rate_improved(b: &RateBreakdown, spec: &ProtocolSpec) -> Result<f64> {
    Ok(rate_alice(b, spec)?.max(rate_bob(b, spec)?))
}

/// Eve's per-bit information on dark-count results when the first of two
/// detectors fires with probability `q` on a dark count.
pub fn nonuniform_dark_bound(q: f64) -> Result<f64> {
    Ok(1.0 - binary_entropy(q)?)
}

/// Bit error rate at which [`rate_shor_preskill`] crosses zero.
pub fn zero_dark_threshold(spec: &ProtocolSpec) -> Result<f64> {
    let hi = 0.5f64.min(spec.max_bit_error());
    let f = |e: f64| rate_shor_preskill(1.0, e, spec).unwrap_or(f64::NEG_INFINITY);
    if f(hi) > 0.0 {
        return Ok(hi);
    }
    Ok(bisect_root(f, 0.0, hi, THRESHOLD_TOL))
}

/// Highest tolerable mixed bit error rate for a single-photon source when the
/// non-dark-count error rate is fixed at `e_x_sq`.
///
/// The dark-count fraction `f` of conclusive results sweeps `[0, 1]`, giving a
/// mixed rate `e_x = (1 - f) e_x_sq + f / 2`. Returns `None` when the rate is
/// negative even with no dark counts.
pub fn threshold_bit_error(spec: &ProtocolSpec, e_x_sq: f64) -> Result<Option<f64>> {
    if !(0.0..0.5).contains(&e_x_sq) {
        return Err(QkdError::Domain {
            name: "e_x_sq",
            value: e_x_sq,
            domain: "[0, 0.5)",
        });
    }
    let leak = worst_case_conditional_phase_entropy(spec, e_x_sq)?;
    let mixed = |f: f64| (1.0 - f) * e_x_sq + f * DARK_COUNT_BIT_ERROR;
    // Rate per conclusive result; the conclusive factor cancels.
    let normalized = |f: f64| 1.0 - binary_entropy(mixed(f)).unwrap_or(1.0) - (1.0 - f) * leak;

    if normalized(0.0) < 0.0 {
        return Ok(None);
    }
    if leak == 0.0 {
        return Ok(Some(mixed(1.0)));
    }
    // normalized(f) vanishes trivially at f = 1. Dividing by (1 - f) leaves a
    // function that is decreasing in f, so its unique sign change is the
    // threshold.
    let scaled = |f: f64| {
        if f >= 1.0 {
            -leak
        } else {
            normalized(f) / (1.0 - f)
        }
    };
    let (lo, _) = bisect_boundary(|f| scaled(f) >= 0.0, 0.0, 1.0, THRESHOLD_TOL);
    Ok(Some(mixed(lo)))
}

/// Which bound to use when scanning distance.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RateFormula {
    Gllp,
    Improved,
}

impl RateFormula {
    pub fn evaluate(self, b: &RateBreakdown, spec: &ProtocolSpec) -> Result<f64> {
        match self {
            RateFormula::Gllp => rate_gllp(b, spec),
            RateFormula::Improved => rate_improved(b, spec),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MaxDistance {
    Km(f64),
    /// The rate stayed positive up to the search cap.
    Unbounded,
}

impl MaxDistance {
    /// Distance in km, `f64::INFINITY` when unbounded.
    pub fn km(self) -> f64 {
        match self {
            MaxDistance::Km(l) => l,
            MaxDistance::Unbounded => f64::INFINITY,
        }
    }
}

/// Largest channel length with a strictly positive key rate.
///
/// Exponential bracketing from 1 km, then bisection to 0.01 km.
pub fn max_distance(scn: &Scenario, formula: RateFormula, cap_km: f64) -> Result<MaxDistance> {
    max_distance_with(scn, cap_km, |at| {
        let b = at.breakdown()?;
        formula.evaluate(&b, &at.protocol)
    })
}

/// [`max_distance`] for an arbitrary rate evaluated on the scenario moved to
/// each trial length. Evaluation errors count as a non-positive rate.
pub fn max_distance_with<F>(scn: &Scenario, cap_km: f64, rate: F) -> Result<MaxDistance>
where
    F: Fn(&Scenario) -> Result<f64>,
{
    scn.validate()?;
    if !(cap_km > 0.0) {
        return Err(QkdError::InvalidInput(format!("distance cap {cap_km} must be > 0")));
    }
    let positive = |l: f64| rate(&scn.with_length(l)).map(|r| r > 0.0).unwrap_or(false);
    if !positive(0.0) {
        return Ok(MaxDistance::Km(0.0));
    }
    let mut lo = 0.0;
    let mut hi = 1.0f64.min(cap_km);
    while positive(hi) {
        if hi >= cap_km {
            return Ok(MaxDistance::Unbounded);
        }
        lo = hi;
        hi = (2.0 * hi).min(cap_km);
    }
    let (lo, _) = bisect_boundary(positive, lo, hi, DISTANCE_TOL_KM);
    Ok(MaxDistance::Km(lo))
}
