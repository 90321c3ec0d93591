//! Shannon entropy primitives over Bell-pair error patterns.
//!
//! Error classes follow the entanglement-distillation picture: a bit error is
//! a shared `Psi+` or `Psi-`, a phase error is `Phi-` or `Psi-`, and a Y error
//! is `Phi-` or `Psi+`. All entropies are in bits.

use crate::error::{check_probability, QkdError, Result};
use crate::numeric::golden_section_max;
use crate::protocols::ProtocolSpec;

/// Probabilities below zero by at most this much are treated as rounding.
const NEGATIVE_ROUNDING: f64 = 1e-12;
const NORMALIZATION_TOL: f64 = 1e-12;
/// Coarse grid used to bracket the worst-case Y error rate.
const BRACKET_POINTS: usize = 256;
const SEARCH_TOL: f64 = 1e-9;

fn plogp(p: f64) -> f64 {
    if p <= 0.0 {
        0.0
    } else {
        -p * p.log2()
    }
}

/// Binary Shannon entropy `H(p)` in bits, with `0 log 0 = 0`.
pub fn binary_entropy(p: f64) -> Result<f64> {
    check_probability("p", p)?;
    Ok(plogp(p) + plogp(1.0 - p))
}

/// Distribution of the four Bell-pair outcomes shared after transmission.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PauliDistribution {
    p_identity: f64,
    p_psi_plus: f64,
    p_psi_minus: f64,
    p_phi_minus: f64,
}

impl PauliDistribution {
    pub fn new(p_identity: f64, p_psi_plus: f64, p_psi_minus: f64, p_phi_minus: f64) -> Result<Self> {
        let probs = [p_identity, p_psi_plus, p_psi_minus, p_phi_minus];
        if probs.iter().any(|p| !p.is_finite() || *p < 0.0) {
            return Err(QkdError::Infeasible(format!(
                "Pauli probabilities must be non-negative, got {probs:?}"
            )));
        }
        let sum: f64 = probs.iter().sum();
        if (sum - 1.0).abs() > NORMALIZATION_TOL {
            return Err(QkdError::Infeasible(format!(
                "Pauli probabilities sum to {sum}, expected 1"
            )));
        }
        Ok(Self {
            p_identity,
            p_psi_plus,
            p_psi_minus,
            p_phi_minus,
        })
    }

    pub fn p_identity(&self) -> f64 {
        self.p_identity
    }

    pub fn p_psi_plus(&self) -> f64 {
        self.p_psi_plus
    }

    pub fn p_psi_minus(&self) -> f64 {
        self.p_psi_minus
    }

    pub fn p_phi_minus(&self) -> f64 {
        self.p_phi_minus
    }

    pub fn bit_error(&self) -> f64 {
        self.p_psi_plus + self.p_psi_minus
    }

    pub fn phase_error(&self) -> f64 {
        self.p_phi_minus + self.p_psi_minus
    }

    pub fn y_error(&self) -> f64 {
        self.p_phi_minus + self.p_psi_plus
    }
}

fn clamp_rounding(name: &str, p: f64) -> Result<f64> {
    if p >= 0.0 {
        Ok(p)
    } else if p >= -NEGATIVE_ROUNDING {
        Ok(0.0)
    } else {
        Err(QkdError::Infeasible(format!(
            "error rates imply {name} = {p} < 0"
        )))
    }
}

/// Solves the three error-rate definitions for the Bell-pair probabilities.
pub fn distribution_from_rates(e_x: f64, e_y: f64, e_z: f64) -> Result<PauliDistribution> {
    check_probability("e_x", e_x)?;
    check_probability("e_y", e_y)?;
    check_probability("e_z", e_z)?;
    let psi_plus = clamp_rounding("p_psi_plus", 0.5 * (e_x + e_y - e_z))?;
    let psi_minus = clamp_rounding("p_psi_minus", 0.5 * (e_x + e_z - e_y))?;
    let phi_minus = clamp_rounding("p_phi_minus", 0.5 * (e_y + e_z - e_x))?;
    let identity = clamp_rounding("p_identity", 1.0 - psi_plus - psi_minus - phi_minus)?;
    PauliDistribution::new(identity, psi_plus, psi_minus, phi_minus)
}

/// Entropy of the joint (bit error, phase error) pattern.
pub fn joint_bit_phase_entropy(d: &PauliDistribution) -> f64 {
    plogp(d.p_identity) + plogp(d.p_psi_plus) + plogp(d.p_phi_minus) + plogp(d.p_psi_minus)
}

/// `H(e_z | e_x) = H(e_x, e_z) - H(e_x)`, clipped to `[0, 1]` against rounding.
pub fn conditional_phase_entropy(d: &PauliDistribution) -> f64 {
    let e_x = d.bit_error().clamp(0.0, 1.0);
    let h = joint_bit_phase_entropy(d) - (plogp(e_x) + plogp(1.0 - e_x));
    h.clamp(0.0, 1.0)
}

/// Feasible Y error interval for a given (e_x, e_z), intersected with the
/// protocol's admissible interval. `None` when the intersection is empty.
pub fn admissible_y_interval(spec: &ProtocolSpec, e_x: f64) -> Option<(f64, f64)> {
    let e_z = spec.phase_error(e_x);
    let (lo, hi) = spec.y_interval(e_x);
    let feasible_lo = (e_x - e_z).abs();
    let feasible_hi = (e_x + e_z).min(2.0 - e_x - e_z);
    let lo = lo.max(feasible_lo);
    let hi = hi.min(feasible_hi);
    if hi < lo - NEGATIVE_ROUNDING {
        None
    } else {
        Some((lo, hi.max(lo)))
    }
}

/// Largest `H(e_z | e_x)` consistent with the protocol's error-rate relations.
///
/// The six-state protocol pins `e_y = e_x`; the others maximize over the
/// admissible Y error interval with a coarse bracketing grid followed by a
/// golden-section refinement.
pub fn worst_case_conditional_phase_entropy(spec: &ProtocolSpec, e_x: f64) -> Result<f64> {
    check_probability("e_x", e_x)?;
    let max_e_x = spec.max_bit_error();
    if e_x > max_e_x {
        return Err(QkdError::Domain {
            name: "e_x",
            value: e_x,
            domain: "[0, 1 / phase_ratio]",
        });
    }
    let e_z = spec.phase_error(e_x).min(1.0);
    let (lo, hi) = admissible_y_interval(spec, e_x).ok_or_else(|| {
        QkdError::Infeasible(format!(
            "{}: no admissible Y error rate at e_x = {e_x}",
            spec.name()
        ))
    })?;
    let objective = |e_y: f64| {
        distribution_from_rates(e_x, e_y.clamp(lo, hi), e_z)
            .map(|d| conditional_phase_entropy(&d))
            .unwrap_or(f64::NEG_INFINITY)
    };
    if hi - lo <= SEARCH_TOL {
        return Ok(objective(0.5 * (lo + hi)));
    }

    let step = (hi - lo) / (BRACKET_POINTS - 1) as f64;
    let (best_idx, best_val) = (0..BRACKET_POINTS)
        .map(|i| (i, objective(lo + step * i as f64)))
        .fold((0, f64::NEG_INFINITY), |acc, c| if c.1 > acc.1 { c } else { acc });
    let a = lo + step * best_idx.saturating_sub(1) as f64;
    let b = (lo + step * (best_idx + 1) as f64).min(hi);
    let (_, refined) = golden_section_max(objective, a, b, SEARCH_TOL);
    Ok(refined.max(best_val))
}
