//! Physical models: fiber loss, detector dark counts, single-photon and
//! Poissonian sources, and the conclusive-rate breakdowns they induce.

use std::f64::consts::LN_10;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{check_probability, QkdError, Result};
use crate::keyrate::{gllp_rate, rate_gllp, rate_improved, RateBreakdown, DARK_COUNT_BIT_ERROR};
use crate::protocols::{Protocol, ProtocolSpec};

/// Fiber link with exponential loss.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinkModel {
    pub attenuation_db_per_km: f64,
    pub length_km: f64,
}

impl LinkModel {
    pub fn new(attenuation_db_per_km: f64, length_km: f64) -> Result<Self> {
        let link = Self {
            attenuation_db_per_km,
            length_km,
        };
        link.validate()?;
        Ok(link)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.attenuation_db_per_km.is_finite() && self.attenuation_db_per_km >= 0.0) {
            return Err(QkdError::InvalidInput(format!(
                "attenuation_db_per_km = {} must be >= 0",
                self.attenuation_db_per_km
            )));
        }
        if !(self.length_km.is_finite() && self.length_km >= 0.0) {
            return Err(QkdError::InvalidInput(format!(
                "length_km = {} must be >= 0",
                self.length_km
            )));
        }
        Ok(())
    }

    /// Attenuation coefficient in 1/km.
    pub fn attenuation_per_km(&self) -> f64 {
        self.attenuation_db_per_km * LN_10 / 10.0
    }
}

/// Probability that a photon survives the link, `exp(-A l)`.
pub fn transmittance(link: &LinkModel) -> f64 {
    (-link.attenuation_per_km() * link.length_km).exp()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetectorModel {
    /// Per-detector, per-pulse dark count probability `C`.
    pub dark_count_prob: f64,
    pub detector_count: u32,
}

impl DetectorModel {
    /// Detector bank sized for the given protocol.
    pub fn for_protocol(protocol: Protocol, dark_count_prob: f64) -> Self {
        Self {
            dark_count_prob,
            detector_count: protocol.spec().detector_count,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum SourceModel {
    SinglePhoton,
    Poissonian { mean_photon_number: f64 },
}

impl SourceModel {
    pub fn mean_photon_number(&self) -> Option<f64> {
        match self {
            SourceModel::SinglePhoton => None,
            SourceModel::Poissonian { mean_photon_number } => Some(*mean_photon_number),
        }
    }
}

/// Probability of emitting exactly `k` photons from a Poisson source.
pub fn poisson_pmf(mu: f64, k: u32) -> f64 {
    if mu == 0.0 {
        return if k == 0 { 1.0 } else { 0.0 };
    }
    (-mu + k as f64 * mu.ln() - ln_factorial(k)).exp()
}

fn ln_factorial(k: u32) -> f64 {
    (2..=k).map(|i| (i as f64).ln()).sum()
}

/// Everything needed to derive a conclusive-rate breakdown.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Scenario {
    pub protocol: ProtocolSpec,
    pub source: SourceModel,
    pub link: LinkModel,
    pub detector: DetectorModel,
    /// Distance-independent bit error rate of received qubit states.
    pub e_x_sq: f64,
}

impl Scenario {
    pub fn new(
        protocol: Protocol,
        source: SourceModel,
        link: LinkModel,
        dark_count_prob: f64,
        e_x_sq: f64,
    ) -> Result<Self> {
        let scn = Self {
            protocol: protocol.spec(),
            source,
            link,
            detector: DetectorModel::for_protocol(protocol, dark_count_prob),
            e_x_sq,
        };
        scn.validate()?;
        Ok(scn)
    }

    pub fn validate(&self) -> Result<()> {
        self.link.validate()?;
        let c = self.detector.dark_count_prob;
        if !(0.0..1.0).contains(&c) {
            return Err(QkdError::InvalidInput(format!(
                "dark_count_prob = {c} must lie in [0, 1)"
            )));
        }
        if self.detector.detector_count != self.protocol.detector_count {
            return Err(QkdError::InvalidInput(format!(
                "{} uses {} detectors, scenario has {}",
                self.protocol.name(),
                self.protocol.detector_count,
                self.detector.detector_count
            )));
        }
        if !(0.0..=0.5).contains(&self.e_x_sq) {
            return Err(QkdError::InvalidInput(format!(
                "e_x_sq = {} must lie in [0, 0.5]",
                self.e_x_sq
            )));
        }
        if let SourceModel::Poissonian { mean_photon_number } = self.source {
            if !(mean_photon_number.is_finite() && mean_photon_number > 0.0) {
                return Err(QkdError::InvalidInput(format!(
                    "mean_photon_number = {mean_photon_number} must be > 0"
                )));
            }
        }
        Ok(())
    }

    pub fn with_length(&self, length_km: f64) -> Self {
        let mut scn = *self;
        scn.link.length_km = length_km;
        scn
    }

    pub fn transmittance(&self) -> f64 {
        transmittance(&self.link)
    }

    /// Breakdown for this scenario's source kind.
    pub fn breakdown(&self) -> Result<RateBreakdown> {
        match self.source {
            SourceModel::SinglePhoton => single_photon_breakdown(self),
            SourceModel::Poissonian { .. } => poisson_breakdown(self),
        }
    }
}

/// Conclusive-rate decomposition for a perfect single-photon source.
pub fn single_photon_breakdown(scn: &Scenario) -> Result<RateBreakdown> {
    scn.validate()?;
    if scn.source != SourceModel::SinglePhoton {
        return Err(QkdError::InvalidInput("single_photon_breakdown needs a single-photon source".into()));
    }
    let eta = scn.transmittance();
    let c = scn.detector.dark_count_prob;
    let p_sq = scn.protocol.conclusive_factor(scn.e_x_sq) * eta;
    let p_dk = scn.protocol.dark_conclusive_multiplier * c * (1.0 - eta);
    let p_c = p_sq + p_dk;
    if !(p_c > 0.0) {
        return Err(QkdError::Infeasible("no conclusive results at this distance".into()));
    }
    let e_x = (p_sq * scn.e_x_sq + p_dk * DARK_COUNT_BIT_ERROR) / p_c;
    let b = RateBreakdown {
        p_emp: 0.0,
        p_sq,
        p_mq: 0.0,
        p_dk,
        omega0: 0.0,
        omega1: 1.0,
        e_x,
        e_x_sq: scn.e_x_sq,
        e_x_single: e_x,
    };
    b.validate()?;
    Ok(b)
}

/// Probability that at least one of `k` photons survives a link of transmittance `eta`.
fn any_survives(k: u32, eta: f64) -> f64 {
    -(k as f64 * (-eta).ln_1p()).exp_m1()
}

/// Conclusive-rate decomposition for a Poissonian source over an honest channel.
pub fn poisson_breakdown(scn: &Scenario) -> Result<RateBreakdown> {
    scn.validate()?;
    let mu = scn
        .source
        .mean_photon_number()
        .ok_or_else(|| QkdError::InvalidInput("poisson_breakdown needs a Poissonian source".into()))?;
    let eta = scn.transmittance();
    let c = scn.detector.dark_count_prob;
    let m = scn.protocol.dark_conclusive_multiplier;
    let cf = scn.protocol.conclusive_factor(scn.e_x_sq);

    let p0 = poisson_pmf(mu, 0);
    let p1 = poisson_pmf(mu, 1);
    let p_sq = cf * p1 * eta;
    let mut p_mq = 0.0;
    let mut k = 2u32;
    loop {
        let pk = poisson_pmf(mu, k);
        p_mq += pk * any_survives(k, eta);
        if (k as f64 > mu && pk < 1e-20) || k > 10_000 {
            break;
        }
        k += 1;
    }
    p_mq *= cf;
    // Sum over k of P_k (1 - eta)^k.
    let p_dk = m * c * (-mu * eta).exp();
    let p_c = p_sq + p_mq + p_dk;
    if !(p_c > 0.0) {
        return Err(QkdError::Infeasible("no conclusive results at this distance".into()));
    }
    let single_dark = m * c * p1 * (1.0 - eta);
    let single_class = p_sq + single_dark;
    let e_x = ((p_sq + p_mq) * scn.e_x_sq + p_dk * DARK_COUNT_BIT_ERROR) / p_c;
    let e_x_single = if single_class > 0.0 {
        (p_sq * scn.e_x_sq + single_dark * DARK_COUNT_BIT_ERROR) / single_class
    } else {
        0.0
    };
    let b = RateBreakdown {
        p_emp: 0.0,
        p_sq,
        p_mq,
        p_dk,
        omega0: m * c * p0 / p_c,
        omega1: single_class / p_c,
        e_x,
        e_x_sq: scn.e_x_sq,
        e_x_single,
    };
    b.validate()?;
    Ok(b)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DecoyEstimate {
    pub p_sq: f64,
    pub e_x_sq: f64,
}

/// Recovers the single-photon qubit-state rate and error rate from decoy-state
/// estimates of the single-photon-pulse conclusive rate `p_c_omega1` and its
/// bit error rate `e_x_1`.
///
/// Assumes a unit conclusive factor and two-detector dark-count statistics,
/// i.e. BB84 or the six-state protocol.
pub fn decoy_invert(p_c_omega1: f64, e_x_1: f64, mu_bar: f64, eta: f64, c: f64) -> Result<DecoyEstimate> {
    check_probability("e_x_1", e_x_1)?;
    check_probability("eta", eta)?;
    check_probability("C", c)?;
    if !(mu_bar.is_finite() && mu_bar > 0.0) {
        return Err(QkdError::Domain {
            name: "mu_bar",
            value: mu_bar,
            domain: "(0, inf)",
        });
    }
    let p1 = mu_bar * (-mu_bar).exp();
    let dark_floor = 2.0 * c * p1 * (1.0 - eta);
    if !(p_c_omega1 > dark_floor) {
        return Err(QkdError::Infeasible(format!(
            "single-photon conclusive rate {p_c_omega1} does not exceed the dark-count floor {dark_floor}"
        )));
    }
    if !(eta > 0.0) {
        return Err(QkdError::Infeasible("eta = 0 leaves e_x_sq undetermined".into()));
    }
    let p_sq = p_c_omega1 - dark_floor;
    let e_x_sq = (e_x_1 * p_c_omega1 / p1 - 2.0 * c * (1.0 - eta) * DARK_COUNT_BIT_ERROR) / eta;
    const TOL: f64 = 1e-9;
    if !(-TOL..=1.0 + TOL).contains(&e_x_sq) {
        return Err(QkdError::Infeasible(format!("recovered e_x_sq = {e_x_sq} is not a probability")));
    }
    Ok(DecoyEstimate {
        p_sq,
        e_x_sq: e_x_sq.clamp(0.0, 1.0),
    })
}

/// Breakdown with `p_sq` and `e_x_sq` replaced by their decoy-state estimates,
/// as recovered by [`decoy_invert`] from the single-photon-pulse statistics of
/// the forward Poisson model.
pub fn decoy_estimated_breakdown(scn: &Scenario) -> Result<RateBreakdown> {
    let mu = scn
        .source
        .mean_photon_number()
        .ok_or_else(|| QkdError::InvalidInput("decoy estimation needs a Poissonian source".into()))?;
    let b = poisson_breakdown(scn)?;
    let est = decoy_invert(
        b.omega1 * b.p_c(),
        b.e_x_single,
        mu,
        scn.transmittance(),
        scn.detector.dark_count_prob,
    )?;
    Ok(RateBreakdown {
        p_sq: est.p_sq,
        e_x_sq: est.e_x_sq,
        ..b
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct NoDecoyEstimate {
    pub omega1_lower: f64,
    pub e_x_1_upper: f64,
    /// False when multi-photon emissions alone could explain every conclusive result.
    pub usable: bool,
}

/// Worst-case single-photon fraction and error rate without decoy states:
/// every multi-photon pulse is assumed conclusive and all errors are charged
/// to the single-photon class.
pub fn worst_case_no_decoy(p_c: f64, e_x: f64, mu_bar: f64) -> Result<NoDecoyEstimate> {
    check_probability("e_x", e_x)?;
    if !(p_c > 0.0) {
        return Err(QkdError::Domain {
            name: "p_c",
            value: p_c,
            domain: "(0, inf)",
        });
    }
    if !(mu_bar.is_finite() && mu_bar >= 0.0) {
        return Err(QkdError::Domain {
            name: "mu_bar",
            value: mu_bar,
            domain: "[0, inf)",
        });
    }
    let p_multi = -(-mu_bar).exp_m1() - mu_bar * (-mu_bar).exp();
    if p_multi >= p_c {
        return Ok(NoDecoyEstimate {
            omega1_lower: 0.0,
            e_x_1_upper: DARK_COUNT_BIT_ERROR,
            usable: false,
        });
    }
    let omega1_lower = (p_c - p_multi) / p_c;
    Ok(NoDecoyEstimate {
        omega1_lower,
        e_x_1_upper: (e_x / omega1_lower).min(DARK_COUNT_BIT_ERROR),
        usable: true,
    })
}

/// Multi-photon-aware rate a Poissonian link would get without decoy states.
pub fn no_decoy_rate(scn: &Scenario) -> Result<f64> {
    let mu = scn
        .source
        .mean_photon_number()
        .ok_or_else(|| QkdError::InvalidInput("no_decoy_rate needs a Poissonian source".into()))?;
    let b = poisson_breakdown(scn)?;
    let est = worst_case_no_decoy(b.p_c(), b.e_x, mu)?;
    gllp_rate(b.p_c(), 0.0, est.omega1_lower, b.e_x, est.e_x_1_upper, &scn.protocol)
}

/// One grid point of a distance sweep. Rates are clamped at zero.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SweepRow {
    pub length_km: f64,
    pub eta: f64,
    pub breakdown: RateBreakdown,
    pub rate_gllp: f64,
    pub rate_improved: f64,
}

/// Evaluates both rate bounds on `l_min, l_min + step, ...` up to `l_max`.
pub fn distance_sweep(scn: &Scenario, l_min: f64, l_max: f64, step: f64) -> Result<Vec<SweepRow>> {
    scn.validate()?;
    if !(l_min.is_finite() && l_max.is_finite() && 0.0 <= l_min && l_min <= l_max) {
        return Err(QkdError::InvalidInput(format!(
            "length range [{l_min}, {l_max}] must satisfy 0 <= min <= max"
        )));
    }
    if !(step.is_finite() && step > 0.0) {
        return Err(QkdError::InvalidInput(format!("step = {step} must be > 0")));
    }
    let n = ((l_max - l_min) / step + 1e-9).floor() as usize + 1;
    (0..n)
        .into_par_iter()
        .map(|i| {
            let l = l_min + step * i as f64;
            let at = scn.with_length(l);
            let breakdown = at.breakdown()?;
            Ok(SweepRow {
                length_km: l,
                eta: at.transmittance(),
                breakdown,
                rate_gllp: rate_gllp(&breakdown, &scn.protocol)?.max(0.0),
                rate_improved: rate_improved(&breakdown, &scn.protocol)?.max(0.0),
            })
        })
        .collect()
}
