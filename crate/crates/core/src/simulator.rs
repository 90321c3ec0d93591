//! Pulse-level Monte Carlo model of the link.
//!
//! Each pulse goes through emission, per-photon loss, an optional
//! intercept-resend attack, the intrinsic bit-flip channel and sifting; pulses
//! where nothing arrives can still produce a dark count. Pulses are simulated
//! in fixed-size shards, each with its own ChaCha stream, so the result is the
//! same whatever the thread count.

use std::io::Write;

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{QkdError, Result};
use crate::keyrate::RateBreakdown;
use crate::protocols::Protocol;
use crate::scenario::{decoy_invert, LinkModel, Scenario, SourceModel};

/// Pulses per RNG stream.
pub const SHARD_PULSES: u64 = 1 << 16;

/// Categories below this count make an empirical breakdown unreliable.
pub const MIN_CATEGORY_COUNT: u64 = 100;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum EveModel {
    #[default]
    #[serde(rename = "none")]
    None,
    /// Measure every arriving qubit in a uniformly random protocol basis and
    /// resend the resulting state.
    #[serde(rename = "intercept-resend")]
    InterceptResend,
}

impl std::str::FromStr for EveModel {
    type Err = QkdError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "none" => Ok(EveModel::None),
            "intercept-resend" => Ok(EveModel::InterceptResend),
            other => Err(QkdError::InvalidInput(format!(
                "unknown eavesdropper model {other:?} (expected none or intercept-resend)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Category {
    NotConclusive,
    /// Qubit state from a single-photon pulse.
    SingleQubit,
    /// Qubit state from a multi-photon pulse.
    MultiQubit,
    /// Qubit state on an empty pulse, i.e. injected by Eve.
    EmptyQubit,
    DarkCount,
}

impl Category {
    pub const CONCLUSIVE: [Category; 4] = [
        Category::SingleQubit,
        Category::MultiQubit,
        Category::EmptyQubit,
        Category::DarkCount,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Category::NotConclusive => "not_conclusive",
            Category::SingleQubit => "single_qubit",
            Category::MultiQubit => "multi_qubit",
            Category::EmptyQubit => "empty_qubit",
            Category::DarkCount => "dark_count",
        }
    }

    fn slot(self) -> Option<usize> {
        match self {
            Category::NotConclusive => None,
            Category::SingleQubit => Some(0),
            Category::MultiQubit => Some(1),
            Category::EmptyQubit => Some(2),
            Category::DarkCount => Some(3),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PulseOutcome {
    pub emitted_photons: u32,
    pub arrived_photons: u32,
    /// Bit `i` set when detector `i` clicked.
    pub detector_fired: u8,
    pub category: Category,
    /// Only meaningful for conclusive outcomes.
    pub bit_error: bool,
}

/// Number of measurement bases Eve picks from, and the bit-flip probability
/// her resent state causes when her basis differs from Alice's.
fn intercept_resend_params(protocol: Protocol) -> (u32, f64) {
    match protocol {
        Protocol::Bb84 => (2, 0.5),
        Protocol::SixState => (3, 0.5),
        // Bloch axes 120 degrees apart: (1 - cos^2) / 2.
        Protocol::Pbc00 => (3, 0.375),
    }
}

/// Precomputed per-pulse probabilities for one scenario.
#[derive(Debug, Clone)]
pub struct PulseSampler {
    source: Option<Poisson<f64>>,
    eta: f64,
    dark_count_prob: f64,
    detector_count: u32,
    keep_qubit: f64,
    keep_dark: f64,
    e_x_sq: f64,
    eve: EveModel,
    eve_bases: u32,
    eve_mismatch_flip: f64,
}

impl PulseSampler {
    pub fn new(scn: &Scenario, eve: EveModel) -> Result<Self> {
        scn.validate()?;
        if scn.detector.detector_count > 8 {
            return Err(QkdError::InvalidInput("at most 8 detectors are supported".into()));
        }
        let source = match scn.source {
            SourceModel::SinglePhoton => None,
            SourceModel::Poissonian { mean_photon_number } => Some(
                Poisson::new(mean_photon_number)
                    .map_err(|e| QkdError::InvalidInput(format!("mean_photon_number: {e}")))?,
            ),
        };
        let (eve_bases, eve_mismatch_flip) = intercept_resend_params(scn.protocol.protocol);
        Ok(Self {
            source,
            eta: scn.transmittance(),
            dark_count_prob: scn.detector.dark_count_prob,
            detector_count: scn.detector.detector_count,
            keep_qubit: scn.protocol.conclusive_factor(scn.e_x_sq),
            keep_dark: scn.protocol.dark_conclusive_multiplier / scn.detector.detector_count as f64,
            e_x_sq: scn.e_x_sq,
            eve,
            eve_bases,
            eve_mismatch_flip,
        })
    }

    fn bernoulli<R: Rng + ?Sized>(rng: &mut R, p: f64) -> bool {
        rng.random::<f64>() < p
    }

    /// Fires each detector independently with probability `C`.
    ///
    /// Checks for the common all-quiet case with a single draw, then walks the
    /// detectors conditioned on at least one click.
    fn fire_detectors<R: Rng + ?Sized>(&self, rng: &mut R) -> u8 {
        let c = self.dark_count_prob;
        if c == 0.0 {
            return 0;
        }
        let n = self.detector_count as i32;
        if rng.random::<f64>() >= -((n as f64) * (-c).ln_1p()).exp_m1() {
            return 0;
        }
        let mut mask = 0u8;
        let mut forced = true;
        for i in 0..n {
            let remaining = n - i;
            let p = if forced {
                c / -((remaining as f64) * (-c).ln_1p()).exp_m1()
            } else {
                c
            };
            if Self::bernoulli(rng, p) {
                mask |= 1 << i;
                forced = false;
            }
        }
        mask
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> PulseOutcome {
        let emitted_photons = match &self.source {
            None => 1,
            Some(poisson) => poisson.sample(rng) as u32,
        };
        let arrived_photons = (0..emitted_photons)
            .filter(|_| Self::bernoulli(rng, self.eta))
            .count() as u32;

        if arrived_photons > 0 {
            let mut flipped = false;
            if self.eve == EveModel::InterceptResend {
                let alice_basis = rng.random_range(0..self.eve_bases);
                let eve_basis = rng.random_range(0..self.eve_bases);
                if alice_basis != eve_basis {
                    flipped ^= Self::bernoulli(rng, self.eve_mismatch_flip);
                }
            }
            flipped ^= Self::bernoulli(rng, self.e_x_sq);
            let kept = Self::bernoulli(rng, self.keep_qubit);
            let category = match (kept, emitted_photons) {
                (false, _) => Category::NotConclusive,
                (true, 0) => Category::EmptyQubit,
                (true, 1) => Category::SingleQubit,
                (true, _) => Category::MultiQubit,
            };
            return PulseOutcome {
                emitted_photons,
                arrived_photons,
                detector_fired: 1 << (flipped as u8),
                category,
                bit_error: kept && flipped,
            };
        }

        let detector_fired = self.fire_detectors(rng);
        let (category, bit_error) = if detector_fired.count_ones() == 1 && Self::bernoulli(rng, self.keep_dark) {
            (Category::DarkCount, rng.random::<bool>())
        } else {
            (Category::NotConclusive, false)
        };
        PulseOutcome {
            emitted_photons,
            arrived_photons,
            detector_fired,
            category,
            bit_error,
        }
    }
}

/// Tallies of a simulation run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
pub struct EmpiricalStats {
    pub pulses: u64,
    /// Indexed as [`Category::CONCLUSIVE`].
    pub conclusive: [u64; 4],
    pub bit_errors: [u64; 4],
    /// Conclusive results (dark counts included) on pulses that carried one photon.
    pub single_pulse_conclusive: u64,
    pub single_pulse_errors: u64,
    /// Conclusive results on pulses that carried no photon.
    pub vacuum_pulse_conclusive: u64,
}

impl EmpiricalStats {
    pub fn record(&mut self, outcome: &PulseOutcome) {
        self.pulses += 1;
        let Some(slot) = outcome.category.slot() else {
            return;
        };
        self.conclusive[slot] += 1;
        self.bit_errors[slot] += outcome.bit_error as u64;
        match outcome.emitted_photons {
            0 => self.vacuum_pulse_conclusive += 1,
            1 => {
                self.single_pulse_conclusive += 1;
                self.single_pulse_errors += outcome.bit_error as u64;
            }
            _ => {}
        }
    }

    pub fn merge(&mut self, other: &EmpiricalStats) {
        self.pulses += other.pulses;
        for i in 0..4 {
            self.conclusive[i] += other.conclusive[i];
            self.bit_errors[i] += other.bit_errors[i];
        }
        self.single_pulse_conclusive += other.single_pulse_conclusive;
        self.single_pulse_errors += other.single_pulse_errors;
        self.vacuum_pulse_conclusive += other.vacuum_pulse_conclusive;
    }

    pub fn count(&self, category: Category) -> u64 {
        match category.slot() {
            Some(i) => self.conclusive[i],
            None => self.pulses - self.total_conclusive(),
        }
    }

    pub fn errors(&self, category: Category) -> u64 {
        category.slot().map_or(0, |i| self.bit_errors[i])
    }

    pub fn total_conclusive(&self) -> u64 {
        self.conclusive.iter().sum()
    }

    pub fn total_errors(&self) -> u64 {
        self.bit_errors.iter().sum()
    }

    /// Raw tallies as CSV with columns `category,count,bit_errors`.
    pub fn write_tally_csv<W: Write>(&self, out: W) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["category", "count", "bit_errors"])?;
        let all = std::iter::once(Category::NotConclusive).chain(Category::CONCLUSIVE);
        for cat in all {
            w.write_record([
                cat.as_str().to_string(),
                self.count(cat).to_string(),
                self.errors(cat).to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

fn run_shard(sampler: &PulseSampler, seed: u64, shard: u64, pulses: u64) -> EmpiricalStats {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(shard);
    let mut stats = EmpiricalStats::default();
    for _ in 0..pulses {
        stats.record(&sampler.sample(&mut rng));
    }
    stats
}

/// Simulates `n_pulses` pulses. Deterministic in `(scn, eve, n_pulses, seed)`.
pub fn run_simulation(scn: &Scenario, eve: EveModel, n_pulses: u64, seed: u64) -> Result<EmpiricalStats> {
    if n_pulses == 0 {
        return Err(QkdError::InvalidInput("n_pulses must be >= 1".into()));
    }
    let sampler = PulseSampler::new(scn, eve)?;
    let shards = n_pulses.div_ceil(SHARD_PULSES);
    let parts: Vec<EmpiricalStats> = (0..shards)
        .into_par_iter()
        .map(|shard| {
            let len = SHARD_PULSES.min(n_pulses - shard * SHARD_PULSES);
            run_shard(&sampler, seed, shard, len)
        })
        .collect();
    Ok(parts.iter().fold(EmpiricalStats::default(), |mut acc, s| {
        acc.merge(s);
        acc
    }))
}

/// A value with its binomial standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Estimate {
    pub value: f64,
    pub std_error: f64,
}

impl Estimate {
    /// Proportion `successes / trials`; zero trials gives a zero estimate with
    /// infinite error.
    pub fn proportion(successes: u64, trials: u64) -> Self {
        if trials == 0 {
            return Self {
                value: 0.0,
                std_error: f64::INFINITY,
            };
        }
        let p = successes as f64 / trials as f64;
        Self {
            value: p,
            std_error: (p * (1.0 - p) / trials as f64).sqrt(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EmpiricalBreakdown {
    pub p_emp: Estimate,
    pub p_sq: Estimate,
    pub p_mq: Estimate,
    pub p_dk: Estimate,
    pub p_c: Estimate,
    pub omega0: Estimate,
    pub omega1: Estimate,
    pub e_x: Estimate,
    pub e_x_sq: Estimate,
    pub e_x_single: Estimate,
    /// Set when no conclusive result was seen, or an observed category has
    /// fewer than [`MIN_CATEGORY_COUNT`] events.
    pub insufficient_statistics: bool,
}

impl EmpiricalBreakdown {
    /// Point estimates as a [`RateBreakdown`]; fails when `p_c = 0`.
    pub fn to_rate_breakdown(&self) -> Result<RateBreakdown> {
        let b = RateBreakdown {
            p_emp: self.p_emp.value,
            p_sq: self.p_sq.value,
            p_mq: self.p_mq.value,
            p_dk: self.p_dk.value,
            omega0: self.omega0.value,
            omega1: self.omega1.value,
            e_x: self.e_x.value,
            e_x_sq: self.e_x_sq.value,
            e_x_single: self.e_x_single.value,
        };
        b.validate()?;
        Ok(b)
    }
}

/// Per-pulse rates and error rates from simulation tallies.
pub fn empirical_breakdown(stats: &EmpiricalStats) -> EmpiricalBreakdown {
    let n = stats.pulses;
    let conclusive = stats.total_conclusive();
    let rate = |c: Category| Estimate::proportion(stats.count(c), n);
    let insufficient = conclusive == 0
        || stats
            .conclusive
            .iter()
            .any(|&c| c > 0 && c < MIN_CATEGORY_COUNT);
    EmpiricalBreakdown {
        p_emp: rate(Category::EmptyQubit),
        p_sq: rate(Category::SingleQubit),
        p_mq: rate(Category::MultiQubit),
        p_dk: rate(Category::DarkCount),
        p_c: Estimate::proportion(conclusive, n),
        omega0: Estimate::proportion(stats.vacuum_pulse_conclusive, conclusive),
        omega1: Estimate::proportion(stats.single_pulse_conclusive, conclusive),
        e_x: Estimate::proportion(stats.total_errors(), conclusive),
        e_x_sq: Estimate::proportion(stats.errors(Category::SingleQubit), stats.count(Category::SingleQubit)),
        e_x_single: Estimate::proportion(stats.single_pulse_errors, stats.single_pulse_conclusive),
        insufficient_statistics: insufficient,
    }
}

/// Empirical-versus-analytic comparison of one breakdown field.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FieldCheck {
    pub field: &'static str,
    pub empirical: f64,
    pub analytic: f64,
    /// Binomial standard error under the analytic value.
    pub std_error: f64,
    pub z: f64,
}

impl FieldCheck {
    fn new(field: &'static str, empirical: f64, analytic: f64, trials: u64) -> Self {
        let std_error = if trials == 0 {
            f64::INFINITY
        } else {
            (analytic * (1.0 - analytic) / trials as f64).sqrt()
        };
        let diff = empirical - analytic;
        let z = if diff == 0.0 {
            0.0
        } else if std_error > 0.0 {
            diff / std_error
        } else {
            f64::INFINITY.copysign(diff)
        };
        Self {
            field,
            empirical,
            analytic,
            std_error,
            z,
        }
    }

    pub fn within(&self, sigmas: f64) -> bool {
        self.z.abs() <= sigmas
    }
}

/// z-scores of `p_sq`, `p_mq`, `p_dk`, `e_x` against an analytic breakdown.
pub fn compare_with_analytic(stats: &EmpiricalStats, analytic: &RateBreakdown) -> Vec<FieldCheck> {
    let emp = empirical_breakdown(stats);
    let n = stats.pulses;
    vec![
        FieldCheck::new("p_sq", emp.p_sq.value, analytic.p_sq, n),
        FieldCheck::new("p_mq", emp.p_mq.value, analytic.p_mq, n),
        FieldCheck::new("p_dk", emp.p_dk.value, analytic.p_dk, n),
        FieldCheck::new("e_x", emp.e_x.value, analytic.e_x, stats.total_conclusive()),
    ]
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DecoyRun {
    pub mu: f64,
    pub stats: EmpiricalStats,
}

/// One simulation per mean photon number. The `i`-th run uses seed `seed + i`.
pub fn simulate_decoy_run(scn: &Scenario, mu_values: &[f64], n_pulses: u64, seed: u64) -> Result<Vec<DecoyRun>> {
    if mu_values.is_empty() {
        return Err(QkdError::InvalidInput("at least one mean photon number is required".into()));
    }
    mu_values
        .iter()
        .enumerate()
        .map(|(i, &mu)| {
            if !(mu.is_finite() && mu > 0.0) {
                return Err(QkdError::InvalidInput(format!("mean photon number {mu} must be > 0")));
            }
            let at = Scenario {
                source: SourceModel::Poissonian { mean_photon_number: mu },
                ..*scn
            };
            Ok(DecoyRun {
                mu,
                stats: run_simulation(&at, EveModel::None, n_pulses, seed.wrapping_add(i as u64))?,
            })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DecoyRecovery {
    pub mu_bar: f64,
    pub p_c_omega1: Estimate,
    pub e_x_single: Estimate,
    pub p_sq: Estimate,
    pub e_x_sq: Estimate,
}

/// Feeds the signal-intensity run's single-photon-pulse statistics through
/// [`decoy_invert`]. Standard errors are propagated to first order.
pub fn recover_single_photon(scn: &Scenario, runs: &[DecoyRun]) -> Result<DecoyRecovery> {
    let mu_bar = scn
        .source
        .mean_photon_number()
        .ok_or_else(|| QkdError::InvalidInput("decoy recovery needs a Poissonian source".into()))?;
    let run = runs
        .iter()
        .find(|r| (r.mu - mu_bar).abs() <= 1e-12 * mu_bar.max(1.0))
        .ok_or_else(|| QkdError::InvalidInput(format!("no run at the signal intensity {mu_bar}")))?;
    let stats = &run.stats;
    let p_c_omega1 = Estimate::proportion(stats.single_pulse_conclusive, stats.pulses);
    let e_x_single = Estimate::proportion(stats.single_pulse_errors, stats.single_pulse_conclusive);
    let eta = scn.transmittance();
    let c = scn.detector.dark_count_prob;
    let est = decoy_invert(p_c_omega1.value, e_x_single.value, mu_bar, eta, c)?;
    let single_errors = Estimate::proportion(stats.single_pulse_errors, stats.pulses);
    let p1 = mu_bar * (-mu_bar).exp();
    Ok(DecoyRecovery {
        mu_bar,
        p_c_omega1,
        e_x_single,
        p_sq: Estimate {
            value: est.p_sq,
            std_error: p_c_omega1.std_error,
        },
        e_x_sq: Estimate {
            value: est.e_x_sq,
            std_error: single_errors.std_error / (p1 * eta),
        },
    })
}

/// Default canonical length for [`canonical_scenarios`], in km.
pub const CANONICAL_LENGTH_KM: f64 = 50.0;
pub const CANONICAL_DARK_COUNT: f64 = 1e-5;
pub const CANONICAL_E_X_SQ: f64 = 0.01;
pub const CANONICAL_MEAN_PHOTON_NUMBER: f64 = 0.5;

/// Three protocols by two sources over 50 km of 0.2 dB/km fiber.
///
/// `C = 1e-5` keeps the dark-count category populated at 10^7 pulses.
pub fn canonical_scenarios() -> Vec<Scenario> {
    let link = LinkModel {
        attenuation_db_per_km: 0.2,
        length_km: CANONICAL_LENGTH_KM,
    };
    let sources = [
        SourceModel::SinglePhoton,
        SourceModel::Poissonian {
            mean_photon_number: CANONICAL_MEAN_PHOTON_NUMBER,
        },
    ];
    Protocol::ALL
        .iter()
        .flat_map(|&p| {
            sources.iter().map(move |&source| {
                Scenario::new(p, source, link, CANONICAL_DARK_COUNT, CANONICAL_E_X_SQ)
                    .expect("canonical scenario is valid")
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::single_photon_breakdown;

    fn scn(protocol: Protocol, source: SourceModel, length: f64, c: f64, e: f64) -> Scenario {
        Scenario::new(protocol, source, LinkModel::new(0.2, length).unwrap(), c, e).unwrap()
    }

    #[test]
    fn ideal_channel_is_all_single_qubit() {
        let s = scn(Protocol::Bb84, SourceModel::SinglePhoton, 0.0, 0.0, 0.0);
        let stats = run_simulation(&s, EveModel::None, 10_000, 1).unwrap();
        assert_eq!(stats.count(Category::SingleQubit), 10_000);
        assert_eq!(stats.total_errors(), 0);
    }

    #[test]
    fn outcome_invariants() {
        let s = scn(Protocol::Pbc00, SourceModel::Poissonian { mean_photon_number: 0.8 }, 30.0, 0.05, 0.05);
        let sampler = PulseSampler::new(&s, EveModel::None).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..200_000 {
            let o = sampler.sample(&mut rng);
            assert!(o.arrived_photons <= o.emitted_photons);
            match o.category {
                Category::SingleQubit => assert!(o.emitted_photons == 1 && o.arrived_photons >= 1),
                Category::MultiQubit => assert!(o.emitted_photons >= 2 && o.arrived_photons >= 1),
                Category::DarkCount => assert!(o.arrived_photons == 0 && o.detector_fired.count_ones() == 1),
                Category::EmptyQubit => panic!("honest channel produced an injected qubit"),
                Category::NotConclusive => assert!(!o.bit_error),
            }
        }
    }

    #[test]
    fn detector_firing_marginals() {
        let s = scn(Protocol::Pbc00, SourceModel::SinglePhoton, 1000.0, 0.2, 0.0);
        let sampler = PulseSampler::new(&s, EveModel::None).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let n = 400_000;
        let mut per = [0u32; 3];
        let mut doubles = 0;
        for _ in 0..n {
            let m = sampler.fire_detectors(&mut rng);
            for (i, p) in per.iter_mut().enumerate() {
                *p += (m >> i) as u32 & 1;
            }
            doubles += (m.count_ones() >= 2) as u32;
        }
        let se = (0.2f64 * 0.8 / n as f64).sqrt();
        for p in per {
            assert!((p as f64 / n as f64 - 0.2).abs() < 4.0 * se, "{per:?}");
        }
        // P(>= 2 of 3) = 3 C^2 (1 - C) + C^3 = 0.104
        let pd = doubles as f64 / n as f64;
        assert!((pd - 0.104).abs() < 4.0 * (0.104f64 * 0.896 / n as f64).sqrt());
    }

    #[test]
    fn deterministic_and_shard_stable() {
        let s = scn(Protocol::SixState, SourceModel::Poissonian { mean_photon_number: 0.5 }, 20.0, 1e-3, 0.02);
        let a = run_simulation(&s, EveModel::None, 200_000, 42).unwrap();
        let b = run_simulation(&s, EveModel::None, 200_000, 42).unwrap();
        assert_eq!(a, b);
        let c = run_simulation(&s, EveModel::None, 200_000, 43).unwrap();
        assert_ne!(a, c);

        // Shard-by-shard sequential replay reproduces the merged result.
        let sampler = PulseSampler::new(&s, EveModel::None).unwrap();
        let mut seq = EmpiricalStats::default();
        let mut done = 0;
        let mut shard = 0;
        while done < 200_000 {
            let len = SHARD_PULSES.min(200_000 - done);
            seq.merge(&run_shard(&sampler, 42, shard, len));
            done += len;
            shard += 1;
        }
        assert_eq!(seq, a);
    }

    #[test]
    fn no_injected_qubits_without_eve() {
        for s in canonical_scenarios() {
            let stats = run_simulation(&s, EveModel::None, 100_000, 5).unwrap();
            assert_eq!(stats.count(Category::EmptyQubit), 0);
            assert_eq!(stats.conclusive.iter().sum::<u64>(), stats.total_conclusive());
            let categorized: u64 = std::iter::once(Category::NotConclusive)
                .chain(Category::CONCLUSIVE)
                .map(|c| stats.count(c))
                .sum();
            assert_eq!(categorized, stats.pulses);
        }
    }

    #[test]
    fn rejects_zero_pulses() {
        let s = scn(Protocol::Bb84, SourceModel::SinglePhoton, 0.0, 0.0, 0.0);
        assert!(run_simulation(&s, EveModel::None, 0, 1).is_err());
    }

    #[test]
    fn empty_run_is_flagged() {
        let stats = EmpiricalStats {
            pulses: 10,
            ..Default::default()
        };
        let emp = empirical_breakdown(&stats);
        assert_eq!(emp.p_c.value, 0.0);
        assert!(emp.insufficient_statistics);
        assert!(emp.to_rate_breakdown().is_err());
    }

    #[test]
    fn single_photon_matches_analytics() {
        let s = scn(Protocol::Bb84, SourceModel::SinglePhoton, 30.0, 1e-4, 0.02);
        let stats = run_simulation(&s, EveModel::None, 1_000_000, 11).unwrap();
        let analytic = single_photon_breakdown(&s).unwrap();
        for check in compare_with_analytic(&stats, &analytic) {
            assert!(check.within(4.0), "{check:?}");
        }
        assert!(!empirical_breakdown(&stats).insufficient_statistics);
    }

    #[test]
    fn tally_csv_layout() {
        let s = scn(Protocol::Bb84, SourceModel::SinglePhoton, 10.0, 1e-3, 0.05);
        let stats = run_simulation(&s, EveModel::None, 10_000, 2).unwrap();
        let mut buf = Vec::new();
        stats.write_tally_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "category,count,bit_errors");
        assert_eq!(lines.len(), 6);
        assert!(lines[1].starts_with("not_conclusive,"));
        assert!(lines[2].starts_with(&format!("single_qubit,{},", stats.count(Category::SingleQubit))));
    }

    #[test]
    fn decoy_single_mu_matches_plain_run() {
        let s = scn(Protocol::Bb84, SourceModel::Poissonian { mean_photon_number: 0.5 }, 20.0, 1e-5, 0.01);
        let runs = simulate_decoy_run(&s, &[0.5], 100_000, 8).unwrap();
        assert_eq!(runs[0].stats, run_simulation(&s, EveModel::None, 100_000, 8).unwrap());
        assert!(simulate_decoy_run(&s, &[], 10, 8).is_err());
        assert!(simulate_decoy_run(&s, &[0.0], 10, 8).is_err());
    }

    #[test]
    fn decoy_recovery_without_dark_counts() {
        let s = scn(Protocol::Bb84, SourceModel::Poissonian { mean_photon_number: 0.5 }, 20.0, 0.0, 0.01);
        let runs = simulate_decoy_run(&s, &[0.1, 0.5], 500_000, 4).unwrap();
        let rec = recover_single_photon(&s, &runs).unwrap();
        let cat1 = runs[1].stats.count(Category::SingleQubit) as f64 / runs[1].stats.pulses as f64;
        assert!((rec.p_sq.value - cat1).abs() <= 3.0 * rec.p_sq.std_error);
        let missing = scn(Protocol::Bb84, SourceModel::Poissonian { mean_photon_number: 0.3 }, 20.0, 0.0, 0.01);
        assert!(recover_single_photon(&missing, &runs).is_err());
    }
}
