//! Key generation rates for BB84, the six-state protocol and PBC00 with a
//! separate accounting for detector dark counts.
//!
//! Dark-count results are random bits that Eve cannot influence, so they can be
//! credited to the key instead of being charged as eavesdropper-controlled
//! errors. The crate evaluates both the conventional and the dark-count-aware
//! bounds for single-photon and Poissonian (decoy-state) sources, solves for
//! error-rate thresholds and achievable distances, and ships a pulse-level
//! Monte Carlo simulator that cross-checks the analytic rate decomposition.

pub mod entropy;
pub mod error;
pub mod keyrate;
pub mod numeric;
pub mod protocols;
pub mod scenario;
pub mod simulator;

pub use entropy::{
    binary_entropy, conditional_phase_entropy, distribution_from_rates, joint_bit_phase_entropy,
    worst_case_conditional_phase_entropy, PauliDistribution,
};
pub use error::{QkdError, Result};
pub use keyrate::{
    max_distance, max_distance_with, nonuniform_dark_bound, rate_alice, rate_bob, rate_gllp, rate_improved, rate_shor_preskill,
    threshold_bit_error, zero_dark_threshold, MaxDistance, RateBreakdown, RateFormula,
};
pub use protocols::{protocol_catalog, Protocol, ProtocolSpec};
pub use scenario::{
    decoy_estimated_breakdown, decoy_invert, distance_sweep, poisson_breakdown, single_photon_breakdown, transmittance, worst_case_no_decoy,
    DetectorModel, LinkModel, Scenario, SourceModel, SweepRow,
};
pub use simulator::{empirical_breakdown, run_simulation, simulate_decoy_run, EmpiricalStats, EveModel};
