//! Run configuration: a sectioned key-value file (TOML syntax) plus
//! command-line overrides.
//!
//! ```toml
//! [protocol]
//! name = "bb84"                 # bb84 | six-state | pbc00
//!
//! [source]
//! kind = "single-photon"        # single-photon | poissonian
//! mean_photon_number = 0.5
//! decoy_mu = [0.5, 0.1]
//!
//! [link]
//! attenuation_db_per_km = 0.2
//! length_km = 50.0
//! length_min_km = 0.0
//! length_max_km = 400.0
//! step_km = 1.0
//! e_x_sq = 0.01
//!
//! [detector]
//! dark_count_prob = 1e-6
//!
//! [simulation]
//! n_pulses = 1000000
//! seed = 42
//! eve = "none"                  # none | intercept-resend
//! # simulated_dark_count_prob = 2e-6
//! ```

use std::path::Path;

use qkdrate_core::simulator::EveModel;
use qkdrate_core::{LinkModel, Protocol, Scenario, SourceModel};
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub protocol: ProtocolSection,
    pub source: SourceSection,
    pub link: LinkSection,
    pub detector: DetectorSection,
    pub simulation: SimulationSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProtocolSection {
    pub name: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SourceSection {
    pub kind: String,
    pub mean_photon_number: f64,
    pub decoy_mu: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LinkSection {
    pub attenuation_db_per_km: f64,
    pub length_km: f64,
    pub length_min_km: f64,
    pub length_max_km: f64,
    pub step_km: f64,
    pub e_x_sq: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DetectorSection {
    pub dark_count_prob: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulationSection {
    pub n_pulses: u64,
    pub seed: u64,
    pub eve: String,
    /// Dark count probability used by the simulator only; defaults to the
    /// detector value.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub simulated_dark_count_prob: Option<f64>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            protocol: ProtocolSection::default(),
            source: SourceSection::default(),
            link: LinkSection::default(),
            detector: DetectorSection::default(),
            simulation: SimulationSection::default(),
        }
    }
}

impl Default for ProtocolSection {
    fn default() -> Self {
        Self { name: "bb84".into() }
    }
}

impl Default for SourceSection {
    fn default() -> Self {
        Self {
            kind: "single-photon".into(),
            mean_photon_number: 0.5,
            decoy_mu: vec![0.5, 0.1],
        }
    }
}

impl Default for LinkSection {
    fn default() -> Self {
        Self {
            attenuation_db_per_km: 0.2,
            length_km: 50.0,
            length_min_km: 0.0,
            length_max_km: 400.0,
            step_km: 1.0,
            e_x_sq: 0.01,
        }
    }
}

impl Default for DetectorSection {
    fn default() -> Self {
        Self { dark_count_prob: 1e-6 }
    }
}

impl Default for SimulationSection {
    fn default() -> Self {
        Self {
            n_pulses: 1_000_000,
            seed: 42,
            eve: "none".into(),
            simulated_dark_count_prob: None,
        }
    }
}

fn invalid(field: &str, msg: impl std::fmt::Display) -> CliError {
    CliError::Invalid(format!("{field}: {msg}"))
}

fn probability(field: &str, v: f64, upper_open: bool) -> Result<f64, CliError> {
    let ok = if upper_open { (0.0..1.0).contains(&v) } else { (0.0..=1.0).contains(&v) };
    if ok {
        Ok(v)
    } else {
        Err(invalid(field, format!("{v} is not in [0, 1{}", if upper_open { ")" } else { "]" })))
    }
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::Invalid(format!("config: {e}")))
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Invalid(format!("config {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn protocol(&self) -> Result<Protocol, CliError> {
        self.protocol.name.parse().map_err(|e| invalid("protocol.name", e))
    }

    pub fn source(&self) -> Result<SourceModel, CliError> {
        match self.source.kind.as_str() {
            "single-photon" => Ok(SourceModel::SinglePhoton),
            "poissonian" => Ok(SourceModel::Poissonian {
                mean_photon_number: self.mean_photon_number()?,
            }),
            other => Err(invalid(
                "source.kind",
                format!("unknown source {other:?} (expected single-photon or poissonian)"),
            )),
        }
    }

    pub fn mean_photon_number(&self) -> Result<f64, CliError> {
        let mu = self.source.mean_photon_number;
        if mu.is_finite() && mu > 0.0 {
            Ok(mu)
        } else {
            Err(invalid("source.mean_photon_number", format!("{mu} must be > 0")))
        }
    }

    pub fn decoy_mu(&self) -> Result<Vec<f64>, CliError> {
        if self.source.decoy_mu.is_empty() {
            return Err(invalid("source.decoy_mu", "at least one value is required"));
        }
        if let Some(bad) = self.source.decoy_mu.iter().find(|m| !(m.is_finite() && **m > 0.0)) {
            return Err(invalid("source.decoy_mu", format!("{bad} must be > 0")));
        }
        Ok(self.source.decoy_mu.clone())
    }

    pub fn eve(&self) -> Result<EveModel, CliError> {
        self.simulation.eve.parse().map_err(|e| invalid("simulation.eve", e))
    }

    fn check_length(field: &str, v: f64) -> Result<f64, CliError> {
        if v.is_finite() && v >= 0.0 {
            Ok(v)
        } else {
            Err(invalid(field, format!("{v} must be >= 0")))
        }
    }

    /// Scenario at `link.length_km` with the detector's dark count probability.
    pub fn scenario(&self) -> Result<Scenario, CliError> {
        self.scenario_with_dark_count(self.detector.dark_count_prob, "detector.dark_count_prob")
    }

    /// Scenario with the source replaced, keeping every other setting.
    pub fn scenario_for_source(&self, source: SourceModel) -> Result<Scenario, CliError> {
        let mut cfg = self.clone();
        match source {
            SourceModel::SinglePhoton => cfg.source.kind = "single-photon".into(),
            SourceModel::Poissonian { mean_photon_number } => {
                cfg.source.kind = "poissonian".into();
                cfg.source.mean_photon_number = mean_photon_number;
            }
        }
        cfg.scenario()
    }

    /// Scenario the simulator runs, honoring `simulation.simulated_dark_count_prob`.
    pub fn simulated_scenario(&self) -> Result<Scenario, CliError> {
        match self.simulation.simulated_dark_count_prob {
            Some(c) => self.scenario_with_dark_count(c, "simulation.simulated_dark_count_prob"),
            None => self.scenario(),
        }
    }

    fn scenario_with_dark_count(&self, c: f64, c_field: &str) -> Result<Scenario, CliError> {
        let protocol = self.protocol()?;
        let source = self.source()?;
        let att = self.link.attenuation_db_per_km;
        if !(att.is_finite() && att >= 0.0) {
            return Err(invalid("link.attenuation_db_per_km", format!("{att} must be >= 0")));
        }
        let length = Self::check_length("link.length_km", self.link.length_km)?;
        let c = probability(c_field, c, true)?;
        let e = self.link.e_x_sq;
        if !(0.0..=0.5).contains(&e) {
            return Err(invalid("link.e_x_sq", format!("{e} is not in [0, 0.5]")));
        }
        let link = LinkModel {
            attenuation_db_per_km: att,
            length_km: length,
        };
        Scenario::new(protocol, source, link, c, e).map_err(|err| CliError::Invalid(err.to_string()))
    }

    /// `(min, max, step)` of the sweep grid.
    pub fn length_range(&self) -> Result<(f64, f64, f64), CliError> {
        let lo = Self::check_length("link.length_min_km", self.link.length_min_km)?;
        let hi = Self::check_length("link.length_max_km", self.link.length_max_km)?;
        if hi < lo {
            return Err(invalid("link.length_max_km", format!("{hi} is below length_min_km = {lo}")));
        }
        let step = self.link.step_km;
        if !(step.is_finite() && step > 0.0) {
            return Err(invalid("link.step_km", format!("{step} must be > 0")));
        }
        Ok((lo, hi, step))
    }

    pub fn n_pulses(&self) -> Result<u64, CliError> {
        match self.simulation.n_pulses {
            0 => Err(invalid("simulation.n_pulses", "must be >= 1")),
            n => Ok(n),
        }
    }
}
