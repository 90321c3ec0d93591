//! Python module `qkdrate`.
//!
//! Protocols are passed as the strings `"bb84"`, `"six-state"` and `"pbc00"`.
//! Library errors surface as `ValueError`.

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use pyo3::types::PyDict;
use qkdrate_core as core;
use qkdrate_core::{LinkModel, MaxDistance, Protocol, QkdError, RateFormula, SourceModel};

fn to_py(e: QkdError) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn protocol(name: &str) -> PyResult<Protocol> {
    name.parse().map_err(to_py)
}

#[pyfunction]
fn binary_entropy(p: f64) -> PyResult<f64> {
    core::binary_entropy(p).map_err(to_py)
}

/// Worst-case H(phase | bit) over the protocol's admissible Y error rates.
#[pyfunction]
fn worst_case_entropy(protocol_name: &str, e_x: f64) -> PyResult<f64> {
    core::worst_case_conditional_phase_entropy(&protocol(protocol_name)?.spec(), e_x).map_err(to_py)
}

/// Largest tolerable bit error rate for a given single-photon error rate, or
/// `None` if no error rate yields a key.
#[pyfunction]
fn threshold(protocol_name: &str, e_x_sq: f64) -> PyResult<Option<f64>> {
    core::threshold_bit_error(&protocol(protocol_name)?.spec(), e_x_sq).map_err(to_py)
}

#[pyfunction]
fn zero_dark_threshold(protocol_name: &str) -> PyResult<f64> {
    core::zero_dark_threshold(&protocol(protocol_name)?.spec()).map_err(to_py)
}

#[pyfunction]
fn shor_preskill_rate(protocol_name: &str, p_c: f64, e_x: f64) -> PyResult<f64> {
    core::rate_shor_preskill(p_c, e_x, &protocol(protocol_name)?.spec()).map_err(to_py)
}

#[pyfunction]
fn nonuniform_dark_bound(q: f64) -> PyResult<f64> {
    core::nonuniform_dark_bound(q).map_err(to_py)
}

/// Returns `(p_sq, e_x_sq)`.
#[pyfunction]
fn decoy_invert(p_c_omega1: f64, e_x_1: f64, mu_bar: f64, eta: f64, dark_count_prob: f64) -> PyResult<(f64, f64)> {
    let est = core::decoy_invert(p_c_omega1, e_x_1, mu_bar, eta, dark_count_prob).map_err(to_py)?;
    Ok((est.p_sq, est.e_x_sq))
}

/// Per-pulse conclusive rates by origin, with error rates.
#[pyclass(frozen, get_all, skip_from_py_object, name = "RateBreakdown")]
#[derive(Clone)]
struct PyRateBreakdown {
    p_emp: f64,
    p_sq: f64,
    p_mq: f64,
    p_dk: f64,
    omega0: f64,
    omega1: f64,
    e_x: f64,
    e_x_sq: f64,
    e_x_single: f64,
}

impl From<core::RateBreakdown> for PyRateBreakdown {
    fn from(b: core::RateBreakdown) -> Self {
        Self {
            p_emp: b.p_emp,
            p_sq: b.p_sq,
            p_mq: b.p_mq,
            p_dk: b.p_dk,
            omega0: b.omega0,
            omega1: b.omega1,
            e_x: b.e_x,
            e_x_sq: b.e_x_sq,
            e_x_single: b.e_x_single,
        }
    }
}

#[pymethods]
impl PyRateBreakdown {
    #[getter]
    fn p_c(&self) -> f64 {
        self.p_sq + self.p_mq + self.p_emp + self.p_dk
    }

    fn __repr__(&self) -> String {
        format!(
            "RateBreakdown(p_sq={}, p_mq={}, p_emp={}, p_dk={}, omega0={}, omega1={}, e_x={}, e_x_sq={})",
            self.p_sq, self.p_mq, self.p_emp, self.p_dk, self.omega0, self.omega1, self.e_x, self.e_x_sq
        )
    }
}

/// Protocol, source, fiber link and detectors.
///
/// A `mean_photon_number` selects a Poissonian source; leaving it out gives a
/// single-photon source.
#[pyclass(frozen, name = "Scenario")]
struct PyScenario {
    inner: core::Scenario,
}

fn formula(name: &str) -> PyResult<RateFormula> {
    match name {
        "gllp" => Ok(RateFormula::Gllp),
        "improved" => Ok(RateFormula::Improved),
        other => Err(PyValueError::new_err(format!(
            "unknown rate formula {other:?} (expected gllp or improved)"
        ))),
    }
}

#[pymethods]
impl PyScenario {
    #[new]
    #[pyo3(signature = (protocol="bb84", length_km=50.0, attenuation_db_per_km=0.2, dark_count_prob=1e-6, e_x_sq=0.01, mean_photon_number=None))]
    fn new(
        protocol: &str,
        length_km: f64,
        attenuation_db_per_km: f64,
        dark_count_prob: f64,
        e_x_sq: f64,
        mean_photon_number: Option<f64>,
    ) -> PyResult<Self> {
        let source = match mean_photon_number {
            Some(mu) => SourceModel::Poissonian { mean_photon_number: mu },
            None => SourceModel::SinglePhoton,
        };
        let link = LinkModel::new(attenuation_db_per_km, length_km).map_err(to_py)?;
        let inner = core::Scenario::new(self::protocol(protocol)?, source, link, dark_count_prob, e_x_sq).map_err(to_py)?;
        Ok(Self { inner })
    }

    #[getter]
    fn protocol(&self) -> &'static str {
        self.inner.protocol.name()
    }

    #[getter]
    fn length_km(&self) -> f64 {
        self.inner.link.length_km
    }

    fn with_length(&self, length_km: f64) -> PyResult<Self> {
        let inner = self.inner.with_length(length_km);
        inner.validate().map_err(to_py)?;
        Ok(Self { inner })
    }

    fn transmittance(&self) -> f64 {
        self.inner.transmittance()
    }

    fn breakdown(&self) -> PyResult<PyRateBreakdown> {
        self.inner.breakdown().map(Into::into).map_err(to_py)
    }

    fn rate_gllp(&self) -> PyResult<f64> {
        let b = self.inner.breakdown().map_err(to_py)?;
        core::rate_gllp(&b, &self.inner.protocol).map_err(to_py)
    }

    fn rate_bob(&self) -> PyResult<f64> {
        let b = self.inner.breakdown().map_err(to_py)?;
        core::rate_bob(&b, &self.inner.protocol).map_err(to_py)
    }

    fn rate_alice(&self) -> PyResult<f64> {
        let b = self.inner.breakdown().map_err(to_py)?;
        core::rate_alice(&b, &self.inner.protocol).map_err(to_py)
    }

    fn rate_improved(&self) -> PyResult<f64> {
        let b = self.inner.breakdown().map_err(to_py)?;
        core::rate_improved(&b, &self.inner.protocol).map_err(to_py)
    }

    /// Longest distance with a positive rate; `inf` if the rate is still
    /// positive at `cap_km`.
    #[pyo3(signature = (formula="improved", cap_km=1e4))]
    fn max_distance(&self, formula: &str, cap_km: f64) -> PyResult<f64> {
        match core::max_distance(&self.inner, self::formula(formula)?, cap_km).map_err(to_py)? {
            MaxDistance::Km(km) => Ok(km),
            MaxDistance::Unbounded => Ok(f64::INFINITY),
        }
    }

    /// Rows of `(length_km, eta, breakdown, rate_gllp, rate_improved)`, rates
    /// clamped at zero.
    #[pyo3(signature = (length_min_km, length_max_km, step_km=1.0))]
    fn sweep(
        &self,
        length_min_km: f64,
        length_max_km: f64,
        step_km: f64,
    ) -> PyResult<Vec<(f64, f64, PyRateBreakdown, f64, f64)>> {
        let rows = core::distance_sweep(&self.inner, length_min_km, length_max_km, step_km).map_err(to_py)?;
        Ok(rows
            .into_iter()
            .map(|r| (r.length_km, r.eta, r.breakdown.into(), r.rate_gllp, r.rate_improved))
            .collect())
    }

    /// Monte Carlo run. Returns a dict with the raw tallies under `"counts"`
    /// and `"bit_errors"` (keyed by category) and the z-scores of the
    /// empirical breakdown against this scenario's analytic one under `"z"`.
    #[pyo3(signature = (n_pulses, seed=0, eve="none"))]
    fn simulate<'py>(&self, py: Python<'py>, n_pulses: u64, seed: u64, eve: &str) -> PyResult<Bound<'py, PyDict>> {
        let eve: core::EveModel = eve.parse().map_err(to_py)?;
        let inner = self.inner;
        let stats = py
            .detach(move || core::run_simulation(&inner, eve, n_pulses, seed))
            .map_err(to_py)?;
        let analytic = self.inner.breakdown().map_err(to_py)?;
        let counts = PyDict::new(py);
        let errors = PyDict::new(py);
        let categories = std::iter::once(core::simulator::Category::NotConclusive)
            .chain(core::simulator::Category::CONCLUSIVE);
        for cat in categories {
            counts.set_item(cat.as_str(), stats.count(cat))?;
            errors.set_item(cat.as_str(), stats.errors(cat))?;
        }
        let z = PyDict::new(py);
        for check in core::simulator::compare_with_analytic(&stats, &analytic) {
            z.set_item(check.field, check.z)?;
        }
        let out = PyDict::new(py);
        out.set_item("pulses", stats.pulses)?;
        out.set_item("counts", counts)?;
        out.set_item("bit_errors", errors)?;
        out.set_item("z", z)?;
        out.set_item(
            "insufficient_statistics",
            core::empirical_breakdown(&stats).insufficient_statistics,
        )?;
        Ok(out)
    }

    fn __repr__(&self) -> String {
        format!("{:?}", self.inner)
    }
}

#[pymodule]
fn qkdrate(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    m.add(
        "PROTOCOLS",
        Protocol::ALL.iter().map(|p| p.as_str()).collect::<Vec<_>>(),
    )?;
    m.add_class::<PyScenario>()?;
    m.add_class::<PyRateBreakdown>()?;
    m.add_function(wrap_pyfunction!(binary_entropy, m)?)?;
    m.add_function(wrap_pyfunction!(worst_case_entropy, m)?)?;
    m.add_function(wrap_pyfunction!(threshold, m)?)?;
    m.add_function(wrap_pyfunction!(zero_dark_threshold, m)?)?;
    m.add_function(wrap_pyfunction!(shor_preskill_rate, m)?)?;
    m.add_function(wrap_pyfunction!(nonuniform_dark_bound, m)?)?;
    m.add_function(wrap_pyfunction!(decoy_invert, m)?)?;
    Ok(())
}
