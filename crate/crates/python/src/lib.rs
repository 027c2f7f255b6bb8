//! Python bindings: scenarios, checks, expected suprema and partition trees.

use idsup_core::lab::{self, CheckResult};
use idsup_core::majorizing::MeasureOnT;
use idsup_core::metric::{compute_d2, compute_dinf, PhiFamily};
use idsup_core::partition::{beta_functional, build_partition_tree};
use idsup_core::poisson_mc::{estimate_esup, EsupMode};
use idsup_core::scenario::{random_scenario, ScenarioConfig};
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

fn value_err(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

/// A Lévy measure on finitely many atoms together with a finite index set.
#[pyclass(name = "Scenario", module = "idsup", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyScenario {
    inner: ScenarioConfig,
}

#[pymethods]
impl PyScenario {
    #[staticmethod]
    fn from_json(text: &str) -> PyResult<PyScenario> {
        ScenarioConfig::from_json(text).map(|inner| PyScenario { inner }).map_err(value_err)
    }

    #[staticmethod]
    #[pyo3(signature = (seed, atoms=6, points=4, scale=1.0))]
    fn random(seed: u64, atoms: usize, points: usize, scale: f64) -> PyResult<PyScenario> {
        random_scenario(seed, atoms, points, scale).map(|inner| PyScenario { inner }).map_err(value_err)
    }

    fn to_json(&self) -> String {
        self.inner.to_json()
    }

    fn with_seed(&self, seed: u64) -> PyScenario {
        PyScenario { inner: self.inner.clone().with_seed(seed) }
    }

    fn with_replications(&self, replications: usize) -> PyResult<PyScenario> {
        if replications < 2 {
            return Err(PyValueError::new_err("replications must be at least 2"));
        }
        Ok(PyScenario { inner: self.inner.clone().with_replications(replications) })
    }

    #[getter]
    fn n_points(&self) -> usize {
        self.inner.n_points()
    }

    #[getter]
    fn n_atoms(&self) -> usize {
        self.inner.n_atoms()
    }

    #[getter]
    fn seed(&self) -> u64 {
        self.inner.rng_seed
    }

    #[getter]
    fn replications(&self) -> usize {
        self.inner.replications
    }

    /// Square matrix of `d₂` distances.
    fn d2(&self) -> Vec<Vec<f64>> {
        matrix(&compute_d2(&self.inner))
    }

    /// Square matrix of `d∞` distances.
    fn dinf(&self) -> Vec<Vec<f64>> {
        matrix(&compute_dinf(&self.inner))
    }

    fn __repr__(&self) -> String {
        format!(
            "Scenario(points={}, atoms={}, seed={}, replications={})",
            self.inner.n_points(),
            self.inner.n_atoms(),
            self.inner.rng_seed,
            self.inner.replications
        )
    }
}

fn matrix(d: &idsup_core::metric::DistanceMatrix) -> Vec<Vec<f64>> {
    (0..d.len()).map(|s| (0..d.len()).map(|t| d.get(s, t)).collect()).collect()
}

fn result_dict<'py>(py: Python<'py>, r: &CheckResult) -> PyResult<Bound<'py, PyDict>> {
    let d = PyDict::new(py);
    d.set_item("name", &r.name)?;
    d.set_item("lhs", r.lhs)?;
    d.set_item("rhs", r.rhs)?;
    d.set_item("slack_or_constant", r.slack_or_constant)?;
    d.set_item("passed", r.passed)?;
    d.set_item("std_errors_used", r.std_errors_used)?;
    d.set_item("replications", r.replications)?;
    d.set_item("note", &r.note)?;
    Ok(d)
}

/// Names accepted by `run_check`.
#[pyfunction]
fn check_names() -> Vec<&'static str> {
    lab::CHECK_NAMES.to_vec()
}

/// Runs one registry check; returns a list of result dicts.
#[pyfunction]
fn run_check<'py>(py: Python<'py>, name: &str, scenario: &PyScenario) -> PyResult<Vec<Bound<'py, PyDict>>> {
    if !lab::is_known_check(name) {
        return Err(PyValueError::new_err(format!("unknown check {name:?}")));
    }
    let sc = scenario.inner.clone();
    let results = py
        .detach(move || lab::run_named(name, &sc))
        .map_err(|e| PyRuntimeError::new_err(e.to_string()))?;
    results.iter().map(|r| result_dict(py, r)).collect()
}

/// Monte Carlo `(mean, std_error)` of `E sup_t X_t`; `mode` is
/// `signed`, `abs_process` or `abs_of_sup`.
#[pyfunction]
#[pyo3(signature = (scenario, mode="signed"))]
fn expected_sup(py: Python<'_>, scenario: &PyScenario, mode: &str) -> PyResult<(f64, f64)> {
    let mode = match mode {
        "signed" => EsupMode::Signed,
        "abs_process" => EsupMode::AbsoluteProcess,
        "abs_of_sup" => EsupMode::AbsOfSup,
        other => return Err(PyValueError::new_err(format!("unknown mode {other:?}"))),
    };
    let sc = scenario.inner.clone();
    let est = py.detach(move || estimate_esup(&sc, mode)).map_err(value_err)?;
    Ok((est.mean, est.std_error))
}

/// Builds the labelled partition tree; returns `(text, beta, constant)`.
/// `mu` defaults to the uniform measure.
#[pyfunction]
#[pyo3(signature = (scenario, mu=None, levels=None))]
fn partition_tree(scenario: &PyScenario, mu: Option<Vec<f64>>, levels: Option<usize>) -> PyResult<(String, f64, f64)> {
    let n = scenario.inner.n_points();
    let mu = match mu {
        None => MeasureOnT::uniform(n),
        Some(w) => MeasureOnT::for_points(w, n).map_err(value_err)?,
    };
    let phi = PhiFamily::new(&scenario.inner);
    let built = build_partition_tree(&phi, &mu, levels).map_err(|e| PyRuntimeError::new_err(e.to_string()))?;
    let beta = beta_functional(&phi, &built.tree).map_err(|e| PyRuntimeError::new_err(e.to_string()))?;
    Ok((built.tree.to_text(), beta, built.measured_constant))
}

#[pymodule]
fn idsup(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyScenario>()?;
    m.add_function(wrap_pyfunction!(check_names, m)?)?;
    m.add_function(wrap_pyfunction!(run_check, m)?)?;
    m.add_function(wrap_pyfunction!(expected_sup, m)?)?;
    m.add_function(wrap_pyfunction!(partition_tree, m)?)?;
    Ok(())
}
