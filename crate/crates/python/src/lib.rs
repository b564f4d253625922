//! Python bindings. Reports are returned as plain dicts and lists.

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use serde::Serialize;

use qls_poisson::config::InstanceConfig;
use qls_poisson::encoding::EncodedInstance;
use qls_poisson::experiments::{self, Instance as CoreInstance};
use qls_poisson::linalg::LinearOperator;
use qls_poisson::readout;
use qls_poisson::solver::{self, Preconditioner};
use qls_poisson::Error;

fn py_err(e: Error) -> PyErr {
    match e {
        Error::Config(_) | Error::Domain(_) | Error::Precondition(_) | Error::Parse { .. } => {
            PyValueError::new_err(e.to_string())
        }
        _ => PyRuntimeError::new_err(e.to_string()),
    }
}

fn to_py<T: Serialize>(py: Python<'_>, value: &T) -> PyResult<Py<PyAny>> {
    let text = serde_json::to_string(value).map_err(|e| PyRuntimeError::new_err(e.to_string()))?;
    Ok(py.import("json")?.call_method1("loads", (text,))?.unbind())
}

/// Accepts a dict or a JSON string with the instance fields.
fn instance_config(py: Python<'_>, config: &Bound<'_, PyAny>) -> PyResult<InstanceConfig> {
    let text: String = match config.extract::<String>() {
        Ok(s) => s,
        Err(_) => py.import("json")?.call_method1("dumps", (config,))?.extract()?,
    };
    let cfg: InstanceConfig =
        serde_json::from_str(&text).map_err(|e| PyValueError::new_err(format!("configuration error: {e}")))?;
    cfg.validate().map_err(py_err)?;
    Ok(cfg)
}

fn preconditioner(name: &str) -> PyResult<Preconditioner> {
    match name {
        "none" => Ok(Preconditioner::None),
        "jacobi" => Ok(Preconditioner::Jacobi),
        "inverse_laplacian" => Ok(Preconditioner::InverseLaplacian),
        _ => Err(PyValueError::new_err(format!(
            "unknown preconditioner {name:?}; expected none, jacobi or inverse_laplacian"
        ))),
    }
}

/// One assembled instance: field, `G`, `G'` and the value census.
#[pyclass(name = "Instance", module = "qls_poisson_py")]
struct Instance {
    inner: CoreInstance,
}

#[pymethods]
impl Instance {
    #[new]
    fn new(py: Python<'_>, config: &Bound<'_, PyAny>) -> PyResult<Self> {
        let cfg = instance_config(py, config)?;
        Ok(Instance {
            inner: CoreInstance::build(&cfg).map_err(py_err)?,
        })
    }

    #[getter]
    fn size(&self) -> usize {
        self.inner.g.size()
    }

    #[getter]
    fn alpha(&self) -> f64 {
        self.inner.scaled.alpha
    }

    fn summary(&self, py: Python<'_>) -> PyResult<Py<PyAny>> {
        to_py(py, &self.inner.summary())
    }

    fn census(&self, py: Python<'_>) -> PyResult<Py<PyAny>> {
        to_py(py, &self.inner.census)
    }

    /// Cell permeabilities in linear-index order.
    fn field(&self) -> Vec<f64> {
        self.inner.field.values().to_vec()
    }

    /// Lower-triangle `(row, col, value)` triplets of `G`, or of `G'` when `scaled`.
    #[pyo3(signature = (scaled = false))]
    fn triplets(&self, scaled: bool) -> Vec<(usize, usize, f64)> {
        let op = if scaled { &self.inner.scaled.op } else { &self.inner.g };
        op.lower_triplets()
    }

    #[pyo3(signature = (scaled = false))]
    fn dense(&self, scaled: bool) -> Vec<Vec<f64>> {
        let op = if scaled { &self.inner.scaled.op } else { &self.inner.g };
        let m = op.to_dense();
        m.row_iter().map(|r| r.iter().copied().collect()).collect()
    }

    fn apply(&self, x: Vec<f64>) -> PyResult<Vec<f64>> {
        if x.len() != self.inner.g.size() {
            return Err(PyValueError::new_err(format!("expected {} entries, got {}", self.inner.g.size(), x.len())));
        }
        Ok(self.inner.g.apply_vec(&x))
    }

    /// Solves `G x = b` by preconditioned CG.
    #[pyo3(signature = (b, tol = 1e-10, preconditioner = "jacobi", max_iter = None))]
    fn solve(&self, b: Vec<f64>, tol: f64, preconditioner: &str, max_iter: Option<usize>) -> PyResult<Vec<f64>> {
        let n = self.inner.g.size();
        if b.len() != n {
            return Err(PyValueError::new_err(format!("expected {n} entries, got {}", b.len())));
        }
        let p = self::preconditioner(preconditioner)?;
        let r = solver::cg_solve(&self.inner.g, &b, tol, max_iter.unwrap_or(20 * n + 1000), p).map_err(py_err)?;
        Ok(r.x)
    }

    /// Builds the block-encoding circuit and verifies it densely.
    fn verify_encoding(&self, py: Python<'_>) -> PyResult<Py<PyAny>> {
        let e = self.encoded()?;
        to_py(py, &e.verify().map_err(py_err)?)
    }

    /// Gate list of the block-encoding circuit in the text format.
    fn circuit_text(&self) -> PyResult<String> {
        Ok(self.encoded()?.circuit.to_text())
    }

    fn gate_counts(&self) -> PyResult<std::collections::BTreeMap<String, usize>> {
        Ok(self.encoded()?.circuit.gate_counts())
    }

    fn __repr__(&self) -> String {
        let s = self.inner.summary();
        format!("Instance(N={}, ell={}, alpha={:.6e}, D={})", s.n, s.ell, s.alpha, s.d)
    }
}

impl Instance {
    fn encoded(&self) -> PyResult<EncodedInstance> {
        EncodedInstance::from_parts(self.inner.scaled.clone(), &self.inner.census, self.inner.field.grid()).map_err(py_err)
    }
}

#[pyfunction]
#[pyo3(signature = (config, ell_min = 1, ell_max = 5, tol = 1e-8))]
fn kappa_sweep(py: Python<'_>, config: &Bound<'_, PyAny>, ell_min: u32, ell_max: u32, tol: f64) -> PyResult<Py<PyAny>> {
    let cfg = instance_config(py, config)?;
    to_py(py, &experiments::kappa_sweep(&cfg, ell_min..=ell_max, tol).map_err(py_err)?)
}

#[pyfunction]
#[pyo3(signature = (config, ell_min = 1, ell_max = 4, tol = 1e-10))]
fn lambda_min_plateau(py: Python<'_>, config: &Bound<'_, PyAny>, ell_min: u32, ell_max: u32, tol: f64) -> PyResult<Py<PyAny>> {
    let cfg = instance_config(py, config)?;
    to_py(py, &experiments::lambda_min_plateau(&cfg, ell_min..=ell_max, tol).map_err(py_err)?)
}

#[pyfunction]
#[pyo3(signature = (config, ell_min = 1, ell_max = 5, draws = 20, sites = 20, seed = 0, cg_tol = 1e-10))]
#[allow(clippy::too_many_arguments)]
fn eps_sweep(
    py: Python<'_>,
    config: &Bound<'_, PyAny>,
    ell_min: u32,
    ell_max: u32,
    draws: usize,
    sites: usize,
    seed: u64,
    cg_tol: f64,
) -> PyResult<Py<PyAny>> {
    let cfg = instance_config(py, config)?;
    to_py(
        py,
        &experiments::eps_sweep(&cfg, ell_min..=ell_max, draws, sites, seed, cg_tol).map_err(py_err)?,
    )
}

#[pyfunction]
#[pyo3(signature = (config, pairs = 1000, dim_max = 64, seed = 0))]
fn precond_check(py: Python<'_>, config: &Bound<'_, PyAny>, pairs: usize, dim_max: usize, seed: u64) -> PyResult<Py<PyAny>> {
    let cfg = instance_config(py, config)?;
    to_py(py, &experiments::precond_check(&cfg, pairs, dim_max, seed).map_err(py_err)?)
}

#[pyfunction]
#[pyo3(signature = (config, refinements = 1, cell = None, shots = 1_000_000, seed = 0, cg_tol = 1e-10))]
fn readout_demo(
    py: Python<'_>,
    config: &Bound<'_, PyAny>,
    refinements: u32,
    cell: Option<[usize; 3]>,
    shots: u64,
    seed: u64,
    cg_tol: f64,
) -> PyResult<Py<PyAny>> {
    let cfg = instance_config(py, config)?;
    to_py(
        py,
        &experiments::readout_demo(&cfg, refinements, cell, shots, seed, cg_tol).map_err(py_err)?,
    )
}

#[pyfunction]
#[pyo3(signature = (n_max = 16, seed = 0))]
fn laplacian_inverse_check(py: Python<'_>, n_max: usize, seed: u64) -> PyResult<Py<PyAny>> {
    to_py(py, &experiments::laplacian_inverse_check(n_max, seed).map_err(py_err)?)
}

/// Gate audit over the standard family and the fitted cost model.
#[pyfunction]
#[pyo3(signature = (ell_min = 1, ell_max = 4, side = 1.0, beta = 2.0, k_bg = 1e-4))]
fn gate_audit(py: Python<'_>, ell_min: u32, ell_max: u32, side: f64, beta: f64, k_bg: f64) -> PyResult<Py<PyAny>> {
    let family = experiments::audit_family(ell_min..=ell_max, side, beta, k_bg);
    let (rows, fit) = experiments::gate_audit(&family).map_err(py_err)?;
    to_py(py, &serde_json::json!({ "rows": rows, "fit": fit }))
}

/// Support, amplitude and register sizes of the region-average state.
#[pyfunction]
fn region_state(py: Python<'_>, i: usize, j: usize, k: usize, ell: u32, t: u32) -> PyResult<Py<PyAny>> {
    let obs = readout::region_state_prep(i, j, k, ell, t).map_err(py_err)?;
    let counts = obs.prep_circuit.gate_counts();
    to_py(
        py,
        &serde_json::json!({
            "support": obs.support,
            "amplitude": obs.amplitude,
            "qubits": obs.prep_circuit.num_qubits(),
            "gate_counts": counts,
        }),
    )
}

/// Smallest normalized magnitude among the entries of `x` above the zero threshold.
#[pyfunction]
#[pyo3(signature = (x, zero_tol = 1e-12))]
fn epsilon_metric(x: Vec<f64>, zero_tol: f64) -> PyResult<f64> {
    solver::epsilon_metric(&x, zero_tol).map_err(py_err)
}

#[pymodule]
fn qls_poisson_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Instance>()?;
    m.add_function(wrap_pyfunction!(kappa_sweep, m)?)?;
    m.add_function(wrap_pyfunction!(lambda_min_plateau, m)?)?;
    m.add_function(wrap_pyfunction!(eps_sweep, m)?)?;
    m.add_function(wrap_pyfunction!(precond_check, m)?)?;
    m.add_function(wrap_pyfunction!(readout_demo, m)?)?;
    m.add_function(wrap_pyfunction!(laplacian_inverse_check, m)?)?;
    m.add_function(wrap_pyfunction!(gate_audit, m)?)?;
    m.add_function(wrap_pyfunction!(region_state, m)?)?;
    m.add_function(wrap_pyfunction!(epsilon_metric, m)?)?;
    Ok(())
}
