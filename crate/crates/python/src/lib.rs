//! Python bindings: `import pynewtonreg`.

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use serde::Serialize;

use newtonreg::bvp::{self, BvpSpec};
use newtonreg::experiment::{self, Example, ExperimentConfig};
use newtonreg::filters;
use newtonreg::newton::{self, SolveConfig};
use newtonreg::schedules;

fn py_err(e: newtonreg::Error) -> PyErr {
    PyValueError::new_err(format!("{}: {e}", e.kind()))
}

/// Serializes through JSON into plain Python containers.
fn to_py<'py, T: Serialize>(py: Python<'py>, value: &T) -> PyResult<Bound<'py, PyAny>> {
    let text = serde_json::to_string(value).map_err(|e| PyValueError::new_err(e.to_string()))?;
    py.import("json")?.call_method1("loads", (text,))
}

/// A spectral filter family, parsed from `landweber`, `lardy`, `exp-euler`
/// or `tikhonov-N`.
#[pyclass(name = "Filter", frozen, from_py_object)]
#[derive(Clone)]
struct PyFilter(newtonreg::FilterSpec);

#[pymethods]
impl PyFilter {
    #[new]
    fn new(name: &str) -> PyResult<Self> {
        name.parse().map(PyFilter).map_err(py_err)
    }

    fn g(&self, alpha: f64, lam: f64) -> PyResult<f64> {
        filters::eval_g(self.0, alpha, lam).map_err(py_err)
    }

    fn residual(&self, alpha: f64, lam: f64) -> PyResult<f64> {
        filters::eval_residual(self.0, alpha, lam).map_err(py_err)
    }

    /// `g_α(KᵀK) Kᵀ b` for a dense `K` given as a list of rows.
    #[pyo3(signature = (alpha, k, b, spectral = false))]
    fn apply(&self, alpha: f64, k: Vec<Vec<f64>>, b: Vec<f64>, spectral: bool) -> PyResult<Vec<f64>> {
        let rows = k.len();
        let cols = k.first().map_or(0, Vec::len);
        let k = newtonreg::linops::DenseMatrix::new(rows, cols, k.concat()).map_err(py_err)?;
        if spectral {
            filters::apply_filter_spectral(self.0, alpha, &k, &b).map_err(py_err)
        } else {
            filters::apply_filter_iterative(self.0, alpha, &k, &b, &filters::InnerOptions::default())
                .map(|a| a.solution)
                .map_err(py_err)
        }
    }

    fn __repr__(&self) -> String {
        format!("Filter('{}')", self.0)
    }
}

/// Step-size schedule `α_n`.
#[pyclass(name = "Schedule", frozen, from_py_object)]
#[derive(Clone)]
struct PySchedule(newtonreg::AlphaSchedule);

#[pymethods]
impl PySchedule {
    #[staticmethod]
    #[pyo3(signature = (alpha0 = 1.0, r = 0.5))]
    fn geometric(alpha0: f64, r: f64) -> PyResult<Self> {
        newtonreg::AlphaSchedule::geometric(alpha0, r).map(PySchedule).map_err(py_err)
    }

    #[staticmethod]
    fn explicit(values: Vec<f64>) -> PyResult<Self> {
        newtonreg::AlphaSchedule::explicit(values).map(PySchedule).map_err(py_err)
    }

    fn alpha(&self, n: usize) -> PyResult<f64> {
        self.0.alpha_at(n).map_err(py_err)
    }

    fn partial_sum(&self, n: usize) -> PyResult<f64> {
        self.0.partial_sum(Some(n)).map_err(py_err)
    }

    fn audit<'py>(&self, py: Python<'py>, n_max: usize) -> PyResult<Bound<'py, PyAny>> {
        to_py(py, &schedules::audit(&self.0, n_max).map_err(py_err)?)
    }

    fn __repr__(&self) -> String {
        format!("Schedule('{}')", self.0)
    }
}

/// The discretized two-point problem `-u'' + c u = f` with Dirichlet data.
#[pyclass(name = "BvpProblem", frozen)]
struct PyBvp(BvpSpec);

#[pymethods]
impl PyBvp {
    #[new]
    fn new(f: Vec<f64>, g0: f64, g1: f64) -> PyResult<Self> {
        BvpSpec::new(f.len(), f, g0, g1).map(PyBvp).map_err(py_err)
    }

    #[staticmethod]
    #[pyo3(signature = (m = 100))]
    fn reference(m: usize) -> PyResult<Self> {
        bvp::reference_spec(m).map(PyBvp).map_err(py_err)
    }

    #[getter]
    fn m(&self) -> usize {
        self.0.m()
    }

    #[getter]
    fn h(&self) -> f64 {
        self.0.h()
    }

    fn nodes(&self) -> Vec<f64> {
        self.0.nodes()
    }

    fn forward(&self, c: Vec<f64>) -> PyResult<Vec<f64>> {
        self.0.forward(&c).map(|u| u.0).map_err(py_err)
    }

    fn derivative(&self, c: Vec<f64>, direction: Vec<f64>) -> PyResult<Vec<f64>> {
        let u = self.0.forward(&c).map_err(py_err)?;
        self.0.derivative_apply(&c, &u, &direction).map(|v| v.0).map_err(py_err)
    }

    fn adjoint(&self, c: Vec<f64>, w: Vec<f64>) -> PyResult<Vec<f64>> {
        let u = self.0.forward(&c).map_err(py_err)?;
        self.0.adjoint_apply(&c, &u, &w).map(|v| v.0).map_err(py_err)
    }

    /// Runs the regularized Newton iteration and returns the trace as a dict.
    #[pyo3(signature = (y, c0, filter, schedule, tau, delta, n_max = 60, truth = None))]
    #[allow(clippy::too_many_arguments)]
    fn solve<'py>(
        &self,
        py: Python<'py>,
        y: Vec<f64>,
        c0: Vec<f64>,
        filter: PyFilter,
        schedule: PySchedule,
        tau: f64,
        delta: f64,
        n_max: usize,
        truth: Option<Vec<f64>>,
    ) -> PyResult<Bound<'py, PyAny>> {
        let mut cfg = SolveConfig::new(filter.0, schedule.0, tau, delta, c0).with_n_max(n_max);
        if let Some(t) = truth {
            cfg = cfg.with_truth(t);
        }
        let trace = py.detach(|| newton::solve(&self.0, &y, &cfg)).map_err(py_err)?;
        to_py(py, &trace)
    }

    #[pyo3(signature = (c_truth, c0, nu = 0.5, floor = newton::SOURCE_EIGENVALUE_FLOOR))]
    fn source_diagnostic<'py>(
        &self,
        py: Python<'py>,
        c_truth: Vec<f64>,
        c0: Vec<f64>,
        nu: f64,
        floor: f64,
    ) -> PyResult<Bound<'py, PyAny>> {
        let d = newton::source_condition_diagnostic_with_floor(&self.0, &c_truth, &c0, nu, floor).map_err(py_err)?;
        to_py(py, &d)
    }
}

#[pyfunction]
#[pyo3(signature = (m = 100))]
fn reference_truth(m: usize) -> Vec<f64> {
    bvp::reference_truth(m).0
}

#[pyfunction]
#[pyo3(signature = (m = 100, rough = false))]
fn initial_guess(m: usize, rough: bool) -> Vec<f64> {
    if rough {
        bvp::rough_initial_guess(m).0
    } else {
        bvp::smooth_initial_guess(m).0
    }
}

#[pyfunction]
#[pyo3(signature = (tau, deltas, seeds, filter = None, schedule = None, rough = false, m = 100))]
#[allow(clippy::too_many_arguments)]
fn run_experiment<'py>(
    py: Python<'py>,
    tau: f64,
    deltas: Vec<f64>,
    seeds: Vec<u64>,
    filter: Option<PyFilter>,
    schedule: Option<PySchedule>,
    rough: bool,
    m: usize,
) -> PyResult<Bound<'py, PyAny>> {
    let example = if rough { Example::Rough } else { Example::Smooth };
    let mut cfg = ExperimentConfig::new(example, tau, deltas, seeds);
    if let Some(f) = filter {
        cfg.filter = f.0;
    }
    if let Some(s) = schedule {
        cfg.schedule = s.0;
    }
    cfg.m = m;
    let report = py.detach(|| experiment::run_experiment(&cfg)).map_err(py_err)?;
    to_py(py, &report)
}

#[pymodule]
fn pynewtonreg(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyFilter>()?;
    m.add_class::<PySchedule>()?;
    m.add_class::<PyBvp>()?;
    m.add_function(wrap_pyfunction!(reference_truth, m)?)?;
    m.add_function(wrap_pyfunction!(initial_guess, m)?)?;
    m.add_function(wrap_pyfunction!(run_experiment, m)?)?;
    Ok(())
}
