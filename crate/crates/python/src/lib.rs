//! Python bindings for the `ch_gsav` solver.

use std::sync::Arc;

use ch_gsav::adaptive::{run_with_policy_observed, AdaptiveParams, StepPolicy};
use ch_gsav::bdf::{self, TimeMesh};
use ch_gsav::experiments::{self, ConvergenceSetup, Scenario, ScenarioName};
use ch_gsav::{stepper, GsavState, SpectralField, StepperOptions};
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;

fn value_err<E: std::fmt::Display>(e: E) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn runtime_err<E: std::fmt::Display>(e: E) -> PyErr {
    PyRuntimeError::new_err(e.to_string())
}

/// Uniform periodic grid on `(0, length)^dim`.
#[pyclass(name = "Grid", frozen)]
struct PyGrid {
    inner: Arc<ch_gsav::Grid>,
}

impl PyGrid {
    fn field(&self, values: Vec<f64>) -> PyResult<SpectralField> {
        SpectralField::from_physical(self.inner.clone(), values).map_err(value_err)
    }
}

#[pymethods]
impl PyGrid {
    #[new]
    #[pyo3(signature = (dim, n, length = 2.0 * std::f64::consts::PI))]
    fn new(dim: usize, n: usize, length: f64) -> PyResult<Self> {
        Ok(PyGrid { inner: ch_gsav::Grid::new(dim, n, length).map_err(value_err)? })
    }

    #[getter]
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    #[getter]
    fn n(&self) -> usize {
        self.inner.n()
    }

    #[getter]
    fn length(&self) -> f64 {
        self.inner.length()
    }

    #[getter]
    fn spacing(&self) -> f64 {
        self.inner.spacing()
    }

    #[getter]
    fn volume(&self) -> f64 {
        self.inner.volume()
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    /// Grid point coordinates, row-major.
    fn points(&self) -> Vec<Vec<f64>> {
        (0..self.inner.len()).map(|i| self.inner.point(i)).collect()
    }

    /// Normalized Fourier coefficients as `(re, im)` pairs, FFT ordering.
    fn coefficients(&self, values: Vec<f64>) -> PyResult<Vec<(f64, f64)>> {
        let f = self.field(values)?.to_coefficients();
        Ok(f.coefficients().unwrap_or_default().iter().map(|z| (z.re, z.im)).collect())
    }

    /// Spectral Laplacian of grid values.
    fn laplacian(&self, values: Vec<f64>) -> PyResult<Vec<f64>> {
        let lap = self.field(values)?.apply_symbol(1).map_err(value_err)?;
        let lap = lap.to_physical().map_err(runtime_err)?;
        Ok(lap.physical().unwrap_or_default().to_vec())
    }

    fn l2_norm_sq(&self, values: Vec<f64>) -> PyResult<f64> {
        Ok(self.field(values)?.l2_norm_sq())
    }

    fn grad_norm_sq(&self, values: Vec<f64>) -> PyResult<f64> {
        Ok(self.field(values)?.grad_norm_sq())
    }

    fn h1_norm(&self, values: Vec<f64>) -> PyResult<f64> {
        Ok(self.field(values)?.h1_norm())
    }

    fn mass(&self, values: Vec<f64>) -> PyResult<f64> {
        Ok(self.field(values)?.mass())
    }

    /// Ginzburg-Landau energy of grid values.
    fn energy(&self, values: Vec<f64>, eps: f64) -> PyResult<f64> {
        stepper::energy(&self.field(values)?, eps).map_err(value_err)
    }

    /// Number of connected components of `{φ > 0}`.
    fn count_positive_components(&self, values: Vec<f64>) -> PyResult<usize> {
        experiments::count_positive_components(&self.field(values)?).map_err(value_err)
    }

    fn __repr__(&self) -> String {
        format!("Grid(dim={}, n={}, length={})", self.inner.dim(), self.inner.n(), self.inner.length())
    }
}

#[pyclass(name = "StepRecord", frozen, get_all, skip_from_py_object)]
#[derive(Clone)]
struct PyStepRecord {
    n: usize,
    t: f64,
    tau: f64,
    gamma: f64,
    energy: f64,
    xi: f64,
    eta: f64,
    mass: f64,
    dissipation: f64,
}

impl From<ch_gsav::StepRecord> for PyStepRecord {
    fn from(r: ch_gsav::StepRecord) -> Self {
        PyStepRecord {
            n: r.n,
            t: r.t,
            tau: r.tau,
            gamma: r.gamma,
            energy: r.energy,
            xi: r.xi,
            eta: r.eta,
            mass: r.mass,
            dissipation: r.dissipation,
        }
    }
}

#[pymethods]
impl PyStepRecord {
    fn __repr__(&self) -> String {
        format!("StepRecord(n={}, t={}, tau={}, gamma={}, xi={})", self.n, self.t, self.tau, self.gamma, self.xi)
    }
}

/// Stepper state.  Build from grid values or from a named scenario.
#[pyclass(name = "Simulation")]
struct PySimulation {
    state: GsavState,
}

#[pymethods]
impl PySimulation {
    #[new]
    #[pyo3(signature = (grid, values, eps, dealias = false))]
    fn new(grid: &PyGrid, values: Vec<f64>, eps: f64, dealias: bool) -> PyResult<Self> {
        let phi0 = grid.field(values)?;
        let state = GsavState::with_options(&phi0, eps, StepperOptions { dealias }).map_err(value_err)?;
        Ok(PySimulation { state })
    }

    /// Initial state of a named scenario, optionally on a different grid size.
    #[staticmethod]
    #[pyo3(signature = (name, n = None))]
    fn from_scenario(name: &str, n: Option<usize>) -> PyResult<Self> {
        let name: ScenarioName = name.parse().map_err(PyValueError::new_err)?;
        let mut s = Scenario::defaults(name);
        if let Some(n) = n {
            s.n = n;
        }
        Ok(PySimulation { state: s.initial_state().map_err(value_err)? })
    }

    fn advance(&mut self, tau: f64) -> PyResult<PyStepRecord> {
        self.state.advance(tau).map(Into::into).map_err(runtime_err)
    }

    /// Fixed steps of size `tau` until `horizon` (the last step is shortened).
    fn run_fixed(&mut self, tau: f64, horizon: f64) -> PyResult<Vec<PyStepRecord>> {
        self.run(StepPolicy::Fixed(tau), horizon)
    }

    /// Energy-rate adaptive steps until `horizon`.
    #[pyo3(signature = (tau_min, tau_max, alpha, horizon))]
    fn run_adaptive(&mut self, tau_min: f64, tau_max: f64, alpha: f64, horizon: f64) -> PyResult<Vec<PyStepRecord>> {
        let params = AdaptiveParams::new(tau_min, tau_max, alpha);
        params.validate(bdf::DEFAULT_DELTA).map_err(value_err)?;
        self.run(StepPolicy::Adaptive(params), horizon)
    }

    #[getter]
    fn phi(&self) -> PyResult<Vec<f64>> {
        let f = self.state.phi().to_physical().map_err(runtime_err)?;
        Ok(f.physical().unwrap_or_default().to_vec())
    }

    #[getter]
    fn phi_bar(&self) -> PyResult<Vec<f64>> {
        let f = self.state.phi_bar().to_physical().map_err(runtime_err)?;
        Ok(f.physical().unwrap_or_default().to_vec())
    }

    #[getter]
    fn gamma(&self) -> f64 {
        self.state.gamma()
    }

    #[getter]
    fn xi(&self) -> f64 {
        self.state.xi()
    }

    #[getter]
    fn time(&self) -> f64 {
        self.state.time()
    }

    #[getter]
    fn step_index(&self) -> usize {
        self.state.step_index()
    }

    #[getter]
    fn eps(&self) -> f64 {
        self.state.eps()
    }

    #[getter]
    fn grid(&self) -> PyGrid {
        PyGrid { inner: self.state.grid().clone() }
    }

    fn energy(&self) -> PyResult<f64> {
        stepper::energy(self.state.phi(), self.state.eps()).map_err(runtime_err)
    }
}

impl PySimulation {
    fn run(&mut self, policy: StepPolicy, horizon: f64) -> PyResult<Vec<PyStepRecord>> {
        let end = self.state.time() + horizon;
        if horizon.is_nan() || horizon <= 0.0 {
            return Err(PyValueError::new_err("horizon must be positive"));
        }
        let records = run_with_policy_observed(&mut self.state, &policy, end, &[], |_, _| Ok(())).map_err(runtime_err)?;
        Ok(records.into_iter().map(Into::into).collect())
    }
}

#[pyclass(name = "ConvergenceRow", frozen, get_all)]
struct PyConvergenceRow {
    k: usize,
    tau_max: f64,
    h1_error: f64,
    h1_order: Option<f64>,
    gamma_error: f64,
    gamma_order: Option<f64>,
    max_ratio: f64,
    xi_defect: f64,
}

#[pymethods]
impl PyConvergenceRow {
    fn __repr__(&self) -> String {
        format!("ConvergenceRow(k={}, h1_error={:e}, gamma_error={:e})", self.k, self.h1_error, self.gamma_error)
    }
}

/// Real root of `x³ = (2x + 1)²`.
#[pyfunction]
fn r_max_root() -> f64 {
    bdf::r_max_root()
}

/// Steps of a random mesh on `(0, horizon)`.
#[pyfunction]
fn random_mesh(horizon: f64, count: usize, seed: u64) -> PyResult<Vec<f64>> {
    Ok(bdf::random_mesh(horizon, count, seed).map_err(value_err)?.steps().to_vec())
}

fn mesh(steps: Vec<f64>) -> PyResult<TimeMesh> {
    TimeMesh::new(steps).map_err(value_err)
}

/// DOC kernels `[θ_0, …, θ_{n−1}]` of level `n`.
#[pyfunction]
fn doc_kernels(steps: Vec<f64>, n: usize) -> PyResult<Vec<f64>> {
    bdf::doc_kernels(&mesh(steps)?, n).map_err(value_err)
}

/// DCC kernels `[p_0, …, p_{n−1}]` of level `n`.
#[pyfunction]
fn dcc_kernels(steps: Vec<f64>, n: usize) -> PyResult<Vec<f64>> {
    bdf::dcc_kernels(&mesh(steps)?, n).map_err(value_err)
}

/// `(lhs, rhs, pass)` of the kernel quadratic-form check.
#[pyfunction]
#[pyo3(signature = (steps, w, delta = bdf::DEFAULT_DELTA))]
fn quadratic_form_check(steps: Vec<f64>, w: Vec<f64>, delta: f64) -> PyResult<(f64, f64, bool)> {
    let c = bdf::quadratic_form_check(&mesh(steps)?, &w, delta).map_err(value_err)?;
    Ok((c.lhs, c.rhs, c.pass))
}

#[pyfunction]
fn order_of(e_coarse: f64, e_fine: f64, tau_coarse: f64, tau_fine: f64) -> PyResult<f64> {
    experiments::order_of(e_coarse, e_fine, tau_coarse, tau_fine).map_err(value_err)
}

/// Temporal convergence sweep against a fixed-step reference.
#[pyfunction]
#[pyo3(signature = (base_k = 50, levels = 4, n = 64, horizon = 0.1, eps = 0.2, ref_steps = 0, seed = 0))]
fn run_convergence(
    base_k: usize,
    levels: usize,
    n: usize,
    horizon: f64,
    eps: f64,
    ref_steps: usize,
    seed: u64,
) -> PyResult<Vec<PyConvergenceRow>> {
    let setup = ConvergenceSetup { base_k, levels, n, horizon, eps, ref_steps, seed, ..ConvergenceSetup::default() };
    let report = experiments::run_convergence(&setup).map_err(runtime_err)?;
    Ok(report
        .rows
        .into_iter()
        .map(|r| PyConvergenceRow {
            k: r.k,
            tau_max: r.tau_max,
            h1_error: r.h1_error,
            h1_order: r.h1_order,
            gamma_error: r.gamma_error,
            gamma_order: r.gamma_order,
            max_ratio: r.max_ratio,
            xi_defect: r.xi_defect,
        })
        .collect())
}

#[pymodule]
fn ch_gsav_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyGrid>()?;
    m.add_class::<PySimulation>()?;
    m.add_class::<PyStepRecord>()?;
    m.add_class::<PyConvergenceRow>()?;
    m.add_function(wrap_pyfunction!(r_max_root, m)?)?;
    m.add_function(wrap_pyfunction!(random_mesh, m)?)?;
    m.add_function(wrap_pyfunction!(doc_kernels, m)?)?;
    m.add_function(wrap_pyfunction!(dcc_kernels, m)?)?;
    m.add_function(wrap_pyfunction!(quadratic_form_check, m)?)?;
    m.add_function(wrap_pyfunction!(order_of, m)?)?;
    m.add_function(wrap_pyfunction!(run_convergence, m)?)?;
    Ok(())
}
