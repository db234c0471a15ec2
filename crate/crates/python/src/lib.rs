//! Python module `stablelab_py`.

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;
use stablelab::density_engine;
use stablelab::experiment::{self, ExperimentConfig};
use stablelab::nonlocal_calculus::{Extension, GridFunction, Lattice};
use stablelab::resolvent_solver::{self as resolvent, DriftTerm, ResolventProblem, SolverOptions};
use stablelab::sde_lab::{self, LevyPath, PathParams, SmallJumpPolicy, TanakaDrift};
use stablelab::stable_model::{SpectralMeasure, StableSpec};
use stablelab::Error;
use std::path::Path;

fn py_err(e: Error) -> PyErr {
    match e {
        Error::InvalidParameter(_)
        | Error::ConfigInvalid(_)
        | Error::DimensionMismatch { .. }
        | Error::UnsupportedDimension(_)
        | Error::UnsupportedRegime(_)
        | Error::DegenerateMeasure(_)
        | Error::AsymmetricMeasure(_) => PyValueError::new_err(e.to_string()),
        _ => PyRuntimeError::new_err(e.to_string()),
    }
}

fn policy(name: &str) -> PyResult<SmallJumpPolicy> {
    match name {
        "gaussian" => Ok(SmallJumpPolicy::Gaussian),
        "drop" => Ok(SmallJumpPolicy::Drop),
        other => Err(PyValueError::new_err(format!("unknown small-jump policy {other:?}"))),
    }
}

/// Symmetric α-stable law with a discrete spectral measure.
#[pyclass(name = "StableSpec", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyStableSpec(StableSpec);

#[pymethods]
impl PyStableSpec {
    /// `measure` is "isotropic" (with `directions` atoms, default 2·dim) or "axes".
    #[new]
    #[pyo3(signature = (alpha, dim=1, measure="isotropic", directions=None, scale=1.0))]
    fn new(alpha: f64, dim: usize, measure: &str, directions: Option<usize>, scale: f64) -> PyResult<Self> {
        let m = match measure {
            "isotropic" => SpectralMeasure::isotropic(dim, directions.unwrap_or(2 * dim)),
            "axes" => SpectralMeasure::axes(dim, 1.0),
            other => return Err(PyValueError::new_err(format!("unknown measure preset {other:?}"))),
        }
        .map_err(py_err)?;
        StableSpec::new(alpha, m, scale).map(PyStableSpec).map_err(py_err)
    }

    #[getter]
    fn alpha(&self) -> f64 {
        self.0.alpha
    }

    #[getter]
    fn dim(&self) -> usize {
        self.0.dim
    }

    #[getter]
    fn scale(&self) -> f64 {
        self.0.scale
    }

    fn characteristic_exponent(&self, u: Vec<f64>) -> PyResult<f64> {
        if u.len() != self.0.dim {
            return Err(py_err(Error::DimensionMismatch { expected: self.0.dim, got: u.len() }));
        }
        Ok(self.0.characteristic_exponent(&u))
    }

    fn levy_weights(&self) -> Vec<f64> {
        self.0.levy_weights()
    }

    /// Density of L_t at x.
    fn density(&self, t: f64, x: Vec<f64>) -> PyResult<f64> {
        density_engine::density(&self.0, t, &x).map_err(py_err)
    }

    fn density_gradient(&self, t: f64, x: Vec<f64>) -> PyResult<Vec<f64>> {
        density_engine::density_gradient(&self.0, t, &x).map_err(py_err)
    }

    fn __repr__(&self) -> String {
        format!("StableSpec(alpha={}, dim={}, scale={})", self.0.alpha, self.0.dim, self.0.scale)
    }
}

/// A sampled Lévy path on a uniform grid.
#[pyclass(name = "LevyPath", frozen)]
struct PyLevyPath(LevyPath);

#[pymethods]
impl PyLevyPath {
    #[getter]
    fn steps(&self) -> usize {
        self.0.steps()
    }

    #[getter]
    fn horizon(&self) -> f64 {
        self.0.horizon
    }

    #[getter]
    fn seed(&self) -> u64 {
        self.0.seed
    }

    fn grid_times(&self) -> Vec<f64> {
        (0..=self.0.steps()).map(|k| self.0.grid_time(k)).collect()
    }

    fn value_at(&self, t: f64) -> Vec<f64> {
        self.0.value_at(t)
    }

    fn terminal(&self) -> Vec<f64> {
        self.0.terminal()
    }

    /// (time, size) of every jump above the cutoff.
    fn jumps(&self) -> Vec<(f64, Vec<f64>)> {
        self.0.jumps().iter().map(|j| (j.time, j.size.clone())).collect()
    }

    /// Euler trajectory of dX = b(X)dt + dL with the Tanaka drift, as (times, states).
    fn euler_tanaka(&self, x0: Vec<f64>, beta: f64) -> PyResult<(Vec<f64>, Vec<Vec<f64>>)> {
        let tr = sde_lab::euler_integrate(&TanakaDrift { beta }, &x0, &self.0).map_err(py_err)?;
        let states = (0..tr.len()).map(|k| tr.state(k).to_vec()).collect();
        Ok((tr.times.clone(), states))
    }
}

#[pyfunction]
#[pyo3(signature = (spec, horizon, dt, eps, seed, policy="gaussian"))]
fn sample_path(
    py: Python<'_>,
    spec: &PyStableSpec,
    horizon: f64,
    dt: f64,
    eps: f64,
    seed: u64,
    policy: &str,
) -> PyResult<PyLevyPath> {
    let p = self::policy(policy)?;
    let s = spec.0.clone();
    py.detach(|| sde_lab::sample_levy_path(&s, horizon, dt, eps, seed, p)).map(PyLevyPath).map_err(py_err)
}

#[pyfunction]
fn tanaka_drift(x: f64, beta: f64) -> f64 {
    resolvent::tanaka_drift(x, beta)
}

/// Common-noise ratio E[sup|X^x - X^y|^p]/|x-y|^p with the Tanaka drift of exponent `beta`.
#[pyfunction]
#[pyo3(signature = (spec, beta, x, y, p=2.0, horizon=1.0, dt=1e-2, eps=0.1, n_paths=1000, seed=0, policy="gaussian"))]
#[allow(clippy::too_many_arguments)]
fn lipschitz_ratio<'py>(
    py: Python<'py>,
    spec: &PyStableSpec,
    beta: f64,
    x: f64,
    y: f64,
    p: f64,
    horizon: f64,
    dt: f64,
    eps: f64,
    n_paths: usize,
    seed: u64,
    policy: &str,
) -> PyResult<Bound<'py, PyDict>> {
    let params = PathParams { horizon, dt, eps, policy: self::policy(policy)? };
    let s = spec.0.clone();
    let est = py
        .detach(|| sde_lab::lipschitz_ratio(&s, &TanakaDrift { beta }, &[x], &[y], p, &params, n_paths, seed))
        .map_err(py_err)?;
    let d = PyDict::new(py);
    d.set_item("estimate", est.estimate)?;
    d.set_item("std_error", est.std_error)?;
    d.set_item("max", est.max)?;
    d.set_item("n_paths", est.n_paths)?;
    Ok(d)
}

/// Solves λu - 𝓛u - b·Du = b for the d = 1 Tanaka drift on [-half_width, half_width].
#[pyfunction]
#[pyo3(signature = (alpha, beta, lam, half_width=8.0, spacing=0.02))]
fn solve_tanaka_resolvent<'py>(
    py: Python<'py>,
    alpha: f64,
    beta: f64,
    lam: f64,
    half_width: f64,
    spacing: f64,
) -> PyResult<Bound<'py, PyDict>> {
    let sol = py
        .detach(|| {
            let spec = StableSpec::one_dimensional(alpha, 1.0)?;
            let lat = Lattice::cube(1, half_width, spacing)?;
            let b = GridFunction::sample(lat, |x| resolvent::tanaka_drift(x[0], beta), Extension::Constant)?;
            let problem = ResolventProblem::new(spec, lam, DriftTerm::Field(b.clone()), b, beta)?;
            resolvent::solve_hoelder_drift(&problem, &SolverOptions { compute_residual: false, ..Default::default() })
        })
        .map_err(py_err)?;
    let lat = sol.u.lattice();
    let d = PyDict::new(py);
    d.set_item("x", (0..lat.len()).map(|k| lat.coord(0, k)).collect::<Vec<_>>())?;
    d.set_item("u", sol.u.values().to_vec())?;
    d.set_item("du", sol.du.values().to_vec())?;
    d.set_item("method", sol.diagnostics.method.clone())?;
    d.set_item("lambda_u_sup", sol.diagnostics.lambda_u_sup)?;
    d.set_item("g_sup", sol.diagnostics.g_sup)?;
    d.set_item("working_beta", sol.diagnostics.working_beta)?;
    Ok(d)
}

/// Runs a TOML experiment config into `out_dir` and returns the manifest as JSON text.
#[pyfunction]
fn run_experiment(py: Python<'_>, config_toml: &str, out_dir: &str) -> PyResult<String> {
    let config = ExperimentConfig::from_toml(config_toml).map_err(py_err)?;
    let m = py.detach(|| experiment::run(&config, Path::new(out_dir))).map_err(py_err)?;
    std::fs::read_to_string(Path::new(out_dir).join(experiment::MANIFEST_NAME))
        .map_err(|e| PyRuntimeError::new_err(format!("{}: {e}", m.kind.label())))
}

/// The files `run_experiment` would write, as JSON text.
#[pyfunction]
fn dry_run(config_toml: &str, out_dir: &str) -> PyResult<String> {
    let config = ExperimentConfig::from_toml(config_toml).map_err(py_err)?;
    let plan = experiment::dry_run(&config, Path::new(out_dir)).map_err(py_err)?;
    Ok(plan.to_string())
}

#[pymodule]
fn stablelab_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyStableSpec>()?;
    m.add_class::<PyLevyPath>()?;
    m.add_function(wrap_pyfunction!(sample_path, m)?)?;
    m.add_function(wrap_pyfunction!(tanaka_drift, m)?)?;
    m.add_function(wrap_pyfunction!(lipschitz_ratio, m)?)?;
    m.add_function(wrap_pyfunction!(solve_tanaka_resolvent, m)?)?;
    m.add_function(wrap_pyfunction!(run_experiment, m)?)?;
    m.add_function(wrap_pyfunction!(dry_run, m)?)?;
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    Ok(())
}
