use num_complex::Complex64;
use pyo3::exceptions::{PyArithmeticError, PyOverflowError, PyRuntimeError, PyValueError};
use pyo3::prelude::*;

use subdiff::fracops::{self, FracOrderParam, TimeSignal};
use subdiff::mittag_leffler::{self, MlParams};
use subdiff::solver::{self, DuhamelQuadrature, Forcing, ProblemSpec};
use subdiff::spectral::{self, Mode, PhysicalGrid, SpectralField};
use subdiff::verify;
use subdiff::Error;

fn to_py(e: Error) -> PyErr {
    let msg = e.to_string();
    match e {
        Error::Range(_) => PyOverflowError::new_err(msg),
        Error::Accuracy(_) | Error::Unsupported(_) => PyRuntimeError::new_err(msg),
        Error::Domain(_) => PyArithmeticError::new_err(msg),
        _ => PyValueError::new_err(msg),
    }
}

/// Fourier coefficients `g_n` on the N-torus, band `|n|^2 < band_k`.
#[pyclass(name = "Field", module = "subdiff", from_py_object)]
#[derive(Clone)]
struct PyField {
    inner: SpectralField,
}

#[pymethods]
impl PyField {
    #[new]
    fn new(dim_n: usize, band_k: f64) -> PyResult<Self> {
        Ok(Self { inner: SpectralField::new(dim_n, band_k).map_err(to_py)? })
    }

    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        Ok(Self { inner: SpectralField::from_json(text).map_err(to_py)? })
    }

    fn to_json(&self) -> String {
        self.inner.to_json()
    }

    fn to_csv(&self) -> String {
        self.inner.to_csv()
    }

    #[getter]
    fn dim_n(&self) -> usize {
        self.inner.dim()
    }

    #[getter]
    fn band_k(&self) -> f64 {
        self.inner.band_k()
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    fn __setitem__(&mut self, mode: Vec<i64>, value: Complex64) -> PyResult<()> {
        self.inner.insert(Mode::new(mode), value).map_err(to_py)
    }

    fn __getitem__(&self, mode: Vec<i64>) -> Complex64 {
        self.inner.get(&Mode::new(mode))
    }

    fn modes(&self) -> Vec<Vec<i64>> {
        self.inner.modes().map(|m| m.0.clone()).collect()
    }

    fn l2_norm(&self) -> f64 {
        self.inner.l2_norm()
    }

    fn liouville_norm(&self, a: f64) -> f64 {
        spectral::liouville_norm(&self.inner, a)
    }

    fn laplacian(&self) -> Self {
        Self { inner: spectral::laplacian_apply(&self.inner) }
    }

    fn frac_power(&self, tau: f64) -> PyResult<Self> {
        Ok(Self { inner: spectral::frac_power_apply(&self.inner, tau).map_err(to_py)? })
    }

    /// Samples on an `M^N` grid, flattened row-major (last axis fastest).
    fn synthesize(&self, points_per_axis: usize) -> PyResult<Vec<Complex64>> {
        Ok(spectral::synthesize(&self.inner, points_per_axis).map_err(to_py)?.samples)
    }

    #[staticmethod]
    fn analyze(dim_n: usize, points_per_axis: usize, samples: Vec<Complex64>, band_k: f64) -> PyResult<Self> {
        let grid = PhysicalGrid::new(dim_n, points_per_axis, samples).map_err(to_py)?;
        Ok(Self { inner: spectral::analyze(&grid, band_k).map_err(to_py)? })
    }

    fn __repr__(&self) -> String {
        format!("Field(dim_n={}, band_k={}, modes={})", self.inner.dim(), self.inner.band_k(), self.inner.len())
    }
}

/// Initial value problem with optional time-independent forcing.
#[pyclass(name = "Problem", module = "subdiff", from_py_object)]
#[derive(Clone)]
struct PyProblem {
    inner: ProblemSpec,
}

#[pymethods]
impl PyProblem {
    #[new]
    #[pyo3(signature = (rho, horizon_t, phi, forcing = None))]
    fn new(rho: f64, horizon_t: f64, phi: PyField, forcing: Option<PyField>) -> PyResult<Self> {
        let forcing = match forcing {
            Some(f) => Forcing::Constant { field: f.inner },
            None => Forcing::None,
        };
        Ok(Self { inner: ProblemSpec::new(rho, horizon_t, phi.inner, forcing).map_err(to_py)? })
    }

    #[getter]
    fn rho(&self) -> f64 {
        self.inner.rho
    }

    #[getter]
    fn horizon_t(&self) -> f64 {
        self.inner.horizon_t
    }

    /// `[(t, u(., t))]` at increasing times in `(0, T]`.
    #[pyo3(signature = (times, nodes_per_unit = 64))]
    fn solve(&self, times: Vec<f64>, nodes_per_unit: usize) -> PyResult<Vec<(f64, PyField)>> {
        let q = DuhamelQuadrature { nodes_per_unit, ..Default::default() };
        let snaps = solver::solve(&self.inner, &times, &q).map_err(to_py)?;
        Ok(snaps.into_iter().map(|s| (s.t, PyField { inner: s.field })).collect())
    }

    /// Largest residual relative to the solution norm on `[window_start T, T]`
    /// for snapshots at `t_k = k T / steps`.
    #[pyo3(signature = (steps = 4096, window_start = 0.25))]
    fn residual(&self, steps: usize, window_start: f64) -> PyResult<f64> {
        let t = self.inner.horizon_t;
        let times: Vec<f64> = (1..=steps).map(|k| k as f64 * t / steps as f64).collect();
        let snaps = solver::solve(&self.inner, &times, &DuhamelQuadrature::default()).map_err(to_py)?;
        let r = verify::residual_check(&snaps, &self.inner.forcing, self.inner.rho).map_err(to_py)?;
        Ok(r.max_relative(window_start * t))
    }

    /// `(probe times, deviation, closed form)` of the initial-limit check.
    fn initial_limit(&self) -> PyResult<(Vec<f64>, Vec<f64>, Vec<f64>)> {
        let r = verify::initial_limit_check(&self.inner, &verify::default_probe_times(), &DuhamelQuadrature::default())
            .map_err(to_py)?;
        Ok((r.probe_times, r.deviation, r.homogeneous_closed_form))
    }
}

#[pyfunction]
fn ml_eval(rho: f64, mu: f64, z: f64) -> PyResult<f64> {
    mittag_leffler::ml_eval(MlParams::new(rho, mu).map_err(to_py)?, z).map_err(to_py)
}

#[pyfunction]
fn propagator(rho: f64, lam: f64, t: f64) -> PyResult<f64> {
    mittag_leffler::propagator(rho, lam, t).map_err(to_py)
}

#[pyfunction]
fn bound_constant_m1(rho: f64) -> PyResult<f64> {
    Ok(mittag_leffler::bound_constant_m1(rho).map_err(to_py)?.constant_c)
}

fn signal(values: Vec<f64>, dt: f64, leading_power: f64) -> PyResult<TimeSignal<f64>> {
    TimeSignal::with_leading_power(0.0, dt, values, leading_power).map_err(to_py)
}

/// Fractional integral of order `-sigma > 0` of `h = t^leading_power g`,
/// `g` sampled at `t_k = k dt`.
#[pyfunction]
#[pyo3(signature = (values, dt, sigma, leading_power = 0.0))]
fn rl_integral(values: Vec<f64>, dt: f64, sigma: f64, leading_power: f64) -> PyResult<Vec<f64>> {
    let p = FracOrderParam::integral(sigma).map_err(to_py)?;
    Ok(fracops::rl_integral(&signal(values, dt, leading_power)?, p).map_err(to_py)?.to_plain())
}

#[pyfunction]
#[pyo3(signature = (values, dt, rho, leading_power = 0.0))]
fn rl_derivative(values: Vec<f64>, dt: f64, rho: f64, leading_power: f64) -> PyResult<Vec<f64>> {
    let p = FracOrderParam::derivative(rho).map_err(to_py)?;
    Ok(fracops::rl_derivative(&signal(values, dt, leading_power)?, p).map_err(to_py)?.to_plain())
}

#[pyfunction]
#[pyo3(signature = (values, dt, rho, leading_power = 0.0))]
fn caputo_derivative(values: Vec<f64>, dt: f64, rho: f64, leading_power: f64) -> PyResult<Vec<f64>> {
    let p = FracOrderParam::derivative(rho).map_err(to_py)?;
    Ok(fracops::caputo_derivative(&signal(values, dt, leading_power)?, p).map_err(to_py)?.to_plain())
}

#[pyfunction]
#[pyo3(signature = (values, dt, rho, leading_power = 0.0))]
fn gl_derivative(values: Vec<f64>, dt: f64, rho: f64, leading_power: f64) -> PyResult<Vec<f64>> {
    let p = FracOrderParam::derivative(rho).map_err(to_py)?;
    Ok(fracops::gl_derivative(&signal(values, dt, leading_power)?, p).map_err(to_py)?.to_plain())
}

/// Run the command-line front end; returns `(exit code, stdout, stderr)`.
#[pyfunction]
fn run_cli(args: Vec<String>) -> (i32, String, String) {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let argv = std::iter::once("subdiff".to_string()).chain(args);
    let code = subdiff::cli::run(argv, &mut out, &mut err);
    (code, String::from_utf8_lossy(&out).into_owned(), String::from_utf8_lossy(&err).into_owned())
}

#[pymodule]
#[pyo3(name = "subdiff")]
pub fn subdiff_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyField>()?;
    m.add_class::<PyProblem>()?;
    m.add_function(wrap_pyfunction!(ml_eval, m)?)?;
    m.add_function(wrap_pyfunction!(propagator, m)?)?;
    m.add_function(wrap_pyfunction!(bound_constant_m1, m)?)?;
    m.add_function(wrap_pyfunction!(rl_integral, m)?)?;
    m.add_function(wrap_pyfunction!(rl_derivative, m)?)?;
    m.add_function(wrap_pyfunction!(caputo_derivative, m)?)?;
    m.add_function(wrap_pyfunction!(gl_derivative, m)?)?;
    m.add_function(wrap_pyfunction!(run_cli, m)?)?;
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    Ok(())
}
