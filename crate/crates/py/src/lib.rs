//! Python bindings for `bernstein_lab`.

use std::collections::BTreeMap;

use bernstein_lab::cone_stability as cone;
use bernstein_lab::foliation::{self, LeafProfile};
use bernstein_lab::lagrangian::{self, ConvexityOutcome, RotationAngle};
use bernstein_lab::lawson_osserman as lo;
use bernstein_lab::mss2d::{self, HolomorphicPoly, MapEvaluator};
use bernstein_lab::perturbed_leaf::PerturbedLeaf;
use bernstein_lab::report::{self, Experiment, RunConfig};
use bernstein_lab::Error;
use nalgebra::DMatrix;
use num_complex::Complex64;
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

fn to_py(e: Error) -> PyErr {
    match e {
        Error::Config(_) | Error::Input(_) | Error::Domain(_) | Error::GraphCondition(_) => {
            PyValueError::new_err(e.to_string())
        }
        other => PyRuntimeError::new_err(other.to_string()),
    }
}

/// Rotationally symmetric minimal leaf `t = sigma(s)` with `sigma(0) = 1`.
#[pyclass(name = "Leaf", frozen)]
struct PyLeaf {
    inner: LeafProfile,
}

#[pymethods]
impl PyLeaf {
    #[new]
    #[pyo3(signature = (s_max = 200.0, tol = 1e-12))]
    fn new(s_max: f64, tol: f64) -> PyResult<Self> {
        Ok(Self { inner: foliation::integrate_leaf(s_max, tol).map_err(to_py)? })
    }

    #[getter]
    fn s(&self) -> Vec<f64> {
        self.inner.s_grid.clone()
    }

    #[getter]
    fn sigma(&self) -> Vec<f64> {
        self.inner.sigma.clone()
    }

    #[getter]
    fn sigma_p(&self) -> Vec<f64> {
        self.inner.sigma_p.clone()
    }

    #[getter]
    fn sigma_pp(&self) -> Vec<f64> {
        self.inner.sigma_pp.clone()
    }

    /// Coefficient of `s^{-2}` in `sigma - s`.
    #[getter]
    fn a(&self) -> f64 {
        self.inner.a
    }

    /// `(sigma, sigma', sigma'')` at `s`.
    fn eval(&self, s: f64) -> PyResult<(f64, f64, f64)> {
        let d = self.inner.eval(s).map_err(to_py)?;
        Ok((d.sigma, d.sigma_p, d.sigma_pp))
    }

    fn phase(&self) -> Vec<(f64, f64, f64)> {
        self.inner.phase().iter().map(|p| (p.t, p.x, p.y)).collect()
    }

    fn trapping_entry(&self) -> Option<f64> {
        self.inner.trapping_entry()
    }

    fn max_residual(&self) -> f64 {
        self.inner.max_residual()
    }

    #[pyo3(signature = (s_lo = 10.0))]
    fn expansion_constant(&self, s_lo: f64) -> f64 {
        self.inner.expansion_constant(s_lo)
    }

    fn to_csv(&self) -> String {
        self.inner.to_csv()
    }

    /// Perturbed leaf summary: `eps0`, minimum curvature margin and residual.
    fn perturb<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyDict>> {
        let pl = PerturbedLeaf::new(self.inner.clone()).map_err(to_py)?;
        let d = PyDict::new(py);
        d.set_item("eps0", pl.eps0)?;
        d.set_item("min_margin", pl.min_margin())?;
        d.set_item("min_convexity", pl.min_convexity())?;
        d.set_item("residual", pl.solution.max_residual)?;
        d.set_item("a_bar", pl.a_bar)?;
        Ok(d)
    }
}

/// Minimal cone over a link in `S^n` with `|A|^2 r^2 = kappa`.
#[pyclass(name = "ConeSpec", frozen)]
struct PyConeSpec {
    inner: cone::ConeSpec,
}

#[pymethods]
impl PyConeSpec {
    #[new]
    fn new(n: usize, kappa: f64) -> PyResult<Self> {
        Ok(Self { inner: cone::ConeSpec::new(n, kappa).map_err(to_py)? })
    }

    #[getter]
    fn n(&self) -> usize {
        self.inner.n
    }

    #[getter]
    fn kappa(&self) -> f64 {
        self.inner.kappa
    }

    fn hardy_constant(&self) -> f64 {
        self.inner.hardy_constant()
    }

    fn radial_coefficient(&self, alpha: f64) -> f64 {
        cone::radial_jacobi_coefficient(&self.inner, alpha)
    }

    /// `(form_min, discretization_error)` on the annulus `[1, 20]`.
    #[pyo3(signature = (nodes = cone::DEFAULT_NODES))]
    fn form_minimum(&self, nodes: usize) -> PyResult<(f64, f64)> {
        let (a, b) = cone::DEFAULT_ANNULUS;
        let fm = cone::minimize_form(&self.inner, a, b, nodes).map_err(to_py)?;
        Ok((fm.form_min, fm.discretization_error))
    }

    #[pyo3(signature = (gamma = 1.9, nodes = cone::DEFAULT_NODES))]
    fn report<'py>(&self, py: Python<'py>, gamma: f64, nodes: usize) -> PyResult<Bound<'py, PyDict>> {
        let r = cone::cone_report(&self.inner, gamma, nodes).map_err(to_py)?;
        let d = PyDict::new(py);
        d.set_item("n", r.n)?;
        d.set_item("kappa", r.kappa)?;
        d.set_item("hardy_constant", r.hardy_constant)?;
        d.set_item("exponents", r.exponents.map(|[re, im]| Complex64::new(re, im)).to_vec())?;
        d.set_item("oscillation", r.oscillation)?;
        d.set_item("form_min", r.form_min)?;
        d.set_item("stable", r.stable)?;
        Ok(d)
    }
}

/// Roots of `l^2 + (n - 4) l + gamma` and whether they are complex.
#[pyfunction]
fn simons_exponents(n: usize, gamma: f64) -> PyResult<(Vec<Complex64>, bool)> {
    let ex = cone::simons_exponents(n, gamma).map_err(to_py)?;
    Ok((ex.roots.to_vec(), ex.oscillation))
}

#[pyfunction]
fn rotate_eigenvalue(lam: f64, theta: f64) -> PyResult<f64> {
    lagrangian::rotate_eigenvalue(lam, RotationAngle::new(theta).map_err(to_py)?).map_err(to_py)
}

/// Rotated Hessian of a symmetric matrix given as a list of rows.
#[pyfunction]
fn rotate_hessian(matrix: Vec<Vec<f64>>, theta: f64) -> PyResult<Vec<Vec<f64>>> {
    let n = matrix.len();
    if matrix.iter().any(|r| r.len() != n) {
        return Err(PyValueError::new_err("matrix must be square"));
    }
    let m = DMatrix::from_fn(n, n, |i, j| matrix[i][j]);
    let r = lagrangian::rotate_hessian(&m, RotationAngle::new(theta).map_err(to_py)?).map_err(to_py)?;
    Ok((0..n).map(|i| (0..n).map(|j| r.matrix[(i, j)]).collect()).collect())
}

/// Level-set convexity sweep; returns `(min_value, witness)` where the
/// witness is a dict or `None`.
#[pyfunction]
#[pyo3(signature = (n, theta, samples = 100_000, seed = 1))]
fn convexity_witness<'py>(
    py: Python<'py>,
    n: usize,
    theta: f64,
    samples: usize,
    seed: u64,
) -> PyResult<(f64, Option<Bound<'py, PyDict>>)> {
    let out = lagrangian::levelset_convexity_witness(n, theta, samples, seed).map_err(to_py)?;
    let witness = match &out {
        ConvexityOutcome::Witness { record, .. } => {
            let d = PyDict::new(py);
            d.set_item("theta", record.theta)?;
            d.set_item("n", record.n)?;
            d.set_item("x", record.x.clone())?;
            d.set_item("z", record.z.clone())?;
            d.set_item("value", record.value)?;
            d.set_item("seed", record.seed)?;
            Some(d)
        }
        ConvexityOutcome::NoViolation { .. } => None,
    };
    Ok((out.min_value(), witness))
}

/// Slope of the minimal cone over the Hopf map.
#[pyfunction]
fn cone_slope() -> f64 {
    lo::solve_k()
}

/// Finite-difference residual of the cone map with slope `k` at `x` in `R^4`.
#[pyfunction]
fn cone_map_residual(x: [f64; 4], k: f64) -> PyResult<[f64; 3]> {
    lo::mss_residual_fd(x, k).map_err(to_py)
}

#[pyfunction]
fn cone_map_metric(x: [f64; 4], k: f64) -> PyResult<Vec<Vec<f64>>> {
    let g = lo::LoConeMap::new(k).and_then(|m| m.metric(x)).map_err(to_py)?;
    Ok((0..4).map(|i| (0..4).map(|j| g[(i, j)]).collect()).collect())
}

/// `(k_star, max_residual, n_samples)`.
#[pyfunction]
#[pyo3(signature = (samples = 100, seed = 1))]
fn lawson_osserman_report(samples: usize, seed: u64) -> PyResult<(f64, f64, usize)> {
    let r = lo::lawson_osserman_report(samples, seed).map_err(to_py)?;
    Ok((r.k_star, r.max_residual, r.n_samples))
}

/// Minimal map `R^2 -> R^2` generated by a polynomial `H`.
#[pyclass(name = "MinimalMap", frozen)]
struct PyMinimalMap {
    inner: MapEvaluator,
}

#[pymethods]
impl PyMinimalMap {
    #[new]
    #[pyo3(signature = (coeffs, lam = 2.0, angle = 0.0))]
    fn new(coeffs: Vec<Complex64>, lam: f64, angle: f64) -> PyResult<Self> {
        let poly = HolomorphicPoly::new(coeffs).map_err(to_py)?;
        Ok(Self { inner: MapEvaluator::new(poly, lam, mss2d::rotation_from_angle(angle)).map_err(to_py)? })
    }

    fn __call__(&self, x: [f64; 2]) -> PyResult<[f64; 2]> {
        self.inner.eval(x).map_err(to_py)
    }

    /// `sqrt(det g) g^{-1}` that the map must have everywhere.
    fn metric_density(&self) -> [[f64; 2]; 2] {
        mss2d::expected_metric_density(self.inner.lambda, &self.inner.rotation)
    }
}

/// Runs an experiment, writes its artifacts and returns `(passed, report_json)`.
#[pyfunction]
#[pyo3(signature = (experiment, out_dir, params = None))]
fn run_experiment(experiment: &str, out_dir: &str, params: Option<BTreeMap<String, String>>) -> PyResult<(bool, String)> {
    let mut cfg = RunConfig::new(Experiment::parse(experiment).map_err(to_py)?, out_dir);
    for (k, v) in params.unwrap_or_default() {
        cfg.set(&k, &v).map_err(to_py)?;
    }
    let r = report::run(&cfg).map_err(to_py)?;
    Ok((r.passed(), r.to_json().map_err(to_py)?))
}

#[pymodule]
fn bernstein_lab_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyLeaf>()?;
    m.add_class::<PyConeSpec>()?;
    m.add_class::<PyMinimalMap>()?;
    m.add_function(wrap_pyfunction!(simons_exponents, m)?)?;
    m.add_function(wrap_pyfunction!(rotate_eigenvalue, m)?)?;
    m.add_function(wrap_pyfunction!(rotate_hessian, m)?)?;
    m.add_function(wrap_pyfunction!(convexity_witness, m)?)?;
    m.add_function(wrap_pyfunction!(cone_slope, m)?)?;
    m.add_function(wrap_pyfunction!(cone_map_residual, m)?)?;
    m.add_function(wrap_pyfunction!(cone_map_metric, m)?)?;
    m.add_function(wrap_pyfunction!(lawson_osserman_report, m)?)?;
    m.add_function(wrap_pyfunction!(run_experiment, m)?)?;
    Ok(())
}
