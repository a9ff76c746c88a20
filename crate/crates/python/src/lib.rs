//! Python bindings. Grid values cross the boundary as flat row-major lists.

use std::path::PathBuf;

use pyo3::create_exception;
use pyo3::exceptions::PyException;
use pyo3::prelude::*;

use nlperim::certify::{first_variation_certificate, CertifyOptions};
use nlperim::grid::io::{load_nlpg1, save_nlpg1};
use nlperim::kernels::{check_positive_definite, Anisotropy};
use nlperim::perimeter::{j_functional, perimeter_set, relaxed_energy};
use nlperim::rearrange::isoperimetric_profile;
use nlperim::solver::{bathtub_argmax, minimize as solve, project_capped_simplex, Init, Method, SolverConfig};

create_exception!(nlperim, NlperimError, PyException);

fn err(e: nlperim::Error) -> PyErr {
    NlperimError::new_err(e.to_string())
}

fn parse_mode(mode: &str) -> PyResult<nlperim::Mode> {
    match mode {
        "free" => Ok(nlperim::Mode::Free),
        "periodic" => Ok(nlperim::Mode::Periodic),
        other => Err(NlperimError::new_err(format!("mode must be 'free' or 'periodic', got '{other}'"))),
    }
}

#[pyclass(name = "Grid", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyGrid(nlperim::GridSpec);

#[pymethods]
impl PyGrid {
    #[new]
    #[pyo3(signature = (dim, n, half_width, mode = "free"))]
    fn new(dim: usize, n: usize, half_width: f64, mode: &str) -> PyResult<Self> {
        nlperim::GridSpec::with_half_width(dim, n, half_width, parse_mode(mode)?)
            .map(PyGrid)
            .map_err(err)
    }

    #[getter]
    fn dim(&self) -> usize {
        self.0.dim()
    }

    #[getter]
    fn n(&self) -> usize {
        self.0.n()
    }

    #[getter]
    fn h(&self) -> f64 {
        self.0.h()
    }

    #[getter]
    fn half_width(&self) -> f64 {
        self.0.half_width()
    }

    #[getter]
    fn cells(&self) -> usize {
        self.0.cells()
    }

    /// Cell centers, one coordinate list per cell.
    fn centers(&self) -> Vec<Vec<f64>> {
        (0..self.0.cells()).map(|i| self.0.center(i)[..self.0.dim()].to_vec()).collect()
    }

    fn __repr__(&self) -> String {
        format!(
            "Grid(dim={}, n={}, half_width={}, mode='{}')",
            self.0.dim(),
            self.0.n(),
            self.0.half_width(),
            match self.0.mode() {
                nlperim::Mode::Free => "free",
                nlperim::Mode::Periodic => "periodic",
            }
        )
    }
}

#[pyclass(name = "Field", skip_from_py_object)]
#[derive(Clone)]
struct PyField(nlperim::Field);

#[pymethods]
impl PyField {
    #[new]
    fn new(grid: &PyGrid, values: Vec<f64>) -> PyResult<Self> {
        nlperim::Field::new(grid.0, values).map(PyField).map_err(err)
    }

    #[staticmethod]
    fn zeros(grid: &PyGrid) -> Self {
        PyField(nlperim::Field::zeros(grid.0))
    }

    /// Indicator of the ball of the given mass, centered at the origin.
    #[staticmethod]
    fn ball(grid: &PyGrid, mass: f64) -> PyResult<Self> {
        let center = vec![0.0; grid.0.dim()];
        nlperim::rearrange::ball_indicator(grid.0, mass, &center)
            .map(|b| PyField(b.field))
            .map_err(err)
    }

    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        load_nlpg1(path).map(PyField).map_err(err)
    }

    fn save(&self, path: PathBuf) -> PyResult<()> {
        save_nlpg1(&self.0, path).map_err(err)
    }

    #[getter]
    fn grid(&self) -> PyGrid {
        PyGrid(*self.0.grid())
    }

    #[getter]
    fn values(&self) -> Vec<f64> {
        self.0.values().to_vec()
    }

    #[getter]
    fn mass(&self) -> f64 {
        self.0.mass()
    }

    fn __len__(&self) -> usize {
        self.0.values().len()
    }
}

#[pyclass(name = "Kernel", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyKernel(nlperim::KernelSpec);

#[pymethods]
impl PyKernel {
    #[staticmethod]
    fn gaussian(dim: usize, sigma: f64) -> PyResult<Self> {
        nlperim::KernelSpec::gaussian(dim, sigma).map(PyKernel).map_err(err)
    }

    #[staticmethod]
    fn fractional(dim: usize, s: f64) -> PyResult<Self> {
        nlperim::KernelSpec::fractional(dim, s).map(PyKernel).map_err(err)
    }

    /// `|x|_p^{-N-s}`; `p = float('inf')` gives the max norm.
    #[staticmethod]
    fn anisotropic_fractional(dim: usize, s: f64, p: f64) -> PyResult<Self> {
        nlperim::KernelSpec::anisotropic_fractional(dim, s, Anisotropy::PNorm(p))
            .map(PyKernel)
            .map_err(err)
    }

    #[staticmethod]
    fn ball_indicator(dim: usize, mu: f64, r: f64) -> PyResult<Self> {
        nlperim::KernelSpec::ball_indicator(dim, mu, r).map(PyKernel).map_err(err)
    }

    #[staticmethod]
    fn annulus_indicator(dim: usize, mu: f64, inner: f64, outer: f64) -> PyResult<Self> {
        nlperim::KernelSpec::annulus_indicator(dim, mu, inner, outer)
            .map(PyKernel)
            .map_err(err)
    }

    /// `min(K, 1/eps)`.
    fn truncate(&self, eps: f64) -> PyResult<Self> {
        self.0.truncate(eps).map(PyKernel).map_err(err)
    }

    #[getter]
    fn singular(&self) -> bool {
        self.0.is_singular()
    }

    fn tabulate(&self, grid: &PyGrid) -> PyResult<PyTable> {
        self.0.tabulate(&grid.0).map(PyTable).map_err(err)
    }

    fn __repr__(&self) -> String {
        format!("Kernel({})", self.0.label())
    }
}

#[pyclass(name = "KernelTable", frozen)]
struct PyTable(nlperim::KernelTable);

#[pymethods]
impl PyTable {
    /// `‖K‖₁`, or `inf` for non-integrable kernels.
    #[getter]
    fn l1_norm(&self) -> f64 {
        self.0.l1_norm().finite().unwrap_or(f64::INFINITY)
    }

    #[getter]
    fn weight(&self) -> f64 {
        self.0.weight()
    }

    #[getter]
    fn grid(&self) -> PyGrid {
        PyGrid(*self.0.grid())
    }

    /// Fourier test on the periodic table; requires a periodic grid.
    fn is_positive_definite(&self) -> PyResult<bool> {
        check_positive_definite(&self.0).map(|r| r.is_pd).map_err(err)
    }

    fn __repr__(&self) -> String {
        format!("KernelTable({})", self.0.label())
    }
}

#[pyfunction]
fn perimeter(e: &PyField, k: &PyTable) -> PyResult<f64> {
    perimeter_set(&e.0, &k.0).map_err(err)
}

#[pyfunction]
fn energy(f: &PyField, k: &PyTable) -> PyResult<f64> {
    relaxed_energy(&f.0, &k.0).map_err(err)
}

#[pyfunction]
#[pyo3(signature = (u, k, thresholds = 256))]
fn j_value(u: &PyField, k: &PyTable, thresholds: usize) -> PyResult<f64> {
    j_functional(&u.0, &k.0, thresholds).map(|j| j.value).map_err(err)
}

#[pyfunction]
fn potential(f: &PyField, k: &PyTable) -> PyResult<PyField> {
    nlperim::grid::convolve(&f.0, &k.0).map(PyField).map_err(err)
}

/// `[(m, g(m))]` on the masses the lattice resolves.
#[pyfunction]
fn profile(k: &PyTable, masses: Vec<f64>) -> PyResult<Vec<(f64, f64)>> {
    let p = isoperimetric_profile(&k.0, &masses).map_err(err)?;
    Ok(p.masses.into_iter().zip(p.g_values).collect())
}

#[pyfunction]
fn project(g: &PyField, mass: f64) -> PyResult<PyField> {
    project_capped_simplex(&g.0, mass).map(PyField).map_err(err)
}

#[pyfunction]
fn bathtub(v: &PyField, mass: f64) -> PyResult<PyField> {
    bathtub_argmax(&v.0, mass).map(PyField).map_err(err)
}

#[pyclass(name = "Certificate", frozen, get_all)]
struct PyCertificate {
    c: f64,
    tol_v: f64,
    cells_s: usize,
    cells_n: usize,
    cells_i: usize,
    viol_s: Option<f64>,
    viol_n: Option<f64>,
    viol_i: Option<f64>,
    support_radius: f64,
    sv_max: f64,
    passed: bool,
}

impl From<nlperim::certify::Certificate> for PyCertificate {
    fn from(c: nlperim::certify::Certificate) -> Self {
        PyCertificate {
            c: c.c,
            tol_v: c.tol_v,
            cells_s: c.cells_s,
            cells_n: c.cells_n,
            cells_i: c.cells_i,
            viol_s: c.viol_s,
            viol_n: c.viol_n,
            viol_i: c.viol_i,
            support_radius: c.support_radius,
            sv_max: c.sv_max,
            passed: c.passed,
        }
    }
}

#[pymethods]
impl PyCertificate {
    fn __repr__(&self) -> String {
        format!("Certificate(c={:.6e}, passed={})", self.c, self.passed)
    }
}

#[pyfunction]
#[pyo3(signature = (f, k, tol_f = 1e-6, tol_v = None, trials = 32, seed = 0))]
fn certify(f: &PyField, k: &PyTable, tol_f: f64, tol_v: Option<f64>, trials: usize, seed: u64) -> PyResult<PyCertificate> {
    let opts = CertifyOptions { tol_f, tol_v, trials, seed };
    first_variation_certificate(&f.0, &k.0, &opts).map(Into::into).map_err(err)
}

#[pyclass(name = "Solution", frozen, get_all)]
struct PySolution {
    field: PyField,
    energy: f64,
    history: Vec<f64>,
    iterations: usize,
    converged: bool,
    best_of: usize,
    distance_to_ball: f64,
    certificate: Py<PyCertificate>,
}

#[pyfunction]
#[pyo3(signature = (k, mass, method = "fw", init = "ball", restarts = 8, max_iters = 500, stop_tol = 1e-10, seed = 0))]
#[allow(clippy::too_many_arguments)]
fn minimize(
    py: Python<'_>,
    k: &PyTable,
    mass: f64,
    method: &str,
    init: &str,
    restarts: usize,
    max_iters: usize,
    stop_tol: f64,
    seed: u64,
) -> PyResult<PySolution> {
    let mut cfg = SolverConfig::new(mass);
    cfg.method = Method::parse(method)
        .ok_or_else(|| NlperimError::new_err(format!("method must be 'pg' or 'fw', got '{method}'")))?;
    cfg.init = match init {
        "ball" => Init::Ball,
        "random" => Init::Random,
        other => return Err(NlperimError::new_err(format!("init must be 'ball' or 'random', got '{other}'"))),
    };
    cfg.restarts = restarts;
    cfg.max_iters = max_iters;
    cfg.stop_tol = stop_tol;
    cfg.seed = seed;
    cfg.certify.seed = seed;
    let r = py.detach(|| solve(&cfg, &k.0)).map_err(err)?;
    let distance_to_ball = r.distance_to_ball().map_err(err)?;
    Ok(PySolution {
        field: PyField(r.f),
        energy: r.energy,
        history: r.history,
        iterations: r.iterations,
        converged: r.converged,
        best_of: r.best_of,
        distance_to_ball,
        certificate: Py::new(py, PyCertificate::from(r.certificate))?,
    })
}

/// Runs a configuration file as the command-line tool would; returns
/// whether every invariant held.
#[pyfunction]
#[pyo3(signature = (path, seed = None))]
fn run_config(path: PathBuf, seed: Option<u64>) -> PyResult<bool> {
    let text = std::fs::read_to_string(&path).map_err(|e| err(e.into()))?;
    let base = path.parent().map(PathBuf::from).unwrap_or_default();
    let mut cfg = nlperim::config::parse_config(&text, &base).map_err(err)?;
    if let Some(s) = seed {
        cfg.set_seed(s);
    }
    nlperim::run::run(&cfg).map(|o| o.passed).map_err(err)
}

#[pymodule]
#[pyo3(name = "nlperim")]
fn nlperim_module(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("NlperimError", m.py().get_type::<NlperimError>())?;
    m.add_class::<PyGrid>()?;
    m.add_class::<PyField>()?;
    m.add_class::<PyKernel>()?;
    m.add_class::<PyTable>()?;
    m.add_class::<PyCertificate>()?;
    m.add_class::<PySolution>()?;
    m.add_function(wrap_pyfunction!(perimeter, m)?)?;
    m.add_function(wrap_pyfunction!(energy, m)?)?;
    m.add_function(wrap_pyfunction!(j_value, m)?)?;
    m.add_function(wrap_pyfunction!(potential, m)?)?;
    m.add_function(wrap_pyfunction!(profile, m)?)?;
    m.add_function(wrap_pyfunction!(project, m)?)?;
    m.add_function(wrap_pyfunction!(bathtub, m)?)?;
    m.add_function(wrap_pyfunction!(certify, m)?)?;
    m.add_function(wrap_pyfunction!(minimize, m)?)?;
    m.add_function(wrap_pyfunction!(run_config, m)?)?;
    Ok(())
}
