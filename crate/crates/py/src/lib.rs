//! Python bindings: model manifolds, growth estimates, radial and grid
//! solvers, and the theorem checks.

use pyo3::create_exception;
use pyo3::exceptions::PyException;
use pyo3::prelude::*;
use pyo3::types::PyDict;
use serde::Serialize;

use mcmp_core::coercive::{self, CoerciveMap, Nonlinearity};
use mcmp_core::geometry::{self as geo, GrowthCondition, GrowthEstimate, ManifoldSpec, RadiusSchedule, WeightedModel};
use mcmp_core::grid::{self, CellLabel, GridEquation};
use mcmp_core::radial::{self, RadialEquation, RadialProblem, SolveStatus};
use mcmp_core::verify::{self, CheckOptions, FlowField, FlowParams, LowerBoundParams, SolutionRef};
use mcmp_core::{Error, RadialFn};

create_exception!(mcmp, McmpError, PyException, "Numerical or parameter failure in mcmp.");
create_exception!(mcmp, HypothesisError, McmpError, "A theorem hypothesis does not hold for the given data.");

fn err(e: Error) -> PyErr {
    match e {
        Error::Hypothesis { .. } => HypothesisError::new_err(e.to_string()),
        _ => McmpError::new_err(e.to_string()),
    }
}

/// Serde value to Python objects through the `json` module.
fn to_py<'py, T: Serialize>(py: Python<'py>, v: &T) -> PyResult<Bound<'py, PyAny>> {
    let text = serde_json::to_string(v).map_err(|e| McmpError::new_err(e.to_string()))?;
    py.import("json")?.call_method1("loads", (text,))
}

#[pyclass(name = "ModelManifold", module = "mcmp", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyManifold(geo::ModelManifold);

#[pymethods]
impl PyManifold {
    #[staticmethod]
    fn euclidean(dim: usize) -> Self {
        PyManifold(geo::ModelManifold::euclidean(dim))
    }

    #[staticmethod]
    fn hyperbolic(dim: usize) -> Self {
        PyManifold(geo::ModelManifold::hyperbolic(dim))
    }

    /// `{"dim": m, "warping": {"kind": ..., "params": ...}, "r_max": ...}`
    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        let spec: ManifoldSpec = serde_json::from_str(text).map_err(|e| McmpError::new_err(e.to_string()))?;
        geo::ModelManifold::from_spec(&spec).map(PyManifold).map_err(err)
    }

    fn to_json(&self) -> PyResult<String> {
        serde_json::to_string(&self.0.spec()).map_err(|e| McmpError::new_err(e.to_string()))
    }

    #[getter]
    fn dim(&self) -> usize {
        self.0.dim()
    }

    /// `(g, g', g'')` at `r`.
    fn warping(&self, r: f64) -> PyResult<(f64, f64, f64)> {
        self.0.warping_eval(r).map_err(err)
    }

    #[pyo3(signature = (radius, weight=None))]
    fn ball_volume(&self, radius: f64, weight: Option<&PyWeight>) -> PyResult<f64> {
        self.0.ball_volume(radius, weight.map(|w| &w.0)).map_err(err)
    }

    #[pyo3(signature = (radii, weight=None))]
    fn log_ball_volumes(&self, radii: Vec<f64>, weight: Option<&PyWeight>) -> PyResult<Vec<f64>> {
        self.0.log_ball_volumes(&radii, weight.map(|w| &w.0)).map_err(err)
    }

    fn __repr__(&self) -> String {
        format!("ModelManifold({})", self.to_json().unwrap_or_default())
    }
}

#[pyclass(name = "Weight", module = "mcmp", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyWeight(mcmp_core::Weight);

#[pymethods]
impl PyWeight {
    #[staticmethod]
    fn unit() -> Self {
        PyWeight(mcmp_core::Weight::unit())
    }

    /// `w = cosh r`.
    #[staticmethod]
    fn cosh() -> Self {
        PyWeight(mcmp_core::Weight::cosh())
    }

    /// Density `w(r)` from a radial function spec such as
    /// `{"kind": "exp_decay", "params": {"scale": 1, "rate": 1}}`.
    #[staticmethod]
    fn from_density_json(text: &str) -> PyResult<Self> {
        let f: RadialFn = serde_json::from_str(text).map_err(|e| McmpError::new_err(e.to_string()))?;
        f.validate().map_err(err)?;
        Ok(PyWeight(mcmp_core::Weight::from_density(f)))
    }

    fn w(&self, r: f64) -> f64 {
        self.0.w(r)
    }
}

/// Estimates `c_μ` (or `c^w_μ` with a weight) on a geometric schedule.
#[pyfunction]
#[pyo3(signature = (manifold, mu, radii=None, weight=None))]
fn estimate_c_mu<'py>(
    py: Python<'py>,
    manifold: &PyManifold,
    mu: f64,
    radii: Option<Vec<f64>>,
    weight: Option<&PyWeight>,
) -> PyResult<Bound<'py, PyDict>> {
    let sched = match radii {
        Some(r) => RadiusSchedule::new(r).map_err(err)?,
        None => RadiusSchedule::default_for(mu),
    };
    let src = WeightedModel { manifold: &manifold.0, weight: weight.map(|w| &w.0) };
    let e = py.detach(|| geo::estimate_c_mu(&src, mu, &sched)).map_err(err)?;
    let d = PyDict::new(py);
    d.set_item("mu", e.mu)?;
    d.set_item("value", e.value)?;
    d.set_item("converged", e.converged)?;
    let window: Vec<(f64, f64, Option<f64>)> = e.window.iter().map(|s| (s.radius, s.statistic, s.tail_inf)).collect();
    d.set_item("window", window)?;
    Ok(d)
}

#[pyfunction]
fn c_mu_bound_from_ricci(dim: usize, alpha: f64, b: f64, mu: f64) -> PyResult<f64> {
    Ok(geo::c_mu_bound_from_ricci(dim, &geo::RicciProfile::new(alpha, b).map_err(err)?, mu))
}

#[pyclass(name = "RadialSolution", module = "mcmp", frozen)]
struct PyRadialSolution(radial::RadialSolution);

#[pymethods]
impl PyRadialSolution {
    #[getter]
    fn r(&self) -> Vec<f64> {
        self.0.grid.clone()
    }

    #[getter]
    fn u(&self) -> Vec<f64> {
        self.0.u.clone()
    }

    #[getter]
    fn du(&self) -> Vec<f64> {
        self.0.du.clone()
    }

    #[getter]
    fn flux(&self) -> Vec<f64> {
        self.0.flux.clone()
    }

    #[getter]
    fn q(&self) -> Vec<f64> {
        self.0.q.clone()
    }

    /// `"complete"`, `"blowup"` or `"tolerance_fail"`.
    #[getter]
    fn status(&self) -> String {
        self.0.summary().status
    }

    #[getter]
    fn r_star(&self) -> Option<f64> {
        self.0.r_star()
    }

    #[getter]
    fn residual_norm(&self) -> f64 {
        self.0.residual_norm
    }

    fn sup_abs_u(&self) -> f64 {
        self.0.sup_abs_u()
    }

    /// `(u, u', flux)` at `r` from the dense output.
    fn eval(&self, r: f64) -> PyResult<(f64, f64, f64)> {
        self.0.eval(r).map_err(err)
    }

    fn to_csv(&self) -> String {
        self.0.to_csv()
    }

    fn __repr__(&self) -> String {
        match self.0.status {
            SolveStatus::Blowup { r_star } => format!("RadialSolution(blowup at r = {r_star})"),
            _ => format!("RadialSolution({}, r_end = {})", self.status(), self.0.r_end()),
        }
    }
}

#[pyfunction]
#[pyo3(signature = (manifold, b, u0, r_max, tol=1e-10))]
fn shoot_capillary(py: Python<'_>, manifold: &PyManifold, b: f64, u0: f64, r_max: f64, tol: f64) -> PyResult<PyRadialSolution> {
    let p = RadialProblem::shoot(manifold.0.clone(), RadialEquation::capillary(b), u0, r_max);
    py.detach(|| radial::shoot_capillary(&p, r_max, tol)).map(PyRadialSolution).map_err(err)
}

/// Constant mean curvature `H` (equidistant graph when a weight is given).
#[pyfunction]
#[pyo3(signature = (manifold, h, r_max, u0=0.0, weight=None))]
fn shoot_cmc(py: Python<'_>, manifold: &PyManifold, h: f64, r_max: f64, u0: f64, weight: Option<&PyWeight>) -> PyResult<PyRadialSolution> {
    let eq = match weight {
        Some(w) => RadialEquation::equidistant(w.0.clone(), h),
        None => RadialEquation::pmc(h),
    };
    let p = RadialProblem::shoot(manifold.0.clone(), eq, u0, r_max);
    py.detach(|| radial::shoot_cmc(&p, r_max)).map(PyRadialSolution).map_err(err)
}

/// Capillary Dirichlet problem on a ball, or on an annulus when `r_in` is given.
#[pyfunction]
#[pyo3(signature = (manifold, b, radius, boundary, tol=1e-10, r_in=None, inner=None))]
#[allow(clippy::too_many_arguments)]
fn solve_capillary_bvp(
    py: Python<'_>,
    manifold: &PyManifold,
    b: f64,
    radius: f64,
    boundary: f64,
    tol: f64,
    r_in: Option<f64>,
    inner: Option<f64>,
) -> PyResult<PyRadialSolution> {
    let eq = RadialEquation::capillary(b);
    let p = match (r_in, inner) {
        (Some(r0), Some(a)) => RadialProblem::annulus(manifold.0.clone(), eq, r0, radius, a, boundary),
        (None, None) => RadialProblem::ball(manifold.0.clone(), eq, radius, boundary),
        _ => return Err(McmpError::new_err("r_in and inner must be given together")),
    };
    py.detach(|| radial::solve_capillary_bvp(&p, tol)).map(PyRadialSolution).map_err(err)
}

#[pyfunction]
#[pyo3(signature = (manifold, h, weight=None, r_cap=40.0))]
fn max_graph_radius(py: Python<'_>, manifold: &PyManifold, h: f64, weight: Option<&PyWeight>, r_cap: f64) -> PyResult<f64> {
    py.detach(|| radial::max_graph_radius(&manifold.0, h, weight.map(|w| &w.0), r_cap)).map_err(err)
}

/// Bracket `{lo, hi, estimate, probes}` around the critical curvature.
#[pyfunction]
#[pyo3(signature = (manifold, weight=None, r_cap=40.0, tol=1e-3))]
fn critical_h<'py>(py: Python<'py>, manifold: &PyManifold, weight: Option<&PyWeight>, r_cap: f64, tol: f64) -> PyResult<Bound<'py, PyAny>> {
    let c = py.detach(|| radial::critical_h(&manifold.0, weight.map(|w| &w.0), r_cap, tol)).map_err(err)?;
    to_py(py, &c)
}

#[pyclass(name = "GridDomain", module = "mcmp", skip_from_py_object)]
#[derive(Clone)]
struct PyGridDomain(grid::GridDomain);

#[pymethods]
impl PyGridDomain {
    #[staticmethod]
    fn unit_square(n: usize) -> PyResult<Self> {
        grid::GridDomain::unit_square(n).map(PyGridDomain).map_err(err)
    }

    #[staticmethod]
    fn disk(n: usize, radius: f64) -> PyResult<Self> {
        grid::GridDomain::disk(n, radius).map(PyGridDomain).map_err(err)
    }

    #[staticmethod]
    fn rectangle(nx: usize, ny: usize, spacing: f64, origin: (f64, f64)) -> PyResult<Self> {
        grid::GridDomain::rectangle(nx, ny, spacing, [origin.0, origin.1]).map(PyGridDomain).map_err(err)
    }

    #[getter]
    fn nx(&self) -> usize {
        self.0.nx
    }

    #[getter]
    fn ny(&self) -> usize {
        self.0.ny
    }

    #[getter]
    fn spacing(&self) -> f64 {
        self.0.spacing
    }

    fn __len__(&self) -> usize {
        self.0.len()
    }

    /// Cell centres in row-major order.
    fn positions(&self) -> Vec<(f64, f64)> {
        (0..self.0.len()).map(|k| self.0.position(k)).map(|[x, y]| (x, y)).collect()
    }

    /// 0 outside, 1 boundary, 2 interior.
    fn labels(&self) -> Vec<u8> {
        self.0
            .mask
            .iter()
            .map(|l| match l {
                CellLabel::Outside => 0,
                CellLabel::Boundary => 1,
                CellLabel::Interior => 2,
            })
            .collect()
    }

    fn interior_cells(&self) -> Vec<usize> {
        self.0.interior_cells()
    }

    fn boundary_cells(&self) -> Vec<usize> {
        self.0.boundary_cells()
    }

    /// Dirichlet data for every cell (only boundary entries are read).
    fn set_boundary(&mut self, values: Vec<f64>) -> PyResult<()> {
        if values.len() != self.0.len() {
            return Err(McmpError::new_err(format!("expected {} values, got {}", self.0.len(), values.len())));
        }
        self.0.boundary_data = values;
        Ok(())
    }

    #[getter]
    fn boundary_data(&self) -> Vec<f64> {
        self.0.boundary_data.clone()
    }
}

#[pyclass(name = "GridSolution", module = "mcmp", frozen)]
struct PyGridSolution {
    sol: grid::GridSolution,
    sup_abs: f64,
}

#[pymethods]
impl PyGridSolution {
    #[getter]
    fn u(&self) -> Vec<f64> {
        self.sol.u.clone()
    }

    #[getter]
    fn converged(&self) -> bool {
        self.sol.converged
    }

    #[getter]
    fn residual_norm(&self) -> f64 {
        self.sol.residual_norm
    }

    #[getter]
    fn newton_iters(&self) -> usize {
        self.sol.newton_iters
    }

    #[getter]
    fn failure(&self) -> Option<String> {
        self.sol.failure.clone()
    }

    fn sup_abs(&self) -> f64 {
        self.sup_abs
    }
}

fn grid_equation(equation: &str, coefficient: f64) -> PyResult<GridEquation> {
    match equation {
        "capillary" => Ok(GridEquation::capillary(coefficient)),
        "pmc" => Ok(GridEquation::pmc(coefficient)),
        other => Err(McmpError::new_err(format!("unknown equation {other:?}; expected \"capillary\" or \"pmc\""))),
    }
}

/// Damped Newton solve of `div(∇u/W) = b u` (`"capillary"`) or `= 2H` (`"pmc"`).
#[pyfunction]
#[pyo3(signature = (domain, equation="capillary", coefficient=1.0, tol=1e-10, max_iters=50))]
fn grid_solve(py: Python<'_>, domain: &PyGridDomain, equation: &str, coefficient: f64, tol: f64, max_iters: usize) -> PyResult<PyGridSolution> {
    let eq = grid_equation(equation, coefficient)?;
    let d = &domain.0;
    let sol = py.detach(|| grid::newton_solve(d, &eq, tol, max_iters)).map_err(err)?;
    let sup_abs = sol.sup_abs(d);
    Ok(PyGridSolution { sol, sup_abs })
}

#[pyfunction]
#[pyo3(signature = (domain, data_u, data_v, b=1.0, tol=1e-10))]
fn comparison_experiment<'py>(
    py: Python<'py>,
    domain: &PyGridDomain,
    data_u: Vec<f64>,
    data_v: Vec<f64>,
    b: f64,
    tol: f64,
) -> PyResult<Bound<'py, PyAny>> {
    let d = &domain.0;
    let r = py.detach(|| grid::comparison_experiment(d, &data_u, &data_v, &GridEquation::capillary(b), tol)).map_err(err)?;
    to_py(py, &r)
}

/// `(lhs, rhs, gap)` of the strict monotonicity inequality of `v/√(1+|v|²)`.
#[pyfunction]
fn miklyukov_gap(xi: Vec<f64>, eta: Vec<f64>) -> PyResult<(f64, f64, f64)> {
    let g = coercive::miklyukov_gap(&xi, &eta).map_err(err)?;
    Ok((g.lhs, g.rhs, g.gap))
}

/// Sampled `wc1–wc3` check of the mean curvature map.
#[pyfunction]
#[pyo3(signature = (dim, samples=10000, seed=0))]
fn check_weak_coercivity<'py>(py: Python<'py>, dim: usize, samples: usize, seed: u64) -> PyResult<Bound<'py, PyAny>> {
    let r = py.detach(|| coercive::check_weak_coercivity(&CoerciveMap::mean_curvature(), dim, samples, seed)).map_err(err)?;
    to_py(py, &r)
}

fn nonfinite_safe(v: f64) -> Option<f64> {
    v.is_finite().then_some(v)
}

/// Maximum principle check on a radial capillary solution with `f = id`,
/// `b ≡ beta` and `c_0 = 0`; returns the theorem report.
#[pyfunction]
#[pyo3(signature = (solution, beta, boundary_sup=None))]
fn check_theorem_a1w<'py>(py: Python<'py>, solution: &PyRadialSolution, beta: f64, boundary_sup: Option<f64>) -> PyResult<Bound<'py, PyAny>> {
    let r = verify::check_theorem_a1w(
        SolutionRef::Radial(&solution.0),
        &CoerciveMap::mean_curvature(),
        &GrowthCondition::constant(beta),
        &Nonlinearity::identity(),
        &GrowthEstimate::exact(0.0, 0.0),
        boundary_sup,
        &CheckOptions::default(),
    )
    .map_err(err)?;
    let out = to_py(py, &r)?;
    out.set_item("claimed_bound", nonfinite_safe(r.claimed_bound).unwrap_or(f64::INFINITY))?;
    Ok(out)
}

/// Comparison bound for two fields with slope `alpha` of `f`, `b ≡ beta`
/// and growth `c_0 = growth`.
#[pyfunction]
#[pyo3(signature = (u, v, beta, alpha=1.0, growth=0.0, boundary_sup=None))]
fn check_comparison<'py>(
    py: Python<'py>,
    u: Vec<f64>,
    v: Vec<f64>,
    beta: f64,
    alpha: f64,
    growth: f64,
    boundary_sup: Option<f64>,
) -> PyResult<Bound<'py, PyAny>> {
    let r = verify::check_comparison(
        &u,
        &v,
        &CoerciveMap::mean_curvature(),
        &GrowthCondition::constant(beta),
        alpha,
        &GrowthEstimate::exact(0.0, growth),
        boundary_sup,
        &CheckOptions::default(),
    )
    .map_err(err)?;
    to_py(py, &r)
}

fn flow_params(center: Vec<f64>, delta: f64, t_end: f64, steps: usize, particles: usize, seed: u64) -> FlowParams {
    FlowParams { center, delta, t_end, steps, particles, seed, lower_bound: None }
}

/// Transports `B_δ(center)` along `X = A x` (row-major `A`); returns the trace.
#[pyfunction]
#[pyo3(signature = (matrix, center, delta, t_end, steps=10, particles=10000, seed=0))]
#[allow(clippy::too_many_arguments)]
fn replay_linear_flow<'py>(
    py: Python<'py>,
    matrix: Vec<f64>,
    center: Vec<f64>,
    delta: f64,
    t_end: f64,
    steps: usize,
    particles: usize,
    seed: u64,
) -> PyResult<Bound<'py, PyAny>> {
    let field = FlowField::linear(center.len(), matrix).map_err(err)?;
    let p = flow_params(center, delta, t_end, steps, particles, seed);
    let tr = py.detach(|| verify::replay_flow(&field, &p)).map_err(err)?;
    to_py(py, &tr)
}

/// Transports `B_δ(center)` along `∇u/W` of a radial capillary solution and
/// compares with the volume lower bound (`c* = u(|p| − δ)`, `β* = 0.99 b`).
#[pyfunction]
#[pyo3(signature = (solution, center, delta, t_end, steps=10, particles=10000, seed=0))]
#[allow(clippy::too_many_arguments)]
fn replay_capillary_flow<'py>(
    py: Python<'py>,
    solution: &PyRadialSolution,
    center: Vec<f64>,
    delta: f64,
    t_end: f64,
    steps: usize,
    particles: usize,
    seed: u64,
) -> PyResult<Bound<'py, PyAny>> {
    let b = match solution.0.equation() {
        RadialEquation::Capillary { b } if b.is_constant() => b.value(0.0),
        _ => return Err(McmpError::new_err("needs a capillary solution with constant b")),
    };
    let field = FlowField::from_radial(&solution.0).map_err(err)?;
    let rp = center.iter().map(|c| c * c).sum::<f64>().sqrt();
    let c_star = solution.0.eval((rp - delta).max(0.0)).map_err(err)?.0;
    let mut p = flow_params(center, delta, t_end, steps, particles, seed);
    p.lower_bound = Some(LowerBoundParams { c_star, epsilon: 0.0, beta_star: 0.99 * b, mu: 0.0, r0: 0.0 });
    let tr = py.detach(|| verify::replay_flow(&field, &p)).map_err(err)?;
    to_py(py, &tr)
}

#[pymodule]
pub fn mcmp(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("McmpError", m.py().get_type::<McmpError>())?;
    m.add("HypothesisError", m.py().get_type::<HypothesisError>())?;
    m.add_class::<PyManifold>()?;
    m.add_class::<PyWeight>()?;
    m.add_class::<PyRadialSolution>()?;
    m.add_class::<PyGridDomain>()?;
    m.add_class::<PyGridSolution>()?;
    m.add_function(wrap_pyfunction!(estimate_c_mu, m)?)?;
    m.add_function(wrap_pyfunction!(c_mu_bound_from_ricci, m)?)?;
    m.add_function(wrap_pyfunction!(shoot_capillary, m)?)?;
    m.add_function(wrap_pyfunction!(shoot_cmc, m)?)?;
    m.add_function(wrap_pyfunction!(solve_capillary_bvp, m)?)?;
    m.add_function(wrap_pyfunction!(max_graph_radius, m)?)?;
    m.add_function(wrap_pyfunction!(critical_h, m)?)?;
    m.add_function(wrap_pyfunction!(grid_solve, m)?)?;
    m.add_function(wrap_pyfunction!(comparison_experiment, m)?)?;
    m.add_function(wrap_pyfunction!(miklyukov_gap, m)?)?;
    m.add_function(wrap_pyfunction!(check_weak_coercivity, m)?)?;
    m.add_function(wrap_pyfunction!(check_theorem_a1w, m)?)?;
    m.add_function(wrap_pyfunction!(check_comparison, m)?)?;
    m.add_function(wrap_pyfunction!(replay_linear_flow, m)?)?;
    m.add_function(wrap_pyfunction!(replay_capillary_flow, m)?)?;
    Ok(())
}
