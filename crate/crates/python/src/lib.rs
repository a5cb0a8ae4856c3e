//! Python bindings for the asadmm solver: dataset construction, fused-lasso
//! problem assembly, reference computation, and the stochastic/deterministic
//! solver entry points.

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;

use asadmm::baselines::{ladmm_solve, LAdmmConfig, LadmmRunOptions};
use asadmm::bench::compute_reference;
use asadmm::io::{parse_libsvm, write_libsvm};
use asadmm::models;
use asadmm::problem::SaddleReference;
use asadmm::solver::{self, ScheduleConfig, SolverConfig, TimingMode};
use asadmm::{DenseVec, Sampler, SamplerConfig, SamplerMode};

fn to_py(e: asadmm::Error) -> PyErr {
    PyValueError::new_err(e.to_string())
}

/// Labeled dataset with ±1 labels.
#[pyclass(name = "Dataset", skip_from_py_object)]
#[derive(Clone)]
struct PyDataset {
    inner: models::Dataset,
}

#[pymethods]
impl PyDataset {
    /// Reproducible synthetic dataset with a planted sparse weight vector.
    #[staticmethod]
    #[pyo3(signature = (seed=7, n_samples=500, n_features=50, sparsity=0.1))]
    fn synthetic(seed: u64, n_samples: usize, n_features: usize, sparsity: f64) -> PyResult<Self> {
        let inst =
            models::synthetic_instance(seed, n_samples, n_features, sparsity).map_err(to_py)?;
        Ok(PyDataset {
            inner: inst.dataset,
        })
    }

    /// Parse a LIBSVM-format text file.
    #[staticmethod]
    fn load_libsvm(path: &str) -> PyResult<Self> {
        Ok(PyDataset {
            inner: parse_libsvm(std::path::Path::new(path)).map_err(to_py)?,
        })
    }

    fn save_libsvm(&self, path: &str) -> PyResult<()> {
        write_libsvm(&self.inner, std::path::Path::new(path)).map_err(to_py)
    }

    #[getter]
    fn n_samples(&self) -> usize {
        self.inner.n_samples()
    }

    #[getter]
    fn n_features(&self) -> usize {
        self.inner.n_features()
    }

    fn labels(&self) -> Vec<f64> {
        self.inner.labels().to_vec()
    }
}

/// A fused-lasso problem instance ready to solve.
#[pyclass(name = "Problem")]
struct PyProblem {
    inner: asadmm::ProblemSpec,
}

#[pymethods]
impl PyProblem {
    /// Assemble the graph-guided fused lasso split. With `stacked_graph`,
    /// the penalty matrix stacks thresholded-correlation difference rows
    /// over the identity; otherwise it is the identity.
    #[staticmethod]
    #[pyo3(signature = (dataset, mu=1e-5, stacked_graph=false, corr_threshold=0.3))]
    fn ggfl(
        dataset: &PyDataset,
        mu: f64,
        stacked_graph: bool,
        corr_threshold: f64,
    ) -> PyResult<Self> {
        let model = if stacked_graph {
            let g = models::build_graph_g(&dataset.inner, corr_threshold).map_err(to_py)?;
            models::GgflModel::stacked(dataset.inner.clone(), mu, g)
        } else {
            models::GgflModel::identity(dataset.inner.clone(), mu)
        };
        Ok(PyProblem {
            inner: models::build_ggfl(&model).map_err(to_py)?,
        })
    }

    #[getter]
    fn dim_x(&self) -> usize {
        self.inner.dim_x()
    }

    #[getter]
    fn dim_y(&self) -> usize {
        self.inner.dim_y()
    }

    #[getter]
    fn n_components(&self) -> usize {
        self.inner.n_components()
    }

    #[getter]
    fn lipschitz_nu(&self) -> f64 {
        self.inner.lipschitz_nu()
    }

    fn objective(&self, x: Vec<f64>, y: Vec<f64>) -> f64 {
        self.inner
            .objective_value(&DenseVec::from_vec(x), &DenseVec::from_vec(y))
    }
}

/// Reference solution used for error reporting.
#[pyclass(name = "Reference", skip_from_py_object)]
#[derive(Clone)]
struct PyReference {
    inner: SaddleReference,
}

#[pymethods]
impl PyReference {
    #[getter]
    fn f_star(&self) -> f64 {
        self.inner.f_star
    }

    fn x_star(&self) -> Vec<f64> {
        self.inner.x_star.as_slice().to_vec()
    }

    fn y_star(&self) -> Vec<f64> {
        self.inner.y_star.as_slice().to_vec()
    }
}

/// Outcome of one solver run.
#[pyclass(name = "RunResult")]
struct PyRunResult {
    x: Vec<f64>,
    y: Vec<f64>,
    ergodic_x: Vec<f64>,
    ergodic_y: Vec<f64>,
    converged: bool,
    grad_components: u64,
    trace: Vec<(usize, f64, f64, f64, u64, f64, bool)>,
}

#[pymethods]
impl PyRunResult {
    fn x(&self) -> Vec<f64> {
        self.x.clone()
    }

    fn y(&self) -> Vec<f64> {
        self.y.clone()
    }

    fn ergodic_x(&self) -> Vec<f64> {
        self.ergodic_x.clone()
    }

    fn ergodic_y(&self) -> Vec<f64> {
        self.ergodic_y.clone()
    }

    #[getter]
    fn converged(&self) -> bool {
        self.converged
    }

    #[getter]
    fn grad_components(&self) -> u64 {
        self.grad_components
    }

    /// Trace rows as `(k, obj_err, equ_err, opt_err, grad_components,
    /// wall_seconds, ergodic_flag)` tuples.
    fn trace(&self) -> Vec<(usize, f64, f64, f64, u64, f64, bool)> {
        self.trace.clone()
    }

    /// The last recorded optimality error (ergodic when available).
    fn final_opt_err(&self) -> Option<f64> {
        self.trace
            .iter()
            .rev()
            .find(|r| r.6)
            .or_else(|| self.trace.last())
            .map(|r| r.3)
    }
}

fn pack_result(result: solver::SolveResult) -> PyRunResult {
    PyRunResult {
        x: result.state.x.as_slice().to_vec(),
        y: result.state.y.as_slice().to_vec(),
        ergodic_x: result.ergodic_x.as_slice().to_vec(),
        ergodic_y: result.ergodic_y.as_slice().to_vec(),
        converged: result.converged,
        grad_components: result.diagnostics.grad_components,
        trace: result
            .trace
            .into_iter()
            .map(|r| {
                (
                    r.k,
                    r.obj_err,
                    r.equ_err,
                    r.opt_err,
                    r.grad_components,
                    r.wall_seconds,
                    r.ergodic_flag,
                )
            })
            .collect(),
    }
}

fn parse_mode(mode: &str) -> PyResult<SamplerMode> {
    match mode {
        "plain" => Ok(SamplerMode::Plain),
        "svrg-anchor" => Ok(SamplerMode::SvrgAnchor),
        "minibatch" => Ok(SamplerMode::Minibatch),
        other => Err(PyValueError::new_err(format!(
            "unknown sampler mode `{other}` (expected plain, svrg-anchor, or minibatch)"
        ))),
    }
}

/// High-accuracy reference via a long deterministic run.
#[pyfunction]
#[pyo3(signature = (problem, budget=4000))]
fn reference(problem: &PyProblem, budget: usize) -> PyResult<PyReference> {
    Ok(PyReference {
        inner: compute_reference(&problem.inner, budget).map_err(to_py)?,
    })
}

/// Run the accelerated stochastic solver with the reference parameter
/// profile (power schedule, adaptive proximal coefficient, exact y-prox).
#[pyfunction]
#[pyo3(signature = (problem, reference=None, seed=0, max_outer=200, m_floor=20, mode="svrg-anchor"))]
fn solve_as_admm(
    problem: &PyProblem,
    reference: Option<&PyReference>,
    seed: u64,
    max_outer: usize,
    m_floor: usize,
    mode: &str,
) -> PyResult<PyRunResult> {
    let p = &problem.inner;
    let mut cfg = SolverConfig::paper_defaults(p).map_err(to_py)?;
    cfg.schedule = ScheduleConfig::paper_power(p.lipschitz_nu(), m_floor);
    cfg.max_outer = max_outer;
    cfg.timing = TimingMode::Modeled {
        seconds_per_component: 1e-8,
    };
    let sampler_cfg = SamplerConfig {
        mode: parse_mode(mode)?,
        rng_seed: seed,
        batch_c: 1.0,
        batch_rho: 1.1,
        anchor_threshold: p.dim_x(),
    };
    let sampler = Sampler::new(sampler_cfg).map_err(to_py)?;
    let result = solver::solve(p, &cfg, sampler, reference.map(|r| &r.inner)).map_err(to_py)?;
    Ok(pack_result(result))
}

/// Run the linearized-ADMM baseline.
#[pyfunction]
#[pyo3(signature = (problem, reference=None, max_outer=200))]
fn solve_ladmm(
    problem: &PyProblem,
    reference: Option<&PyReference>,
    max_outer: usize,
) -> PyResult<PyRunResult> {
    let p = &problem.inner;
    let cfg = LAdmmConfig::from_problem(p, 0.04);
    let opts = LadmmRunOptions {
        max_outer,
        obj_tol: 0.0,
        timing: TimingMode::Modeled {
            seconds_per_component: 1e-8,
        },
        wall_budget_secs: None,
    };
    let result = ladmm_solve(p, &cfg, &opts, reference.map(|r| &r.inner)).map_err(to_py)?;
    Ok(pack_result(result))
}

/// Componentwise soft shrinkage `sign(v) * max(|v| - kappa, 0)`.
#[pyfunction]
fn soft_shrink(kappa: f64, values: Vec<f64>) -> PyResult<Vec<f64>> {
    if kappa < 0.0 {
        return Err(PyValueError::new_err("kappa must be nonnegative"));
    }
    Ok(models::soft_shrink(kappa, &DenseVec::from_vec(values))
        .as_slice()
        .to_vec())
}

#[pymodule]
fn _asadmm(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyDataset>()?;
    m.add_class::<PyProblem>()?;
    m.add_class::<PyReference>()?;
    m.add_class::<PyRunResult>()?;
    m.add_function(wrap_pyfunction!(reference, m)?)?;
    m.add_function(wrap_pyfunction!(solve_as_admm, m)?)?;
    m.add_function(wrap_pyfunction!(solve_ladmm, m)?)?;
    m.add_function(wrap_pyfunction!(soft_shrink, m)?)?;
    Ok(())
}
