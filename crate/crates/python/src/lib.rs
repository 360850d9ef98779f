//! Python bindings for the sigmin kernels and optimisers.

use std::sync::{Arc, Mutex};

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use sigmin::denoise::{denoise_closed_form, denoised_image, DenoiseProblem};
use sigmin::linalg::{svd_cross, svd_lanczos, SvdFactors};
use sigmin::neighbors::KdTree;
use sigmin::optim::{minimize as run_minimize, Method, ObjectiveProblem, OptimiserSpec, RunReport};
use sigmin::rbf::{grid_problem, objective_problem};
use sigmin::{DenseMatrix, Point2};

fn py_err(e: sigmin::Error) -> PyErr {
    match e {
        sigmin::Error::Argument(_) | sigmin::Error::Config(_) | sigmin::Error::UnsupportedConstraints { .. } => {
            PyValueError::new_err(e.to_string())
        }
        _ => PyRuntimeError::new_err(e.to_string()),
    }
}

fn matrix(rows: Vec<Vec<f64>>) -> PyResult<DenseMatrix> {
    DenseMatrix::from_rows(&rows).map_err(py_err)
}

fn rows(m: &DenseMatrix) -> Vec<Vec<f64>> {
    (0..m.rows()).map(|i| m.row(i).to_vec()).collect()
}

fn report_dict<'py>(py: Python<'py>, r: &RunReport) -> PyResult<Bound<'py, PyDict>> {
    let d = PyDict::new(py);
    d.set_item("method", &r.method)?;
    d.set_item("x", r.best_x.clone())?;
    d.set_item("f", r.best_f)?;
    d.set_item("evaluations", r.functional_count)?;
    d.set_item("elapsed_seconds", r.elapsed_seconds)?;
    d.set_item("converged", r.converged)?;
    d.set_item("feasible", r.feasible)?;
    d.set_item("trace", r.trace.clone())?;
    Ok(d)
}

/// k nearest points for each query as `(index, distance)` lists, nearest first.
#[pyfunction]
#[pyo3(signature = (points, queries, k, threads = 1))]
fn knn(py: Python<'_>, points: Vec<Point2>, queries: Vec<Point2>, k: usize, threads: usize) -> PyResult<Vec<Vec<(usize, f64)>>> {
    py.detach(|| {
        let tree = KdTree::build(&points)?;
        tree.knn_batch(&queries, k, threads)
    })
    .map_err(py_err)
}

/// Leading `nsv` singular triples `(U, s, V)` of a dense matrix.
#[pyfunction]
#[pyo3(signature = (a, nsv, method = "lanczos", tol = 1e-6, threads = 1))]
fn svd(
    py: Python<'_>,
    a: Vec<Vec<f64>>,
    nsv: usize,
    method: &str,
    tol: f64,
    threads: usize,
) -> PyResult<(Vec<Vec<f64>>, Vec<f64>, Vec<Vec<f64>>)> {
    let a = matrix(a)?;
    let f: SvdFactors = py
        .detach(|| match method {
            "cross" => svd_cross(&a, nsv, tol, threads),
            "lanczos" => svd_lanczos(&a, nsv, tol, threads),
            _ => Err(sigmin::Error::Argument(format!("unknown SVD method {method:?}"))),
        })
        .map_err(py_err)?;
    Ok((rows(&f.u), f.s, rows(&f.v)))
}

/// Closed-form shrinkage thresholds and the denoised image for `nsv` triples.
#[pyfunction]
#[pyo3(signature = (image, nsv, alpha, threads = 1))]
fn denoise(
    py: Python<'_>,
    image: Vec<Vec<f64>>,
    nsv: usize,
    alpha: f64,
    threads: usize,
) -> PyResult<(Vec<f64>, Vec<Vec<f64>>)> {
    let img = matrix(image)?;
    let (mu, out) = py
        .detach(|| {
            let p = DenoiseProblem::new(img, nsv, alpha, threads)?;
            let mu = denoise_closed_form(&p);
            let out = denoised_image(&mu, &p)?;
            Ok::<_, sigmin::Error>((mu, out))
        })
        .map_err(py_err)?;
    Ok((mu, rows(&out)))
}

/// Minimise a Python callable `f(x) -> float` inside box bounds.
#[pyfunction]
#[pyo3(signature = (f, bounds, method = "direct_l", budget = 1000, seed = 0, x0 = None))]
fn minimize<'py>(
    py: Python<'py>,
    f: Py<PyAny>,
    bounds: Vec<[f64; 2]>,
    method: &str,
    budget: usize,
    seed: u64,
    x0: Option<Vec<f64>>,
) -> PyResult<Bound<'py, PyDict>> {
    let method: Method = method.parse().map_err(py_err)?;
    let failure: Arc<Mutex<Option<PyErr>>> = Arc::default();
    let seen = Arc::clone(&failure);
    let objective = move |x: &[f64]| {
        Python::attach(|py| match f.call1(py, (x.to_vec(),)).and_then(|v| v.extract::<f64>(py)) {
            Ok(v) => v,
            Err(e) => {
                seen.lock().unwrap().get_or_insert(e);
                f64::NAN
            }
        })
    };
    let mut problem = ObjectiveProblem::new(bounds.len(), objective)
        .map_err(py_err)?
        .with_bounds(bounds)
        .map_err(py_err)?;
    if let Some(x0) = x0 {
        problem = problem.with_x0(x0).map_err(py_err)?;
    }
    let spec = OptimiserSpec::new(method, budget).with_seed(seed);
    let report = run_minimize(&spec, &problem).map_err(py_err)?;
    if let Some(e) = failure.lock().unwrap().take() {
        return Err(e);
    }
    report_dict(py, &report)
}

/// Optimise centre positions on the built-in grid approximation instance.
#[pyfunction]
#[pyo3(signature = (side, n_centres, k, method = "praxis", budget = 500, seed = 0, threads = 1))]
fn approx_grid<'py>(
    py: Python<'py>,
    side: usize,
    n_centres: usize,
    k: usize,
    method: &str,
    budget: usize,
    seed: u64,
    threads: usize,
) -> PyResult<Bound<'py, PyDict>> {
    let method: Method = method.parse().map_err(py_err)?;
    let report = py
        .detach(|| {
            let p = Arc::new(grid_problem(side, n_centres, k, seed)?.with_threads(threads));
            let x0 = p.initial_centres(seed);
            let obj = objective_problem(p, x0)?;
            run_minimize(&OptimiserSpec::new(method, budget).with_seed(seed), &obj)
        })
        .map_err(py_err)?;
    report_dict(py, &report)
}

#[pymodule]
fn sigmin_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_function(wrap_pyfunction!(knn, m)?)?;
    m.add_function(wrap_pyfunction!(svd, m)?)?;
    m.add_function(wrap_pyfunction!(denoise, m)?)?;
    m.add_function(wrap_pyfunction!(minimize, m)?)?;
    m.add_function(wrap_pyfunction!(approx_grid, m)?)?;
    Ok(())
}
