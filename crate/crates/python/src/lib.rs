//! Python bindings for `cascade-core`.

use std::path::Path;
use std::sync::{Arc, Mutex};

use cascade_core::environment::ClickFeedback;
use cascade_core::features::features_from_matrix;
use cascade_core::harness::{prepare, run_prepared, synthetic_env};
use cascade_core::policies::Policy;
use cascade_core::{
    CascadeLinTs, CascadeLinUcb, CascadeUcb1, Error, ExperimentConfig, FeedbackMatrix, ItemFeatures, RankedLinTs,
    RecommendationList, SimRng,
};
use nalgebra::DMatrix;
use pyo3::exceptions::{PyIOError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

fn py_err(e: Error) -> PyErr {
    match e {
        Error::Io { .. } => PyIOError::new_err(e.to_string()),
        _ => PyValueError::new_err(e.to_string()),
    }
}

fn feedback_matrix(rows: Vec<Vec<u8>>) -> PyResult<FeedbackMatrix> {
    FeedbackMatrix::from_rows(&rows).map_err(py_err)
}

fn dense(rows: &[Vec<f64>]) -> PyResult<DMatrix<f64>> {
    let cols = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|r| r.len() != cols) {
        return Err(PyValueError::new_err("rows must all have the same length"));
    }
    Ok(DMatrix::from_fn(rows.len(), cols, |i, j| rows[i][j]))
}

fn to_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

fn item_features(rows: &[Vec<f64>]) -> PyResult<Arc<ItemFeatures>> {
    Ok(Arc::new(ItemFeatures::new(dense(rows)?).map_err(py_err)?))
}

fn list(items: Vec<usize>, n_items: usize) -> PyResult<RecommendationList> {
    RecommendationList::new(items, n_items).map_err(py_err)
}

/// Expected reward `1 - prod(1 - w[a])` of the list `items`.
#[pyfunction]
fn reward(items: Vec<usize>, weights: Vec<f64>) -> PyResult<f64> {
    let l = list(items, weights.len())?;
    cascade_core::reward(&l, &weights).map_err(py_err)
}

/// 1-based position of the first attractive item, `None` without a click.
#[pyfunction]
fn simulate_click(items: Vec<usize>, row: Vec<u8>) -> PyResult<Option<usize>> {
    let l = list(items, row.len())?;
    Ok(cascade_core::simulate_click(&l, &row).map_err(py_err)?.position())
}

/// Greedy max-coverage list of `k` items for a 0/1 user-item matrix.
#[pyfunction]
fn greedy_oracle(rows: Vec<Vec<u8>>, k: usize) -> PyResult<Vec<usize>> {
    let w = feedback_matrix(rows)?;
    Ok(cascade_core::greedy_oracle(&w, k).map_err(py_err)?.items().to_vec())
}

/// `(c, bound)` for CascadeLinUCB.
#[pyfunction]
#[pyo3(signature = (n, k, d, sigma = 1.0, theta_norm = 1.0))]
fn theorem_bound(n: u64, k: usize, d: usize, sigma: f64, theta_norm: f64) -> PyResult<(f64, f64)> {
    let b = cascade_core::theorem_bound(n, k, d, sigma, theta_norm).map_err(py_err)?;
    Ok((b.c, b.bound))
}

type Rows = Vec<Vec<f64>>;

/// Rank-`d` SVD `(U, s, V)` of a dense matrix.
#[pyfunction]
fn truncated_svd(matrix: Rows, d: usize) -> PyResult<(Rows, Vec<f64>, Rows)> {
    let svd = cascade_core::truncated_svd(&dense(&matrix)?, d).map_err(py_err)?;
    Ok((to_rows(&svd.u), svd.s.iter().copied().collect(), to_rows(&svd.v)))
}

/// Item features (rows of `V S`, scaled to norm at most 1) learned from a 0/1
/// matrix.
#[pyfunction]
fn svd_features(rows: Vec<Vec<u8>>, d: usize) -> PyResult<Vec<Vec<f64>>> {
    let w = feedback_matrix(rows)?;
    Ok(to_rows(features_from_matrix(&w, d).map_err(py_err)?.matrix()))
}

/// Perfect-linear synthetic environment: a dict with `features`, `theta`,
/// `probs` and `optimal`.
#[pyfunction]
#[pyo3(signature = (l, d, k, theta_seed = 0))]
fn synthetic_environment<'py>(
    py: Python<'py>,
    l: usize,
    d: usize,
    k: usize,
    theta_seed: u64,
) -> PyResult<Bound<'py, PyDict>> {
    let s = synthetic_env(l, d, k, theta_seed).map_err(py_err)?;
    let out = PyDict::new(py);
    out.set_item("features", to_rows(s.features.matrix()))?;
    out.set_item("theta", s.theta.iter().copied().collect::<Vec<f64>>())?;
    out.set_item("probs", s.probs.as_slice().to_vec())?;
    out.set_item("optimal", s.environment.optimal().items().to_vec())?;
    Ok(out)
}

/// Runs an experiment from a JSON config string. Relative dataset paths
/// resolve against `base_dir`.
#[pyfunction]
#[pyo3(signature = (config_json, base_dir = None))]
fn run_experiment<'py>(py: Python<'py>, config_json: &str, base_dir: Option<&str>) -> PyResult<Bound<'py, PyDict>> {
    let cfg = ExperimentConfig::from_json(config_json).map_err(py_err)?;
    let trace = py
        .detach(|| {
            let prepared = prepare(&cfg, base_dir.map(Path::new))?;
            run_prepared(&cfg, &prepared)
        })
        .map_err(py_err)?;
    let out = PyDict::new(py);
    out.set_item("steps", trace.steps)?;
    out.set_item("mean_regret", trace.mean_regret)?;
    out.set_item("stderr", trace.stderr)?;
    out.set_item("mean_reward", trace.mean_reward)?;
    out.set_item("per_run_final", trace.per_run_final)?;
    out.set_item("run_seeds", trace.run_seeds)?;
    Ok(out)
}

struct PolicyHandle(Mutex<Box<dyn Policy>>);

impl PolicyHandle {
    fn new(p: impl Policy + 'static) -> Self {
        Self(Mutex::new(Box::new(p)))
    }

    fn select(&self, k: usize) -> PyResult<Vec<usize>> {
        let mut p = self.0.lock().expect("policy lock");
        Ok(p.select(k).map_err(py_err)?.items().to_vec())
    }

    fn update(&self, items: Vec<usize>, click: Option<usize>, n_items: usize) -> PyResult<()> {
        let l = list(items, n_items)?;
        let fb = match click {
            None => ClickFeedback::NONE,
            Some(0) => return Err(PyValueError::new_err("click positions are 1-based")),
            Some(c) => ClickFeedback::at(c),
        };
        self.0.lock().expect("policy lock").update(&l, fb).map_err(py_err)
    }
}

#[pyclass(name = "CascadeUCB1")]
struct PyCascadeUcb1 {
    inner: PolicyHandle,
    items: usize,
}

#[pymethods]
impl PyCascadeUcb1 {
    #[new]
    fn new(n_items: usize) -> Self {
        Self {
            inner: PolicyHandle::new(CascadeUcb1::new(n_items)),
            items: n_items,
        }
    }

    fn select(&self, k: usize) -> PyResult<Vec<usize>> {
        self.inner.select(k)
    }

    /// `click` is the 1-based click position or `None`.
    #[pyo3(signature = (items, click = None))]
    fn update(&self, items: Vec<usize>, click: Option<usize>) -> PyResult<()> {
        self.inner.update(items, click, self.items)
    }
}

#[pyclass(name = "CascadeLinTS")]
struct PyCascadeLinTs {
    inner: PolicyHandle,
    items: usize,
}

#[pymethods]
impl PyCascadeLinTs {
    #[new]
    #[pyo3(signature = (features, sigma = 1.0, seed = 0))]
    fn new(features: Vec<Vec<f64>>, sigma: f64, seed: u64) -> PyResult<Self> {
        let f = item_features(&features)?;
        let items = f.items();
        let p = CascadeLinTs::new(f, sigma, SimRng::seed_from_u64(seed)).map_err(py_err)?;
        Ok(Self {
            inner: PolicyHandle::new(p),
            items,
        })
    }

    fn select(&self, k: usize) -> PyResult<Vec<usize>> {
        self.inner.select(k)
    }

    #[pyo3(signature = (items, click = None))]
    fn update(&self, items: Vec<usize>, click: Option<usize>) -> PyResult<()> {
        self.inner.update(items, click, self.items)
    }
}

#[pyclass(name = "CascadeLinUCB")]
struct PyCascadeLinUcb {
    inner: PolicyHandle,
    items: usize,
}

#[pymethods]
impl PyCascadeLinUcb {
    #[new]
    #[pyo3(signature = (features, c, sigma = 1.0))]
    fn new(features: Vec<Vec<f64>>, c: f64, sigma: f64) -> PyResult<Self> {
        let f = item_features(&features)?;
        let items = f.items();
        let p = CascadeLinUcb::new(f, sigma, c).map_err(py_err)?;
        Ok(Self {
            inner: PolicyHandle::new(p),
            items,
        })
    }

    fn select(&self, k: usize) -> PyResult<Vec<usize>> {
        self.inner.select(k)
    }

    #[pyo3(signature = (items, click = None))]
    fn update(&self, items: Vec<usize>, click: Option<usize>) -> PyResult<()> {
        self.inner.update(items, click, self.items)
    }
}

#[pyclass(name = "RankedLinTS")]
struct PyRankedLinTs {
    inner: PolicyHandle,
    items: usize,
}

#[pymethods]
impl PyRankedLinTs {
    #[new]
    #[pyo3(signature = (features, k, sigma = 1.0, seed = 0))]
    fn new(features: Vec<Vec<f64>>, k: usize, sigma: f64, seed: u64) -> PyResult<Self> {
        let f = item_features(&features)?;
        let items = f.items();
        let p = RankedLinTs::new(f, k, sigma, SimRng::seed_from_u64(seed)).map_err(py_err)?;
        Ok(Self {
            inner: PolicyHandle::new(p),
            items,
        })
    }

    fn select(&self, k: usize) -> PyResult<Vec<usize>> {
        self.inner.select(k)
    }

    #[pyo3(signature = (items, click = None))]
    fn update(&self, items: Vec<usize>, click: Option<usize>) -> PyResult<()> {
        self.inner.update(items, click, self.items)
    }
}

#[pymodule]
fn cascade_bandits(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_function(wrap_pyfunction!(reward, m)?)?;
    m.add_function(wrap_pyfunction!(simulate_click, m)?)?;
    m.add_function(wrap_pyfunction!(greedy_oracle, m)?)?;
    m.add_function(wrap_pyfunction!(theorem_bound, m)?)?;
    m.add_function(wrap_pyfunction!(truncated_svd, m)?)?;
    m.add_function(wrap_pyfunction!(svd_features, m)?)?;
    m.add_function(wrap_pyfunction!(synthetic_environment, m)?)?;
    m.add_function(wrap_pyfunction!(run_experiment, m)?)?;
    m.add_class::<PyCascadeUcb1>()?;
    m.add_class::<PyCascadeLinTs>()?;
    m.add_class::<PyCascadeLinUcb>()?;
    m.add_class::<PyRankedLinTs>()?;
    Ok(())
}
