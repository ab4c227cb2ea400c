//! Python bindings over the core crate: dataset construction and synthesis,
//! model fitting, co-selection, and the evaluation harness, with numpy
//! interop for every matrix crossing the boundary.

use std::path::Path;

use numpy::{IntoPyArray, PyArray1, PyArray2, PyReadonlyArray2};
use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use pyo3::types::PyDict;

use coselect::dataset::{load_dataset_path, synthesize, MultiViewDataset, NormalizeMode};
use coselect::eval::Classifier;
use coselect::selection::{select_with_options, SelectionResult};
use coselect::solver::{fit_variant, ConvergenceTrace, Hyperparams, ModelState, Variant};
use coselect::CoselectError;

fn to_py_err(e: CoselectError) -> PyErr {
    PyValueError::new_err(e.to_string())
}

/// A multi-view dataset: one `d_v x n` matrix per view over the same `n`
/// instances, plus optional integer labels used only by `evaluate`.
#[pyclass]
#[derive(Clone)]
struct Dataset {
    inner: MultiViewDataset,
}

#[pymethods]
impl Dataset {
    #[new]
    #[pyo3(signature = (views, labels=None))]
    fn new(views: Vec<PyReadonlyArray2<f64>>, labels: Option<Vec<usize>>) -> PyResult<Self> {
        let views = views.iter().map(|v| v.as_array().to_owned()).collect();
        MultiViewDataset::new(views, labels)
            .map(|inner| Dataset { inner })
            .map_err(to_py_err)
    }

    /// Seeded synthetic data: each class occupies a low-dimensional affine
    /// flat per view, with optional isotropic noise.
    #[staticmethod]
    fn synth(n: usize, view_dims: Vec<usize>, classes: usize, noise: f64, seed: u64) -> PyResult<Self> {
        synthesize(n, &view_dims, classes, noise, seed)
            .map(|inner| Dataset { inner })
            .map_err(to_py_err)
    }

    /// Load a dataset from a manifest file (one view CSV per line, optional
    /// labels file).
    #[staticmethod]
    fn load(path: &str) -> PyResult<Self> {
        load_dataset_path(Path::new(path))
            .map(|inner| Dataset { inner })
            .map_err(to_py_err)
    }

    /// A normalized copy; `mode` is `"none"`, `"zscore"`, or `"unit-l2"`.
    fn normalize(&self, mode: &str) -> PyResult<Self> {
        let mode: NormalizeMode = mode.parse().map_err(to_py_err)?;
        Ok(Dataset {
            inner: self.inner.normalize(mode),
        })
    }

    #[getter]
    fn n_instances(&self) -> usize {
        self.inner.n_instances()
    }

    #[getter]
    fn n_views(&self) -> usize {
        self.inner.n_views()
    }

    #[getter]
    fn view_dims(&self) -> Vec<usize> {
        self.inner.view_dims()
    }

    #[getter]
    fn labels(&self) -> Option<Vec<usize>> {
        self.inner.labels().map(|l| l.to_vec())
    }

    fn view<'py>(&self, py: Python<'py>, v: usize) -> PyResult<Bound<'py, PyArray2<f64>>> {
        if v >= self.inner.n_views() {
            return Err(PyValueError::new_err(format!(
                "view {v} out of range for {} views",
                self.inner.n_views()
            )));
        }
        Ok(self.inner.view(v).to_owned().into_pyarray(py))
    }

    fn __repr__(&self) -> String {
        format!(
            "Dataset(n={}, view_dims={:?}, labeled={})",
            self.inner.n_instances(),
            self.inner.view_dims(),
            self.inner.labels().is_some()
        )
    }
}

/// A fitted model: the learned representations, weights, and its
/// convergence trace.
#[pyclass]
struct Model {
    state: ModelState,
    trace: ConvergenceTrace,
}

#[pymethods]
impl Model {
    #[getter]
    fn variant(&self) -> String {
        self.state.variant.to_string()
    }

    #[getter]
    fn iterations(&self) -> usize {
        self.trace.iterations()
    }

    #[getter]
    fn converged(&self) -> bool {
        self.trace.converged
    }

    #[getter]
    fn objective(&self) -> f64 {
        self.trace.final_objective()
    }

    /// Objective value after each cycle, first to last.
    #[getter]
    fn objective_trace(&self) -> Vec<f64> {
        self.trace.records.iter().map(|r| r.terms.total).collect()
    }

    /// Consistent self-representation, `n x n`.
    fn b<'py>(&self, py: Python<'py>) -> Bound<'py, PyArray2<f64>> {
        self.state.b.clone().into_pyarray(py)
    }

    /// View-specific self-representation of view `v`, `n x n`.
    fn b_view<'py>(&self, py: Python<'py>, v: usize) -> PyResult<Bound<'py, PyArray2<f64>>> {
        self.state
            .b_views
            .get(v)
            .map(|m| m.clone().into_pyarray(py))
            .ok_or_else(|| PyValueError::new_err(format!("view {v} out of range")))
    }

    /// Projection matrix of view `v`, `d_v x c`.
    fn w<'py>(&self, py: Python<'py>, v: usize) -> PyResult<Bound<'py, PyArray2<f64>>> {
        self.state
            .w
            .get(v)
            .map(|m| m.clone().into_pyarray(py))
            .ok_or_else(|| PyValueError::new_err(format!("view {v} out of range")))
    }

    /// Adaptive projection-sparsity weights, one per view.
    #[getter]
    fn lambda_<'py>(&self, py: Python<'py>) -> Bound<'py, PyArray1<f64>> {
        self.state.lambda.clone().into_pyarray(py)
    }

    /// Adaptive view-specific-sparsity weights, one per view.
    #[getter]
    fn eta<'py>(&self, py: Python<'py>) -> Bound<'py, PyArray1<f64>> {
        self.state.eta.clone().into_pyarray(py)
    }

    /// Adaptive graph-agreement weights, one per view.
    #[getter]
    fn gamma<'py>(&self, py: Python<'py>) -> Bound<'py, PyArray1<f64>> {
        self.state.gamma.clone().into_pyarray(py)
    }

    fn __repr__(&self) -> String {
        format!(
            "Model(variant={}, iterations={}, converged={}, objective={:.6e})",
            self.state.variant,
            self.trace.iterations(),
            self.trace.converged,
            self.trace.final_objective()
        )
    }
}

/// Ranked features and instances plus the selected subsets.
#[pyclass]
struct Selection {
    inner: SelectionResult,
}

#[pymethods]
impl Selection {
    #[getter]
    fn instance_scores(&self) -> Vec<f64> {
        self.inner.instance_scores.clone()
    }

    /// One score vector per view.
    #[getter]
    fn feature_scores(&self) -> Vec<Vec<f64>> {
        self.inner.feature_scores.clone()
    }

    /// All instances, best first.
    #[getter]
    fn instance_ranking(&self) -> Vec<usize> {
        self.inner.instance_ranking.clone()
    }

    /// All `(view, feature)` pairs, best first.
    #[getter]
    fn feature_ranking(&self) -> Vec<(usize, usize)> {
        self.inner.feature_ranking.clone()
    }

    #[getter]
    fn selected_instances(&self) -> Vec<usize> {
        self.inner.selected_instances.clone()
    }

    /// Per view, the selected features in rank order.
    #[getter]
    fn selected_features(&self) -> Vec<Vec<usize>> {
        self.inner.selected_features.clone()
    }

    #[getter]
    fn feature_ratio(&self) -> f64 {
        self.inner.feature_ratio
    }

    #[getter]
    fn instance_ratio(&self) -> f64 {
        self.inner.instance_ratio
    }

    fn __repr__(&self) -> String {
        format!(
            "Selection(instances={}, features={}, feature_ratio={}, instance_ratio={})",
            self.inner.selected_instances.len(),
            self.inner.n_selected_features(),
            self.inner.feature_ratio,
            self.inner.instance_ratio
        )
    }
}

/// Fit the co-selection model. `variant` is `"full"`, `"no-graph"`, or
/// `"no-consensus"`; keyword arguments override the corresponding
/// hyperparameter defaults.
#[pyfunction]
#[allow(clippy::too_many_arguments)]
#[pyo3(signature = (dataset, variant="full", *, r=None, theta=None, alpha=None, c=None, k=None, epsilon=None, tol=None, max_iter=None, seed=None))]
fn fit(
    dataset: &Dataset,
    variant: &str,
    r: Option<f64>,
    theta: Option<f64>,
    alpha: Option<f64>,
    c: Option<usize>,
    k: Option<usize>,
    epsilon: Option<f64>,
    tol: Option<f64>,
    max_iter: Option<usize>,
    seed: Option<u64>,
) -> PyResult<Model> {
    let variant: Variant = variant.parse().map_err(to_py_err)?;
    let mut hp = Hyperparams::default();
    if let Some(v) = r {
        hp.r = v;
    }
    if let Some(v) = theta {
        hp.theta = v;
    }
    if let Some(v) = alpha {
        hp.alpha = v;
    }
    if c.is_some() {
        hp.c = c;
    }
    if let Some(v) = k {
        hp.k = v;
    }
    if let Some(v) = epsilon {
        hp.epsilon = v;
    }
    if let Some(v) = tol {
        hp.tol = v;
    }
    if let Some(v) = max_iter {
        hp.max_iter = v;
    }
    if let Some(v) = seed {
        hp.seed = v;
    }
    hp.validate().map_err(to_py_err)?;
    let (state, trace) = fit_variant(&dataset.inner, &hp, variant).map_err(to_py_err)?;
    Ok(Model { state, trace })
}

/// Rank features and instances from a fitted model and keep the top
/// `feature_ratio` / `instance_ratio` fractions.
#[pyfunction]
#[pyo3(signature = (model, feature_ratio, instance_ratio, *, epsilon=None, per_view_normalize=false))]
fn select(
    model: &Model,
    feature_ratio: f64,
    instance_ratio: f64,
    epsilon: Option<f64>,
    per_view_normalize: bool,
) -> PyResult<Selection> {
    let eps = epsilon.unwrap_or(Hyperparams::default().epsilon);
    select_with_options(
        &model.state,
        feature_ratio,
        instance_ratio,
        eps,
        per_view_normalize,
    )
    .map(|inner| Selection { inner })
    .map_err(to_py_err)
}

/// Train `classifier` (`"one-nn"` or `"nearest-centroid"`) on the selected
/// instances restricted to the selected features, predict the unselected
/// complement, and report accuracy and macro-F1.
#[pyfunction]
#[pyo3(signature = (dataset, selection, classifier="one-nn"))]
fn evaluate<'py>(
    py: Python<'py>,
    dataset: &Dataset,
    selection: &Selection,
    classifier: &str,
) -> PyResult<Bound<'py, PyDict>> {
    let clf: Classifier = classifier.parse().map_err(to_py_err)?;
    let report = coselect::eval::evaluate(&dataset.inner, &selection.inner, clf).map_err(to_py_err)?;
    let out = PyDict::new(py);
    out.set_item("acc", report.acc)?;
    out.set_item("f1", report.f1)?;
    out.set_item("evaluated", report.evaluated)?;
    out.set_item("feature_ratio", report.feature_ratio)?;
    out.set_item("instance_ratio", report.instance_ratio)?;
    out.set_item("classifier", &report.classifier)?;
    let per_class: Vec<Bound<'py, PyDict>> = report
        .per_class
        .iter()
        .map(|c| {
            let d = PyDict::new(py);
            d.set_item("class", c.class)?;
            d.set_item("precision", c.precision)?;
            d.set_item("recall", c.recall)?;
            d.set_item("f1", c.f1)?;
            d.set_item("support", c.support)?;
            Ok(d)
        })
        .collect::<PyResult<_>>()?;
    out.set_item("per_class", per_class)?;
    Ok(out)
}

#[pymodule]
fn coselect_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Dataset>()?;
    m.add_class::<Model>()?;
    m.add_class::<Selection>()?;
    m.add_function(wrap_pyfunction!(fit, m)?)?;
    m.add_function(wrap_pyfunction!(select, m)?)?;
    m.add_function(wrap_pyfunction!(evaluate, m)?)?;
    Ok(())
}
