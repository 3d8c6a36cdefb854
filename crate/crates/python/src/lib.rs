//! Python bindings. Series cross the boundary as nested lists indexed
//! `[step][node][channel]` (or `[step][node]` for one channel); configs and
//! reports cross as plain dicts.

use pyo3::exceptions::{PyOSError, PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::{PyDict, PyModule};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::de::DeserializeOwned;
use serde::Serialize;

use stlgru::baselines::persistence_forecast;
use stlgru::data::{self, Dtype, StsfHeader, SyntheticSpec};
use stlgru::gradcheck::{gradient_check as run_gradient_check, toy_config, DEFAULT_EPS};
use stlgru::metrics::{compute_metrics_with_floor, DEFAULT_MAPE_FLOOR};
use stlgru::trainer::{self, split_dataset, windowize, DEFAULT_HORIZONS};
use stlgru::{Architecture, CostReport, GraphMode, Matrix, ModelConfig, SeriesTensor, TrainConfig};

fn py_err(e: stlgru::Error) -> PyErr {
    use stlgru::Error as E;
    match e {
        E::Io(_) => PyOSError::new_err(e.to_string()),
        E::Config { .. } | E::WindowLength { .. } | E::ParamsMismatch(_) | E::Shape { .. } | E::Format(_) => {
            PyValueError::new_err(e.to_string())
        }
        _ => PyRuntimeError::new_err(e.to_string()),
    }
}

fn to_py<T: Serialize>(py: Python<'_>, value: &T) -> PyResult<Py<PyAny>> {
    let text = serde_json::to_string(value).map_err(|e| PyRuntimeError::new_err(e.to_string()))?;
    Ok(py.import("json")?.call_method1("loads", (text,))?.unbind())
}

/// Starts from the defaults and overlays `overrides`; unknown keys are errors.
fn from_py<T: DeserializeOwned + Serialize + Default>(
    py: Python<'_>,
    what: &str,
    overrides: Option<&Bound<'_, PyDict>>,
) -> PyResult<T> {
    let mut value = serde_json::to_value(T::default()).expect("defaults serialize");
    if let Some(d) = overrides {
        let text: String = py.import("json")?.call_method1("dumps", (d,))?.extract()?;
        let patch: serde_json::Value =
            serde_json::from_str(&text).map_err(|e| PyValueError::new_err(e.to_string()))?;
        let obj = value.as_object_mut().expect("config is an object");
        for (k, v) in patch.as_object().into_iter().flatten() {
            if !obj.contains_key(k) {
                return Err(PyValueError::new_err(format!("unknown {what} key `{k}`")));
            }
            obj.insert(k.clone(), v.clone());
        }
    }
    serde_json::from_value(value).map_err(|e| PyValueError::new_err(format!("{what}: {e}")))
}

fn matrix_to_lists(m: &Matrix) -> Vec<Vec<f64>> {
    (0..m.rows()).map(|r| m.row(r).to_vec()).collect()
}

fn lists_to_matrix(rows: Vec<Vec<f64>>) -> PyResult<Matrix> {
    let cols = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|r| r.len() != cols) {
        return Err(PyValueError::new_err("rows differ in length"));
    }
    Ok(Matrix::from_rows(&rows))
}

fn series_from_nested(values: Vec<Vec<Vec<f64>>>) -> PyResult<SeriesTensor> {
    let steps = values.len();
    let nodes = values.first().map_or(0, Vec::len);
    let channels = values.first().and_then(|s| s.first()).map_or(0, Vec::len);
    let mut flat = Vec::with_capacity(steps * nodes * channels);
    for (t, step) in values.into_iter().enumerate() {
        if step.len() != nodes {
            return Err(PyValueError::new_err(format!("step {t} has {} nodes, expected {nodes}", step.len())));
        }
        for (n, node) in step.into_iter().enumerate() {
            if node.len() != channels {
                return Err(PyValueError::new_err(format!(
                    "step {t}, node {n} has {} channels, expected {channels}",
                    node.len()
                )));
            }
            flat.extend(node);
        }
    }
    SeriesTensor::new(nodes, steps, channels, flat).map_err(py_err)
}

/// A node × step × channel series.
#[pyclass(name = "Series", module = "stlgru", frozen)]
struct PySeries {
    inner: SeriesTensor,
}

#[pymethods]
impl PySeries {
    /// `values[step][node]` or `values[step][node][channel]`.
    #[new]
    fn new(values: &Bound<'_, PyAny>) -> PyResult<Self> {
        let nested = match values.extract::<Vec<Vec<Vec<f64>>>>() {
            Ok(v) => v,
            Err(_) => values
                .extract::<Vec<Vec<f64>>>()?
                .into_iter()
                .map(|step| step.into_iter().map(|x| vec![x]).collect())
                .collect(),
        };
        Ok(Self {
            inner: series_from_nested(nested)?,
        })
    }

    #[staticmethod]
    fn load(path: std::path::PathBuf) -> PyResult<Self> {
        let (_, inner) = data::load_series(&path).map_err(py_err)?;
        Ok(Self { inner })
    }

    #[pyo3(signature = (path, dtype = "f64"))]
    fn save(&self, path: std::path::PathBuf, dtype: &str) -> PyResult<()> {
        let dtype = match dtype {
            "f64" => Dtype::F64,
            "f32" => Dtype::F32,
            other => return Err(PyValueError::new_err(format!("dtype must be f32 or f64, got {other}"))),
        };
        data::save_series(&path, &self.inner, &StsfHeader::for_series(&self.inner, dtype)).map_err(py_err)
    }

    /// `(steps, nodes, channels)`.
    #[getter]
    fn shape(&self) -> (usize, usize, usize) {
        (self.inner.steps(), self.inner.nodes(), self.inner.channels())
    }

    fn __len__(&self) -> usize {
        self.inner.steps()
    }

    fn window(&self, start: usize, length: usize) -> PyResult<Self> {
        if start + length > self.inner.steps() {
            return Err(PyValueError::new_err(format!(
                "steps {start}..{} out of range for {} steps",
                start + length,
                self.inner.steps()
            )));
        }
        Ok(Self {
            inner: self.inner.slice_steps(start, length),
        })
    }

    fn to_list(&self) -> Vec<Vec<Vec<f64>>> {
        let s = &self.inner;
        (0..s.steps())
            .map(|t| (0..s.nodes()).map(|n| (0..s.channels()).map(|c| s.get(t, n, c)).collect()).collect())
            .collect()
    }

    fn __repr__(&self) -> String {
        let (t, n, c) = self.shape();
        format!("Series(steps={t}, nodes={n}, channels={c})")
    }
}

/// Model parameters with their configuration.
#[pyclass(name = "Model", module = "stlgru", frozen)]
struct PyModel {
    inner: stlgru::Model,
}

#[pymethods]
impl PyModel {
    /// Freshly initialised parameters for `config` (a dict of overrides).
    #[new]
    #[pyo3(signature = (config = None, seed = 0))]
    fn new(py: Python<'_>, config: Option<&Bound<'_, PyDict>>, seed: u64) -> PyResult<Self> {
        let cfg: ModelConfig = from_py(py, "model", config)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Ok(Self {
            inner: stlgru::Model::init(cfg, &mut rng).map_err(py_err)?,
        })
    }

    #[getter]
    fn config(&self, py: Python<'_>) -> PyResult<Py<PyAny>> {
        to_py(py, &self.inner.config)
    }

    #[getter]
    fn parameter_count(&self) -> usize {
        self.inner.params.iter().map(|(_, m)| m.len()).sum()
    }

    fn parameter_names(&self) -> Vec<String> {
        self.inner.params.iter().map(|(n, _)| n.to_string()).collect()
    }

    fn parameter(&self, name: &str) -> PyResult<Vec<Vec<f64>>> {
        self.inner
            .params
            .get(name)
            .map(matrix_to_lists)
            .ok_or_else(|| PyValueError::new_err(format!("no parameter named `{name}`")))
    }

    /// N×T' forecast for a T-step window, using the thresholded graph.
    /// Values are in whatever units the model was trained on.
    fn forecast(&self, py: Python<'_>, window: &PySeries) -> PyResult<Vec<Vec<f64>>> {
        let out = py
            .detach(|| self.inner.forecast(&window.inner, GraphMode::Hard))
            .map_err(py_err)?;
        Ok(matrix_to_lists(&out))
    }

    fn cost(&self, py: Python<'_>) -> PyResult<Py<PyAny>> {
        to_py(py, &CostReport::new(&self.inner.config).map_err(py_err)?)
    }

    fn __repr__(&self) -> String {
        let c = &self.inner.config;
        format!(
            "Model({}, nodes={}, hidden_dim={}, input_len={}, horizon={})",
            c.architecture, c.nodes, c.hidden_dim, c.input_len, c.horizon
        )
    }
}

/// A trained model with its normaliser, settings and training history.
#[pyclass(name = "Checkpoint", module = "stlgru", frozen)]
struct PyCheckpoint {
    inner: trainer::Checkpoint,
}

#[pymethods]
impl PyCheckpoint {
    #[staticmethod]
    fn load(path: std::path::PathBuf) -> PyResult<Self> {
        Ok(Self {
            inner: trainer::Checkpoint::load(&path).map_err(py_err)?,
        })
    }

    fn save(&self, path: std::path::PathBuf) -> PyResult<()> {
        self.inner.save(&path).map_err(py_err)
    }

    #[getter]
    fn model(&self) -> PyResult<PyModel> {
        Ok(PyModel {
            inner: self.inner.model().map_err(py_err)?,
        })
    }

    #[getter]
    fn best_epoch(&self) -> Option<usize> {
        self.inner.best_epoch
    }

    #[getter]
    fn history(&self, py: Python<'_>) -> PyResult<Py<PyAny>> {
        to_py(py, &self.inner.history)
    }

    #[getter]
    fn train_config(&self, py: Python<'_>) -> PyResult<Py<PyAny>> {
        to_py(py, &self.inner.train_config)
    }

    /// Forecast for a raw window; input and output are in original units.
    fn forecast(&self, py: Python<'_>, window: &PySeries) -> PyResult<Vec<Vec<f64>>> {
        let ck = &self.inner;
        let out = py
            .detach(|| {
                let model = ck.model()?;
                let z = model.forecast(&ck.normalizer.apply_series(&window.inner), GraphMode::Hard)?;
                Ok(ck.normalizer.invert_matrix(&z))
            })
            .map_err(py_err)?;
        Ok(matrix_to_lists(&out))
    }

    /// Metrics on the `test` or `validation` segment of `series`, split the
    /// way training split it.
    #[pyo3(signature = (series, split = "test", horizons = None))]
    fn evaluate(
        &self,
        py: Python<'_>,
        series: &PySeries,
        split: &str,
        horizons: Option<Vec<usize>>,
    ) -> PyResult<Py<PyAny>> {
        let ck = &self.inner;
        let mc = &ck.model_config;
        if series.inner.nodes() != mc.nodes || series.inner.channels() != mc.in_channels {
            return Err(PyValueError::new_err(format!(
                "checkpoint expects N = {}, C = {} but the series has N = {}, C = {}",
                mc.nodes,
                mc.in_channels,
                series.inner.nodes(),
                series.inner.channels()
            )));
        }
        let horizons = match horizons {
            Some(h) => h,
            None => DEFAULT_HORIZONS.iter().copied().filter(|&h| h <= mc.horizon).collect(),
        };
        let use_validation = match split {
            "test" => false,
            "validation" => true,
            other => return Err(PyValueError::new_err(format!("split must be test or validation, got {other}"))),
        };
        let report = py
            .detach(|| {
                let tc = &ck.train_config;
                let splits = split_dataset(series.inner.steps(), tc.split_ratio, tc.split_order, tc.window_len())?;
                let range = if use_validation { splits.validation } else { splits.test };
                let windows = windowize(&ck.normalizer.apply_series(&series.inner), range, mc.input_len, mc.horizon);
                trainer::evaluate(&ck.model()?, &windows, &ck.normalizer, &horizons)
            })
            .map_err(py_err)?;
        to_py(py, &report)
    }
}

/// Synthetic series on a random graph. Keyword arguments override the
/// generator defaults. Returns `(series, adjacency)`.
#[pyfunction]
#[pyo3(signature = (**spec))]
fn synthesize(py: Python<'_>, spec: Option<&Bound<'_, PyDict>>) -> PyResult<(PySeries, Vec<Vec<f64>>)> {
    let spec: SyntheticSpec = from_py(py, "synthetic", spec)?;
    let out = data::generate_synthetic(&spec).map_err(py_err)?;
    Ok((PySeries { inner: out.series }, matrix_to_lists(&out.graph)))
}

/// Fits a model. `model` and `train` are dicts of overrides; N and C are
/// taken from the series.
#[pyfunction]
#[pyo3(signature = (series, model = None, train = None))]
fn train(
    py: Python<'_>,
    series: &PySeries,
    model: Option<&Bound<'_, PyDict>>,
    train: Option<&Bound<'_, PyDict>>,
) -> PyResult<PyCheckpoint> {
    let mut mc: ModelConfig = from_py(py, "model", model)?;
    let mut tc: TrainConfig = from_py(py, "train", train)?;
    mc.nodes = series.inner.nodes();
    mc.in_channels = series.inner.channels();
    tc.input_len = mc.input_len;
    tc.horizon = mc.horizon;
    let inner = py
        .detach(|| trainer::train(&mc, &series.inner, &tc).map(|out| trainer::Checkpoint::new(&out, &tc)))
        .map_err(py_err)?;
    Ok(PyCheckpoint { inner })
}

/// MAE, RMSE and MAPE (percent) of two equally shaped 2-D lists.
#[pyfunction]
#[pyo3(signature = (y_hat, y_true, mape_floor = DEFAULT_MAPE_FLOOR))]
fn compute_metrics(py: Python<'_>, y_hat: Vec<Vec<f64>>, y_true: Vec<Vec<f64>>, mape_floor: f64) -> PyResult<Py<PyAny>> {
    let m = compute_metrics_with_floor(&lists_to_matrix(y_hat)?, &lists_to_matrix(y_true)?, mape_floor).map_err(py_err)?;
    to_py(py, &m)
}

/// Repeats the last step of `window` for `horizon` steps.
#[pyfunction]
fn persistence(window: &PySeries, horizon: usize) -> PyResult<Vec<Vec<f64>>> {
    Ok(matrix_to_lists(&persistence_forecast(&window.inner, horizon).map_err(py_err)?))
}

/// Reverse-mode against central-difference gradients on a toy model.
#[pyfunction]
#[pyo3(signature = (architecture = "stlgru", seed = 0, eps = DEFAULT_EPS, use_gumbel = true, use_maa = true))]
fn gradient_check(
    py: Python<'_>,
    architecture: &str,
    seed: u64,
    eps: f64,
    use_gumbel: bool,
    use_maa: bool,
) -> PyResult<Py<PyAny>> {
    let arch: Architecture = architecture.parse().map_err(py_err)?;
    let cfg = ModelConfig {
        use_gumbel,
        use_maa,
        ..toy_config(arch)
    };
    let report = py.detach(|| run_gradient_check(&cfg, seed, eps)).map_err(py_err)?;
    to_py(py, &report)
}

/// Parameter and FLOP counts for a config dict.
#[pyfunction]
#[pyo3(signature = (config = None))]
fn cost_report(py: Python<'_>, config: Option<&Bound<'_, PyDict>>) -> PyResult<Py<PyAny>> {
    let cfg: ModelConfig = from_py(py, "model", config)?;
    to_py(py, &CostReport::new(&cfg).map_err(py_err)?)
}

#[pymodule]
#[pyo3(name = "stlgru")]
fn stlgru_module(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PySeries>()?;
    m.add_class::<PyModel>()?;
    m.add_class::<PyCheckpoint>()?;
    m.add_function(wrap_pyfunction!(synthesize, m)?)?;
    m.add_function(wrap_pyfunction!(train, m)?)?;
    m.add_function(wrap_pyfunction!(compute_metrics, m)?)?;
    m.add_function(wrap_pyfunction!(persistence, m)?)?;
    m.add_function(wrap_pyfunction!(gradient_check, m)?)?;
    m.add_function(wrap_pyfunction!(cost_report, m)?)?;
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    Ok(())
}
