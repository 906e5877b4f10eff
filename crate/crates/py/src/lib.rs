use pyo3::create_exception;
use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use pyo3::types::{PyBool, PyDict, PyList};
use serde::Serialize;
use serde_json::Value;

use ::wqscreen as core;
use core::explain::{ensemble, explain_matrix};
use core::pipeline::{train_pipeline, CvReport, PipelineConfig, PipelineModel};
use core::qc::{evaluate_batch, BatchConfig, UuidRegistry};
use core::records::{
    clean, encode, harmonize, parse_records, screen_outliers, write_records, AliasDictionary, Column, ColumnSchema,
    FieldRecord, PlausibilityBounds, PTC_COLUMN,
};
use core::stats::ContingencyCounts;
use core::synth::SynthConfig;
use core::trees::predict_proba;

create_exception!(wqscreen, WqscreenError, PyValueError);

fn err(e: impl std::fmt::Display) -> PyErr {
    WqscreenError::new_err(e.to_string())
}

fn json_to_py<'py>(py: Python<'py>, value: &Value) -> PyResult<Bound<'py, PyAny>> {
    Ok(match value {
        Value::Null => py.None().into_bound(py),
        Value::Bool(b) => PyBool::new(py, *b).to_owned().into_any(),
        Value::Number(n) => match (n.as_i64(), n.as_f64()) {
            (Some(i), _) => i.into_pyobject(py)?.into_any(),
            (None, Some(f)) => f.into_pyobject(py)?.into_any(),
            _ => py.None().into_bound(py),
        },
        Value::String(s) => s.into_pyobject(py)?.into_any(),
        Value::Array(items) => {
            let list = PyList::empty(py);
            for item in items {
                list.append(json_to_py(py, item)?)?;
            }
            list.into_any()
        }
        Value::Object(map) => {
            let dict = PyDict::new(py);
            for (k, v) in map {
                dict.set_item(k, json_to_py(py, v)?)?;
            }
            dict.into_any()
        }
    })
}

fn to_py<'py, T: Serialize>(py: Python<'py>, value: &T) -> PyResult<Bound<'py, PyAny>> {
    json_to_py(py, &serde_json::to_value(value).map_err(err)?)
}

fn config_from<T: serde::de::DeserializeOwned + Default>(json: Option<&str>) -> PyResult<T> {
    json.map_or_else(|| Ok(T::default()), |text| serde_json::from_str(text).map_err(err))
}

/// Survey records parsed from CSV.
#[pyclass(name = "Records", module = "wqscreen")]
struct PyRecords {
    inner: Vec<FieldRecord>,
}

#[pymethods]
impl PyRecords {
    /// Parse CSV text; `schema_json` maps canonical fields to header names.
    #[staticmethod]
    #[pyo3(signature = (text, schema_json=None))]
    fn from_csv(text: &str, schema_json: Option<&str>) -> PyResult<Self> {
        let schema = match schema_json {
            Some(s) => ColumnSchema::from_json(s).map_err(err)?,
            None => ColumnSchema::default(),
        };
        let parsed = parse_records(text.as_bytes(), &schema).map_err(err)?;
        Ok(PyRecords { inner: parsed.records })
    }

    fn to_csv(&self) -> PyResult<String> {
        let mut buf = Vec::new();
        write_records(&self.inner, &mut buf).map_err(err)?;
        String::from_utf8(buf).map_err(err)
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    fn uuids(&self) -> Vec<String> {
        self.inner.iter().map(|r| r.uuid.clone()).collect()
    }

    /// QC verdicts as dicts with `uuid`, `category` and `triggered`.
    #[pyo3(signature = (batch_config_json=None))]
    fn qc<'py>(&self, py: Python<'py>, batch_config_json: Option<&str>) -> PyResult<Bound<'py, PyAny>> {
        let config: BatchConfig = config_from(batch_config_json)?;
        config.validate().map_err(err)?;
        let (verdicts, _) = evaluate_batch(&self.inner, &config, &PlausibilityBounds::default(), &mut UuidRegistry::new());
        to_py(py, &verdicts)
    }

    /// Harmonize, drop implausible records and z-score outliers. Returns the
    /// kept records and the removal log as JSON lines.
    #[pyo3(signature = (z_threshold=4.0, dictionary_json=None))]
    fn clean(&self, z_threshold: f64, dictionary_json: Option<&str>) -> PyResult<(PyRecords, String)> {
        let dictionary = match dictionary_json {
            Some(s) => AliasDictionary::from_json(s).map_err(err)?,
            None => AliasDictionary::new(),
        };
        let (plausible, first) = clean(&harmonize(&self.inner, &dictionary), &PlausibilityBounds::default());
        let (kept, second) = screen_outliers(&plausible, z_threshold).map_err(err)?;
        Ok((PyRecords { inner: kept }, first.then(&second).to_jsonl()))
    }

    /// Feature matrix plus TC and EC label lists.
    fn encode(&self) -> PyResult<(PyFeatureMatrix, Vec<u8>, Vec<u8>)> {
        let (matrix, labels) = encode(&self.inner).map_err(err)?;
        Ok((PyFeatureMatrix { inner: matrix }, labels.tc, labels.ec))
    }
}

/// Encoded features, one row per record; missing cells are `None`.
#[pyclass(name = "FeatureMatrix", module = "wqscreen")]
struct PyFeatureMatrix {
    inner: core::records::FeatureMatrix,
}

#[pymethods]
impl PyFeatureMatrix {
    #[staticmethod]
    fn from_csv(text: &str) -> PyResult<Self> {
        Ok(PyFeatureMatrix { inner: core::records::FeatureMatrix::read_csv(text.as_bytes()).map_err(err)? })
    }

    fn to_csv(&self) -> PyResult<String> {
        let mut buf = Vec::new();
        self.inner.write_csv(&mut buf).map_err(err)?;
        String::from_utf8(buf).map_err(err)
    }

    #[getter]
    fn shape(&self) -> (usize, usize) {
        (self.inner.n_rows(), self.inner.n_cols())
    }

    #[getter]
    fn column_names(&self) -> Vec<String> {
        self.inner.column_names()
    }

    #[getter]
    fn row_ids(&self) -> Vec<String> {
        self.inner.row_ids().to_vec()
    }

    fn rows(&self) -> Vec<Vec<Option<f64>>> {
        (0..self.inner.n_rows()).map(|r| self.inner.row(r)).collect()
    }
}

/// Cross-validation report of one stage-2 model.
#[pyclass(name = "CvReport", module = "wqscreen", from_py_object)]
#[derive(Clone)]
struct PyCvReport {
    inner: CvReport,
}

#[pymethods]
impl PyCvReport {
    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        Ok(PyCvReport { inner: CvReport::from_json(text).map_err(err)? })
    }

    fn to_json(&self) -> PyResult<String> {
        self.inner.to_json().map_err(err)
    }

    #[getter]
    fn name(&self) -> String {
        self.inner.name.clone()
    }

    #[setter]
    fn set_name(&mut self, name: String) {
        self.inner.name = name;
    }

    #[getter]
    fn metrics<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        to_py(py, &self.inner.metrics)
    }

    #[getter]
    fn oof_calibrated(&self) -> Vec<f64> {
        self.inner.oof_calibrated.clone()
    }

    #[getter]
    fn mean_fold_fbeta(&self) -> f64 {
        self.inner.mean_fold_fbeta
    }

    #[getter]
    fn global_threshold(&self) -> f64 {
        self.inner.global_threshold
    }

    #[getter]
    fn stage1_auc(&self) -> Option<f64> {
        self.inner.stage1_auc
    }
}

/// Fitted two-stage pipeline.
#[pyclass(name = "PipelineModel", module = "wqscreen")]
struct PyPipelineModel {
    inner: PipelineModel,
}

#[pymethods]
impl PyPipelineModel {
    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        Ok(PyPipelineModel { inner: PipelineModel::from_json(text).map_err(err)? })
    }

    fn to_json(&self) -> PyResult<String> {
        self.inner.to_json().map_err(err)
    }

    #[getter]
    fn t_star(&self) -> f64 {
        self.inner.t_star
    }

    #[getter]
    fn feature_names(&self) -> Vec<String> {
        self.inner.feature_names.clone()
    }

    /// `(ptc, probability, decision)` per row.
    fn predict(&self, matrix: &PyFeatureMatrix) -> PyResult<Vec<(f64, f64, bool)>> {
        let preds = core::pipeline::predict(&self.inner, &matrix.inner).map_err(err)?;
        Ok(preds.into_iter().map(|p| (p.ptc, p.probability, p.decision)).collect())
    }

    /// Stage-2 SHAP values: `(row_id, base_value, values)` per row, values
    /// in the order of `stage2_feature_names()`.
    fn explain(&self, matrix: &PyFeatureMatrix) -> PyResult<Vec<(String, f64, Vec<f64>)>> {
        let m = &self.inner;
        let scaled = m.scaler.transform(&matrix.inner.select_columns(&m.feature_names).map_err(err)?).map_err(err)?;
        let cells: Vec<Option<f64>> = predict_proba(&m.stage1, &scaled).map_err(err)?.into_iter().map(Some).collect();
        let with_ptc = scaled.with_column(Column::new(PTC_COLUMN), &cells).map_err(err)?;
        let attributions = explain_matrix(ensemble(&m.stage2).map_err(err)?, &with_ptc).map_err(err)?;
        Ok(attributions.into_iter().map(|a| (a.row_id, a.base_value, a.values)).collect())
    }

    fn stage2_feature_names(&self) -> Vec<String> {
        self.inner.stage2.feature_names().to_vec()
    }
}

/// Generate a synthetic fixture; returns `(records, truth)` with the truth
/// as a dict.
#[pyfunction]
#[pyo3(signature = (config_json=None, seed=None))]
fn synth<'py>(py: Python<'py>, config_json: Option<&str>, seed: Option<u64>) -> PyResult<(PyRecords, Bound<'py, PyAny>)> {
    let mut config: SynthConfig = config_from(config_json)?;
    if let Some(s) = seed {
        config.seed = s;
    }
    let (records, truth) = core::synth::generate(&config).map_err(err)?;
    Ok((PyRecords { inner: records }, to_py(py, &truth)?))
}

/// Cross-validate and refit the two-stage pipeline.
#[pyfunction]
#[pyo3(signature = (matrix, tc, ec, config_json=None, seed=None))]
fn train(
    matrix: &PyFeatureMatrix,
    tc: Vec<u8>,
    ec: Vec<u8>,
    config_json: Option<&str>,
    seed: Option<u64>,
) -> PyResult<(PyPipelineModel, PyCvReport)> {
    let mut config: PipelineConfig = config_from(config_json)?;
    if let Some(s) = seed {
        config.seed = s;
    }
    let run = train_pipeline(&matrix.inner, &tc, &ec, &config).map_err(err)?;
    Ok((PyPipelineModel { inner: run.model }, PyCvReport { inner: run.report }))
}

/// Paired bootstrap and McNemar comparison; returns the report as a dict.
#[pyfunction]
#[pyo3(signature = (reference, challengers, n_boot=2000, seed=0))]
fn compare<'py>(
    py: Python<'py>,
    reference: &PyCvReport,
    challengers: Vec<PyCvReport>,
    n_boot: usize,
    seed: u64,
) -> PyResult<Bound<'py, PyAny>> {
    let challengers: Vec<CvReport> = challengers.into_iter().map(|c| c.inner).collect();
    let report = core::stats::compare_models(&reference.inner, &challengers, n_boot, seed).map_err(err)?;
    to_py(py, &report)
}

#[pyfunction]
#[pyo3(signature = (n00, n01, n10, n11, haldane=false))]
fn contingency_stats<'py>(py: Python<'py>, n00: u64, n01: u64, n10: u64, n11: u64, haldane: bool) -> PyResult<Bound<'py, PyAny>> {
    let stats = core::stats::contingency_stats(ContingencyCounts::new(n00, n01, n10, n11), haldane).map_err(err)?;
    to_py(py, &stats)
}

#[pyfunction]
fn bh_fdr(p_values: Vec<f64>) -> PyResult<Vec<f64>> {
    core::stats::bh_fdr(&p_values).map_err(err)
}

#[pyfunction]
fn roc_auc(scores: Vec<f64>, labels: Vec<u8>) -> PyResult<f64> {
    core::metrics::roc_auc(&scores, &labels).map_err(err)
}

#[pyfunction]
fn select_threshold(probs: Vec<f64>, labels: Vec<u8>, beta: f64) -> PyResult<f64> {
    core::pipeline::select_threshold(&probs, &labels, beta).map_err(err)
}

/// `(train, test)` row indices.
#[pyfunction]
fn stratified_split(labels: Vec<u8>, test_fraction: f64, seed: u64) -> PyResult<(Vec<usize>, Vec<usize>)> {
    core::records::stratified_split(&labels, test_fraction, seed).map_err(err)
}

#[pymodule(name = "wqscreen")]
fn wqscreen_module(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("WqscreenError", m.py().get_type::<WqscreenError>())?;
    m.add_class::<PyRecords>()?;
    m.add_class::<PyFeatureMatrix>()?;
    m.add_class::<PyCvReport>()?;
    m.add_class::<PyPipelineModel>()?;
    m.add_function(wrap_pyfunction!(synth, m)?)?;
    m.add_function(wrap_pyfunction!(train, m)?)?;
    m.add_function(wrap_pyfunction!(compare, m)?)?;
    m.add_function(wrap_pyfunction!(contingency_stats, m)?)?;
    m.add_function(wrap_pyfunction!(bh_fdr, m)?)?;
    m.add_function(wrap_pyfunction!(roc_auc, m)?)?;
    m.add_function(wrap_pyfunction!(select_threshold, m)?)?;
    m.add_function(wrap_pyfunction!(stratified_split, m)?)?;
    Ok(())
}
