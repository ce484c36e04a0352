//! Python bindings. Structured results cross the boundary as JSON and come
//! out as plain dicts and lists.

use std::path::PathBuf;

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use serde::Serialize;
use vidcritic::critic::parse_verdict as parse_verdict_text;
use vidcritic::dsl::parse_program;
use vidcritic::eval::{load_dataset, suite, Mode, ModelConfig, Pipeline, RunConfig};
use vidcritic::toolkit::StrategyLabel;
use vidcritic::{TaskKind, Timestamp, VideoSegment};

fn value_error(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn to_py<'py>(py: Python<'py>, value: &impl Serialize) -> PyResult<Bound<'py, PyAny>> {
    let text = serde_json::to_string(value).map_err(|e| PyRuntimeError::new_err(e.to_string()))?;
    py.import("json")?.call_method1("loads", (text,))
}

fn segments(pairs: Vec<(u32, u32)>) -> PyResult<Vec<VideoSegment>> {
    pairs
        .into_iter()
        .map(|(a, b)| VideoSegment::from_secs(a, b).map_err(value_error))
        .collect()
}

/// "MM:SS" or "H:MM:SS" to whole seconds.
#[pyfunction]
pub fn parse_timestamp(text: &str) -> PyResult<u32> {
    vidcritic::parse_timestamp(text).map(|t| t.secs()).map_err(value_error)
}

#[pyfunction]
pub fn format_timestamp(seconds: u32) -> String {
    vidcritic::format_timestamp(Timestamp::from_secs(seconds))
}

/// IOU of two lists of (start, end) second pairs, each taken as a union.
#[pyfunction]
pub fn interval_union_iou(predicted: Vec<(u32, u32)>, truth: Vec<(u32, u32)>) -> PyResult<f64> {
    Ok(vidcritic::interval_union_iou(&segments(predicted)?, &segments(truth)?))
}

/// `kind` is "multiple_choice" or "temporal_range".
#[pyfunction]
#[pyo3(signature = (text, kind = "multiple_choice"))]
pub fn parse_final_answer<'py>(py: Python<'py>, text: &str, kind: &str) -> PyResult<Bound<'py, PyAny>> {
    let kind: TaskKind = serde_json::from_value(serde_json::Value::String(kind.into())).map_err(value_error)?;
    to_py(py, &vidcritic::parse_final_answer(text, kind))
}

/// Number of statements in a program; raises ValueError when it does not parse.
#[pyfunction]
pub fn check_program(source: &str) -> PyResult<usize> {
    parse_program(source).map(|p| p.statements.len()).map_err(value_error)
}

#[pyfunction]
#[pyo3(signature = (response, labels = "ABC"))]
pub fn parse_verdict<'py>(py: Python<'py>, response: &str, labels: &str) -> PyResult<Bound<'py, PyAny>> {
    let presented: Vec<StrategyLabel> = labels.chars().map(StrategyLabel).collect();
    to_py(py, &parse_verdict_text(response, &presented))
}

/// Writes the synthetic check suite and returns its paths and task groups.
#[pyfunction]
pub fn write_suite<'py>(py: Python<'py>, dir: PathBuf) -> PyResult<Bound<'py, PyAny>> {
    let s = suite::write_suite(&dir).map_err(|e| PyRuntimeError::new_err(e.to_string()))?;
    let out = serde_json::json!({
        "choice_dataset": s.choice_dataset,
        "range_dataset": s.range_dataset,
        "verdicts": s.verdicts,
        "locality": s.locality,
        "poisoned": s.poisoned,
        "ranges": s.ranges,
    });
    to_py(py, &out)
}

/// Evaluates a dataset with the scripted policy model and oracle tools unless
/// `config` names a TOML file saying otherwise. Returns the report.
#[pyfunction]
#[pyo3(signature = (dataset, mode = "agent_critic", profile = None, config = None, verdicts = None, traces_dir = None))]
pub fn evaluate<'py>(
    py: Python<'py>,
    dataset: PathBuf,
    mode: &str,
    profile: Option<String>,
    config: Option<PathBuf>,
    verdicts: Option<PathBuf>,
    traces_dir: Option<PathBuf>,
) -> PyResult<Bound<'py, PyAny>> {
    let mode: Mode = mode.parse().map_err(PyValueError::new_err)?;
    let mut c = match config {
        Some(p) => RunConfig::load(&p).map_err(value_error)?,
        None => RunConfig::default(),
    };
    if let Some(p) = profile {
        c.profile = p;
    }
    if verdicts.is_some() {
        c.model = ModelConfig { verdicts, ..c.model };
    }
    if traces_dir.is_some() {
        c.traces_dir = traces_dir;
    }
    let report = py
        .detach(|| {
            let p = Pipeline::from_config(c)?;
            let items = load_dataset(&dataset, Some(&p.profile))?;
            p.evaluate(&items, mode)
        })
        .map_err(value_error)?;
    to_py(py, &report)
}

#[pymodule]
#[pyo3(name = "vidcritic")]
fn vidcritic_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_function(wrap_pyfunction!(parse_timestamp, m)?)?;
    m.add_function(wrap_pyfunction!(format_timestamp, m)?)?;
    m.add_function(wrap_pyfunction!(interval_union_iou, m)?)?;
    m.add_function(wrap_pyfunction!(parse_final_answer, m)?)?;
    m.add_function(wrap_pyfunction!(check_program, m)?)?;
    m.add_function(wrap_pyfunction!(parse_verdict, m)?)?;
    m.add_function(wrap_pyfunction!(write_suite, m)?)?;
    m.add_function(wrap_pyfunction!(evaluate, m)?)?;
    Ok(())
}
