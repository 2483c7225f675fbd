//! Python bindings for the detection, filtering, planning and simulation
//! pipeline.
//!
//! Masks cross the boundary as lists of strings (`'#'` marks a set pixel),
//! maps as flat row-major lists.

use pyo3::exceptions::{PyIOError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use hemoflow::pipeline::{run_scene as run_scene_rs, RunOptions};
use hemoflow::{
    AgeCountMap, BloodMask, Connectivity, DetectionMap, Error, FilterState, FlowEstimatorKind, GridDims, Pixel,
    PipelineConfig,
};

fn to_py(err: Error) -> PyErr {
    match err {
        Error::Io(e) => PyIOError::new_err(e.to_string()),
        other => PyValueError::new_err(other.to_string()),
    }
}

fn parse_mask(rows: Vec<String>) -> PyResult<BloodMask> {
    let rows: Vec<&str> = rows.iter().map(String::as_str).collect();
    BloodMask::from_ascii(&rows).map_err(to_py)
}

fn mask_rows(mask: &BloodMask) -> Vec<String> {
    let d = mask.dims();
    (0..d.height)
        .map(|r| {
            (0..d.width)
                .map(|c| if mask.get(Pixel::new(c, r)) { '#' } else { '.' })
                .collect()
        })
        .collect()
}

/// Detector, filter and planner parameters.
#[pyclass(name = "PipelineConfig", from_py_object)]
#[derive(Clone)]
struct PyConfig {
    inner: PipelineConfig,
}

#[pymethods]
impl PyConfig {
    #[new]
    fn new() -> Self {
        Self {
            inner: PipelineConfig::default(),
        }
    }

    /// Parses `key=value` text; unspecified keys keep their defaults.
    #[staticmethod]
    fn from_kv(text: &str) -> PyResult<Self> {
        let inner = PipelineConfig::parse_kv(text).map_err(to_py)?;
        Ok(Self { inner })
    }

    fn to_kv(&self) -> String {
        self.inner.to_kv_string()
    }

    fn validate(&self) -> PyResult<()> {
        self.inner.validate().map_err(to_py)
    }

    fn get(&self, key: &str) -> PyResult<f64> {
        let c = &self.inner;
        Ok(match key {
            "gamma_o" => c.gamma_o,
            "gamma_B" => c.gamma_b as f64,
            "gamma_r" => c.gamma_r as f64,
            "gamma_T" => c.gamma_t as f64,
            "r" => c.r,
            "p_det_tp" => c.p_det_tp,
            "p_det_fp" => c.p_det_fp,
            "p_prior" => c.p_prior,
            "p_bb" => c.p_bb,
            "p_nb_k" => c.p_nb_k,
            "p_nb_nk" => c.p_nb_nk,
            "connectivity" => c.connectivity.count() as f64,
            "flow_downscale" => c.flow_downscale as f64,
            _ => return Err(PyValueError::new_err(format!("unknown key {key:?}"))),
        })
    }

    /// Sets one field through the same parser as config files.
    fn set(&mut self, key: &str, value: &str) -> PyResult<()> {
        let text = format!("{}{key}={value}\n", self.inner.to_kv_string());
        self.inner = PipelineConfig::parse_kv(&text).map_err(to_py)?;
        Ok(())
    }

    fn __repr__(&self) -> String {
        format!("PipelineConfig({})", self.inner.to_kv_string().trim().replace('\n', ", "))
    }
}

/// Per-pixel temporal filter over a `width x height` grid.
#[pyclass(name = "Filter")]
struct PyFilter {
    state: FilterState,
}

#[pymethods]
impl PyFilter {
    #[new]
    #[pyo3(signature = (width, height, config=None))]
    fn new(width: usize, height: usize, config: Option<PyConfig>) -> PyResult<Self> {
        let dims = GridDims::new(width, height).map_err(to_py)?;
        let cfg = config.map(|c| c.inner).unwrap_or_default();
        cfg.validate().map_err(to_py)?;
        Ok(Self {
            state: FilterState::new(dims, cfg),
        })
    }

    /// Predict and update with a row-major list of detections.
    fn step(&mut self, detections: Vec<bool>) -> PyResult<()> {
        let z = BloodMask::new(self.state.dims(), detections).map_err(to_py)?;
        self.state = hemoflow::filter_step(&self.state, &DetectionMap::from_mask(z)).map_err(to_py)?;
        Ok(())
    }

    fn posterior(&self) -> Vec<f64> {
        self.state.posterior.prob().to_vec()
    }

    /// Largest denoised region above 0.5, or `None` below the size gate.
    fn region(&self) -> Option<Vec<String>> {
        let c = &self.state.cfg;
        hemoflow::extract_region(&self.state.posterior, c.gamma_b, c.connectivity).map(|m| mask_rows(&m))
    }

    #[getter]
    fn t(&self) -> usize {
        self.state.t
    }
}

#[pyfunction]
fn neighbor_or_prob(probs: Vec<f64>) -> PyResult<f64> {
    if probs.len() > 8 {
        return Err(PyValueError::new_err("at most 8 neighbour probabilities"));
    }
    Ok(hemoflow::neighbor_or_prob(&probs))
}

#[pyfunction]
fn iou(a: Vec<String>, b: Vec<String>) -> PyResult<f64> {
    hemoflow::iou(&parse_mask(a)?, &parse_mask(b)?).map_err(to_py)
}

/// Plans a path from the youngest to the oldest pixel of `mask`, returning
/// `(col, row)` pairs, or `None` if the length gate rejects it.
#[pyfunction]
#[pyo3(signature = (mask, ages, config=None))]
fn plan(mask: Vec<String>, ages: Vec<u32>, config: Option<PyConfig>) -> PyResult<Option<Vec<(usize, usize)>>> {
    let cfg = config.map(|c| c.inner).unwrap_or_default();
    let mask = parse_mask(mask)?;
    let ages = AgeCountMap::new(mask.dims(), ages).map_err(to_py)?;
    let (start, end) = hemoflow::select_endpoints(&ages, &mask).map_err(to_py)?;
    let reward = hemoflow::clearance_reward(&mask, cfg.r, cfg.gamma_r);
    let path = hemoflow::plan(start, end, &mask, &reward, cfg.connectivity).map_err(to_py)?;
    Ok(hemoflow::gate_and_emit(path, cfg.gamma_t).map(|t| t.waypoints.iter().map(|p| (p.col, p.row)).collect()))
}

/// One clamped controller step from `position` towards `goal`.
#[pyfunction]
#[pyo3(signature = (position, goal, gamma_s=0.75))]
fn step_toward(position: [f64; 3], goal: [f64; 3], gamma_s: f64) -> PyResult<[f64; 3]> {
    if !(gamma_s > 0.0) {
        return Err(PyValueError::new_err("gamma_s must be positive"));
    }
    let params = hemoflow::ControllerParams {
        gamma_s,
        ..Default::default()
    };
    Ok(hemoflow::step_toward(&hemoflow::ToolState::at(position), goal, &params).position)
}

#[pyfunction]
fn scene_names() -> Vec<&'static str> {
    hemoflow::sim::scene_names()
}

/// Runs detection, planning and suction on a builtin scene.
#[pyfunction]
#[pyo3(signature = (name, config=None, estimator="gt", seed=0, max_frames=61))]
fn run_scene<'py>(
    py: Python<'py>,
    name: &str,
    config: Option<PyConfig>,
    estimator: &str,
    seed: u64,
    max_frames: usize,
) -> PyResult<Bound<'py, PyDict>> {
    let cfg = config.map(|c| c.inner).unwrap_or_default();
    let kind: FlowEstimatorKind = estimator.parse().map_err(to_py)?;
    let scene = hemoflow::scene_by_name(name, seed).map_err(to_py)?;
    let opts = RunOptions {
        max_frames,
        ..Default::default()
    };
    let run = py
        .detach(|| run_scene_rs(&scene, &cfg, kind, &opts))
        .map_err(to_py)?;

    let out = PyDict::new(py);
    out.set_item("scene", name)?;
    out.set_item("gate_frame", run.pipeline.gate_frame)?;
    out.set_item("reacted_at_frame", run.pipeline.reacted_after())?;
    out.set_item(
        "trajectory",
        run.pipeline
            .trajectory
            .as_ref()
            .map(|t| t.waypoints.iter().map(|p| (p.col, p.row)).collect::<Vec<_>>()),
    )?;
    out.set_item("removal_pct", run.removal_pct)?;
    out.set_item("iou_filtered", run.records().iter().map(|r| r.iou_filtered).collect::<Vec<_>>())?;
    out.set_item("iou_raw", run.records().iter().map(|r| r.iou_raw).collect::<Vec<_>>())?;
    out.set_item("report", run.report_text())?;
    Ok(out)
}

#[pymodule]
fn hemoflow_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyConfig>()?;
    m.add_class::<PyFilter>()?;
    m.add_function(wrap_pyfunction!(neighbor_or_prob, m)?)?;
    m.add_function(wrap_pyfunction!(iou, m)?)?;
    m.add_function(wrap_pyfunction!(plan, m)?)?;
    m.add_function(wrap_pyfunction!(step_toward, m)?)?;
    m.add_function(wrap_pyfunction!(scene_names, m)?)?;
    m.add_function(wrap_pyfunction!(run_scene, m)?)?;
    m.add("CONNECTIVITY_DEFAULT", Connectivity::Four.count())?;
    Ok(())
}
