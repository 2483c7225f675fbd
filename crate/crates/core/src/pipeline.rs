//! End-to-end orchestration: simulate, detect, filter, extract, plan and
//! execute, with per-frame metrics and the raw-thresholding baseline.

use std::fmt::Write as _;

use rayon::prelude::*;

use crate::config::PipelineConfig;
use crate::controller::{execute, pixel_to_world, ControllerParams, ExecutionReport};
use crate::error::{Error, Result};
use crate::filter::{predict_map, update, FilterState};
use crate::flow::{detect, DetectionMap, FlowEstimatorKind, FrameBuffer, DEFAULT_FLOW_FRAMES};
use crate::region::{denoise, largest_component, threshold_mask};
use crate::sim::{scene_by_name, step, CavityScene, FluidState, EVAL_SCENES, SEQUENCE_FRAMES};
use crate::trajectory::{clearance_reward, gate_and_emit, plan, select_endpoints, update_age};
use crate::types::{AgeCountMap, BloodMask, FlowField, Frame, GridDims, Pixel, PixelTrajectory, PosteriorMap};

pub const METRICS_HEADER: &str = "scene,frame,iou_filtered,iou_raw,reacted_at_frame,removal_pct,trajectory_len";

/// `|a ∧ b| / |a ∨ b|`, with two empty masks scoring 1.
pub fn iou(a: &BloodMask, b: &BloodMask) -> Result<f64> {
    a.dims().ensure_same(b.dims())?;
    let (mut inter, mut union) = (0usize, 0usize);
    for (&x, &y) in a.bits().iter().zip(b.bits()) {
        inter += (x && y) as usize;
        union += (x || y) as usize;
    }
    Ok(if union == 0 { 1.0 } else { inter as f64 / union as f64 })
}

/// Operations recorded by an instrumented run, in execution order.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Stage {
    Detect,
    Predict,
    Update,
    Extract,
    RegionGate,
    Age,
    Endpoints,
    Plan,
    TrajectoryGate,
    Execute,
}

#[derive(Clone, Debug, PartialEq)]
pub struct MetricsRecord {
    pub scene: String,
    pub frame: usize,
    pub iou_filtered: f64,
    pub iou_raw: f64,
    /// Frames from first visible liquid to the trajectory gate passing.
    pub reacted_at_frame: Option<usize>,
    pub removal_pct: Option<f64>,
    pub trajectory_len: Option<usize>,
}

fn opt<T: std::fmt::Display>(v: Option<T>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

pub fn metrics_csv(records: &[MetricsRecord]) -> String {
    let mut s = String::from(METRICS_HEADER);
    s.push('\n');
    for r in records {
        let _ = writeln!(
            s,
            "{},{},{:.6},{:.6},{},{},{}",
            r.scene,
            r.frame,
            r.iou_filtered,
            r.iou_raw,
            opt(r.reacted_at_frame),
            opt(r.removal_pct.map(|p| format!("{p:.3}"))),
            opt(r.trajectory_len),
        );
    }
    s
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunOptions {
    /// Frames available for detection before giving up.
    pub max_frames: usize,
    /// Frames per flow estimate.
    pub flow_frames: usize,
    /// Leading frames excluded from baseline summaries.
    pub warmup: usize,
    pub controller: ControllerParams,
}

impl Default for RunOptions {
    fn default() -> Self {
        Self {
            max_frames: SEQUENCE_FRAMES,
            flow_frames: DEFAULT_FLOW_FRAMES,
            warmup: 10,
            controller: ControllerParams::default(),
        }
    }
}

/// Per-frame output of [`Detector::process`], at flow resolution.
#[derive(Clone, Debug, PartialEq)]
pub struct FrameDetection {
    pub flow: FlowField,
    pub detections: DetectionMap,
    pub posterior: PosteriorMap,
    pub region: Option<BloodMask>,
}

/// Streaming detection front end: frame buffer, flow, detection, filter and
/// region extraction.
#[derive(Clone, Debug)]
pub struct Detector {
    kind: FlowEstimatorKind,
    buffer: FrameBuffer,
    filter: FilterState,
}

impl Detector {
    pub fn new(full: GridDims, cfg: &PipelineConfig, kind: FlowEstimatorKind, flow_frames: usize) -> Result<Self> {
        cfg.validate()?;
        let dims = full.downscaled(cfg.flow_downscale)?;
        Ok(Self {
            kind,
            buffer: FrameBuffer::new(flow_frames)?,
            filter: FilterState::new(dims, cfg.clone()),
        })
    }

    pub fn flow_dims(&self) -> GridDims {
        self.filter.dims()
    }

    pub fn posterior(&self) -> &PosteriorMap {
        &self.filter.posterior
    }

    /// Feeds one frame; returns `None` while the buffer is still filling.
    pub fn process(
        &mut self,
        frame: Frame,
        truth_flow: Option<FlowField>,
        trace: &mut Vec<Stage>,
    ) -> Result<Option<FrameDetection>> {
        self.buffer.push(frame, truth_flow)?;
        if !self.buffer.is_ready() {
            return Ok(None);
        }
        let cfg = &self.filter.cfg;
        let flow = self.buffer.estimate(self.kind, cfg.flow_downscale)?;
        trace.push(Stage::Detect);
        let detections = detect(&flow, cfg.gamma_o);
        trace.push(Stage::Predict);
        let predicted = predict_map(&self.filter.posterior, cfg);
        trace.push(Stage::Update);
        let posterior = update(&predicted, &detections, cfg)?;
        trace.push(Stage::Extract);
        let cleaned = denoise(&threshold_mask(&posterior));
        trace.push(Stage::RegionGate);
        let region = largest_component(&cleaned, cfg.gamma_b, cfg.connectivity);

        self.filter.posterior = posterior.clone();
        self.filter.t += 1;
        Ok(Some(FrameDetection {
            flow,
            detections,
            posterior,
            region,
        }))
    }
}

/// Result of the detection and planning loop on one scene.
#[derive(Clone, Debug)]
pub struct PipelineOutcome {
    pub records: Vec<MetricsRecord>,
    /// Planned path at flow resolution.
    pub trajectory: Option<PixelTrajectory>,
    /// Frame index at which the trajectory gate passed.
    pub gate_frame: Option<usize>,
    /// First frame with a nonempty truth mask.
    pub first_visible: Option<usize>,
    pub ages: AgeCountMap,
    pub last_region: Option<BloodMask>,
    /// Fluid state after the last simulated frame.
    pub state: FluidState,
    /// Index of the next frame to simulate.
    pub next_frame: usize,
    pub trace: Vec<Stage>,
}

impl PipelineOutcome {
    pub fn reacted_after(&self) -> Option<usize> {
        match (self.gate_frame, self.first_visible) {
            (Some(g), Some(v)) => Some(g.saturating_sub(v)),
            _ => None,
        }
    }
}

fn use_truth(kind: FlowEstimatorKind) -> bool {
    kind == FlowEstimatorKind::GroundTruth
}

/// Detection and planning until the trajectory gate passes or the frame
/// budget runs out.
pub fn run_pipeline(
    scene: &CavityScene,
    cfg: &PipelineConfig,
    kind: FlowEstimatorKind,
    opts: &RunOptions,
) -> Result<PipelineOutcome> {
    let full = scene.dims();
    let mut detector = Detector::new(full, cfg, kind, opts.flow_frames)?;
    let flow_dims = detector.flow_dims();
    let mut state = scene.initial_state();
    let mut ages = AgeCountMap::zeros(flow_dims);
    let mut out = PipelineOutcome {
        records: Vec::new(),
        trajectory: None,
        gate_frame: None,
        first_visible: None,
        ages: ages.clone(),
        last_region: None,
        state: state.clone(),
        next_frame: 0,
        trace: Vec::new(),
    };

    for t in 0..opts.max_frames {
        let (next, sim) = step(scene, &state, t)?;
        state = next;
        out.next_frame = t + 1;
        if out.first_visible.is_none() && !sim.truth_mask.is_clear() {
            out.first_visible = Some(t);
        }
        let truth = use_truth(kind).then(|| sim.truth_flow.clone());
        let det = detector.process(sim.frame, truth, &mut out.trace)?;

        let (filtered, raw) = match &det {
            Some(d) => (
                d.region.clone().unwrap_or_else(|| BloodMask::empty(flow_dims)),
                d.detections.as_mask().clone(),
            ),
            None => (BloodMask::empty(flow_dims), BloodMask::empty(flow_dims)),
        };
        out.records.push(MetricsRecord {
            scene: scene.name.clone(),
            frame: t,
            iou_filtered: iou(&filtered.resample_nearest(full), &sim.truth_mask)?,
            iou_raw: iou(&raw.resample_nearest(full), &sim.truth_mask)?,
            reacted_at_frame: None,
            removal_pct: None,
            trajectory_len: None,
        });

        let Some(region) = det.and_then(|d| d.region) else {
            continue;
        };
        out.trace.push(Stage::Age);
        ages = update_age(&ages, &region)?;
        out.trace.push(Stage::Endpoints);
        let (start, end) = select_endpoints(&ages, &region)?;
        out.trace.push(Stage::Plan);
        let reward = clearance_reward(&region, cfg.r, cfg.gamma_r);
        let path = plan(start, end, &region, &reward, cfg.connectivity)?;
        out.last_region = Some(region);
        out.trace.push(Stage::TrajectoryGate);
        if let Some(traj) = gate_and_emit(path, cfg.gamma_t) {
            out.gate_frame = Some(t);
            let reacted = out.reacted_after();
            let rec = out.records.last_mut().expect("record pushed above");
            rec.reacted_at_frame = reacted;
            rec.trajectory_len = Some(traj.len());
            out.trajectory = Some(traj);
            break;
        }
    }
    out.ages = ages;
    out.state = state;
    Ok(out)
}

/// Flow-resolution pixel to the centre of its block at full resolution.
pub fn to_scene_pixel(p: Pixel, downscale: usize, full: GridDims) -> Pixel {
    let c = (p.col * downscale + downscale / 2).min(full.width - 1);
    let r = (p.row * downscale + downscale / 2).min(full.height - 1);
    Pixel::new(c, r)
}

pub fn to_scene_trajectory(traj: &PixelTrajectory, downscale: usize, full: GridDims) -> PixelTrajectory {
    PixelTrajectory::new(
        traj.waypoints
            .iter()
            .map(|&p| to_scene_pixel(p, downscale, full))
            .collect(),
    )
}

#[derive(Clone, Debug)]
pub struct SceneRun {
    pub pipeline: PipelineOutcome,
    pub execution: Option<ExecutionReport>,
    pub final_state: FluidState,
    pub removal_pct: Option<f64>,
}

impl SceneRun {
    pub fn records(&self) -> &[MetricsRecord] {
        &self.pipeline.records
    }

    /// `summary,...` line appended to the execution report.
    pub fn summary_line(&self) -> String {
        let ticks = self.execution.as_ref().map(|e| e.ticks_used());
        let aborted = self.execution.as_ref().is_some_and(|e| e.aborted);
        format!(
            "summary,scene={},gate_frame={},reacted_at_frame={},trajectory_len={},ticks={},emitted={:.6},removed={:.6},remaining={:.6},removal_pct={},aborted={}",
            self.pipeline.records.first().map(|r| r.scene.as_str()).unwrap_or(""),
            opt(self.pipeline.gate_frame),
            opt(self.pipeline.reacted_after()),
            opt(self.pipeline.trajectory.as_ref().map(|t| t.len())),
            opt(ticks),
            self.final_state.total_emitted,
            self.final_state.total_removed,
            self.final_state.total_volume(),
            opt(self.removal_pct.map(|p| format!("{p:.3}"))),
            aborted,
        )
    }

    /// Per-tick CSV followed by the summary line.
    pub fn report_text(&self) -> String {
        let mut s = match &self.execution {
            Some(e) => e.to_csv(),
            None => String::from("tick,x,y,depth,removed_cumulative\n"),
        };
        s.push_str(&self.summary_line());
        s.push('\n');
        s
    }
}

/// Detection, planning and, if the gate passed, execution of the
/// trajectory from the scene centre.
pub fn run_scene(
    scene: &CavityScene,
    cfg: &PipelineConfig,
    kind: FlowEstimatorKind,
    opts: &RunOptions,
) -> Result<SceneRun> {
    let mut pipeline = run_pipeline(scene, cfg, kind, opts)?;
    let Some(traj) = pipeline.trajectory.clone() else {
        let final_state = pipeline.state.clone();
        return Ok(SceneRun {
            pipeline,
            execution: None,
            final_state,
            removal_pct: None,
        });
    };
    let full = scene.dims();
    let path = to_scene_trajectory(&traj, cfg.flow_downscale, full);
    let centre = Pixel::new(full.width / 2, full.height / 2);
    let start = pixel_to_world(centre, scene)?;
    pipeline.trace.push(Stage::Execute);
    let (final_state, report) = execute(&path, scene, &pipeline.state, pipeline.next_frame, start, &opts.controller)?;
    let removal_pct = (final_state.total_emitted > 0.0)
        .then(|| (100.0 * final_state.total_removed / final_state.total_emitted).clamp(0.0, 100.0));
    if let Some(rec) = pipeline.records.last_mut() {
        rec.removal_pct = removal_pct;
    }
    Ok(SceneRun {
        pipeline,
        execution: Some(report),
        final_state,
        removal_pct,
    })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Quartiles {
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
}

impl Quartiles {
    /// Linear-interpolation quantiles; `None` for an empty sample.
    pub fn of(values: &[f64]) -> Option<Self> {
        if values.is_empty() {
            return None;
        }
        let mut v = values.to_vec();
        v.sort_by(f64::total_cmp);
        let q = |p: f64| {
            let pos = p * (v.len() - 1) as f64;
            let lo = pos.floor() as usize;
            let hi = pos.ceil() as usize;
            v[lo] + (v[hi] - v[lo]) * (pos - lo as f64)
        };
        Some(Self {
            q1: q(0.25),
            median: q(0.5),
            q3: q(0.75),
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct BaselineSummary {
    pub scene: String,
    /// `(frame, iou_filtered, iou_raw)` for every frame.
    pub frames: Vec<(usize, f64, f64)>,
    pub warmup: usize,
    pub filtered: Quartiles,
    pub raw: Quartiles,
}

/// Filtered region versus raw thresholded detections, over the whole frame
/// budget without stopping at the trajectory gate.
pub fn compare_baseline(
    scene: &CavityScene,
    cfg: &PipelineConfig,
    kind: FlowEstimatorKind,
    opts: &RunOptions,
) -> Result<BaselineSummary> {
    let full = scene.dims();
    let mut detector = Detector::new(full, cfg, kind, opts.flow_frames)?;
    let flow_dims = detector.flow_dims();
    let mut state = scene.initial_state();
    let mut trace = Vec::new();
    let mut frames = Vec::with_capacity(opts.max_frames);
    for t in 0..opts.max_frames {
        let (next, sim) = step(scene, &state, t)?;
        state = next;
        let truth = use_truth(kind).then(|| sim.truth_flow.clone());
        let det = detector.process(sim.frame, truth, &mut trace)?;
        let (filtered, raw) = match det {
            Some(d) => (
                d.region.unwrap_or_else(|| BloodMask::empty(flow_dims)),
                d.detections.into_mask(),
            ),
            None => (BloodMask::empty(flow_dims), BloodMask::empty(flow_dims)),
        };
        frames.push((
            t,
            iou(&filtered.resample_nearest(full), &sim.truth_mask)?,
            iou(&raw.resample_nearest(full), &sim.truth_mask)?,
        ));
    }
    let kept: Vec<_> = frames.iter().filter(|f| f.0 >= opts.warmup).collect();
    let filtered = kept.iter().map(|f| f.1).collect::<Vec<_>>();
    let raw = kept.iter().map(|f| f.2).collect::<Vec<_>>();
    let too_short = || Error::NotEnoughFrames {
        needed: opts.warmup + 1,
        have: opts.max_frames,
    };
    Ok(BaselineSummary {
        scene: scene.name.clone(),
        filtered: Quartiles::of(&filtered).ok_or_else(too_short)?,
        raw: Quartiles::of(&raw).ok_or_else(too_short)?,
        frames,
        warmup: opts.warmup,
    })
}

/// Scene names for `--scenes`: `all` or a comma-separated list.
pub fn resolve_scenes(list: &str) -> Result<Vec<String>> {
    if list == "all" {
        return Ok(EVAL_SCENES.iter().map(|s| s.to_string()).collect());
    }
    let names: Vec<String> = list
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(String::from)
        .collect();
    if names.is_empty() {
        return Err(Error::UnknownScene(list.to_string()));
    }
    Ok(names)
}

/// Runs every scene in parallel and concatenates the records in input
/// order.
pub fn evaluate(
    names: &[String],
    seed: u64,
    cfg: &PipelineConfig,
    kind: FlowEstimatorKind,
    opts: &RunOptions,
) -> Result<Vec<MetricsRecord>> {
    let runs = names
        .par_iter()
        .map(|n| {
            let scene = scene_by_name(n, seed)?;
            run_scene(&scene, cfg, kind, opts).map(|r| r.pipeline.records)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(runs.into_iter().flatten().collect())
}
