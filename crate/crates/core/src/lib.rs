//! Flowing-liquid detection, temporal filtering, suction trajectory
//! planning and execution against a heightfield cavity simulator.

pub mod config;
pub mod controller;
pub mod error;
pub mod filter;
pub mod flow;
pub mod io;
pub mod morph;
pub mod pipeline;
pub mod region;
pub mod sim;
pub mod trajectory;
pub mod types;

pub use config::{default_config, PipelineConfig};
pub use controller::{execute, step_toward, ControllerParams, ExecutionReport, Phase, ToolState};
pub use error::{Error, Result};
pub use filter::{filter_step, neighbor_or_prob, predict, update, FilterState};
pub use flow::{detect, estimate_flow, DetectionMap, FlowEstimatorKind};
pub use pipeline::{compare_baseline, iou, run_pipeline, run_scene, MetricsRecord, RunOptions};
pub use region::extract_region;
pub use sim::{apply_suction, scene_by_name, step, CavityScene, FluidState};
pub use trajectory::{clearance_reward, gate_and_emit, plan, select_endpoints, update_age, ClearanceRewardMap};
pub use types::{
    AgeCountMap, BloodMask, Connectivity, FlowField, Frame, GridDims, Pixel, PixelTrajectory, PosteriorMap,
};
