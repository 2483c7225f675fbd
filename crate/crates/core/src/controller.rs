//! Step-clamped Cartesian controller that drives a point suction tool along
//! a planned path inside the simulator.
//!
//! World coordinates are `(x, y, depth)` in scene pixels, with `depth` the
//! floor height under the tool. The camera frame is the world frame.

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::sim::{apply_suction, step, CavityScene, FluidState};
use crate::types::{Pixel, PixelTrajectory};

pub type Point3 = [f64; 3];

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Phase {
    Traveling,
    Probing,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ToolState {
    pub position: Point3,
    pub phase: Phase,
}

impl ToolState {
    pub fn at(position: Point3) -> Self {
        Self {
            position,
            phase: Phase::Traveling,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ControllerParams {
    /// Maximum displacement per tick.
    pub gamma_s: f64,
    /// A waypoint counts as reached once closer than this.
    pub arrive_tol: f64,
    /// Extra downward travel of the probe at every waypoint.
    pub probe_depth: f64,
    /// Controller ticks per simulator frame.
    pub tick_rate: usize,
    /// Suction reach around the tool, in pixels.
    pub suction_radius: f64,
    /// Volume removed per tick at most.
    pub suction_capacity: f64,
    /// Hard limit on ticks for one execution.
    pub max_ticks: usize,
    /// Every `decimation`-th waypoint is visited (endpoints always).
    pub decimation: usize,
}

impl Default for ControllerParams {
    fn default() -> Self {
        Self {
            gamma_s: 0.75,
            arrive_tol: 2.0,
            probe_depth: 5.0,
            tick_rate: 4,
            suction_radius: 8.0,
            suction_capacity: 2.0,
            max_ticks: 10_000,
            decimation: 3,
        }
    }
}

impl ControllerParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.gamma_s > 0.0 && self.gamma_s.is_finite()) {
            return Err(Error::Config(format!("gamma_s={} must be positive", self.gamma_s)));
        }
        if !(self.arrive_tol > 0.0 && self.arrive_tol.is_finite()) {
            return Err(Error::Config(format!("arrive_tol={} must be positive", self.arrive_tol)));
        }
        if self.tick_rate == 0 || self.decimation == 0 {
            return Err(Error::Config("tick_rate and decimation must be positive".into()));
        }
        if self.suction_radius < 1.0 {
            return Err(Error::Config("suction_radius must be at least 1".into()));
        }
        Ok(())
    }
}

fn sub(a: Point3, b: Point3) -> Point3 {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

pub fn norm(a: Point3) -> f64 {
    (a[0] * a[0] + a[1] * a[1] + a[2] * a[2]).sqrt()
}

pub fn distance(a: Point3, b: Point3) -> f64 {
    norm(sub(a, b))
}

/// Moves straight to `goal` if it is within `gamma_s`, otherwise exactly
/// `gamma_s` towards it.
pub fn step_toward(tool: &ToolState, goal: Point3, params: &ControllerParams) -> ToolState {
    let d = sub(goal, tool.position);
    let len = norm(d);
    let position = if len <= params.gamma_s {
        goal
    } else {
        let k = params.gamma_s / len;
        [
            tool.position[0] + k * d[0],
            tool.position[1] + k * d[1],
            tool.position[2] + k * d[2],
        ]
    };
    ToolState {
        position,
        phase: tool.phase,
    }
}

/// Pixel centre with the floor height as depth.
pub fn pixel_to_world(p: Pixel, scene: &CavityScene) -> Result<Point3> {
    let dims = scene.dims();
    if p.col >= dims.width || p.row >= dims.height {
        return Err(Error::OutOfBounds {
            col: p.col,
            row: p.row,
            dims,
        });
    }
    Ok([p.col as f64 + 0.5, p.row as f64 + 0.5, scene.floor_at(p)])
}

/// Grid pixel under a world position, clamped to the scene.
pub fn world_to_pixel(pos: Point3, scene: &CavityScene) -> Pixel {
    let dims = scene.dims();
    let c = pos[0].floor().clamp(0.0, (dims.width - 1) as f64) as usize;
    let r = pos[1].floor().clamp(0.0, (dims.height - 1) as f64) as usize;
    Pixel::new(c, r)
}

#[derive(Clone, Debug, PartialEq)]
pub struct TickRecord {
    pub tick: usize,
    pub position: Point3,
    pub phase: Phase,
    pub removed_cumulative: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Arrival {
    pub waypoint: Pixel,
    /// Ticks elapsed when the waypoint was reached.
    pub tick: usize,
    /// Distance to the goal at arrival.
    pub distance: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExecutionReport {
    pub start: Point3,
    pub ticks: Vec<TickRecord>,
    pub arrivals: Vec<Arrival>,
    pub volume_removed: f64,
    /// Simulator frames advanced during execution.
    pub frames_simulated: usize,
    /// Next simulator frame index after execution.
    pub end_frame: usize,
    pub aborted: bool,
}

impl ExecutionReport {
    pub fn ticks_used(&self) -> usize {
        self.ticks.len()
    }

    /// `tick,x,y,depth,removed_cumulative` rows.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("tick,x,y,depth,removed_cumulative\n");
        for t in &self.ticks {
            let _ = writeln!(
                s,
                "{},{:.6},{:.6},{:.6},{:.6}",
                t.tick, t.position[0], t.position[1], t.position[2], t.removed_cumulative
            );
        }
        s
    }
}

struct Executor<'a> {
    scene: &'a CavityScene,
    params: &'a ControllerParams,
    state: FluidState,
    frame: usize,
    tool: ToolState,
    ticks: Vec<TickRecord>,
    removed: f64,
    frames_simulated: usize,
}

impl Executor<'_> {
    /// Advances one controller tick: move, suck, and step the fluid every
    /// `tick_rate` ticks. Returns false once the budget is spent.
    fn tick(&mut self, goal: Point3) -> Result<bool> {
        if self.ticks.len() >= self.params.max_ticks {
            return Ok(false);
        }
        self.tool = step_toward(&self.tool, goal, self.params);
        let at = world_to_pixel(self.tool.position, self.scene);
        let (next, taken) = apply_suction(
            &self.state,
            at,
            self.params.suction_radius,
            self.params.suction_capacity,
        );
        self.state = next;
        self.removed += taken;
        self.ticks.push(TickRecord {
            tick: self.ticks.len(),
            position: self.tool.position,
            phase: self.tool.phase,
            removed_cumulative: self.removed,
        });
        if self.ticks.len().is_multiple_of(self.params.tick_rate) {
            let (next, _) = step(self.scene, &self.state, self.frame)?;
            self.state = next;
            self.frame += 1;
            self.frames_simulated += 1;
        }
        Ok(true)
    }
}

/// Drives the tool from `start` through the decimated trajectory (scene
/// pixels), probing at every waypoint, while the fluid keeps evolving from
/// frame `frame`.
pub fn execute(
    traj: &PixelTrajectory,
    scene: &CavityScene,
    state: &FluidState,
    frame: usize,
    start: Point3,
    params: &ControllerParams,
) -> Result<(FluidState, ExecutionReport)> {
    params.validate()?;
    if traj.is_empty() {
        return Err(Error::OutOfRange("empty trajectory".into()));
    }
    let goals = traj
        .decimate(params.decimation)
        .waypoints
        .into_iter()
        .map(|p| pixel_to_world(p, scene).map(|g| (p, g)))
        .collect::<Result<Vec<_>>>()?;

    let initial_removed = state.total_removed;
    let mut ex = Executor {
        scene,
        params,
        state: state.clone(),
        frame,
        tool: ToolState::at(start),
        ticks: Vec::new(),
        removed: 0.0,
        frames_simulated: 0,
    };
    let mut arrivals = Vec::new();
    let mut aborted = false;

    'waypoints: for (pixel, goal) in goals {
        ex.tool.phase = Phase::Traveling;
        while distance(ex.tool.position, goal) >= params.arrive_tol {
            if !ex.tick(goal)? {
                aborted = true;
                break 'waypoints;
            }
        }
        arrivals.push(Arrival {
            waypoint: pixel,
            tick: ex.ticks.len(),
            distance: distance(ex.tool.position, goal),
        });

        ex.tool.phase = Phase::Probing;
        let top = ex.tool.position;
        let bottom = [top[0], top[1], top[2] - params.probe_depth];
        for target in [bottom, top] {
            while ex.tool.position != target {
                if !ex.tick(target)? {
                    aborted = true;
                    break 'waypoints;
                }
            }
        }
    }

    let report = ExecutionReport {
        start,
        volume_removed: ex.state.total_removed - initial_removed,
        ticks: ex.ticks,
        arrivals,
        frames_simulated: ex.frames_simulated,
        end_frame: ex.frame,
        aborted,
    };
    Ok((ex.state, report))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::GridDims;

    fn flat(h: f64) -> CavityScene {
        let d = GridDims::new(32, 32).unwrap();
        CavityScene::new("flat", d, vec![h; d.len()], vec![0.5; d.len()], vec![], 1).unwrap()
    }

    #[test]
    fn step_toward_examples() {
        let p = ControllerParams::default();
        let at_goal = ToolState::at([1.0, 2.0, 3.0]);
        assert_eq!(step_toward(&at_goal, [1.0, 2.0, 3.0], &p), at_goal);

        let far = step_toward(&ToolState::at([0.0; 3]), [10.0, 0.0, 0.0], &p);
        assert_eq!(far.position, [0.75, 0.0, 0.0]);

        let near = step_toward(&ToolState::at([0.0; 3]), [0.5, 0.0, 0.0], &p);
        assert_eq!(near.position, [0.5, 0.0, 0.0]);
    }

    #[test]
    fn world_mapping() {
        let s = flat(2.5);
        assert_eq!(pixel_to_world(Pixel::new(0, 0), &s).unwrap(), [0.5, 0.5, 2.5]);
        assert!(pixel_to_world(Pixel::new(32, 0), &s).is_err());
        let mut floor = vec![0.0; 32 * 32];
        floor[1] = 4.0;
        let d = GridDims::new(32, 32).unwrap();
        let s = CavityScene::new("step", d, floor, vec![0.5; d.len()], vec![], 1).unwrap();
        let a = pixel_to_world(Pixel::new(0, 0), &s).unwrap();
        let b = pixel_to_world(Pixel::new(1, 0), &s).unwrap();
        assert_eq!(b[2] - a[2], 4.0);
        assert_eq!(a, pixel_to_world(Pixel::new(0, 0), &s).unwrap());
    }

    #[test]
    fn single_waypoint_at_start_only_probes() {
        let s = flat(0.0);
        let p = ControllerParams::default();
        let start = pixel_to_world(Pixel::new(10, 10), &s).unwrap();
        let traj = PixelTrajectory::new(vec![Pixel::new(10, 10)]);
        let (state, report) = execute(&traj, &s, &s.initial_state(), 0, start, &p).unwrap();
        let probe_ticks = 2 * (p.probe_depth / p.gamma_s).ceil() as usize;
        assert_eq!(report.arrivals[0].tick, 0);
        assert!(report.ticks_used() <= 1 + probe_ticks);
        assert_eq!(report.volume_removed, 0.0);
        assert_eq!(state.total_removed, 0.0);
        assert!(!report.aborted);
    }

    #[test]
    fn tick_budget_aborts() {
        let s = flat(0.0);
        let p = ControllerParams {
            max_ticks: 5,
            ..Default::default()
        };
        let traj = PixelTrajectory::new(vec![Pixel::new(30, 30)]);
        let (_, report) = execute(&traj, &s, &s.initial_state(), 0, [0.5, 0.5, 0.0], &p).unwrap();
        assert!(report.aborted);
        assert_eq!(report.ticks_used(), 5);
    }

    #[test]
    fn rejects_empty_trajectory_and_bad_params() {
        let s = flat(0.0);
        let p = ControllerParams::default();
        assert!(execute(&PixelTrajectory::default(), &s, &s.initial_state(), 0, [0.0; 3], &p).is_err());
        let bad = ControllerParams {
            gamma_s: 0.0,
            ..Default::default()
        };
        let traj = PixelTrajectory::new(vec![Pixel::new(1, 1)]);
        assert!(execute(&traj, &s, &s.initial_state(), 0, [0.0; 3], &bad).is_err());
    }

    #[test]
    fn csv_has_header_and_rows() {
        let s = flat(0.0);
        let traj = PixelTrajectory::new(vec![Pixel::new(5, 5)]);
        let (_, r) = execute(&traj, &s, &s.initial_state(), 0, [0.5, 0.5, 0.0], &ControllerParams::default()).unwrap();
        let csv = r.to_csv();
        assert!(csv.starts_with("tick,x,y,depth,removed_cumulative\n"));
        assert_eq!(csv.lines().count(), r.ticks_used() + 1);
    }
}
