//! Deterministic heightfield cavity simulator.
//!
//! Fluid lives as a per-cell volume on top of a static floor. Each frame is
//! split into `substeps` explicit transport sweeps: every wet cell sends
//! `TRANSPORT_CAP` of its surface-height excess to each lower 4-neighbour,
//! scaled down if that would exceed the cell's volume. All outflows of a
//! sweep are computed from the same snapshot, so the step is a pure
//! function of its inputs and conserves volume up to rounding.
//!
//! The rendered frame darkens the scene texture where fluid sits; the truth
//! flow is the depth-averaged transport velocity in pixels/frame.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::types::{BloodMask, FlowField, Frame, GridDims, Pixel, MIN_SCENE_SIDE};

/// Cells with more volume than this are part of the truth mask.
pub const RENDER_THRESHOLD: f64 = 0.05;
/// Fraction of the surface difference moved per neighbour per sweep.
pub const TRANSPORT_CAP: f64 = 0.25;
/// Intensity reduction at unit depth.
pub const DARKEN: f64 = 0.6;
/// Frames per evaluation sequence.
pub const SEQUENCE_FRAMES: usize = 61;

#[derive(Clone, Debug, PartialEq)]
pub struct Source {
    pub pixel: Pixel,
    /// Emission is spread evenly over the disc of this radius.
    pub radius: usize,
    /// Volume per frame.
    pub rate: f64,
    /// Active for `start_frame <= t < end_frame`.
    pub start_frame: usize,
    pub end_frame: usize,
}

impl Source {
    pub fn is_active(&self, t: usize) -> bool {
        (self.start_frame..self.end_frame).contains(&t)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CavityScene {
    pub name: String,
    dims: GridDims,
    floor: Vec<f64>,
    texture: Vec<f64>,
    pub sources: Vec<Source>,
    /// Transport sweeps per frame; fluid moves at most one cell per sweep.
    pub substeps: usize,
}

impl CavityScene {
    pub fn new(
        name: impl Into<String>,
        dims: GridDims,
        floor: Vec<f64>,
        texture: Vec<f64>,
        sources: Vec<Source>,
        substeps: usize,
    ) -> Result<Self> {
        if dims.width < MIN_SCENE_SIDE || dims.height < MIN_SCENE_SIDE {
            return Err(Error::InvalidDims {
                width: dims.width,
                height: dims.height,
            });
        }
        if floor.len() != dims.len() {
            return Err(Error::LengthMismatch { dims, len: floor.len() });
        }
        if texture.len() != dims.len() {
            return Err(Error::LengthMismatch { dims, len: texture.len() });
        }
        if floor.iter().any(|h| !h.is_finite()) {
            return Err(Error::OutOfRange("non-finite floor height".into()));
        }
        if texture.iter().any(|v| !(0.0..=1.0).contains(v)) {
            return Err(Error::OutOfRange("texture intensity outside [0,1]".into()));
        }
        for s in &sources {
            if s.pixel.col >= dims.width || s.pixel.row >= dims.height {
                return Err(Error::OutOfBounds {
                    col: s.pixel.col,
                    row: s.pixel.row,
                    dims,
                });
            }
            if !(s.rate.is_finite() && s.rate >= 0.0) {
                return Err(Error::OutOfRange(format!("source rate {}", s.rate)));
            }
        }
        if substeps == 0 {
            return Err(Error::Config("substeps must be positive".into()));
        }
        Ok(Self {
            name: name.into(),
            dims,
            floor,
            texture,
            sources,
            substeps,
        })
    }

    pub fn dims(&self) -> GridDims {
        self.dims
    }

    pub fn floor(&self) -> &[f64] {
        &self.floor
    }

    pub fn texture(&self) -> &[f64] {
        &self.texture
    }

    pub fn floor_at(&self, p: Pixel) -> f64 {
        self.floor[self.dims.index(p)]
    }

    /// Same scene with only source `index` kept.
    pub fn with_only_source(&self, index: usize) -> Result<Self> {
        let src = self
            .sources
            .get(index)
            .cloned()
            .ok_or_else(|| Error::UnknownScene(format!("{} source {index}", self.name)))?;
        Ok(Self {
            sources: vec![src],
            ..self.clone()
        })
    }

    pub fn initial_state(&self) -> FluidState {
        FluidState::dry(self.dims)
    }

    /// Texture darkened by the current fluid depth.
    pub fn render(&self, state: &FluidState, t: usize) -> Frame {
        let pixels = self
            .texture
            .iter()
            .zip(&state.volume)
            .map(|(&tex, &vol)| (tex * (1.0 - DARKEN * vol.min(1.0))).clamp(0.0, 1.0))
            .collect();
        Frame::new(self.dims, pixels, t).expect("texture in range")
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct FluidState {
    dims: GridDims,
    volume: Vec<f64>,
    pub total_emitted: f64,
    pub total_removed: f64,
}

impl FluidState {
    pub fn dry(dims: GridDims) -> Self {
        Self {
            dims,
            volume: vec![0.0; dims.len()],
            total_emitted: 0.0,
            total_removed: 0.0,
        }
    }

    pub fn with_volume(dims: GridDims, volume: Vec<f64>) -> Result<Self> {
        if volume.len() != dims.len() {
            return Err(Error::LengthMismatch { dims, len: volume.len() });
        }
        if volume.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(Error::OutOfRange("volume must be finite and non-negative".into()));
        }
        let total = volume.iter().sum();
        Ok(Self {
            dims,
            volume,
            total_emitted: total,
            total_removed: 0.0,
        })
    }

    pub fn dims(&self) -> GridDims {
        self.dims
    }

    pub fn volume(&self) -> &[f64] {
        &self.volume
    }

    pub fn total_volume(&self) -> f64 {
        self.volume.iter().sum()
    }

    /// Cells above [`RENDER_THRESHOLD`].
    pub fn wet_mask(&self) -> BloodMask {
        let bits = self.volume.iter().map(|&v| v > RENDER_THRESHOLD).collect();
        BloodMask::new(self.dims, bits).expect("same dims")
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SimOutputs {
    pub frame: Frame,
    pub truth_mask: BloodMask,
    pub truth_flow: FlowField,
}

fn disc(dims: GridDims, center: Pixel, radius: usize) -> Vec<usize> {
    let r = radius as isize;
    let mut cells = Vec::new();
    for dr in -r..=r {
        for dc in -r..=r {
            if dr * dr + dc * dc > r * r {
                continue;
            }
            let (c, row) = (center.col as isize + dc, center.row as isize + dr);
            if dims.contains(c, row) {
                cells.push(row as usize * dims.width + c as usize);
            }
        }
    }
    cells
}

/// Advances the scene by one frame.
pub fn step(scene: &CavityScene, state: &FluidState, t: usize) -> Result<(FluidState, SimOutputs)> {
    scene.dims.ensure_same(state.dims)?;
    let dims = scene.dims;
    let (w, h) = (dims.width, dims.height);
    let mut next = state.clone();

    for src in scene.sources.iter().filter(|s| s.is_active(t)) {
        let cells = disc(dims, src.pixel, src.radius);
        let share = src.rate / cells.len() as f64;
        for i in cells {
            next.volume[i] += share;
        }
        next.total_emitted += src.rate;
    }

    let mut flow_u = vec![0.0; dims.len()];
    let mut flow_v = vec![0.0; dims.len()];
    // net flux across the right face (x) and bottom face (y) of each cell
    let mut fx = vec![0.0; dims.len()];
    let mut fy = vec![0.0; dims.len()];
    let mut out = vec![[0.0f64; 4]; dims.len()];
    const DIRS: [(isize, isize); 4] = [(0, -1), (0, 1), (-1, 0), (1, 0)];

    for _ in 0..scene.substeps {
        let vol = &next.volume;
        for i in 0..dims.len() {
            out[i] = [0.0; 4];
            if vol[i] <= 0.0 {
                continue;
            }
            let (c, r) = ((i % w) as isize, (i / w) as isize);
            let surface = scene.floor[i] + vol[i];
            let mut desired = [0.0; 4];
            let mut total = 0.0;
            for (k, (dc, dr)) in DIRS.iter().enumerate() {
                let (nc, nr) = (c + dc, r + dr);
                if nc < 0 || nr < 0 || nc >= w as isize || nr >= h as isize {
                    continue;
                }
                let j = nr as usize * w + nc as usize;
                let diff = surface - (scene.floor[j] + vol[j]);
                if diff > 0.0 {
                    desired[k] = TRANSPORT_CAP * diff;
                    total += desired[k];
                }
            }
            if total > 0.0 {
                let scale = (vol[i] / total).min(1.0);
                for k in 0..4 {
                    out[i][k] = desired[k] * scale;
                }
            }
        }

        let mut new_vol = vec![0.0; dims.len()];
        for i in 0..dims.len() {
            let sent: f64 = out[i].iter().sum();
            // a rescaled cell is drained exactly; avoids tiny negatives
            new_vol[i] += if sent >= vol[i] { 0.0 } else { vol[i] - sent };
            let (c, r) = (i % w, i / w);
            if out[i][0] > 0.0 {
                new_vol[i - w] += out[i][0];
            }
            if out[i][1] > 0.0 {
                new_vol[i + w] += out[i][1];
            }
            if out[i][2] > 0.0 {
                new_vol[i - 1] += out[i][2];
            }
            if out[i][3] > 0.0 {
                new_vol[i + 1] += out[i][3];
            }
            if c + 1 < w {
                fx[i] = out[i][3] - out[i + 1][2];
            } else {
                fx[i] = 0.0;
            }
            if r + 1 < h {
                fy[i] = out[i][1] - out[i + w][0];
            } else {
                fy[i] = 0.0;
            }
        }

        for i in 0..dims.len() {
            let (c, r) = (i % w, i / w);
            let left = if c > 0 { fx[i - 1] } else { 0.0 };
            let up = if r > 0 { fy[i - w] } else { 0.0 };
            let tu = 0.5 * (left + fx[i]);
            let tv = 0.5 * (up + fy[i]);
            if tu == 0.0 && tv == 0.0 {
                continue;
            }
            let depth = vol[i].max(RENDER_THRESHOLD);
            let (mut su, mut sv) = (tu / depth, tv / depth);
            let speed = su.hypot(sv);
            if speed > 1.0 {
                su /= speed;
                sv /= speed;
            }
            flow_u[i] += su;
            flow_v[i] += sv;
        }
        next.volume = new_vol;
    }

    let outputs = SimOutputs {
        frame: scene.render(&next, t),
        truth_mask: next.wet_mask(),
        truth_flow: FlowField::new(dims, flow_u, flow_v)?,
    };
    Ok((next, outputs))
}

/// Removes up to `capacity` volume from cells whose centre lies within
/// `radius` of `at`'s centre, nearest cells first (ties in raster order).
/// Returns the new state and the amount removed.
pub fn apply_suction(state: &FluidState, at: Pixel, radius: f64, capacity: f64) -> (FluidState, f64) {
    let dims = state.dims;
    let mut cells: Vec<(u64, usize)> = Vec::new();
    let reach = radius.max(0.0).floor() as isize;
    for dr in -reach..=reach {
        for dc in -reach..=reach {
            let d2 = (dr * dr + dc * dc) as f64;
            if d2 > radius * radius {
                continue;
            }
            let (c, r) = (at.col as isize + dc, at.row as isize + dr);
            if dims.contains(c, r) {
                cells.push((d2 as u64, r as usize * dims.width + c as usize));
            }
        }
    }
    cells.sort_unstable();
    let mut next = state.clone();
    let mut remaining = capacity.max(0.0);
    let mut removed = 0.0;
    for (_, i) in cells {
        if remaining <= 0.0 {
            break;
        }
        let take = next.volume[i].min(remaining);
        if take > 0.0 {
            next.volume[i] -= take;
            remaining -= take;
            removed += take;
        }
    }
    next.total_removed += removed;
    (next, removed)
}

/// Runs `frames` steps from a dry start.
pub fn simulate(scene: &CavityScene, frames: usize) -> Result<Vec<SimOutputs>> {
    let mut state = scene.initial_state();
    let mut out = Vec::with_capacity(frames);
    for t in 0..frames {
        let (next, o) = step(scene, &state, t)?;
        state = next;
        out.push(o);
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// Builtin scenes
// ---------------------------------------------------------------------------

/// Names of the evaluation scenes, in [`builtin_scenes`] order.
pub const EVAL_SCENES: [&str; 6] = ["slope", "channel", "basin", "fork", "terrace", "stained_slope"];
/// Injection-point variants of the four-source cavity.
pub const CAVITY_VARIANTS: [&str; 4] = ["cavity_tl", "cavity_tr", "cavity_bl", "cavity_br"];

const EVAL_DIMS: (usize, usize) = (160, 120);
const CAVITY_DIMS: (usize, usize) = (256, 192);
const CAVITY_MARGIN: usize = 24;

/// Six evaluation scenes followed by the four-injection cavity, all built
/// with seed 0.
pub fn builtin_scenes() -> Vec<CavityScene> {
    EVAL_SCENES
        .iter()
        .chain(std::iter::once(&"cavity"))
        .map(|n| scene_by_name(n, 0).expect("builtin scene"))
        .collect()
}

pub fn scene_names() -> Vec<&'static str> {
    let mut names: Vec<&str> = EVAL_SCENES.to_vec();
    names.push("cavity");
    names.extend(CAVITY_VARIANTS);
    names.push("dry");
    names
}

/// Builds a named scene. The seed drives the background texture and a
/// small jitter on source rates.
pub fn scene_by_name(name: &str, seed: u64) -> Result<CavityScene> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ name_hash(name));
    let jitter = |rng: &mut ChaCha8Rng, rate: f64| {
        if seed == 0 {
            rate
        } else {
            rate * (1.0 + rng.gen_range(-0.05..0.05))
        }
    };
    let src = |col, row, radius, rate, start, end| Source {
        pixel: Pixel::new(col, row),
        radius,
        rate,
        start_frame: start,
        end_frame: end,
    };

    let (w, h) = EVAL_DIMS;
    let dims = GridDims::new(w, h)?;
    let texture = |rng: &mut ChaCha8Rng, dims: GridDims| smooth_texture(rng, dims);
    let scene = match name {
        "slope" => {
            let floor = field(dims, |x, y| 0.5 * (w as f64 - x) + 0.006 * (y - 60.0).powi(2));
            let tex = texture(&mut rng, dims);
            let r = jitter(&mut rng, 3.0);
            CavityScene::new(name, dims, floor, tex, vec![src(14, 60, 5, r, 0, 61)], 4)?
        }
        "channel" => {
            // diagonal trough from top-left to bottom-right
            let floor = field(dims, |x, y| {
                let along = x * 0.8 + y * 0.6;
                let across = -x * 0.6 + y * 0.8;
                0.45 * (200.0 - along) + 0.01 * (across + 8.0).powi(2)
            });
            let tex = texture(&mut rng, dims);
            let r = jitter(&mut rng, 3.5);
            CavityScene::new(name, dims, floor, tex, vec![src(16, 16, 6, r, 0, 61)], 4)?
        }
        "basin" => {
            let floor = field(dims, |x, y| {
                let slope = 0.5 * (h as f64 - y) + 0.006 * (x - 60.0).powi(2);
                let dx = (x - 60.0) / 9.0;
                let dy = (y - 100.0) / 9.0;
                slope - 25.0 * (-(dx * dx + dy * dy)).exp()
            });
            let tex = texture(&mut rng, dims);
            let r = jitter(&mut rng, 3.0);
            CavityScene::new(name, dims, floor, tex, vec![src(60, 14, 5, r, 0, 61)], 4)?
        }
        "fork" => {
            // a ridge splits the stream into two arms that rejoin below it
            let floor = field(dims, |x, y| {
                let dx = (x - 80.0) / 10.0;
                let dy = (y - 55.0) / 16.0;
                0.5 * (h as f64 - y) + 0.004 * (x - 80.0).powi(2) + 12.0 * (-(dx * dx + dy * dy)).exp()
            });
            let tex = texture(&mut rng, dims);
            let r = jitter(&mut rng, 3.5);
            CavityScene::new(name, dims, floor, tex, vec![src(80, 14, 6, r, 0, 61)], 4)?
        }
        "terrace" => {
            // steep upper slope, a shallow shelf, then a second steep drop
            let floor = field(dims, |x, y| {
                let profile = if y < 45.0 {
                    30.0 + 0.6 * (45.0 - y)
                } else if y < 65.0 {
                    26.0 + 0.2 * (65.0 - y)
                } else {
                    0.5 * (h as f64 - y)
                };
                profile + 0.004 * (x - 70.0).powi(2)
            });
            let tex = texture(&mut rng, dims);
            let r = jitter(&mut rng, 3.0);
            CavityScene::new(name, dims, floor, tex, vec![src(70, 14, 5, r, 0, 61)], 4)?
        }
        "stained_slope" => {
            // stream runs left to right along a trough; a static dark stain
            // sits below it, away from the fluid
            let floor = field(dims, |x, y| 0.5 * (w as f64 - x) + 0.01 * (y - 35.0).powi(2));
            let mut tex = texture(&mut rng, dims);
            for p in stain_pixels(dims) {
                tex[dims.index(p)] *= 0.35;
            }
            let r = jitter(&mut rng, 3.0);
            CavityScene::new(name, dims, floor, tex, vec![src(14, 35, 5, r, 0, 61)], 4)?
        }
        "cavity" | "cavity_tl" | "cavity_tr" | "cavity_bl" | "cavity_br" => {
            let base = cavity_scene(&mut rng, seed)?;
            match name {
                "cavity" => base,
                _ => {
                    let idx = CAVITY_VARIANTS.iter().position(|v| *v == name).unwrap();
                    let mut s = base.with_only_source(idx)?;
                    s.name = name.to_string();
                    s
                }
            }
        }
        "dry" => {
            let floor = field(dims, |_, y| 0.5 * (h as f64 - y));
            let tex = texture(&mut rng, dims);
            CavityScene::new(name, dims, floor, tex, vec![src(80, 6, 5, 3.0, 1000, 1000)], 4)?
        }
        other => return Err(Error::UnknownScene(other.to_string())),
    };
    Ok(scene)
}

/// Pixels of the static stain in `stained_slope`.
pub fn stain_pixels(dims: GridDims) -> Vec<Pixel> {
    let mut out = Vec::new();
    for row in 76..104 {
        for col in 50..110 {
            if col < dims.width && row < dims.height {
                out.push(Pixel::new(col, row));
            }
        }
    }
    out
}

/// Four corner injection points on a conical floor that drains into a
/// central pool.
fn cavity_scene(rng: &mut ChaCha8Rng, seed: u64) -> Result<CavityScene> {
    let (w, h) = CAVITY_DIMS;
    let dims = GridDims::new(w, h)?;
    let (cx, cy) = (w as f64 / 2.0, h as f64 / 2.0);
    let floor = field(dims, |x, y| 0.3 * ((x - cx).powi(2) + (y - cy).powi(2)).sqrt());
    let texture = smooth_texture(rng, dims);
    let mut rate = |base: f64| {
        if seed == 0 {
            base
        } else {
            base * (1.0 + rng.gen_range(-0.05..0.05))
        }
    };
    let (m, (wl, hl)) = (CAVITY_MARGIN, (w - 1 - CAVITY_MARGIN, h - 1 - CAVITY_MARGIN));
    let corners = [(m, m), (wl, m), (m, hl), (wl, hl)];
    let sources = corners
        .iter()
        .map(|&(col, row)| Source {
            pixel: Pixel::new(col, row),
            radius: 5,
            rate: rate(3.0),
            start_frame: 3,
            end_frame: 48,
        })
        .collect();
    CavityScene::new("cavity", dims, floor, texture, sources, 4)
}

fn field(dims: GridDims, f: impl Fn(f64, f64) -> f64) -> Vec<f64> {
    (0..dims.len())
        .map(|i| f((i % dims.width) as f64 + 0.5, (i / dims.width) as f64 + 0.5))
        .collect()
}

/// Sum of a few random plane waves plus mild per-pixel grain, in
/// `[0.3, 0.9]`.
fn smooth_texture(rng: &mut ChaCha8Rng, dims: GridDims) -> Vec<f64> {
    let waves: Vec<(f64, f64, f64)> = (0..6)
        .map(|_| {
            let angle = rng.gen_range(0.0..std::f64::consts::TAU);
            let freq = rng.gen_range(0.08..0.35);
            let phase = rng.gen_range(0.0..std::f64::consts::TAU);
            (angle.cos() * freq, angle.sin() * freq, phase)
        })
        .collect();
    (0..dims.len())
        .map(|i| {
            let (x, y) = ((i % dims.width) as f64, (i / dims.width) as f64);
            let s: f64 = waves.iter().map(|(kx, ky, ph)| (kx * x + ky * y + ph).sin()).sum::<f64>() / 6.0;
            let grain = rng.gen_range(-0.03..0.03);
            (0.6 + 0.25 * s + grain).clamp(0.3, 0.9)
        })
        .collect()
}

fn name_hash(name: &str) -> u64 {
    // FNV-1a; stable across platforms and releases
    name.bytes().fold(0xcbf29ce484222325u64, |h, b| (h ^ b as u64).wrapping_mul(0x100000001b3))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn flat_scene(sources: Vec<Source>) -> CavityScene {
        let d = GridDims::new(16, 16).unwrap();
        CavityScene::new("flat", d, vec![0.0; d.len()], vec![0.5; d.len()], sources, 4).unwrap()
    }

    #[test]
    fn empty_scene_renders_texture() {
        let s = flat_scene(vec![]);
        let (next, out) = step(&s, &s.initial_state(), 0).unwrap();
        assert_eq!(out.frame.pixels(), s.texture());
        assert!(out.truth_mask.is_clear());
        assert!(out.truth_flow.u().iter().chain(out.truth_flow.v()).all(|&x| x == 0.0));
        assert_eq!(next.total_volume(), 0.0);
    }

    #[test]
    fn single_step_conserves_emission() {
        let s = flat_scene(vec![Source {
            pixel: Pixel::new(8, 8),
            radius: 0,
            rate: 1.0,
            start_frame: 0,
            end_frame: 10,
        }]);
        let (next, _) = step(&s, &s.initial_state(), 0).unwrap();
        assert_eq!(next.total_emitted, 1.0);
        assert!((next.total_volume() - 1.0).abs() < 1e-12);
        assert!(next.volume().iter().all(|&v| v >= 0.0));
    }

    #[test]
    fn step_rejects_mismatched_state() {
        let s = flat_scene(vec![]);
        let other = FluidState::dry(GridDims::new(9, 9).unwrap());
        assert!(step(&s, &other, 0).is_err());
    }

    #[test]
    fn scene_validation() {
        let d = GridDims::new(4, 4).unwrap();
        assert!(CavityScene::new("tiny", d, vec![0.0; 16], vec![0.5; 16], vec![], 1).is_err());
        let d = GridDims::new(8, 8).unwrap();
        assert!(CavityScene::new("nan", d, vec![f64::NAN; 64], vec![0.5; 64], vec![], 1).is_err());
        assert!(scene_by_name("nope", 0).is_err());
    }

    #[test]
    fn suction_on_dry_pixel_is_noop() {
        let st = FluidState::dry(GridDims::new(8, 8).unwrap());
        let (next, removed) = apply_suction(&st, Pixel::new(3, 3), 2.0, 5.0);
        assert_eq!(next, st);
        assert_eq!(removed, 0.0);
    }

    #[test]
    fn suction_saturates_locally() {
        let d = GridDims::new(8, 8).unwrap();
        let st = FluidState::with_volume(d, vec![0.3; 64]).unwrap();
        let (next, removed) = apply_suction(&st, Pixel::new(4, 4), 1.0, 100.0);
        // centre plus 4 neighbours lie within radius 1
        assert!((removed - 1.5).abs() < 1e-12);
        assert_eq!(next.volume()[d.index(Pixel::new(4, 4))], 0.0);
        assert_eq!(next.volume()[d.index(Pixel::new(5, 5))], 0.3);
    }

    #[test]
    fn successive_suctions_accumulate() {
        let d = GridDims::new(8, 8).unwrap();
        let mut vol = vec![0.0; 64];
        vol[d.index(Pixel::new(2, 2))] = 0.8;
        let st = FluidState::with_volume(d, vol).unwrap();
        let (a, _) = apply_suction(&st, Pixel::new(2, 2), 1.0, 0.5);
        let (b, _) = apply_suction(&a, Pixel::new(2, 2), 1.0, 0.5);
        assert!((b.total_removed - 0.8).abs() < 1e-12);
        assert_eq!(b.total_volume(), 0.0);
    }

    #[test]
    fn suction_prefers_nearest_cells() {
        let d = GridDims::new(8, 8).unwrap();
        let st = FluidState::with_volume(d, vec![1.0; 64]).unwrap();
        let (next, removed) = apply_suction(&st, Pixel::new(4, 4), 3.0, 1.5);
        assert!((removed - 1.5).abs() < 1e-12);
        assert_eq!(next.volume()[d.index(Pixel::new(4, 4))], 0.0);
        // the first 4-neighbour in raster order loses the remaining half
        assert_eq!(next.volume()[d.index(Pixel::new(4, 3))], 0.5);
        assert_eq!(next.volume()[d.index(Pixel::new(3, 4))], 1.0);
    }

    #[test]
    fn builtin_list_shape() {
        let scenes = builtin_scenes();
        assert!(scenes.len() >= 7);
        let cavity = scenes.iter().find(|s| s.name == "cavity").unwrap();
        assert_eq!(cavity.sources.len(), 4);
    }

    #[test]
    fn seeds_change_texture_only_slightly() {
        let a = scene_by_name("slope", 0).unwrap();
        let b = scene_by_name("slope", 1).unwrap();
        assert_eq!(a.floor(), b.floor());
        assert_ne!(a.texture(), b.texture());
        assert_eq!(a, scene_by_name("slope", 0).unwrap());
    }
}
