//! Optical flow estimation and magnitude-thresholded liquid detection.
//!
//! Two estimators share one contract: given the last `l` frames they return
//! a flow field at `input dims / flow_downscale`, in pixels/frame at that
//! resolution, averaged over the `l - 1` consecutive frame pairs.
//!
//! * [`FlowEstimatorKind::GroundTruth`] block-averages the simulator's
//!   transport field.
//! * [`FlowEstimatorKind::Classical`] runs a two-level pyramidal
//!   Lucas-Kanade solve with a 5x5 window on box-downsampled frames.

use std::collections::VecDeque;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::types::{BloodMask, FlowField, Frame, GridDims};

/// Number of frames consumed per flow estimate.
pub const DEFAULT_FLOW_FRAMES: usize = 3;

const LK_RADIUS: usize = 2;
const LK_ITERATIONS: usize = 6;
const LK_MIN_EIGEN: f64 = 1e-4;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum FlowEstimatorKind {
    /// Simulator transport field; only available for simulated sequences.
    GroundTruth,
    /// Windowed least-squares flow on a two-level pyramid.
    Classical,
}

impl FromStr for FlowEstimatorKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gt" | "ground_truth" => Ok(Self::GroundTruth),
            "classical" => Ok(Self::Classical),
            other => Err(Error::Config(format!("unknown estimator {other:?}"))),
        }
    }
}

/// Per-pixel detection bit: set iff flow magnitude exceeds the threshold.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DetectionMap(BloodMask);

impl DetectionMap {
    pub fn from_mask(mask: BloodMask) -> Self {
        Self(mask)
    }

    pub fn empty(dims: GridDims) -> Self {
        Self(BloodMask::empty(dims))
    }

    pub fn dims(&self) -> GridDims {
        self.0.dims()
    }

    pub fn bits(&self) -> &[bool] {
        self.0.bits()
    }

    pub fn count(&self) -> usize {
        self.0.count()
    }

    pub fn as_mask(&self) -> &BloodMask {
        &self.0
    }

    pub fn into_mask(self) -> BloodMask {
        self.0
    }
}

/// Only the flow magnitude matters; orientation is ignored.
pub fn detect(flow: &FlowField, gamma_o: f64) -> DetectionMap {
    let bits = (0..flow.dims().len())
        .map(|i| flow.magnitude(i) > gamma_o)
        .collect();
    DetectionMap(BloodMask::new(flow.dims(), bits).expect("same dims"))
}

/// Block-averages a full-resolution flow field and rescales it to
/// pixels/frame at the reduced resolution.
pub fn downsample_flow(flow: &FlowField, factor: usize) -> Result<FlowField> {
    let target = flow.dims().downscaled(factor)?;
    let u = block_mean(flow.u(), flow.dims(), factor, target);
    let v = block_mean(flow.v(), flow.dims(), factor, target);
    let scale = 1.0 / factor as f64;
    FlowField::new(
        target,
        u.into_iter().map(|x| x * scale).collect(),
        v.into_iter().map(|x| x * scale).collect(),
    )
}

fn block_mean(values: &[f64], src: GridDims, factor: usize, target: GridDims) -> Vec<f64> {
    let norm = 1.0 / (factor * factor) as f64;
    let mut out = vec![0.0; target.len()];
    for row in 0..target.height {
        for col in 0..target.width {
            let mut sum = 0.0;
            for r in row * factor..(row + 1) * factor {
                let base = r * src.width;
                for c in col * factor..(col + 1) * factor {
                    sum += values[base + c];
                }
            }
            out[row * target.width + col] = sum * norm;
        }
    }
    out
}

/// Estimates flow from `frames` (oldest first). `truth[i]` is the
/// simulator transport that produced `frames[i]` and is required by the
/// ground-truth estimator.
pub fn estimate_flow(
    frames: &[Frame],
    truth: Option<&[FlowField]>,
    kind: FlowEstimatorKind,
    downscale: usize,
) -> Result<FlowField> {
    if frames.len() < 2 {
        return Err(Error::NotEnoughFrames {
            needed: 2,
            have: frames.len(),
        });
    }
    let dims = frames[0].dims();
    for f in frames {
        dims.ensure_same(f.dims())?;
    }
    let target = dims.downscaled(downscale)?;
    let pairs = (frames.len() - 1) as f64;
    let mut u = vec![0.0; target.len()];
    let mut v = vec![0.0; target.len()];
    match kind {
        FlowEstimatorKind::GroundTruth => {
            let truth = truth.ok_or_else(|| {
                Error::Config("ground-truth flow requested without simulator output".into())
            })?;
            if truth.len() != frames.len() {
                return Err(Error::NotEnoughFrames {
                    needed: frames.len(),
                    have: truth.len(),
                });
            }
            for t in &truth[1..] {
                dims.ensure_same(t.dims())?;
                let small = downsample_flow(t, downscale)?;
                accumulate(&mut u, &mut v, &small);
            }
        }
        FlowEstimatorKind::Classical => {
            let small: Vec<Vec<f64>> = frames
                .iter()
                .map(|f| block_mean(f.pixels(), dims, downscale, target))
                .collect();
            for pair in small.windows(2) {
                let f = lucas_kanade_pyramid(&pair[0], &pair[1], target);
                accumulate(&mut u, &mut v, &f);
            }
        }
    }
    for x in u.iter_mut().chain(v.iter_mut()) {
        *x /= pairs;
    }
    FlowField::new(target, u, v)
}

fn accumulate(u: &mut [f64], v: &mut [f64], f: &FlowField) {
    for (a, b) in u.iter_mut().zip(f.u()) {
        *a += b;
    }
    for (a, b) in v.iter_mut().zip(f.v()) {
        *a += b;
    }
}

/// Single-channel working image for the flow solver.
#[derive(Clone, Debug)]
struct Plane {
    w: usize,
    h: usize,
    data: Vec<f64>,
}

impl Plane {
    fn at(&self, c: isize, r: isize) -> f64 {
        let c = c.clamp(0, self.w as isize - 1) as usize;
        let r = r.clamp(0, self.h as isize - 1) as usize;
        self.data[r * self.w + c]
    }

    fn bilinear(&self, x: f64, y: f64) -> f64 {
        let x0 = x.floor();
        let y0 = y.floor();
        let (fx, fy) = (x - x0, y - y0);
        let (c, r) = (x0 as isize, y0 as isize);
        let top = self.at(c, r) * (1.0 - fx) + self.at(c + 1, r) * fx;
        let bottom = self.at(c, r + 1) * (1.0 - fx) + self.at(c + 1, r + 1) * fx;
        top * (1.0 - fy) + bottom * fy
    }

    fn half(&self) -> Plane {
        let (w, h) = (self.w / 2, self.h / 2);
        let mut data = Vec::with_capacity(w * h);
        for r in 0..h {
            for c in 0..w {
                let (c2, r2) = (2 * c as isize, 2 * r as isize);
                data.push(
                    0.25 * (self.at(c2, r2) + self.at(c2 + 1, r2) + self.at(c2, r2 + 1) + self.at(c2 + 1, r2 + 1)),
                );
            }
        }
        Plane { w, h, data }
    }
}

fn lucas_kanade_pyramid(prev: &[f64], next: &[f64], dims: GridDims) -> FlowField {
    let p0 = Plane {
        w: dims.width,
        h: dims.height,
        data: prev.to_vec(),
    };
    let p1 = Plane {
        w: dims.width,
        h: dims.height,
        data: next.to_vec(),
    };
    let mut levels = vec![(p0, p1)];
    let min_side = 2 * LK_RADIUS + 1;
    if dims.width / 2 >= min_side && dims.height / 2 >= min_side {
        let coarse = (levels[0].0.half(), levels[0].1.half());
        levels.push(coarse);
    }

    let mut flow: Option<(Vec<f64>, Vec<f64>, usize)> = None;
    for (a, b) in levels.iter().rev() {
        let (mut u, mut v) = match &flow {
            None => (vec![0.0; a.w * a.h], vec![0.0; a.w * a.h]),
            Some((cu, cv, cw)) => upsample_flow(cu, cv, *cw, a.w, a.h),
        };
        refine_level(a, b, &mut u, &mut v);
        flow = Some((u, v, a.w));
    }
    let (u, v, _) = flow.expect("at least one level");
    FlowField::new(dims, u, v).expect("finite flow")
}

fn upsample_flow(u: &[f64], v: &[f64], cw: usize, w: usize, h: usize) -> (Vec<f64>, Vec<f64>) {
    let ch = u.len() / cw;
    let mut uo = Vec::with_capacity(w * h);
    let mut vo = Vec::with_capacity(w * h);
    for r in 0..h {
        let sr = (r / 2).min(ch - 1);
        for c in 0..w {
            let sc = (c / 2).min(cw - 1);
            uo.push(2.0 * u[sr * cw + sc]);
            vo.push(2.0 * v[sr * cw + sc]);
        }
    }
    (uo, vo)
}

/// Iterative Lucas-Kanade on one pyramid level. Pixels whose structure
/// tensor is near-singular keep their current estimate.
fn refine_level(a: &Plane, b: &Plane, u: &mut [f64], v: &mut [f64]) {
    let (w, h) = (a.w, a.h);
    let mut ix = vec![0.0; w * h];
    let mut iy = vec![0.0; w * h];
    for r in 0..h as isize {
        for c in 0..w as isize {
            let i = r as usize * w + c as usize;
            ix[i] = 0.5 * (a.at(c + 1, r) - a.at(c - 1, r));
            iy[i] = 0.5 * (a.at(c, r + 1) - a.at(c, r - 1));
        }
    }
    let rad = LK_RADIUS as isize;
    let mut it = vec![0.0; w * h];
    for _ in 0..LK_ITERATIONS {
        for r in 0..h {
            for c in 0..w {
                let i = r * w + c;
                it[i] = b.bilinear(c as f64 + u[i], r as f64 + v[i]) - a.data[i];
            }
        }
        let mut du = vec![0.0; w * h];
        let mut dv = vec![0.0; w * h];
        for r in 0..h as isize {
            for c in 0..w as isize {
                let (mut sxx, mut sxy, mut syy, mut sxt, mut syt) = (0.0, 0.0, 0.0, 0.0, 0.0);
                for dr in -rad..=rad {
                    for dc in -rad..=rad {
                        let (cc, rr) = (c + dc, r + dr);
                        if cc < 0 || rr < 0 || cc >= w as isize || rr >= h as isize {
                            continue;
                        }
                        let j = rr as usize * w + cc as usize;
                        sxx += ix[j] * ix[j];
                        sxy += ix[j] * iy[j];
                        syy += iy[j] * iy[j];
                        sxt += ix[j] * it[j];
                        syt += iy[j] * it[j];
                    }
                }
                let det = sxx * syy - sxy * sxy;
                let trace = sxx + syy;
                let min_eigen = 0.5 * (trace - ((sxx - syy).powi(2) + 4.0 * sxy * sxy).sqrt());
                if min_eigen < LK_MIN_EIGEN || det.abs() < 1e-18 {
                    continue;
                }
                let i = r as usize * w + c as usize;
                du[i] = (-syy * sxt + sxy * syt) / det;
                dv[i] = (sxy * sxt - sxx * syt) / det;
            }
        }
        let mut max_step: f64 = 0.0;
        for i in 0..w * h {
            u[i] += du[i];
            v[i] += dv[i];
            max_step = max_step.max(du[i].abs().max(dv[i].abs()));
        }
        if max_step < 1e-3 {
            break;
        }
    }
}

/// Fixed-capacity buffer of the most recent frames (and matching simulator
/// transport, when available).
#[derive(Clone, Debug)]
pub struct FrameBuffer {
    capacity: usize,
    frames: VecDeque<Frame>,
    truth: VecDeque<Option<FlowField>>,
}

impl FrameBuffer {
    pub fn new(capacity: usize) -> Result<Self> {
        if capacity < 2 {
            return Err(Error::Config(format!("flow needs at least 2 frames, got {capacity}")));
        }
        Ok(Self {
            capacity,
            frames: VecDeque::with_capacity(capacity),
            truth: VecDeque::with_capacity(capacity),
        })
    }

    pub fn push(&mut self, frame: Frame, truth: Option<FlowField>) -> Result<()> {
        if let Some(last) = self.frames.back() {
            last.dims().ensure_same(frame.dims())?;
        }
        if self.frames.len() == self.capacity {
            self.frames.pop_front();
            self.truth.pop_front();
        }
        self.frames.push_back(frame);
        self.truth.push_back(truth);
        Ok(())
    }

    pub fn is_ready(&self) -> bool {
        self.frames.len() == self.capacity
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    /// Flow over the buffered window; errors until the buffer is full.
    pub fn estimate(&self, kind: FlowEstimatorKind, downscale: usize) -> Result<FlowField> {
        if !self.is_ready() {
            return Err(Error::NotEnoughFrames {
                needed: self.capacity,
                have: self.frames.len(),
            });
        }
        let frames: Vec<Frame> = self.frames.iter().cloned().collect();
        let truth: Option<Vec<FlowField>> = self.truth.iter().cloned().collect();
        estimate_flow(&frames, truth.as_deref(), kind, downscale)
    }
}
