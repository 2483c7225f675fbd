//! Grid geometry and the image-like containers shared by every stage.
//!
//! All containers are row-major with the origin at the top-left pixel and
//! coordinates given as `(col, row)`.

use crate::error::{Error, Result};

/// Minimum side length for a simulated scene.
pub const MIN_SCENE_SIDE: usize = 8;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct GridDims {
    pub width: usize,
    pub height: usize,
}

impl GridDims {
    /// Any positive size is a valid container; scenes enforce
    /// [`MIN_SCENE_SIDE`] separately.
    pub fn new(width: usize, height: usize) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::InvalidDims { width, height });
        }
        Ok(Self { width, height })
    }

    pub fn len(&self) -> usize {
        self.width * self.height
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub fn index(&self, p: Pixel) -> usize {
        p.row * self.width + p.col
    }

    #[inline]
    pub fn pixel(&self, index: usize) -> Pixel {
        Pixel::new(index % self.width, index / self.width)
    }

    #[inline]
    pub fn contains(&self, col: isize, row: isize) -> bool {
        col >= 0 && row >= 0 && (col as usize) < self.width && (row as usize) < self.height
    }

    /// Dimensions after integer downscaling (remainder pixels are dropped).
    pub fn downscaled(&self, factor: usize) -> Result<Self> {
        if factor == 0 {
            return Err(Error::InvalidDims {
                width: self.width,
                height: self.height,
            });
        }
        GridDims::new(self.width / factor, self.height / factor)
    }

    pub fn ensure_same(&self, other: GridDims) -> Result<()> {
        if *self != other {
            return Err(Error::DimsMismatch {
                expected: *self,
                found: other,
            });
        }
        Ok(())
    }
}

impl std::fmt::Display for GridDims {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}x{}", self.width, self.height)
    }
}

/// Pixel coordinate, `(col, row)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Pixel {
    pub col: usize,
    pub row: usize,
}

impl Pixel {
    pub const fn new(col: usize, row: usize) -> Self {
        Self { col, row }
    }

    /// Lexicographic `(row, col)` key used for every deterministic tie-break.
    pub fn raster_key(&self) -> (usize, usize) {
        (self.row, self.col)
    }
}

/// Neighbourhood used by the filter, component labelling and the planner.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Connectivity {
    Four,
    Eight,
}

impl Connectivity {
    /// Offsets `(dcol, drow)` in visitation order: up, down, left, right,
    /// then diagonals.
    pub fn offsets(&self) -> &'static [(isize, isize)] {
        const FOUR: [(isize, isize); 4] = [(0, -1), (0, 1), (-1, 0), (1, 0)];
        const EIGHT: [(isize, isize); 8] = [
            (0, -1),
            (0, 1),
            (-1, 0),
            (1, 0),
            (-1, -1),
            (1, -1),
            (-1, 1),
            (1, 1),
        ];
        match self {
            Connectivity::Four => &FOUR,
            Connectivity::Eight => &EIGHT,
        }
    }

    pub fn from_count(n: u32) -> Result<Self> {
        match n {
            4 => Ok(Connectivity::Four),
            8 => Ok(Connectivity::Eight),
            _ => Err(Error::Config(format!("connectivity must be 4 or 8, got {n}"))),
        }
    }

    pub fn count(&self) -> u32 {
        match self {
            Connectivity::Four => 4,
            Connectivity::Eight => 8,
        }
    }

    /// In-grid neighbours of `p`, in visitation order.
    pub fn neighbors(&self, dims: GridDims, p: Pixel) -> impl Iterator<Item = Pixel> + '_ {
        self.offsets().iter().filter_map(move |&(dc, dr)| {
            let c = p.col as isize + dc;
            let r = p.row as isize + dr;
            dims.contains(c, r).then(|| Pixel::new(c as usize, r as usize))
        })
    }
}

/// Single-channel intensity image normalised to `[0, 1]`.
#[derive(Clone, Debug, PartialEq)]
pub struct Frame {
    dims: GridDims,
    pixels: Vec<f64>,
    pub timestamp: usize,
}

impl Frame {
    pub fn new(dims: GridDims, pixels: Vec<f64>, timestamp: usize) -> Result<Self> {
        check_len(dims, pixels.len())?;
        if let Some(v) = pixels.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(Error::OutOfRange(format!("intensity {v} outside [0,1]")));
        }
        Ok(Self {
            dims,
            pixels,
            timestamp,
        })
    }

    pub fn dims(&self) -> GridDims {
        self.dims
    }

    pub fn pixels(&self) -> &[f64] {
        &self.pixels
    }

    pub fn get(&self, col: usize, row: usize) -> f64 {
        self.pixels[row * self.dims.width + col]
    }
}

/// Per-pixel apparent motion in pixels/frame.
#[derive(Clone, Debug, PartialEq)]
pub struct FlowField {
    dims: GridDims,
    u: Vec<f64>,
    v: Vec<f64>,
}

impl FlowField {
    pub fn new(dims: GridDims, u: Vec<f64>, v: Vec<f64>) -> Result<Self> {
        check_len(dims, u.len())?;
        check_len(dims, v.len())?;
        if u.iter().chain(v.iter()).any(|x| !x.is_finite()) {
            return Err(Error::OutOfRange("non-finite flow component".into()));
        }
        Ok(Self { dims, u, v })
    }

    pub fn zeros(dims: GridDims) -> Self {
        Self {
            dims,
            u: vec![0.0; dims.len()],
            v: vec![0.0; dims.len()],
        }
    }

    pub fn dims(&self) -> GridDims {
        self.dims
    }

    pub fn u(&self) -> &[f64] {
        &self.u
    }

    pub fn v(&self) -> &[f64] {
        &self.v
    }

    pub fn magnitude(&self, index: usize) -> f64 {
        self.u[index].hypot(self.v[index])
    }
}

/// Per-pixel probability of liquid.
#[derive(Clone, Debug, PartialEq)]
pub struct PosteriorMap {
    dims: GridDims,
    prob: Vec<f64>,
}

impl PosteriorMap {
    pub fn new(dims: GridDims, prob: Vec<f64>) -> Result<Self> {
        check_len(dims, prob.len())?;
        if let Some(p) = prob.iter().find(|p| !(0.0..=1.0).contains(*p)) {
            return Err(Error::OutOfRange(format!("probability {p} outside [0,1]")));
        }
        Ok(Self { dims, prob })
    }

    pub fn uniform(dims: GridDims, value: f64) -> Self {
        Self {
            dims,
            prob: vec![value; dims.len()],
        }
    }

    pub(crate) fn from_vec_unchecked(dims: GridDims, prob: Vec<f64>) -> Self {
        debug_assert_eq!(dims.len(), prob.len());
        Self { dims, prob }
    }

    pub fn dims(&self) -> GridDims {
        self.dims
    }

    pub fn prob(&self) -> &[f64] {
        &self.prob
    }

    pub fn get(&self, p: Pixel) -> f64 {
        self.prob[self.dims.index(p)]
    }
}

/// Binary per-pixel mask.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct BloodMask {
    dims: GridDims,
    bits: Vec<bool>,
}

impl BloodMask {
    pub fn new(dims: GridDims, bits: Vec<bool>) -> Result<Self> {
        check_len(dims, bits.len())?;
        Ok(Self { dims, bits })
    }

    pub fn empty(dims: GridDims) -> Self {
        Self {
            dims,
            bits: vec![false; dims.len()],
        }
    }

    pub fn from_pixels(dims: GridDims, pixels: impl IntoIterator<Item = Pixel>) -> Self {
        let mut mask = Self::empty(dims);
        for p in pixels {
            mask.set(p, true);
        }
        mask
    }

    /// Parses rows of `#` (set) and `.` (clear); handy for fixtures.
    pub fn from_ascii(rows: &[&str]) -> Result<Self> {
        let height = rows.len();
        let width = rows.first().map(|r| r.len()).unwrap_or(0);
        let dims = GridDims::new(width, height)?;
        let mut bits = Vec::with_capacity(dims.len());
        for row in rows {
            if row.len() != width {
                return Err(Error::Format("ragged ascii mask".into()));
            }
            bits.extend(row.bytes().map(|b| b == b'#'));
        }
        Ok(Self { dims, bits })
    }

    pub fn dims(&self) -> GridDims {
        self.dims
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub fn get(&self, p: Pixel) -> bool {
        self.bits[self.dims.index(p)]
    }

    /// Out-of-grid coordinates read as unset.
    pub fn get_signed(&self, col: isize, row: isize) -> bool {
        self.dims.contains(col, row) && self.bits[row as usize * self.dims.width + col as usize]
    }

    pub fn set(&mut self, p: Pixel, value: bool) {
        let i = self.dims.index(p);
        self.bits[i] = value;
    }

    pub fn count(&self) -> usize {
        self.bits.iter().filter(|b| **b).count()
    }

    pub fn is_clear(&self) -> bool {
        !self.bits.iter().any(|b| *b)
    }

    pub fn pixels(&self) -> impl Iterator<Item = Pixel> + '_ {
        let dims = self.dims;
        self.bits
            .iter()
            .enumerate()
            .filter(|(_, b)| **b)
            .map(move |(i, _)| dims.pixel(i))
    }

    /// Nearest-neighbour resampling to `target` dims.
    pub fn resample_nearest(&self, target: GridDims) -> BloodMask {
        let mut bits = Vec::with_capacity(target.len());
        for row in 0..target.height {
            let sr = (row * self.dims.height / target.height).min(self.dims.height - 1);
            for col in 0..target.width {
                let sc = (col * self.dims.width / target.width).min(self.dims.width - 1);
                bits.push(self.bits[sr * self.dims.width + sc]);
            }
        }
        BloodMask { dims: target, bits }
    }
}

/// Per-pixel number of frames spent inside the extracted region.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AgeCountMap {
    dims: GridDims,
    counts: Vec<u32>,
}

impl AgeCountMap {
    pub fn new(dims: GridDims, counts: Vec<u32>) -> Result<Self> {
        check_len(dims, counts.len())?;
        Ok(Self { dims, counts })
    }

    pub fn zeros(dims: GridDims) -> Self {
        Self {
            dims,
            counts: vec![0; dims.len()],
        }
    }

    pub fn dims(&self) -> GridDims {
        self.dims
    }

    pub fn counts(&self) -> &[u32] {
        &self.counts
    }

    pub fn get(&self, p: Pixel) -> u32 {
        self.counts[self.dims.index(p)]
    }

    pub(crate) fn counts_mut(&mut self) -> &mut [u32] {
        &mut self.counts
    }
}

/// Ordered pixel path, start first.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct PixelTrajectory {
    pub waypoints: Vec<Pixel>,
}

impl PixelTrajectory {
    pub fn new(waypoints: Vec<Pixel>) -> Self {
        Self { waypoints }
    }

    pub fn len(&self) -> usize {
        self.waypoints.len()
    }

    pub fn is_empty(&self) -> bool {
        self.waypoints.is_empty()
    }

    /// Keeps every `step`-th waypoint; both endpoints are always kept.
    pub fn decimate(&self, step: usize) -> PixelTrajectory {
        let step = step.max(1);
        let n = self.waypoints.len();
        let mut out: Vec<Pixel> = self.waypoints.iter().copied().step_by(step).collect();
        if n > 0 && !(n - 1).is_multiple_of(step) {
            out.push(self.waypoints[n - 1]);
        }
        PixelTrajectory { waypoints: out }
    }
}

fn check_len(dims: GridDims, len: usize) -> Result<()> {
    if dims.len() != len {
        return Err(Error::LengthMismatch {
            dims,
            len,
        });
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_dims_rejected() {
        assert!(GridDims::new(0, 4).is_err());
        assert!(GridDims::new(3, 0).is_err());
    }

    #[test]
    fn frame_rejects_out_of_range_and_bad_length() {
        let d = GridDims::new(2, 2).unwrap();
        assert!(Frame::new(d, vec![0.0, 0.5, 1.0, 1.1], 0).is_err());
        assert!(Frame::new(d, vec![0.0; 3], 0).is_err());
        assert!(Frame::new(d, vec![0.25; 4], 7).is_ok());
    }

    #[test]
    fn flow_rejects_nan() {
        let d = GridDims::new(2, 1).unwrap();
        assert!(FlowField::new(d, vec![0.0, f64::NAN], vec![0.0, 0.0]).is_err());
    }

    #[test]
    fn neighbors_are_truncated_at_border() {
        let d = GridDims::new(3, 3).unwrap();
        let corner: Vec<_> = Connectivity::Four.neighbors(d, Pixel::new(0, 0)).collect();
        assert_eq!(corner, vec![Pixel::new(0, 1), Pixel::new(1, 0)]);
        assert_eq!(Connectivity::Four.neighbors(d, Pixel::new(1, 0)).count(), 3);
        assert_eq!(Connectivity::Eight.neighbors(d, Pixel::new(1, 1)).count(), 8);
    }

    #[test]
    fn decimate_keeps_endpoints() {
        let t = PixelTrajectory::new((0..8).map(|c| Pixel::new(c, 0)).collect());
        let d = t.decimate(3);
        let cols: Vec<_> = d.waypoints.iter().map(|p| p.col).collect();
        assert_eq!(cols, vec![0, 3, 6, 7]);
        let t = PixelTrajectory::new((0..7).map(|c| Pixel::new(c, 0)).collect());
        let cols: Vec<_> = t.decimate(3).waypoints.iter().map(|p| p.col).collect();
        assert_eq!(cols, vec![0, 3, 6]);
    }

    #[test]
    fn resample_nearest_upscales_blocks() {
        let m = BloodMask::from_ascii(&["#.", ".."]).unwrap();
        let up = m.resample_nearest(GridDims::new(4, 4).unwrap());
        assert_eq!(up.count(), 4);
        assert!(up.get(Pixel::new(1, 1)));
        assert!(!up.get(Pixel::new(2, 0)));
    }
}
