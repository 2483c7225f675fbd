//! Suction path planning on the extracted liquid region.
//!
//! The end point is the oldest liquid (highest age count, picked on the
//! once-eroded region so it does not sit on the edge), the start point the
//! newest. Pixels that survive `i` successive erosions earn a clearance
//! reward of `r * i`, which is subtracted from the cost of entering them, so
//! the shortest path drifts towards the middle of the stream.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::error::{Error, Result};
use crate::morph::erode;
use crate::types::{AgeCountMap, BloodMask, Connectivity, GridDims, Pixel, PixelTrajectory};

#[derive(Clone, Debug, PartialEq)]
pub struct ClearanceRewardMap {
    dims: GridDims,
    reward: Vec<f64>,
}

impl ClearanceRewardMap {
    pub fn new(dims: GridDims, reward: Vec<f64>) -> Result<Self> {
        if reward.len() != dims.len() {
            return Err(Error::LengthMismatch { dims, len: reward.len() });
        }
        Ok(Self { dims, reward })
    }

    pub fn zeros(dims: GridDims) -> Self {
        Self {
            dims,
            reward: vec![0.0; dims.len()],
        }
    }

    pub fn dims(&self) -> GridDims {
        self.dims
    }

    pub fn reward(&self) -> &[f64] {
        &self.reward
    }

    pub fn get(&self, p: Pixel) -> f64 {
        self.reward[self.dims.index(p)]
    }
}

/// Adds one to the age of every pixel in `mask`.
pub fn update_age(counts: &AgeCountMap, mask: &BloodMask) -> Result<AgeCountMap> {
    counts.dims().ensure_same(mask.dims())?;
    let mut next = counts.clone();
    for (c, &b) in next.counts_mut().iter_mut().zip(mask.bits()) {
        if b {
            *c += 1;
        }
    }
    Ok(next)
}

/// Returns `(start, end)`: the youngest pixel of `mask` and the oldest pixel
/// of `mask` eroded once (or of `mask` itself if erosion empties it). Ties
/// go to the first pixel in `(row, col)` order.
pub fn select_endpoints(counts: &AgeCountMap, mask: &BloodMask) -> Result<(Pixel, Pixel)> {
    counts.dims().ensure_same(mask.dims())?;
    if mask.is_clear() {
        return Err(Error::EmptyMask);
    }
    let eroded = erode(mask);
    let end_region = if eroded.is_clear() { mask } else { &eroded };

    let argbest = |region: &BloodMask, better: fn(u32, u32) -> bool| {
        let mut best: Option<(usize, u32)> = None;
        for (i, &b) in region.bits().iter().enumerate() {
            if !b {
                continue;
            }
            let c = counts.counts()[i];
            if best.is_none_or(|(_, bc)| better(c, bc)) {
                best = Some((i, c));
            }
        }
        best.map(|(i, _)| mask.dims().pixel(i)).expect("region nonempty")
    };
    let end = argbest(end_region, |c, best| c > best);
    let start = argbest(mask, |c, best| c < best);
    Ok((start, end))
}

/// Accumulates `r` on every pixel still present after each of up to
/// `gamma_r` successive 3x3 erosions.
pub fn clearance_reward(mask: &BloodMask, r: f64, gamma_r: usize) -> ClearanceRewardMap {
    let mut reward = vec![0.0; mask.dims().len()];
    let mut eroded = mask.clone();
    let mut i = 0;
    while !eroded.is_clear() && i < gamma_r {
        eroded = erode(&eroded);
        for (acc, &b) in reward.iter_mut().zip(eroded.bits()) {
            if b {
                *acc += r;
            }
        }
        i += 1;
    }
    ClearanceRewardMap {
        dims: mask.dims(),
        reward,
    }
}

/// Cost of stepping from `from` into the neighbouring pixel `to`.
pub fn edge_cost(from: Pixel, to: Pixel, reward: &ClearanceRewardMap) -> f64 {
    let diagonal = from.col != to.col && from.row != to.row;
    let length = if diagonal { std::f64::consts::SQRT_2 } else { 1.0 };
    length - reward.get(to)
}

/// Sum of edge costs along a trajectory.
pub fn path_cost(traj: &PixelTrajectory, reward: &ClearanceRewardMap) -> f64 {
    traj.waypoints
        .windows(2)
        .map(|w| edge_cost(w[0], w[1], reward))
        .sum()
}

#[derive(Clone, Copy, Debug)]
struct Open {
    cost: f64,
    index: usize,
}

impl PartialEq for Open {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Open {}

impl PartialOrd for Open {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Open {
    // reversed: BinaryHeap pops the cheapest, then the lowest raster index
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .cost
            .total_cmp(&self.cost)
            .then_with(|| other.index.cmp(&self.index))
    }
}

/// Minimum-cost path from `start` to `end` through mask pixels, inclusive of
/// both endpoints.
pub fn plan(
    start: Pixel,
    end: Pixel,
    mask: &BloodMask,
    reward: &ClearanceRewardMap,
    connectivity: Connectivity,
) -> Result<PixelTrajectory> {
    let dims = mask.dims();
    dims.ensure_same(reward.dims())?;
    for p in [start, end] {
        if p.col >= dims.width || p.row >= dims.height {
            return Err(Error::OutOfBounds {
                col: p.col,
                row: p.row,
                dims,
            });
        }
        if !mask.get(p) {
            return Err(Error::OutOfRange(format!(
                "endpoint ({}, {}) is outside the mask",
                p.col, p.row
            )));
        }
    }

    // every step must stay strictly positive for Dijkstra to be exact
    if reward.reward.iter().any(|&r| !(r < 1.0) || r < 0.0) {
        return Err(Error::Config("clearance reward must lie in [0, 1)".into()));
    }

    let mut dist = vec![f64::INFINITY; dims.len()];
    let mut parent = vec![usize::MAX; dims.len()];
    let mut done = vec![false; dims.len()];
    let mut heap = BinaryHeap::new();
    let s = dims.index(start);
    let e = dims.index(end);
    dist[s] = 0.0;
    heap.push(Open { cost: 0.0, index: s });

    while let Some(Open { cost, index }) = heap.pop() {
        if done[index] {
            continue;
        }
        done[index] = true;
        if index == e {
            break;
        }
        let u = dims.pixel(index);
        for q in connectivity.neighbors(dims, u) {
            let j = dims.index(q);
            if done[j] || !mask.bits()[j] {
                continue;
            }
            let candidate = cost + edge_cost(u, q, reward);
            if candidate < dist[j] {
                dist[j] = candidate;
                parent[j] = index;
                heap.push(Open {
                    cost: candidate,
                    index: j,
                });
            }
        }
    }

    if !done[e] {
        return Err(Error::NoPath);
    }
    let mut waypoints = vec![end];
    let mut cur = e;
    while cur != s {
        cur = parent[cur];
        waypoints.push(dims.pixel(cur));
    }
    waypoints.reverse();
    Ok(PixelTrajectory::new(waypoints))
}

/// Passes the trajectory on only if it has more than `gamma_t` waypoints.
pub fn gate_and_emit(traj: PixelTrajectory, gamma_t: usize) -> Option<PixelTrajectory> {
    (traj.len() > gamma_t).then_some(traj)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_reward_that_cancels_step_cost() {
        let m = BloodMask::from_ascii(&["###"]).unwrap();
        let reward = ClearanceRewardMap::new(m.dims(), vec![0.0, 1.0, 0.0]).unwrap();
        let err = plan(Pixel::new(0, 0), Pixel::new(2, 0), &m, &reward, Connectivity::Four);
        assert!(matches!(err, Err(Error::Config(_))));
        assert!(ClearanceRewardMap::new(m.dims(), vec![0.0]).is_err());
    }

    fn dims(w: usize, h: usize) -> GridDims {
        GridDims::new(w, h).unwrap()
    }

    #[test]
    fn age_counts_accumulate() {
        let d = dims(4, 4);
        let mask = BloodMask::from_pixels(d, [Pixel::new(1, 1), Pixel::new(2, 1)]);
        let mut c = AgeCountMap::zeros(d);
        assert_eq!(update_age(&c, &BloodMask::empty(d)).unwrap(), c);
        for _ in 0..5 {
            c = update_age(&c, &mask).unwrap();
        }
        assert_eq!(c.get(Pixel::new(1, 1)), 5);
        assert_eq!(c.get(Pixel::new(0, 0)), 0);
        assert_eq!(c.counts().iter().sum::<u32>(), 10);
        assert!(update_age(&c, &BloodMask::empty(dims(3, 3))).is_err());
    }

    #[test]
    fn growing_mask_orders_ages() {
        let d = dims(12, 3);
        let mut c = AgeCountMap::zeros(d);
        for len in 1..=10 {
            let m = BloodMask::from_pixels(d, (0..len).map(|x| Pixel::new(x, 1)));
            c = update_age(&c, &m).unwrap();
        }
        for x in 0..9 {
            assert!(c.get(Pixel::new(x, 1)) > c.get(Pixel::new(x + 1, 1)));
        }
    }

    #[test]
    fn endpoints_single_pixel_and_uniform() {
        let d = dims(5, 5);
        let m = BloodMask::from_pixels(d, [Pixel::new(2, 3)]);
        let c = update_age(&AgeCountMap::zeros(d), &m).unwrap();
        assert_eq!(select_endpoints(&c, &m).unwrap(), (Pixel::new(2, 3), Pixel::new(2, 3)));

        let full = BloodMask::new(d, vec![true; 25]).unwrap();
        let c = update_age(&AgeCountMap::zeros(d), &full).unwrap();
        let (s, e) = select_endpoints(&c, &full).unwrap();
        assert_eq!(s, Pixel::new(0, 0));
        assert_eq!(e, Pixel::new(0, 0));

        assert!(matches!(
            select_endpoints(&AgeCountMap::zeros(d), &BloodMask::empty(d)),
            Err(Error::EmptyMask)
        ));
    }

    #[test]
    fn end_point_avoids_region_edge() {
        // oldest pixel is on the border of the blob; the eroded blob excludes it
        let m = BloodMask::from_ascii(&[
            ".......", ".#####.", ".#####.", ".#####.", ".......",
        ])
        .unwrap();
        let d = m.dims();
        let mut counts = vec![1u32; d.len()];
        counts[d.index(Pixel::new(1, 1))] = 9;
        counts[d.index(Pixel::new(3, 2))] = 5;
        let c = AgeCountMap::new(d, counts).unwrap();
        let (_, end) = select_endpoints(&c, &m).unwrap();
        assert_eq!(end, Pixel::new(3, 2));
    }

    #[test]
    fn reward_examples() {
        let line = BloodMask::from_ascii(&["..........", ".########.", ".........."]).unwrap();
        assert!(clearance_reward(&line, 0.2, 4).reward().iter().all(|&r| r == 0.0));

        let d = dims(13, 13);
        let sq = BloodMask::from_pixels(d, (2..11).flat_map(|r| (2..11).map(move |c| Pixel::new(c, r))));
        let rm = clearance_reward(&sq, 0.2, 4);
        assert!((rm.get(Pixel::new(6, 6)) - 0.8).abs() < 1e-12);
        assert_eq!(rm.get(Pixel::new(2, 2)), 0.0);
        assert_eq!(rm.get(Pixel::new(10, 6)), 0.0);
        assert!((rm.get(Pixel::new(3, 6)) - 0.2).abs() < 1e-12);
        assert_eq!(rm.get(Pixel::new(0, 0)), 0.0);

        assert_eq!(clearance_reward(&BloodMask::empty(d), 0.2, 4), ClearanceRewardMap::zeros(d));
    }

    #[test]
    fn plan_single_waypoint_and_corridor() {
        let m = BloodMask::from_ascii(&["..........", ".########.", ".........."]).unwrap();
        let zero = ClearanceRewardMap::zeros(m.dims());
        let p = Pixel::new(3, 1);
        assert_eq!(plan(p, p, &m, &zero, Connectivity::Four).unwrap().waypoints, vec![p]);
        let t = plan(Pixel::new(1, 1), Pixel::new(8, 1), &m, &zero, Connectivity::Four).unwrap();
        assert_eq!(t.len(), 8);
        assert_eq!(t.waypoints[0], Pixel::new(1, 1));
        assert_eq!(*t.waypoints.last().unwrap(), Pixel::new(8, 1));
    }

    #[test]
    fn plan_errors() {
        let m = BloodMask::from_ascii(&["##..##"]).unwrap();
        let zero = ClearanceRewardMap::zeros(m.dims());
        assert!(matches!(
            plan(Pixel::new(0, 0), Pixel::new(5, 0), &m, &zero, Connectivity::Four),
            Err(Error::NoPath)
        ));
        assert!(plan(Pixel::new(2, 0), Pixel::new(5, 0), &m, &zero, Connectivity::Four).is_err());
        assert!(plan(Pixel::new(9, 0), Pixel::new(5, 0), &m, &zero, Connectivity::Four).is_err());
    }

    #[test]
    fn diagonal_moves_with_eight_connectivity() {
        let m = BloodMask::new(dims(5, 5), vec![true; 25]).unwrap();
        let zero = ClearanceRewardMap::zeros(m.dims());
        let t = plan(Pixel::new(0, 0), Pixel::new(4, 4), &m, &zero, Connectivity::Eight).unwrap();
        assert_eq!(t.len(), 5);
        assert!((path_cost(&t, &zero) - 4.0 * std::f64::consts::SQRT_2).abs() < 1e-12);
    }

    #[test]
    fn gate_is_strict() {
        let mk = |n: usize| PixelTrajectory::new((0..n).map(|c| Pixel::new(c, 0)).collect());
        assert!(gate_and_emit(mk(31), 30).is_some());
        assert!(gate_and_emit(mk(30), 30).is_none());
        assert!(gate_and_emit(PixelTrajectory::default(), 30).is_none());
    }
}
