//! Independent reference implementations used as test oracles.
#![allow(dead_code)]

use std::collections::VecDeque;

use hemoflow::{BloodMask, GridDims, Pixel, PipelineConfig};
use rand::Rng;

pub const FOUR: [(isize, isize); 4] = [(0, -1), (0, 1), (-1, 0), (1, 0)];
pub const EIGHT: [(isize, isize); 8] = [(0, -1), (0, 1), (-1, 0), (1, 0), (-1, -1), (1, -1), (-1, 1), (1, 1)];

fn offsets(conn: u32) -> &'static [(isize, isize)] {
    if conn == 8 {
        &EIGHT
    } else {
        &FOUR
    }
}

fn neighbours(w: usize, h: usize, c: usize, r: usize, conn: u32) -> Vec<usize> {
    offsets(conn)
        .iter()
        .filter_map(|&(dc, dr)| {
            let (nc, nr) = (c as isize + dc, r as isize + dr);
            (nc >= 0 && nr >= 0 && (nc as usize) < w && (nr as usize) < h).then(|| nr as usize * w + nc as usize)
        })
        .collect()
}

/// Probability that at least one neighbour is liquid, by summing the joint
/// probability of every neighbour configuration with a liquid member.
pub fn or_by_enumeration(ps: &[f64]) -> f64 {
    let n = ps.len();
    let mut total = 0.0;
    for state in 1u32..(1 << n) {
        let mut joint = 1.0;
        for (i, p) in ps.iter().enumerate() {
            joint *= if state & (1 << i) != 0 { *p } else { 1.0 - p };
        }
        total += joint;
    }
    total
}

/// One predict-update cycle computed pixel by pixel.
pub fn filter_step_oracle(prev: &[f64], w: usize, h: usize, z: &[bool], cfg: &PipelineConfig) -> Vec<f64> {
    let conn = cfg.connectivity.count();
    let mut out = vec![0.0; w * h];
    for r in 0..h {
        for c in 0..w {
            let i = r * w + c;
            let ns: Vec<f64> = neighbours(w, h, c, r, conn).into_iter().map(|j| prev[j]).collect();
            let pk = or_by_enumeration(&ns);
            let pb = prev[i];
            let pred = cfg.p_bb * pb + (cfg.p_nb_k * pk + cfg.p_nb_nk * (1.0 - pk)) * (1.0 - pb);
            let (lb, lnb) = if z[i] {
                (cfg.p_det_tp, cfg.p_det_fp)
            } else {
                (1.0 - cfg.p_det_tp, 1.0 - cfg.p_det_fp)
            };
            let post = lb * pred / (lb * pred + lnb * (1.0 - pred));
            out[i] = post.clamp(1e-15, 1.0 - 1e-15);
        }
    }
    out
}

/// Connected (4-neighbour) blob grown from a random seed by repeatedly
/// adding a random frontier pixel.
pub fn random_connected_mask<R: Rng>(rng: &mut R, w: usize, h: usize, size: usize) -> BloodMask {
    let dims = GridDims::new(w, h).unwrap();
    let mut bits = vec![false; w * h];
    let seed = rng.gen_range(0..w * h);
    bits[seed] = true;
    let mut count = 1;
    let mut frontier: Vec<usize> = neighbours(w, h, seed % w, seed / w, 4);
    while count < size.min(w * h) && !frontier.is_empty() {
        let k = rng.gen_range(0..frontier.len());
        let i = frontier.swap_remove(k);
        if bits[i] {
            continue;
        }
        bits[i] = true;
        count += 1;
        frontier.extend(neighbours(w, h, i % w, i / w, 4).into_iter().filter(|&j| !bits[j]));
    }
    BloodMask::new(dims, bits).unwrap()
}

/// 3x3 erosion where pixels outside the grid do not count against a pixel.
pub fn erode_oracle(mask: &BloodMask) -> BloodMask {
    let d = mask.dims();
    let mut bits = vec![false; d.len()];
    for r in 0..d.height {
        for c in 0..d.width {
            let mut keep = mask.get(Pixel::new(c, r));
            for dr in -1isize..=1 {
                for dc in -1isize..=1 {
                    let (nc, nr) = (c as isize + dc, r as isize + dr);
                    if nc >= 0 && nr >= 0 && (nc as usize) < d.width && (nr as usize) < d.height {
                        keep &= mask.get(Pixel::new(nc as usize, nr as usize));
                    }
                }
            }
            bits[r * d.width + c] = keep;
        }
    }
    BloodMask::new(d, bits).unwrap()
}

pub fn reward_oracle(mask: &BloodMask, r: f64, gamma_r: usize) -> Vec<f64> {
    let mut reward = vec![0.0; mask.dims().len()];
    let mut m = mask.clone();
    for _ in 0..gamma_r {
        m = erode_oracle(&m);
        for (acc, &b) in reward.iter_mut().zip(m.bits()) {
            if b {
                *acc += r;
            }
        }
    }
    reward
}

/// Cheapest cost from `start` to `end` over mask pixels, by Bellman-Ford
/// relaxation of every directed edge.
pub fn bellman_ford(mask: &BloodMask, reward: &[f64], start: Pixel, end: Pixel, conn: u32) -> f64 {
    let d = mask.dims();
    let (w, h) = (d.width, d.height);
    let mut edges = Vec::new();
    for i in 0..w * h {
        if !mask.bits()[i] {
            continue;
        }
        let (c, r) = (i % w, i / w);
        for j in neighbours(w, h, c, r, conn) {
            if mask.bits()[j] {
                let diagonal = j % w != c && j / w != r;
                let len = if diagonal { 2f64.sqrt() } else { 1.0 };
                edges.push((i, j, len - reward[j]));
            }
        }
    }
    let mut dist = vec![f64::INFINITY; w * h];
    dist[start.row * w + start.col] = 0.0;
    for _ in 0..w * h {
        let mut changed = false;
        for &(i, j, cost) in &edges {
            if dist[i] + cost < dist[j] {
                dist[j] = dist[i] + cost;
                changed = true;
            }
        }
        if !changed {
            break;
        }
    }
    dist[end.row * w + end.col]
}

/// City-block distance from each mask pixel to the nearest unset in-grid
/// pixel.
pub fn clearance_oracle(mask: &BloodMask) -> Vec<usize> {
    let d = mask.dims();
    let mut dist = vec![usize::MAX; d.len()];
    let mut queue = VecDeque::new();
    for i in 0..d.len() {
        if !mask.bits()[i] {
            dist[i] = 0;
            queue.push_back(i);
        }
    }
    while let Some(i) = queue.pop_front() {
        for j in neighbours(d.width, d.height, i % d.width, i / d.width, 4) {
            if dist[j] == usize::MAX {
                dist[j] = dist[i] + 1;
                queue.push_back(j);
            }
        }
    }
    dist
}

pub fn is_neighbour_connected(path: &[Pixel], conn: u32) -> bool {
    path.windows(2).all(|w| {
        let dc = w[0].col.abs_diff(w[1].col);
        let dr = w[0].row.abs_diff(w[1].row);
        match conn {
            8 => dc.max(dr) == 1,
            _ => dc + dr == 1,
        }
    })
}
