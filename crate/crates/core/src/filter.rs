//! Per-pixel two-state hidden Markov filter with neighbour-coupled
//! transitions.
//!
//! Each pixel is either liquid (`b`) or not (`¬b`). A non-liquid pixel turns
//! into liquid with probability `p_nb_k` when at least one neighbour is
//! liquid (the Boolean OR `k` of the neighbour states) and `p_nb_nk`
//! otherwise; a liquid pixel stays liquid with `p_bb`. Pixels are treated as
//! independent given the detections, so `P(k = b)` follows from the
//! neighbour marginals by inclusion-exclusion.
//!
//! The predict step reads a single snapshot of the previous posterior for
//! every pixel, so the result does not depend on visitation order or on how
//! the rows are split across threads.

use rayon::prelude::*;

use crate::config::PipelineConfig;
use crate::error::Result;
use crate::flow::DetectionMap;
use crate::types::{GridDims, Pixel, PosteriorMap};

/// Posterior values are kept inside `[PROB_FLOOR, 1 - PROB_FLOOR]` after
/// every update.
pub const PROB_FLOOR: f64 = 1e-15;

/// `P(q_1 ∨ … ∨ q_n)` for independent events, as the alternating
/// inclusion-exclusion sum over every non-empty subset.
///
/// Intended for neighbourhoods (at most 8 inputs); the cost is `2^n`.
pub fn neighbor_or_prob(probs: &[f64]) -> f64 {
    let n = probs.len();
    assert!(n <= 16, "neighbourhood too large for subset enumeration");
    let mut total = 0.0;
    for subset in 1u32..(1 << n) {
        let product: f64 = (0..n)
            .filter(|i| subset & (1 << i) != 0)
            .map(|i| probs[i])
            .product();
        if subset.count_ones() % 2 == 1 {
            total += product;
        } else {
            total -= product;
        }
    }
    total.clamp(0.0, 1.0)
}

#[derive(Clone, Debug, PartialEq)]
pub struct FilterState {
    pub posterior: PosteriorMap,
    pub cfg: PipelineConfig,
    pub t: usize,
}

impl FilterState {
    /// Every pixel starts at `cfg.p_prior`.
    pub fn new(dims: GridDims, cfg: PipelineConfig) -> Self {
        Self {
            posterior: PosteriorMap::uniform(dims, cfg.p_prior),
            cfg,
            t: 0,
        }
    }

    pub fn dims(&self) -> GridDims {
        self.posterior.dims()
    }
}

/// One-step prediction `P(p_{t+1} = b | z_{1:t})` for every pixel.
pub fn predict(state: &FilterState) -> PosteriorMap {
    predict_map(&state.posterior, &state.cfg)
}

pub(crate) fn predict_map(prior: &PosteriorMap, cfg: &PipelineConfig) -> PosteriorMap {
    let dims = prior.dims();
    let conn = cfg.connectivity;
    let snapshot = prior.prob();
    let mut out = vec![0.0; dims.len()];
    out.par_chunks_mut(dims.width)
        .enumerate()
        .for_each(|(row, out_row)| {
            let mut neigh = [0.0f64; 8];
            for (col, slot) in out_row.iter_mut().enumerate() {
                let p = Pixel::new(col, row);
                let mut n = 0;
                for q in conn.neighbors(dims, p) {
                    neigh[n] = snapshot[dims.index(q)];
                    n += 1;
                }
                let pk = neighbor_or_prob(&neigh[..n]);
                let pb = snapshot[dims.index(p)];
                let v = cfg.p_bb * pb + (cfg.p_nb_k * pk + cfg.p_nb_nk * (1.0 - pk)) * (1.0 - pb);
                *slot = v.clamp(0.0, 1.0);
            }
        });
    PosteriorMap::from_vec_unchecked(dims, out)
}

/// Bayes update of a predicted map with this frame's detections.
pub fn update(predicted: &PosteriorMap, z: &DetectionMap, cfg: &PipelineConfig) -> Result<PosteriorMap> {
    predicted.dims().ensure_same(z.dims())?;
    let prob = predicted
        .prob()
        .iter()
        .zip(z.bits())
        .map(|(&prior, &detected)| update_pixel(prior, detected, cfg))
        .collect();
    Ok(PosteriorMap::from_vec_unchecked(predicted.dims(), prob))
}

#[inline]
fn update_pixel(prior: f64, detected: bool, cfg: &PipelineConfig) -> f64 {
    let (like_b, like_nb) = if detected {
        (cfg.p_det_tp, cfg.p_det_fp)
    } else {
        (1.0 - cfg.p_det_tp, 1.0 - cfg.p_det_fp)
    };
    let num = like_b * prior;
    let den = num + like_nb * (1.0 - prior);
    let post = if den > 0.0 { num / den } else { prior };
    post.clamp(PROB_FLOOR, 1.0 - PROB_FLOOR)
}

/// Predict then update; advances `t` by one.
pub fn filter_step(state: &FilterState, z: &DetectionMap) -> Result<FilterState> {
    state.dims().ensure_same(z.dims())?;
    let predicted = predict(state);
    let posterior = update(&predicted, z, &state.cfg)?;
    Ok(FilterState {
        posterior,
        cfg: state.cfg.clone(),
        t: state.t + 1,
    })
}
