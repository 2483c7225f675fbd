//! Posterior map to single liquid region.

use crate::morph::{close, label_components};
use crate::types::{BloodMask, Connectivity, PosteriorMap};

/// Pixels whose posterior is strictly above one half.
pub fn threshold_mask(posterior: &PosteriorMap) -> BloodMask {
    let bits = posterior.prob().iter().map(|&p| p > 0.5).collect();
    BloodMask::new(posterior.dims(), bits).expect("same dims")
}

/// One 3x3 dilation followed by one 3x3 erosion.
pub fn denoise(mask: &BloodMask) -> BloodMask {
    close(mask)
}

/// Largest connected component if its size exceeds `gamma_b`.
///
/// Equal sizes resolve to the component whose first pixel comes earliest in
/// `(row, col)` order.
pub fn largest_component(
    mask: &BloodMask,
    gamma_b: usize,
    connectivity: Connectivity,
) -> Option<BloodMask> {
    let comps = label_components(mask, connectivity);
    // labels are assigned in raster order, so the first maximum wins ties
    let mut best: Option<(usize, usize)> = None;
    for (label, &size) in comps.sizes.iter().enumerate() {
        if best.is_none_or(|(_, s)| size > s) {
            best = Some((label, size));
        }
    }
    let (best, size) = best?;
    (size > gamma_b).then(|| comps.mask_of(best))
}

/// Threshold, denoise and keep the gated largest component.
pub fn extract_region(
    posterior: &PosteriorMap,
    gamma_b: usize,
    connectivity: Connectivity,
) -> Option<BloodMask> {
    largest_component(&denoise(&threshold_mask(posterior)), gamma_b, connectivity)
}
