//! Binary morphology with a 3x3 square structuring element and connected
//! component labelling.
//!
//! Out-of-grid neighbours are ignored by both dilation and erosion, so a
//! region touching the image border is not eaten from that side and
//! closing is extensive (`mask ⊆ close(mask)`).

use std::collections::VecDeque;

use crate::types::{BloodMask, Connectivity, GridDims};

fn window_any(mask: &BloodMask, col: usize, row: usize) -> bool {
    let d = mask.dims();
    let (c0, c1) = (col.saturating_sub(1), (col + 1).min(d.width - 1));
    let (r0, r1) = (row.saturating_sub(1), (row + 1).min(d.height - 1));
    (r0..=r1).any(|r| (c0..=c1).any(|c| mask.bits()[r * d.width + c]))
}

fn window_all(mask: &BloodMask, col: usize, row: usize) -> bool {
    let d = mask.dims();
    let (c0, c1) = (col.saturating_sub(1), (col + 1).min(d.width - 1));
    let (r0, r1) = (row.saturating_sub(1), (row + 1).min(d.height - 1));
    (r0..=r1).all(|r| (c0..=c1).all(|c| mask.bits()[r * d.width + c]))
}

fn map_pixels(mask: &BloodMask, f: impl Fn(&BloodMask, usize, usize) -> bool) -> BloodMask {
    let d = mask.dims();
    let bits = (0..d.len())
        .map(|i| f(mask, i % d.width, i / d.width))
        .collect();
    BloodMask::new(d, bits).expect("same dims")
}

pub fn dilate(mask: &BloodMask) -> BloodMask {
    map_pixels(mask, window_any)
}

pub fn erode(mask: &BloodMask) -> BloodMask {
    map_pixels(mask, |m, c, r| m.bits()[r * m.dims().width + c] && window_all(m, c, r))
}

/// Dilation followed by erosion.
pub fn close(mask: &BloodMask) -> BloodMask {
    erode(&dilate(mask))
}

/// Connected components in raster order of their first pixel.
#[derive(Clone, Debug)]
pub struct Components {
    pub dims: GridDims,
    /// Per-pixel label; `None` for background.
    pub labels: Vec<Option<usize>>,
    pub sizes: Vec<usize>,
}

impl Components {
    pub fn len(&self) -> usize {
        self.sizes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sizes.is_empty()
    }

    pub fn mask_of(&self, label: usize) -> BloodMask {
        let bits = self.labels.iter().map(|l| *l == Some(label)).collect();
        BloodMask::new(self.dims, bits).expect("same dims")
    }
}

pub fn label_components(mask: &BloodMask, connectivity: Connectivity) -> Components {
    let dims = mask.dims();
    let mut labels = vec![None; dims.len()];
    let mut sizes = Vec::new();
    let mut queue = VecDeque::new();
    for start in 0..dims.len() {
        if !mask.bits()[start] || labels[start].is_some() {
            continue;
        }
        let label = sizes.len();
        let mut size = 0;
        labels[start] = Some(label);
        queue.push_back(start);
        while let Some(i) = queue.pop_front() {
            size += 1;
            for q in connectivity.neighbors(dims, dims.pixel(i)) {
                let j = dims.index(q);
                if mask.bits()[j] && labels[j].is_none() {
                    labels[j] = Some(label);
                    queue.push_back(j);
                }
            }
        }
        sizes.push(size);
    }
    Components {
        dims,
        labels,
        sizes,
    }
}

/// True if the set pixels form exactly one component (or none).
pub fn is_connected(mask: &BloodMask, connectivity: Connectivity) -> bool {
    label_components(mask, connectivity).len() <= 1
}

/// City-block distance from each set pixel to the nearest
/// unset in-grid pixel, by multi-source BFS. Pixels with no unset pixel in
/// the grid get `usize::MAX`.
pub fn distance_to_background(mask: &BloodMask) -> Vec<usize> {
    let dims = mask.dims();
    let mut dist = vec![usize::MAX; dims.len()];
    let mut queue = VecDeque::new();
    for (i, &b) in mask.bits().iter().enumerate() {
        if !b {
            dist[i] = 0;
            queue.push_back(i);
        }
    }
    while let Some(i) = queue.pop_front() {
        for q in Connectivity::Four.neighbors(dims, dims.pixel(i)) {
            let j = dims.index(q);
            if dist[j] == usize::MAX {
                dist[j] = dist[i] + 1;
                queue.push_back(j);
            }
        }
    }
    dist
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::Pixel;

    #[test]
    fn closing_fills_interior_hole() {
        let m = BloodMask::from_ascii(&[
            ".........",
            ".........",
            "..#####..",
            "..#####..",
            "..##.##..",
            "..#####..",
            "..#####..",
            ".........",
            ".........",
        ])
        .unwrap();
        let closed = close(&m);
        let mut expected = m.clone();
        expected.set(Pixel::new(4, 4), true);
        assert_eq!(closed, expected);
    }

    #[test]
    fn closing_grows_into_a_one_pixel_border_gap() {
        let m = BloodMask::from_ascii(&[".....", ".###.", ".###.", ".###.", "....."]).unwrap();
        assert_eq!(close(&m).count(), 25);
    }

    #[test]
    fn closing_keeps_isolated_pixel() {
        let m = BloodMask::from_ascii(&[".....", ".....", "..#..", ".....", "....."]).unwrap();
        assert_eq!(close(&m), m);
    }

    #[test]
    fn erosion_ignores_grid_border() {
        let m = BloodMask::from_ascii(&["###", "###", "###"]).unwrap();
        assert_eq!(erode(&m), m);
        let m = BloodMask::from_ascii(&["###.", "###.", "###."]).unwrap();
        assert_eq!(erode(&m).count(), 6);
    }

    #[test]
    fn line_erodes_to_nothing() {
        let m = BloodMask::from_ascii(&[".......", ".#####.", "......."]).unwrap();
        assert!(erode(&m).is_clear());
    }

    #[test]
    fn labelling_respects_connectivity() {
        let m = BloodMask::from_ascii(&["#.", ".#"]).unwrap();
        assert_eq!(label_components(&m, Connectivity::Four).len(), 2);
        assert_eq!(label_components(&m, Connectivity::Eight).len(), 1);
    }

    #[test]
    fn distance_transform_on_bar() {
        let m = BloodMask::from_ascii(&[".....", ".###.", "....."]).unwrap();
        let d = distance_to_background(&m);
        assert_eq!(&d[5..10], &[0, 1, 1, 1, 0]);
    }
}
