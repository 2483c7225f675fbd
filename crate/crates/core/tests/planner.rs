mod common;

use hemoflow::morph::{is_connected, label_components};
use hemoflow::region::{denoise, largest_component};
use hemoflow::trajectory::path_cost;
use hemoflow::{
    clearance_reward, gate_and_emit, plan, select_endpoints, update_age, AgeCountMap, BloodMask, Connectivity,
    GridDims, PipelineConfig,
};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn conn(eight: bool) -> Connectivity {
    if eight {
        Connectivity::Eight
    } else {
        Connectivity::Four
    }
}

fn arb_mask(max_side: usize) -> impl Strategy<Value = BloodMask> {
    (8..=max_side, 8..=max_side, any::<u64>(), 1usize..100).prop_map(|(w, h, seed, size)| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        common::random_connected_mask(&mut rng, w, h, size)
    })
}

fn arb_bits() -> impl Strategy<Value = BloodMask> {
    (8usize..14, 8usize..14).prop_flat_map(|(w, h)| {
        prop::collection::vec(prop::bool::weighted(0.4), w * h)
            .prop_map(move |bits| BloodMask::new(GridDims::new(w, h).unwrap(), bits).unwrap())
    })
}

/// Random age map over the mask, as if it had grown for `frames` frames.
fn ages_for(mask: &BloodMask, seed: u64) -> AgeCountMap {
    use rand::Rng;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let counts = mask.bits().iter().map(|&b| if b { rng.gen_range(1..20) } else { 0 }).collect();
    AgeCountMap::new(mask.dims(), counts).unwrap()
}

proptest! {
    #[test]
    fn planned_path_is_valid_and_optimal(mask in arb_mask(12), seed in any::<u64>(), eight in any::<bool>(), r in 0.0f64..0.24) {
        let c = conn(eight);
        let ages = ages_for(&mask, seed);
        let (start, end) = select_endpoints(&ages, &mask).unwrap();
        let reward = clearance_reward(&mask, r, 4);
        let path = plan(start, end, &mask, &reward, c).unwrap();
        prop_assert_eq!(path.waypoints[0], start);
        prop_assert_eq!(*path.waypoints.last().unwrap(), end);
        prop_assert!(path.waypoints.iter().all(|&p| mask.get(p)));
        prop_assert!(common::is_neighbour_connected(&path.waypoints, c.count()));
        let best = common::bellman_ford(&mask, reward.reward(), start, end, c.count());
        prop_assert!((path_cost(&path, &reward) - best).abs() < 1e-9);
    }

    #[test]
    fn reward_matches_erosion_oracle(mask in arb_bits(), r in 0.0f64..0.25, gamma_r in 0usize..6) {
        let got = clearance_reward(&mask, r, gamma_r);
        let want = common::reward_oracle(&mask, r, gamma_r);
        for (a, b) in got.reward().iter().zip(&want) {
            prop_assert!((a - b).abs() < 1e-12);
        }
        for (i, &b) in mask.bits().iter().enumerate() {
            if !b {
                prop_assert_eq!(got.reward()[i], 0.0);
            }
        }
    }

    #[test]
    fn reward_is_monotone_in_the_mask(small in arb_bits(), extra in prop::collection::vec(prop::bool::weighted(0.3), 196)) {
        let bits: Vec<bool> = small.bits().iter().zip(&extra).map(|(&a, &b)| a || b).collect();
        let big = BloodMask::new(small.dims(), bits).unwrap();
        let (rs, rb) = (clearance_reward(&small, 0.2, 4), clearance_reward(&big, 0.2, 4));
        prop_assert!(rs.reward().iter().zip(rb.reward()).all(|(a, b)| a <= b));
    }

    #[test]
    fn largest_component_is_connected_and_largest(mask in arb_bits(), gamma_b in 0usize..20, eight in any::<bool>()) {
        let c = conn(eight);
        let sizes = label_components(&mask, c).sizes;
        match largest_component(&mask, gamma_b, c) {
            Some(region) => {
                prop_assert!(is_connected(&region, c));
                prop_assert_eq!(Some(&region.count()), sizes.iter().max());
                prop_assert!(region.count() > gamma_b);
                prop_assert!(region.bits().iter().zip(mask.bits()).all(|(&r, &m)| m || !r));
            }
            None => prop_assert!(sizes.iter().all(|&s| s <= gamma_b)),
        }
    }

    #[test]
    fn closing_never_splits_a_component(mask in arb_bits(), eight in any::<bool>()) {
        let c = conn(eight);
        let closed = denoise(&mask);
        let before = label_components(&mask, c);
        let after = label_components(&closed, c);
        for label in 0..before.sizes.len() {
            let comp = before.mask_of(label);
            let hit: std::collections::BTreeSet<Option<usize>> =
                comp.pixels().map(|p| after.labels[closed.dims().index(p)]).collect();
            prop_assert_eq!(hit.len(), 1);
            prop_assert!(!hit.contains(&None));
        }
    }

    #[test]
    fn ages_are_additive(mask in arb_bits(), k in 0u32..6) {
        let mut ages = AgeCountMap::zeros(mask.dims());
        for _ in 0..k {
            ages = update_age(&ages, &mask).unwrap();
        }
        for (i, &b) in mask.bits().iter().enumerate() {
            prop_assert_eq!(ages.counts()[i], if b { k } else { 0 });
        }
    }
}

#[test]
fn corner_grown_region_ends_in_the_corner() {
    // liquid spreading from the top-left corner one ring per frame
    let dims = GridDims::new(40, 30).unwrap();
    let mut ages = AgeCountMap::zeros(dims);
    let mut mask = BloodMask::empty(dims);
    for t in 1..=25 {
        mask = BloodMask::from_pixels(dims, (0..dims.len()).map(|i| dims.pixel(i)).filter(|p| p.col + p.row < 2 * t));
        ages = update_age(&ages, &mask).unwrap();
    }
    let (start, end) = select_endpoints(&ages, &mask).unwrap();
    assert!(end.col + end.row <= 2, "end {end:?}");
    assert!(start.col + start.row >= 47, "start {start:?}");
    let cfg = PipelineConfig::default();
    let reward = clearance_reward(&mask, cfg.r, cfg.gamma_r);
    let path = plan(start, end, &mask, &reward, cfg.connectivity).unwrap();
    assert!(gate_and_emit(path, cfg.gamma_t).is_some());
}

#[test]
fn oracle_masks_from_acceptance_sampler_are_connected() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for _ in 0..50 {
        let m = common::random_connected_mask(&mut rng, 12, 12, 40);
        assert!(is_connected(&m, Connectivity::Four));
    }
}
