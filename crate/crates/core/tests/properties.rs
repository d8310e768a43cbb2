//! Property-based invariants: file-format roundtrips and label-map
//! accounting under randomized inputs.

use proptest::prelude::*;

use hsieval::datamodel::{HyperCube, LabelMap, SplitState};
use hsieval::ingest::{read_cube, read_labels, read_split, write_cube, write_labels, write_split};
use hsieval::sampling::stratified_random_split;

fn arb_cube() -> impl Strategy<Value = HyperCube> {
    (1usize..6, 1usize..6, 1usize..5).prop_flat_map(|(h, w, b)| {
        proptest::collection::vec(-1e6f32..1e6f32, h * w * b).prop_map(move |vals| {
            HyperCube::new(h, w, b, vals.into_iter().map(|v| v as f64).collect()).unwrap()
        })
    })
}

fn arb_labels() -> impl Strategy<Value = LabelMap> {
    (2usize..8, 2usize..8).prop_flat_map(|(h, w)| {
        proptest::collection::vec(0u16..4, h * w).prop_filter_map(
            "labels must be contiguous from 1",
            move |mut raw| {
                // remap present classes to a contiguous 1..=k range
                let mut present: Vec<u16> = raw.iter().copied().filter(|&l| l > 0).collect();
                present.sort_unstable();
                present.dedup();
                if present.is_empty() {
                    return None;
                }
                for l in &mut raw {
                    if *l > 0 {
                        *l = present.iter().position(|&p| p == *l).unwrap() as u16 + 1;
                    }
                }
                LabelMap::new(h, w, raw).ok()
            },
        )
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn cube_file_roundtrip_is_exact(cube in arb_cube()) {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.hsic");
        write_cube(&cube, &path).unwrap();
        let back = read_cube(&path).unwrap();
        prop_assert_eq!(cube, back);
    }

    #[test]
    fn label_file_roundtrip_is_exact(labels in arb_labels()) {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("l.txt");
        write_labels(&labels, &path).unwrap();
        let back = read_labels(&path).unwrap();
        prop_assert_eq!(labels, back);
    }

    #[test]
    fn class_counts_sum_to_labeled_pixels(labels in arb_labels()) {
        let counts = labels.class_counts();
        let total: usize = counts.values().sum();
        let labeled = labels.labels().iter().filter(|&&l| l > 0).count();
        prop_assert_eq!(total, labeled);
        for (&class, &n) in &counts {
            prop_assert_eq!(labels.pixels_of_class(class).len(), n);
        }
    }

    #[test]
    fn split_file_roundtrip_preserves_states(labels in arb_labels(), seed in any::<u64>()) {
        // need every class to have >= 2 pixels for a stratified draw
        if labels.class_counts().values().any(|&n| n < 2) {
            return Ok(());
        }
        let split = stratified_random_split(&labels, 0.5, seed).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("s.txt");
        write_split(&split, &path).unwrap();
        let back = read_split(&path).unwrap();
        prop_assert_eq!(back.rng_seed(), split.rng_seed());
        for y in 0..split.height() {
            for x in 0..split.width() {
                prop_assert_eq!(back.get(y, x), split.get(y, x));
            }
        }
        // train + test = labeled, excluded = unlabeled
        for y in 0..split.height() {
            for x in 0..split.width() {
                let labeled = labels.get(y, x) > 0;
                let excluded = split.get(y, x) == SplitState::Excluded;
                prop_assert_eq!(labeled, !excluded);
            }
        }
    }
}
