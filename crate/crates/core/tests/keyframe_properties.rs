use std::path::{Path, PathBuf};

use kazefuse::image::GrayImage;
use kazefuse::keyframe::{select_keyframes, FrameSequence, KeyframePolicy};
use kazefuse::Result;
use proptest::prelude::*;

/// Frame `i` is a flat 28×28 image at `levels[i]`, so the similarity of two
/// frames is exactly `|Δlevel| / 255`.
fn run(levels: &[f64], policy: &KeyframePolicy) -> Vec<usize> {
    let paths: Vec<PathBuf> = (0..levels.len()).map(|i| PathBuf::from(format!("{i}"))).collect();
    let seq = FrameSequence::from_paths(paths, 2.0).unwrap();
    let load = |p: &Path| -> Result<GrayImage> {
        let i: usize = p.to_str().unwrap().parse().unwrap();
        GrayImage::filled(28, 28, levels[i])
    };
    select_keyframes(&seq, policy, load)
        .unwrap()
        .keyframes
        .iter()
        .map(|k| k.index)
        .collect()
}

fn policy(tau: f64) -> KeyframePolicy {
    KeyframePolicy {
        interval: 0.5,
        skip_enabled: false,
        dedup_threshold: tau,
        ..Default::default()
    }
}

proptest! {
    #[test]
    fn selection_is_an_ordered_subsequence(
        levels in prop::collection::vec(0u8..=255, 0..40),
        tau in 0.0f64..=1.0,
        skip in any::<bool>(),
    ) {
        let levels: Vec<f64> = levels.into_iter().map(f64::from).collect();
        let p = KeyframePolicy { skip_enabled: skip, skip_head: 3, skip_tail: 3, ..policy(tau) };
        let kept = run(&levels, &p);
        prop_assert!(kept.len() <= levels.len());
        prop_assert!(kept.windows(2).all(|w| w[0] < w[1]));
        if skip {
            prop_assert!(kept.iter().all(|&i| i >= 3 && i + 3 < levels.len()));
        }
    }

    #[test]
    fn zero_threshold_drops_only_exact_repeats(levels in prop::collection::vec(0u8..=4, 1..40)) {
        let levels: Vec<f64> = levels.into_iter().map(f64::from).collect();
        let kept = run(&levels, &policy(0.0));
        let mut expected = vec![0];
        for i in 1..levels.len() {
            if levels[i] != levels[*expected.last().unwrap()] {
                expected.push(i);
            }
        }
        prop_assert_eq!(kept, expected);
    }

    #[test]
    fn threshold_one_keeps_at_most_one(levels in prop::collection::vec(0u8..=255, 0..40)) {
        let levels: Vec<f64> = levels.into_iter().map(f64::from).collect();
        prop_assert!(run(&levels, &policy(1.0)).len() <= 1);
    }
}

/// Comparing against the last kept frame makes the count non-monotone in τ:
/// dropping an early frame can let later, more distant frames through.
#[test]
fn raising_the_threshold_can_keep_more_frames() {
    let levels: Vec<f64> = [0.85, 0.6, 0.45, 0.45, 0.1, 0.7].iter().map(|v| v * 255.0).collect();
    assert_eq!(run(&levels, &policy(0.36)), vec![0, 2]);
    assert_eq!(run(&levels, &policy(0.46)), vec![0, 4, 5]);
}
