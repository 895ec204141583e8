use airlfd::detector::{detect_onset, first_persistent, kmeans2_threshold, otsu_threshold, ScoreSeries, TrajectoryScore};
use airlfd::evalkit::ranking_auc;
use proptest::prelude::*;

fn series(xs: &[f64]) -> ScoreSeries<f64> {
    ScoreSeries {
        entries: xs
            .iter()
            .enumerate()
            .map(|(i, &score)| TrajectoryScore {
                trajectory_id: i,
                n_transitions: 10,
                score,
            })
            .collect(),
    }
}

proptest! {
    #[test]
    fn otsu_threshold_inside_range(xs in prop::collection::vec(0.0f64..1.0, 2..80)) {
        let lo = xs.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        prop_assume!(hi > lo);
        let t = otsu_threshold(&xs).unwrap().value;
        prop_assert!(t >= lo && t <= hi);
    }

    #[test]
    fn kmeans_threshold_splits_range(xs in prop::collection::vec(-5.0f64..5.0, 2..80)) {
        let lo = xs.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        prop_assume!(hi > lo);
        let t = kmeans2_threshold(&xs).unwrap().value;
        prop_assert!(t > lo && t < hi);
    }

    #[test]
    fn onset_run_is_all_above(xs in prop::collection::vec(0.0f64..1.0, 1..60), t in 0.0f64..1.0, m in 1usize..5) {
        let d = detect_onset(&series(&xs), t, m).unwrap();
        if let Some(o) = d.onset {
            prop_assert!(xs[o..o + m].iter().all(|&x| x >= t));
            prop_assert_eq!(first_persistent(&xs[..o + m - 1], t, m), None);
        } else {
            prop_assert!(xs.windows(m).all(|w| w.iter().any(|&x| x < t)));
        }
    }

    #[test]
    fn auc_symmetry(neg in prop::collection::vec(0.0f64..1.0, 1..20), pos in prop::collection::vec(0.0f64..1.0, 1..20)) {
        let a = ranking_auc(&neg, &pos).unwrap();
        let b = ranking_auc(&pos, &neg).unwrap();
        prop_assert!((a + b - 1.0).abs() < 1e-12);
    }
}
