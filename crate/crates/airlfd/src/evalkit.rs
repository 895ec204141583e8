//! Onset, delay, false alarms, post-detection consistency and ranking AUC.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::detector::{OnsetDecision, ScoreSeries, TrajectoryScore};
use crate::real::Real;

#[derive(Debug, Error, PartialEq)]
pub enum EvalError {
    #[error("score series is empty")]
    EmptySeries,
}

/// Metrics of one run. Ground-truth dependent fields are `None` when
/// `onset_true` is unknown.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct DetectionReport<T> {
    pub onset_true: Option<usize>,
    pub onset_pred: Option<usize>,
    pub delay_files: Option<i64>,
    pub false_alarms: Option<usize>,
    pub pdc: Option<T>,
    pub auc: Option<T>,
    pub threshold: T,
    pub persistence: usize,
}

/// Report as written to disk.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct RunReport<T> {
    pub model: String,
    pub config_digest: String,
    #[serde(flatten)]
    pub report: DetectionReport<T>,
}

/// Probability that a random positive outscores a random negative (ties count half).
pub fn ranking_auc<T: Real>(neg: &[T], pos: &[T]) -> Option<T> {
    if neg.is_empty() || pos.is_empty() {
        return None;
    }
    let mut wins = 0u64; // in half-units
    for &p in pos {
        for &n in neg {
            if p > n {
                wins += 2;
            } else if p == n {
                wins += 1;
            }
        }
    }
    Some(T::c(wins as f64 / (2.0 * neg.len() as f64 * pos.len() as f64)))
}

pub fn evaluate_run<T: Real>(
    series: &ScoreSeries<T>,
    decision: &OnsetDecision<T>,
    onset_true: Option<usize>,
) -> Result<DetectionReport<T>, EvalError> {
    if series.entries.is_empty() {
        return Err(EvalError::EmptySeries);
    }
    let thr = decision.threshold;
    let pdc = decision.onset.map(|on| {
        let after: Vec<bool> = series
            .entries
            .iter()
            .filter(|e| e.trajectory_id >= on)
            .map(|e| e.score >= thr)
            .collect();
        T::c(after.iter().filter(|&&f| f).count() as f64 / after.len().max(1) as f64)
    });
    let (delay_files, false_alarms, auc) = match onset_true {
        None => (None, None, None),
        Some(ot) => {
            let fa = series
                .entries
                .iter()
                .filter(|e| e.trajectory_id < ot && e.score >= thr)
                .count();
            let (neg, pos): (Vec<&TrajectoryScore<T>>, Vec<_>) = series.entries.iter().partition(|e| e.trajectory_id < ot);
            let neg: Vec<T> = neg.iter().map(|e| e.score).collect();
            let pos: Vec<T> = pos.iter().map(|e| e.score).collect();
            (
                decision.onset.map(|p| p as i64 - ot as i64),
                Some(fa),
                ranking_auc(&neg, &pos),
            )
        }
    };
    Ok(DetectionReport {
        onset_true,
        onset_pred: decision.onset,
        delay_files,
        false_alarms,
        pdc,
        auc,
        threshold: thr,
        persistence: decision.persistence,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::detector::detect_onset;
    use crate::rng::{substream, uniform};

    fn series(xs: &[f64]) -> ScoreSeries<f64> {
        ScoreSeries {
            entries: xs
                .iter()
                .enumerate()
                .map(|(i, &score)| TrajectoryScore { trajectory_id: i, n_transitions: 4, score })
                .collect(),
        }
    }

    fn decision(onset: Option<usize>, threshold: f64) -> OnsetDecision<f64> {
        OnsetDecision { onset, persistence: 3, threshold }
    }

    #[test]
    fn delay_against_late_ground_truth() {
        let s = series(&vec![0.0; 300]);
        let r = evaluate_run(&s, &decision(Some(163), 0.5), Some(264)).unwrap();
        assert_eq!(r.delay_files, Some(-101));
    }

    #[test]
    fn pdc_fraction() {
        let s = series(&[0.0, 0.0, 1.0, 1.0, 0.0, 1.0]);
        let r = evaluate_run(&s, &decision(Some(2), 0.5), Some(2)).unwrap();
        assert_eq!(r.pdc, Some(0.75));
        assert_eq!(r.false_alarms, Some(0));
        assert_eq!(r.delay_files, Some(0));
    }

    #[test]
    fn perfect_auc() {
        let s = series(&[0.1, 0.9]);
        let r = evaluate_run(&s, &decision(None, 0.5), Some(1)).unwrap();
        assert_eq!(r.auc, Some(1.0));
        assert_eq!(r.pdc, None);
        assert_eq!(r.delay_files, None);
        assert_eq!(ranking_auc(&[0.5f64], &[0.5]), Some(0.5));
    }

    #[test]
    fn missing_ground_truth_omits_fields() {
        let s = series(&[0.1, 0.9, 0.9]);
        let r = evaluate_run(&s, &decision(Some(1), 0.5), None).unwrap();
        assert_eq!((r.delay_files, r.false_alarms, r.auc), (None, None, None));
        assert_eq!(r.pdc, Some(1.0));
        assert_eq!(evaluate_run(&series(&[]), &decision(None, 0.5), None), Err(EvalError::EmptySeries));
    }

    #[test]
    fn auc_invariant_under_monotone_maps() {
        let mut r = substream(8, 8);
        for _ in 0..50 {
            let xs: Vec<f64> = (0..40).map(|_| (uniform(&mut r) * 10.0).floor() / 10.0).collect();
            let ys: Vec<f64> = xs.iter().map(|&x| (3.0 * x).exp() - 7.0).collect();
            let a = evaluate_run(&series(&xs), &decision(None, 0.5), Some(17)).unwrap().auc;
            let b = evaluate_run(&series(&ys), &decision(None, 0.5), Some(17)).unwrap().auc;
            assert_eq!(a, b);
        }
    }

    #[test]
    fn invariants_on_random_runs() {
        let mut r = substream(9, 9);
        for _ in 0..100 {
            let xs: Vec<f64> = (0..30).map(|_| uniform(&mut r)).collect();
            let thr = uniform(&mut r);
            let s = series(&xs);
            let d = detect_onset(&s, thr, 3).unwrap();
            let rep = evaluate_run(&s, &d, Some(15)).unwrap();
            assert_eq!(rep.pdc.is_some(), rep.onset_pred.is_some());
            if let Some(p) = rep.pdc {
                assert!((0.0..=1.0).contains(&p));
                if xs[d.onset.unwrap()..].iter().all(|&x| x >= thr) {
                    assert_eq!(p, 1.0);
                }
            }
            if xs[..15].iter().all(|&x| x < thr) {
                assert_eq!(rep.false_alarms, Some(0));
            }
            if let (Some(p), Some(t)) = (rep.onset_pred, rep.onset_true) {
                assert_eq!(rep.delay_files, Some(p as i64 - t as i64));
            }
        }
    }

    #[test]
    fn report_json_has_all_fields() {
        let s = series(&[0.1, 0.9]);
        let rep = RunReport {
            model: "airl".into(),
            config_digest: "ab".into(),
            report: evaluate_run(&s, &decision(None, 0.5), None).unwrap(),
        };
        let v: serde_json::Value = serde_json::to_value(&rep).unwrap();
        let keys: Vec<&str> = v.as_object().unwrap().keys().map(|k| k.as_str()).collect();
        for k in [
            "model",
            "config_digest",
            "onset_true",
            "onset_pred",
            "delay_files",
            "false_alarms",
            "pdc",
            "auc",
            "threshold",
            "persistence",
        ] {
            assert!(keys.contains(&k), "{k}");
        }
        assert_eq!(keys.len(), 10);
    }
}
