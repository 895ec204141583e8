//! Trajectory scores, thresholds and onset decisions.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::airlcore::AirlModel;
use crate::real::{mean, mean_std, Real};
use crate::signalio::{Trajectory, TransitionSet};

pub const OTSU_BINS: usize = 256;
pub const KMEANS_MAX_ITERS: usize = 100;

#[derive(Debug, Error, PartialEq)]
pub enum DetectError {
    #[error("trajectory {0} has no transitions")]
    EmptyTrajectory(usize),
    #[error("scores are degenerate (fewer than 2 distinct values)")]
    DegenerateScores,
    #[error("need at least {need} scores, got {got}")]
    TooFewScores { need: usize, got: usize },
    #[error("bad parameter: {0}")]
    BadParameter(String),
    #[error("unknown threshold method {0:?}")]
    UnknownMethod(String),
}

pub type Result<T> = std::result::Result<T, DetectError>;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct TrajectoryScore<T> {
    pub trajectory_id: usize,
    pub n_transitions: usize,
    pub score: T,
}

/// Scores ordered by trajectory id.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct ScoreSeries<T> {
    pub entries: Vec<TrajectoryScore<T>>,
}

impl<T: Real> ScoreSeries<T> {
    pub fn scores(&self) -> Vec<T> {
        self.entries.iter().map(|e| e.score).collect()
    }

    pub fn score_of(&self, id: usize) -> Option<T> {
        self.entries.iter().find(|e| e.trajectory_id == id).map(|e| e.score)
    }

    pub fn sort(&mut self) {
        self.entries.sort_by_key(|e| e.trajectory_id);
    }
}

/// `1 - mean(D)`.
pub fn score_from_probs<T: Real>(probs: &[T]) -> Option<T> {
    if probs.is_empty() {
        None
    } else {
        Some(T::one() - mean(probs))
    }
}

/// Per-transition discriminator probabilities of one trajectory.
pub fn transition_probs<T: Real>(model: &AirlModel<T>, traj: &Trajectory<T>) -> Vec<T> {
    let mut ws = model.workspace();
    traj.transitions
        .iter()
        .map(|t| model.prob_with(&t.s, &t.a, &t.s_next, &mut ws))
        .collect()
}

pub fn trajectory_score<T: Real>(model: &AirlModel<T>, traj: &Trajectory<T>) -> Result<T> {
    let d = model.state_dim();
    if traj.transitions.iter().any(|t| t.s.len() != d || t.a.len() != d || t.s_next.len() != d) {
        return Err(DetectError::BadParameter(format!(
            "trajectory {} does not match state dim {d}",
            traj.trajectory_id
        )));
    }
    score_from_probs(&transition_probs(model, traj)).ok_or(DetectError::EmptyTrajectory(traj.trajectory_id))
}

pub fn score_set<T: Real>(model: &AirlModel<T>, set: &TransitionSet<T>) -> Result<ScoreSeries<T>> {
    let mut entries = Vec::with_capacity(set.trajectories.len());
    for t in &set.trajectories {
        entries.push(TrajectoryScore {
            trajectory_id: t.trajectory_id,
            n_transitions: t.len(),
            score: trajectory_score(model, t)?,
        });
    }
    let mut s = ScoreSeries { entries };
    s.sort();
    Ok(s)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ThresholdMethod {
    Otsu,
    Kmeans2,
    SigmaRule,
}

impl fmt::Display for ThresholdMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ThresholdMethod::Otsu => "otsu",
            ThresholdMethod::Kmeans2 => "kmeans2",
            ThresholdMethod::SigmaRule => "sigma_rule",
        })
    }
}

impl FromStr for ThresholdMethod {
    type Err = DetectError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "otsu" => Ok(ThresholdMethod::Otsu),
            "kmeans2" => Ok(ThresholdMethod::Kmeans2),
            "sigma_rule" => Ok(ThresholdMethod::SigmaRule),
            _ => Err(DetectError::UnknownMethod(s.to_string())),
        }
    }
}

impl Serialize for ThresholdMethod {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for ThresholdMethod {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        String::deserialize(d)?.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct ThresholdSpec<T> {
    pub method: ThresholdMethod,
    pub value: T,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bins: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k: Option<T>,
    #[serde(default)]
    pub degenerate: bool,
}

fn min_max<T: Real>(xs: &[T]) -> (T, T) {
    xs.iter().fold((T::infinity(), T::neg_infinity()), |(lo, hi), &x| (lo.min(x), hi.max(x)))
}

/// Histogram bin of `x` over `[lo, hi]` with `bins` equal-width bins.
pub fn bin_index<T: Real>(x: T, lo: T, hi: T, bins: usize) -> usize {
    let b = ((x - lo) / (hi - lo) * T::from_usize_lossy(bins)).floor();
    b.to_usize().unwrap_or(0).min(bins - 1)
}

/// Value of boundary `j` (between bins `j-1` and `j`).
pub fn bin_boundary<T: Real>(j: usize, lo: T, hi: T, bins: usize) -> T {
    lo + (hi - lo) * T::from_usize_lossy(j) / T::from_usize_lossy(bins)
}

pub fn histogram<T: Real>(xs: &[T], bins: usize) -> Option<(Vec<u64>, T, T)> {
    let (lo, hi) = min_max(xs);
    if xs.is_empty() || !(hi > lo) {
        return None;
    }
    let mut h = vec![0u64; bins];
    for &x in xs {
        h[bin_index(x, lo, hi, bins)] += 1;
    }
    Some((h, lo, hi))
}

/// Between-group variance (up to a constant factor) of splitting before bin `j`.
///
/// Bin centres are taken as `2k + 1` in half-bin units, so every sum is an
/// exact integer and the criterion is reproducible bit for bit.
pub fn between_variance(c0: u64, s0: u64, c1: u64, s1: u64) -> f64 {
    if c0 == 0 || c1 == 0 {
        return 0.0;
    }
    let d = s0 as f64 / c0 as f64 - s1 as f64 / c1 as f64;
    c0 as f64 * c1 as f64 * d * d
}

/// Otsu's threshold on a 256-bin histogram; ties go to the lower boundary.
pub fn otsu_threshold<T: Real>(scores: &[T]) -> Result<ThresholdSpec<T>> {
    let bins = OTSU_BINS;
    let (h, lo, hi) = histogram(scores, bins).ok_or(DetectError::DegenerateScores)?;
    let total_c: u64 = h.iter().sum();
    let total_s: u64 = h.iter().enumerate().map(|(k, &c)| c * (2 * k as u64 + 1)).sum();
    let (mut c0, mut s0) = (0u64, 0u64);
    let (mut best_j, mut best) = (1, f64::NEG_INFINITY);
    for j in 1..bins {
        c0 += h[j - 1];
        s0 += h[j - 1] * (2 * (j - 1) as u64 + 1);
        let v = between_variance(c0, s0, total_c - c0, total_s - s0);
        if v > best {
            best = v;
            best_j = j;
        }
    }
    Ok(ThresholdSpec {
        method: ThresholdMethod::Otsu,
        value: bin_boundary(best_j, lo, hi, bins),
        bins: Some(bins),
        k: None,
        degenerate: false,
    })
}

/// Two-means in 1-D from centres at min and max; threshold is their midpoint.
pub fn kmeans2_threshold<T: Real>(scores: &[T]) -> Result<ThresholdSpec<T>> {
    let (c0, c1, _) = kmeans2_centers(scores)?;
    Ok(ThresholdSpec {
        method: ThresholdMethod::Kmeans2,
        value: (c0 + c1) / T::c(2.0),
        bins: None,
        k: None,
        degenerate: false,
    })
}

/// Final `(low, high)` centres and the iteration count.
pub fn kmeans2_centers<T: Real>(scores: &[T]) -> Result<(T, T, usize)> {
    let (lo, hi) = min_max(scores);
    if scores.is_empty() || !(hi > lo) {
        return Err(DetectError::DegenerateScores);
    }
    let (mut c0, mut c1) = (lo, hi);
    let mut assign: Vec<bool> = Vec::new();
    for it in 0..KMEANS_MAX_ITERS {
        let next: Vec<bool> = scores.iter().map(|&x| (x - c1).abs() < (x - c0).abs()).collect();
        if next == assign {
            return Ok((c0, c1, it));
        }
        assign = next;
        let (mut s0, mut n0, mut s1, mut n1) = (T::zero(), 0usize, T::zero(), 0usize);
        for (&x, &high) in scores.iter().zip(&assign) {
            if high {
                s1 += x;
                n1 += 1;
            } else {
                s0 += x;
                n0 += 1;
            }
        }
        if n0 > 0 {
            c0 = s0 / T::from_usize_lossy(n0);
        }
        if n1 > 0 {
            c1 = s1 / T::from_usize_lossy(n1);
        }
    }
    Ok((c0, c1, KMEANS_MAX_ITERS))
}

/// `mean + k * std` (population) of healthy validation scores.
pub fn sigma_threshold<T: Real>(healthy: &[T], k: T) -> Result<ThresholdSpec<T>> {
    if healthy.len() < 2 {
        return Err(DetectError::TooFewScores {
            need: 2,
            got: healthy.len(),
        });
    }
    if !(k >= T::zero()) {
        return Err(DetectError::BadParameter("k must be >= 0".into()));
    }
    let (m, sd) = mean_std(healthy);
    Ok(ThresholdSpec {
        method: ThresholdMethod::SigmaRule,
        value: m + k * sd,
        bins: None,
        k: Some(k),
        degenerate: sd == T::zero(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct OnsetDecision<T> {
    /// Trajectory id of the first persistent exceedance.
    pub onset: Option<usize>,
    pub persistence: usize,
    pub threshold: T,
}

/// Smallest index `i` with `scores[i..i+m]` all `>= threshold`.
pub fn first_persistent<T: Real>(scores: &[T], threshold: T, m: usize) -> Option<usize> {
    let mut run = 0;
    for (i, &s) in scores.iter().enumerate() {
        run = if s >= threshold { run + 1 } else { 0 };
        if run >= m {
            return Some(i + 1 - m);
        }
    }
    None
}

pub fn detect_onset<T: Real>(series: &ScoreSeries<T>, threshold: T, m: usize) -> Result<OnsetDecision<T>> {
    if m == 0 {
        return Err(DetectError::BadParameter("persistence must be >= 1".into()));
    }
    if series.entries.is_empty() {
        return Err(DetectError::TooFewScores { need: 1, got: 0 });
    }
    let idx = first_persistent(&series.scores(), threshold, m);
    Ok(OnsetDecision {
        onset: idx.map(|i| series.entries[i].trajectory_id),
        persistence: m,
        threshold,
    })
}
