//! Recordings, normalization, windowing and proxy-action transitions.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::real::{mean_std, Real};

#[derive(Debug, Error)]
pub enum SignalError {
    #[error("missing file: {0}")]
    MissingFile(PathBuf),
    #[error("channel {channel} out of range ({columns} columns)")]
    BadColumn { channel: usize, columns: usize },
    #[error("parse error at line {line}: {msg}")]
    ParseError { line: usize, msg: String },
    #[error("zero-variance signal")]
    DegenerateSignal,
    #[error("empty input")]
    EmptyInput,
    #[error("recording has {n} samples, window needs {win_len}")]
    TooShort { n: usize, win_len: usize },
    #[error("bad feature mode: {0}")]
    BadMode(String),
    #[error("trajectory {trajectory_id} has fewer than 2 windows")]
    TooFewWindows { trajectory_id: usize },
    #[error("bad manifest: {0}")]
    BadManifest(String),
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
}

pub type Result<T> = std::result::Result<T, SignalError>;

/// One ordered capture from a single channel.
#[derive(Debug, Clone, PartialEq)]
pub struct Recording<T> {
    pub trajectory_id: usize,
    pub samples: Vec<T>,
    pub channel_id: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct Normalizer<T> {
    pub mean: T,
    pub std: T,
}

impl<T: Real> Normalizer<T> {
    pub fn apply(&self, x: T) -> T {
        (x - self.mean) / self.std
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FeatureMode {
    Raw,
    Decimate(usize),
    Stats,
}

impl FeatureMode {
    pub fn dim(&self, win_len: usize) -> usize {
        match *self {
            FeatureMode::Raw => win_len,
            FeatureMode::Decimate(k) => win_len.div_ceil(k),
            FeatureMode::Stats => 7,
        }
    }
}

impl fmt::Display for FeatureMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FeatureMode::Raw => write!(f, "raw"),
            FeatureMode::Decimate(k) => write!(f, "decimate({k})"),
            FeatureMode::Stats => write!(f, "stats"),
        }
    }
}

impl FromStr for FeatureMode {
    type Err = SignalError;

    fn from_str(s: &str) -> Result<Self> {
        let t = s.trim();
        match t {
            "raw" => return Ok(FeatureMode::Raw),
            "stats" => return Ok(FeatureMode::Stats),
            _ => {}
        }
        if let Some(inner) = t.strip_prefix("decimate(").and_then(|r| r.strip_suffix(')')) {
            if let Ok(k) = inner.trim().parse::<usize>() {
                if k >= 1 {
                    return Ok(FeatureMode::Decimate(k));
                }
            }
        }
        Err(SignalError::BadMode(s.to_string()))
    }
}

impl Serialize for FeatureMode {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for FeatureMode {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FeatureConfig {
    pub win_len: usize,
    pub stride: usize,
    pub mode: FeatureMode,
}

impl FeatureConfig {
    pub fn dim(&self) -> usize {
        self.mode.dim(self.win_len)
    }
}

/// State vector for one window.
pub type FeatureVec<T> = Vec<T>;

/// `(s, a, s_next)` with the proxy action `a = s_next`.
#[derive(Debug, Clone, PartialEq)]
pub struct Transition<T> {
    pub s: FeatureVec<T>,
    pub a: FeatureVec<T>,
    pub s_next: FeatureVec<T>,
    pub trajectory_id: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory<T> {
    pub trajectory_id: usize,
    pub transitions: Vec<Transition<T>>,
}

impl<T> Trajectory<T> {
    pub fn len(&self) -> usize {
        self.transitions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.transitions.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct TransitionSet<T> {
    pub trajectories: Vec<Trajectory<T>>,
}

impl<T> TransitionSet<T> {
    pub fn len(&self) -> usize {
        self.trajectories.iter().map(|t| t.len()).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn iter(&self) -> impl Iterator<Item = &Transition<T>> {
        self.trajectories.iter().flat_map(|t| t.transitions.iter())
    }
}

/// Ordered list of recordings plus ground truth.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub files: Vec<String>,
    pub channel: usize,
    pub healthy_range: [usize; 2],
    pub onset_true: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub config_digest: Option<String>,
}

impl Manifest {
    pub fn load(path: &Path) -> Result<Manifest> {
        let text = read_text(path)?;
        let m: Manifest = serde_json::from_str(&text).map_err(|e| SignalError::BadManifest(e.to_string()))?;
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        let [lo, hi] = self.healthy_range;
        if self.files.is_empty() {
            return Err(SignalError::BadManifest("no files".into()));
        }
        if lo > hi || hi >= self.files.len() {
            return Err(SignalError::BadManifest(format!(
                "healthy_range [{lo}, {hi}] invalid for {} files",
                self.files.len()
            )));
        }
        Ok(())
    }

    pub fn healthy_ids(&self) -> Vec<usize> {
        (self.healthy_range[0]..=self.healthy_range[1]).collect()
    }

    /// Loads every file in manifest order; paths are relative to `base`.
    pub fn load_recordings<T: Real>(&self, base: &Path) -> Result<Vec<Recording<T>>> {
        let mut out = Vec::with_capacity(self.files.len());
        for (i, f) in self.files.iter().enumerate() {
            let mut r = load_recording(&base.join(f), self.channel)?;
            r.trajectory_id = i;
            out.push(r);
        }
        Ok(out)
    }
}

fn read_text(path: &Path) -> Result<String> {
    if !path.exists() {
        return Err(SignalError::MissingFile(path.to_path_buf()));
    }
    std::fs::read_to_string(path).map_err(|source| SignalError::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Reads one column of a numeric CSV. A non-numeric first row is taken as a header.
pub fn load_recording<T: Real>(path: &Path, channel: usize) -> Result<Recording<T>> {
    let text = read_text(path)?;
    parse_recording(&text, channel)
}

pub fn parse_recording<T: Real>(text: &str, channel: usize) -> Result<Recording<T>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let mut samples = Vec::new();
    for (row, rec) in rdr.records().enumerate() {
        let line = row + 1;
        let rec = rec.map_err(|e| SignalError::ParseError {
            line,
            msg: e.to_string(),
        })?;
        if rec.iter().all(|c| c.is_empty()) {
            continue;
        }
        if row == 0 && rec.iter().any(|c| c.parse::<f64>().is_err()) {
            continue;
        }
        let cell = rec.get(channel).ok_or(SignalError::BadColumn {
            channel,
            columns: rec.len(),
        })?;
        let v: f64 = cell.parse().map_err(|_| SignalError::ParseError {
            line,
            msg: format!("non-numeric cell {cell:?}"),
        })?;
        if !v.is_finite() {
            return Err(SignalError::ParseError {
                line,
                msg: format!("non-finite value {cell:?}"),
            });
        }
        samples.push(T::c(v));
    }
    if samples.is_empty() {
        return Err(SignalError::EmptyInput);
    }
    Ok(Recording {
        trajectory_id: 0,
        samples,
        channel_id: channel,
    })
}

/// Mean and population std over the concatenation of `healthy`.
pub fn fit_normalizer<T: Real>(healthy: &[Recording<T>]) -> Result<Normalizer<T>> {
    let all: Vec<T> = healthy.iter().flat_map(|r| r.samples.iter().copied()).collect();
    if all.len() < 2 {
        return Err(SignalError::EmptyInput);
    }
    let (mean, std) = mean_std(&all);
    if !(std > T::zero()) {
        return Err(SignalError::DegenerateSignal);
    }
    Ok(Normalizer { mean, std })
}

pub fn window_count(n: usize, win_len: usize, stride: usize) -> usize {
    if n < win_len {
        0
    } else {
        (n - win_len) / stride + 1
    }
}

/// Mean, std, RMS, kurtosis, skewness, crest factor, peak.
pub fn window_stats<T: Real>(w: &[T]) -> [T; 7] {
    let n = T::from_usize_lossy(w.len());
    let (m, sd) = mean_std(w);
    let mut sq = T::zero();
    let mut peak = T::zero();
    let (mut m3, mut m4) = (T::zero(), T::zero());
    for &x in w {
        sq += x * x;
        peak = peak.max(x.abs());
        let d = x - m;
        m3 += d * d * d;
        m4 += d * d * d * d;
    }
    let rms = (sq / n).sqrt();
    let (kurt, skew, crest) = if sd > T::zero() {
        let v = sd * sd;
        (m4 / n / (v * v), m3 / n / (v * sd), peak / rms)
    } else {
        (T::zero(), T::zero(), T::zero())
    };
    [m, sd, rms, kurt, skew, crest, peak]
}

pub fn normalize_and_window<T: Real>(
    rec: &Recording<T>,
    norm: &Normalizer<T>,
    cfg: &FeatureConfig,
) -> Result<Vec<FeatureVec<T>>> {
    let FeatureConfig { win_len, stride, mode } = *cfg;
    if win_len < 8 || stride < 1 {
        return Err(SignalError::BadMode(format!("win_len {win_len}, stride {stride}")));
    }
    if let FeatureMode::Decimate(k) = mode {
        if k == 0 || k > win_len {
            return Err(SignalError::BadMode(mode.to_string()));
        }
    }
    let n = rec.samples.len();
    if n < win_len {
        return Err(SignalError::TooShort { n, win_len });
    }
    let z: Vec<T> = rec.samples.iter().map(|&x| norm.apply(x)).collect();
    let count = window_count(n, win_len, stride);
    let mut out = Vec::with_capacity(count);
    for i in 0..count {
        let w = &z[i * stride..i * stride + win_len];
        out.push(match mode {
            FeatureMode::Raw => w.to_vec(),
            FeatureMode::Decimate(k) => w.iter().step_by(k).copied().collect(),
            FeatureMode::Stats => window_stats(w).to_vec(),
        });
    }
    Ok(out)
}

/// Chains consecutive windows of each trajectory into `(w_k, w_{k+1}, w_{k+1})`.
pub fn build_transitions<T: Real>(windows: &[(usize, Vec<FeatureVec<T>>)]) -> Result<TransitionSet<T>> {
    let mut trajectories = Vec::with_capacity(windows.len());
    for (id, ws) in windows {
        if ws.len() < 2 {
            return Err(SignalError::TooFewWindows { trajectory_id: *id });
        }
        let transitions = ws
            .windows(2)
            .map(|p| Transition {
                s: p[0].clone(),
                a: p[1].clone(),
                s_next: p[1].clone(),
                trajectory_id: *id,
            })
            .collect();
        trajectories.push(Trajectory {
            trajectory_id: *id,
            transitions,
        });
    }
    Ok(TransitionSet { trajectories })
}

/// Normalizes, windows and chains a batch of recordings.
pub fn transitions_for<T: Real>(
    recs: &[&Recording<T>],
    norm: &Normalizer<T>,
    cfg: &FeatureConfig,
) -> Result<TransitionSet<T>> {
    let mut ws = Vec::with_capacity(recs.len());
    for r in recs {
        ws.push((r.trajectory_id, normalize_and_window(r, norm, cfg)?));
    }
    build_transitions(&ws)
}
