//! Seeded synthetic run-to-failure datasets with a known onset.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::real::Real;
use crate::rng::{std_normal, substream, StreamRng};
use crate::signalio::{Manifest, Recording};

pub const BURN_IN: usize = 500;
pub const BURST_LEN: usize = 32;
pub const BURST_FREQ: f64 = 0.35;
pub const BURST_DECAY: f64 = 0.2;
pub const BURST_PERIOD: usize = 512;
pub const BURST_A0: f64 = 0.2;
pub const BURST_GROWTH: f64 = 1.15;
pub const BURST_CAP: f64 = 5.0;
pub const RESET_BLOCK: usize = 256;

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("bad synth config: {0}")]
    BadConfig(String),
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Regime {
    HealthyOnly,
    ImpulseRamp,
    BoundaryReset,
}

impl fmt::Display for Regime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Regime::HealthyOnly => "healthy-only",
            Regime::ImpulseRamp => "impulse-ramp",
            Regime::BoundaryReset => "boundary-reset",
        })
    }
}

impl FromStr for Regime {
    type Err = SynthError;

    fn from_str(s: &str) -> Result<Self, SynthError> {
        match s {
            "healthy-only" => Ok(Regime::HealthyOnly),
            "impulse-ramp" => Ok(Regime::ImpulseRamp),
            "boundary-reset" => Ok(Regime::BoundaryReset),
            _ => Err(SynthError::BadConfig(format!("unknown regime {s:?}"))),
        }
    }
}

impl Serialize for Regime {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for Regime {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        String::deserialize(d)?.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub n_files: usize,
    pub samples_per_file: usize,
    pub onset_file: Option<usize>,
    pub regime: Regime,
    pub ar_radius: f64,
    pub ar_angle: f64,
    pub noise_std: f64,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            n_files: 60,
            samples_per_file: 8192,
            onset_file: Some(30),
            regime: Regime::ImpulseRamp,
            ar_radius: 0.95,
            ar_angle: 2.0 * std::f64::consts::PI * 0.1,
            noise_std: 0.05,
            seed: 0,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<(), SynthError> {
        let bad = |m: String| Err(SynthError::BadConfig(m));
        if self.n_files == 0 || self.samples_per_file == 0 {
            return bad("n_files and samples_per_file must be positive".into());
        }
        if !(self.ar_radius > 0.0 && self.ar_radius < 1.0) {
            return bad(format!("ar_radius {} outside (0, 1)", self.ar_radius));
        }
        if !self.ar_angle.is_finite() || !(self.noise_std >= 0.0) || !self.noise_std.is_finite() {
            return bad("ar_angle must be finite and noise_std >= 0".into());
        }
        match (self.regime, self.onset_file) {
            (Regime::HealthyOnly, _) => Ok(()),
            (_, None) => bad(format!("regime {} needs onset_file", self.regime)),
            (_, Some(0)) => bad("onset_file must leave at least one healthy file".into()),
            (_, Some(o)) if o >= self.n_files => bad(format!("onset_file {o} >= n_files {}", self.n_files)),
            _ => Ok(()),
        }
    }

    /// Ground-truth onset as written into the manifest.
    pub fn onset_true(&self) -> Option<usize> {
        match self.regime {
            Regime::HealthyOnly => None,
            _ => self.onset_file,
        }
    }

    fn ar_coefs(&self) -> (f64, f64) {
        let r = self.ar_radius;
        (2.0 * r * self.ar_angle.cos(), -r * r)
    }
}

/// AR(2) sequence of length `n` after a `BURN_IN`-sample warm-up from zero.
pub fn ar2(rng: &mut StreamRng, n: usize, a1: f64, a2: f64) -> Vec<f64> {
    let (mut x1, mut x2) = (0.0, 0.0);
    let mut out = Vec::with_capacity(n);
    for t in 0..n + BURN_IN {
        let x = a1 * x1 + a2 * x2 + std_normal(rng);
        x2 = x1;
        x1 = x;
        if t >= BURN_IN {
            out.push(x);
        }
    }
    out
}

pub fn rescale_unit_rms(x: &mut [f64]) {
    let rms = (x.iter().map(|v| v * v).sum::<f64>() / x.len() as f64).sqrt();
    if rms > 0.0 {
        for v in x.iter_mut() {
            *v /= rms;
        }
    }
}

/// Burst amplitude for file `i` (zero before onset).
pub fn burst_amplitude(i: usize, onset: usize) -> f64 {
    if i < onset {
        0.0
    } else {
        (BURST_A0 * BURST_GROWTH.powi((i - onset) as i32)).min(BURST_CAP)
    }
}

/// The additive fault signal of an impulse-ramp file.
pub fn impulse_component(i: usize, onset: usize, n: usize) -> Vec<f64> {
    let amp = burst_amplitude(i, onset);
    let mut out = vec![0.0; n];
    if amp == 0.0 {
        return out;
    }
    let burst: Vec<f64> = (0..BURST_LEN)
        .map(|k| {
            let k = k as f64;
            amp * (-BURST_DECAY * k).exp() * (2.0 * std::f64::consts::PI * BURST_FREQ * k).sin()
        })
        .collect();
    for start in (0..n).step_by(BURST_PERIOD) {
        for (k, b) in burst.iter().enumerate() {
            if start + k < n {
                out[start + k] += b;
            }
        }
    }
    out
}

/// Signal of file `i` before noise and fault injection, rescaled to unit RMS.
pub fn clean_file(cfg: &SynthConfig, i: usize, rng: &mut StreamRng) -> Vec<f64> {
    let (a1, a2) = cfg.ar_coefs();
    let n = cfg.samples_per_file;
    let reset = cfg.regime == Regime::BoundaryReset && cfg.onset_file.is_some_and(|o| i >= o);
    let mut x = if reset {
        let mut x = Vec::with_capacity(n);
        while x.len() < n {
            let len = RESET_BLOCK.min(n - x.len());
            x.extend(ar2(rng, len, a1, a2));
        }
        x
    } else {
        ar2(rng, n, a1, a2)
    };
    rescale_unit_rms(&mut x);
    x
}

pub fn gen_file(cfg: &SynthConfig, i: usize) -> Vec<f64> {
    let mut rng = substream(cfg.seed, i as u64);
    let mut x = clean_file(cfg, i, &mut rng);
    for v in x.iter_mut() {
        *v += cfg.noise_std * std_normal(&mut rng);
    }
    if let (Regime::ImpulseRamp, Some(o)) = (cfg.regime, cfg.onset_file) {
        for (v, f) in x.iter_mut().zip(impulse_component(i, o, cfg.samples_per_file)) {
            *v += f;
        }
    }
    x
}

pub fn file_name(i: usize) -> String {
    format!("file_{i:04}.csv")
}

/// Generates the whole run. Each file draws from its own `(seed, index)` substream.
pub fn gen_run<T: Real>(cfg: &SynthConfig) -> Result<(Vec<Recording<T>>, Manifest), SynthError> {
    cfg.validate()?;
    let recs = (0..cfg.n_files)
        .map(|i| Recording {
            trajectory_id: i,
            samples: gen_file(cfg, i).into_iter().map(T::c).collect(),
            channel_id: 0,
        })
        .collect();
    let healthy_hi = match cfg.onset_true() {
        Some(o) => o - 1,
        None => cfg.n_files - 1,
    };
    let manifest = Manifest {
        files: (0..cfg.n_files).map(file_name).collect(),
        channel: 0,
        healthy_range: [0, healthy_hi],
        onset_true: cfg.onset_true(),
        config_digest: None,
    };
    Ok((recs, manifest))
}

/// One value per line, shortest round-trip formatting.
pub fn recording_csv<T: Real>(r: &Recording<T>) -> String {
    let mut s = String::with_capacity(r.samples.len() * 22);
    for v in &r.samples {
        s.push_str(&v.to_string());
        s.push('\n');
    }
    s
}

/// Writes one single-column CSV per recording; the manifest is left to the caller.
pub fn write_recordings<T: Real>(dir: &Path, recs: &[Recording<T>], manifest: &Manifest) -> Result<Vec<PathBuf>, SynthError> {
    let io = |path: &Path| {
        let path = path.to_path_buf();
        move |source| SynthError::Io { path, source }
    };
    std::fs::create_dir_all(dir).map_err(io(dir))?;
    let mut written = Vec::new();
    for (r, name) in recs.iter().zip(&manifest.files) {
        let path = dir.join(name);
        if let Err(e) = std::fs::write(&path, recording_csv(r)) {
            for p in &written {
                let _ = std::fs::remove_file(p);
            }
            return Err(io(&path)(e));
        }
        written.push(path);
    }
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(regime: Regime) -> SynthConfig {
        SynthConfig {
            n_files: 12,
            samples_per_file: 2048,
            onset_file: Some(6),
            regime,
            seed: 11,
            ..SynthConfig::default()
        }
    }

    #[test]
    fn manifest_echoes_onset() {
        let cfg = SynthConfig { n_files: 50, onset_file: Some(30), seed: 7, samples_per_file: 600, ..Default::default() };
        let (_, m) = gen_run::<f64>(&cfg).unwrap();
        assert_eq!(m.onset_true, Some(30));
        assert_eq!(m.healthy_range, [0, 29]);
        let h = SynthConfig { regime: Regime::HealthyOnly, ..cfg };
        let (_, m) = gen_run::<f64>(&h).unwrap();
        assert_eq!(m.onset_true, None);
        assert_eq!(m.healthy_range, [0, 49]);
    }

    #[test]
    fn bad_configs() {
        let base = SynthConfig::default();
        for cfg in [
            SynthConfig { ar_radius: 1.0, ..base.clone() },
            SynthConfig { onset_file: Some(60), ..base.clone() },
            SynthConfig { onset_file: None, ..base.clone() },
            SynthConfig { onset_file: Some(0), ..base.clone() },
            SynthConfig { noise_std: -1.0, ..base.clone() },
        ] {
            assert!(matches!(gen_run::<f64>(&cfg), Err(SynthError::BadConfig(_))), "{cfg:?}");
        }
    }

    #[test]
    fn deterministic_and_seed_sensitive() {
        let cfg = small(Regime::ImpulseRamp);
        let (a, _) = gen_run::<f64>(&cfg).unwrap();
        let (b, _) = gen_run::<f64>(&cfg).unwrap();
        assert_eq!(a, b);
        let (c, _) = gen_run::<f64>(&SynthConfig { seed: 12, ..cfg }).unwrap();
        assert_ne!(a[0].samples, c[0].samples);
    }

    #[test]
    fn clean_files_have_unit_rms() {
        for regime in [Regime::HealthyOnly, Regime::BoundaryReset] {
            let cfg = small(regime);
            for i in [0, 7] {
                let x = clean_file(&cfg, i, &mut substream(cfg.seed, i as u64));
                let rms = (x.iter().map(|v| v * v).sum::<f64>() / x.len() as f64).sqrt();
                assert!((rms - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn regimes_share_pre_onset_files() {
        let (h, _) = gen_run::<f64>(&small(Regime::ImpulseRamp)).unwrap();
        let (r, _) = gen_run::<f64>(&small(Regime::BoundaryReset)).unwrap();
        assert_eq!(h[5].samples, r[5].samples);
        assert_ne!(h[6].samples, r[6].samples);
    }

    #[test]
    fn burst_amplitude_schedule() {
        assert_eq!(burst_amplitude(29, 30), 0.0);
        assert_eq!(burst_amplitude(30, 30), 0.2);
        assert!((burst_amplitude(31, 30) - 0.23).abs() < 1e-12);
        assert_eq!(burst_amplitude(59, 30), 5.0);
        let c = impulse_component(30, 30, 1024);
        assert_eq!(c[0], 0.0);
        let want = 0.2 * (-0.2f64).exp() * (2.0 * std::f64::consts::PI * 0.35).sin();
        assert!((c[1] - want).abs() < 1e-15);
        assert!((c[513] - want).abs() < 1e-15);
        assert!(c[32..512].iter().all(|&v| v == 0.0));
    }

    #[test]
    fn fault_amplitude_nondecreasing_until_cap() {
        let n = 8192;
        let mut prev = 0.0;
        for i in 30..60 {
            let c = impulse_component(i, 30, n);
            let m = c.iter().map(|v| v.abs()).sum::<f64>() / n as f64;
            if burst_amplitude(i, 30) < BURST_CAP {
                assert!(m > prev, "file {i}");
            } else {
                assert!(m >= prev);
            }
            prev = m;
        }
    }

    fn window_rms(x: &[f64]) -> Vec<f64> {
        x.chunks_exact(256)
            .map(|w| (w.iter().map(|v| v * v).sum::<f64>() / 256.0).sqrt())
            .collect()
    }

    fn ks_stat(a: &[f64], b: &[f64]) -> f64 {
        let (mut a, mut b) = (a.to_vec(), b.to_vec());
        a.sort_by(f64::total_cmp);
        b.sort_by(f64::total_cmp);
        let (mut i, mut j, mut d) = (0, 0, 0.0f64);
        while i < a.len() && j < b.len() {
            let x = a[i].min(b[j]);
            while i < a.len() && a[i] <= x {
                i += 1;
            }
            while j < b.len() && b[j] <= x {
                j += 1;
            }
            d = d.max((i as f64 / a.len() as f64 - j as f64 / b.len() as f64).abs());
        }
        d
    }

    #[test]
    fn ks_stat_sanity() {
        assert_eq!(ks_stat(&[1.0, 2.0], &[1.0, 2.0]), 0.0);
        assert_eq!(ks_stat(&[1.0, 2.0], &[3.0, 4.0]), 1.0);
    }

    #[test]
    fn reset_windows_match_healthy_marginals() {
        let cfg = SynthConfig {
            n_files: 80,
            onset_file: Some(40),
            regime: Regime::BoundaryReset,
            seed: 11,
            ..SynthConfig::default()
        };
        let (mut healthy, mut post) = (Vec::new(), Vec::new());
        for i in 0..cfg.n_files {
            let w = window_rms(&gen_file(&cfg, i));
            if i < 40 { healthy.extend(w) } else { post.extend(w) }
        }
        assert!(healthy.len() >= 1000 && post.len() >= 1000);
        let mh = healthy.iter().sum::<f64>() / healthy.len() as f64;
        let mp = post.iter().sum::<f64>() / post.len() as f64;
        assert!((mp - mh).abs() < 0.1 * mh, "{mp} vs {mh}");
        let ks = ks_stat(&healthy[..500], &post[..500]);
        assert!(ks < 0.2, "KS {ks}");
    }
}
