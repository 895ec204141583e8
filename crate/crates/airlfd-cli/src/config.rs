//! Flat run configuration: defaults < JSON file < `AIRLFD_*` env < `--flags`.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use airlfd::airlcore::TrainConfig;
use airlfd::baselines::{AeConfig, IForestConfig, StaticConfig};
use airlfd::detector::ThresholdMethod;
use airlfd::signalio::{FeatureConfig, FeatureMode};
use airlfd::synthrig::{Regime, SynthConfig};
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};
use sha2::{Digest, Sha256};
use thiserror::Error;

pub const ENV_PREFIX: &str = "AIRLFD_";

#[derive(Debug, Error, PartialEq)]
pub enum ConfigError {
    #[error("unknown config key {0:?}")]
    UnknownKey(String),
    #[error("config key {key:?} expects {expected}")]
    TypeError { key: String, expected: String },
    #[error("cannot read config {path}: {msg}")]
    Read { path: PathBuf, msg: String },
    #[error("config is not a JSON object: {0}")]
    Parse(String),
    #[error("missing value for flag --{0}")]
    MissingValue(String),
    #[error("unexpected argument {0:?} (overrides are --key value)")]
    BadFlag(String),
    #[error("invalid config: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModelKind {
    Airl,
    IForest,
    Ae,
    Static,
}

impl ModelKind {
    pub fn name(self) -> &'static str {
        match self {
            ModelKind::Airl => "airl",
            ModelKind::IForest => "iforest",
            ModelKind::Ae => "ae",
            ModelKind::Static => "static",
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ModelKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "airl" => Ok(ModelKind::Airl),
            "iforest" => Ok(ModelKind::IForest),
            "ae" => Ok(ModelKind::Ae),
            "static" => Ok(ModelKind::Static),
            _ => Err(format!("unknown model {s:?}")),
        }
    }
}

impl Serialize for ModelKind {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(self.name())
    }
}

impl<'de> Deserialize<'de> for ModelKind {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        String::deserialize(d)?.parse().map_err(serde::de::Error::custom)
    }
}

macro_rules! run_config {
    ($( $(#[$doc:meta])* $name:ident : $ty:ty = $default:expr, $expect:literal; )*) => {
        /// Every tunable of every command, flat.
        #[derive(Debug, Clone, PartialEq, Serialize)]
        pub struct RunConfig {
            $( $(#[$doc])* pub $name: $ty, )*
        }

        impl Default for RunConfig {
            fn default() -> Self {
                RunConfig { $( $name: $default, )* }
            }
        }

        impl RunConfig {
            pub const KEYS: &'static [&'static str] = &[$( stringify!($name), )*];

            /// Sets one field from a JSON value.
            pub fn set_value(&mut self, key: &str, v: Value) -> Result<(), ConfigError> {
                match key {
                    $( stringify!($name) => {
                        self.$name = serde_json::from_value(v).map_err(|_| ConfigError::TypeError {
                            key: key.to_string(),
                            expected: $expect.to_string(),
                        })?;
                    } )*
                    _ => return Err(ConfigError::UnknownKey(key.to_string())),
                }
                Ok(())
            }
        }
    };
}

run_config! {
    // synthetic data
    n_files: usize = 60, "a non-negative integer";
    samples_per_file: usize = 8192, "a non-negative integer";
    onset_file: Option<usize> = Some(30), "a non-negative integer or null";
    regime: Regime = Regime::ImpulseRamp, "one of \"healthy-only\", \"impulse-ramp\", \"boundary-reset\"";
    ar_radius: f64 = 0.95, "a number";
    ar_angle: f64 = 2.0 * std::f64::consts::PI * 0.1, "a number";
    noise_std: f64 = 0.05, "a number";
    seed: u64 = 0, "a non-negative integer";
    // windowing
    channel: usize = 0, "a non-negative integer";
    win_len: usize = 8, "a non-negative integer";
    stride: usize = 8, "a non-negative integer";
    feature_mode: FeatureMode = FeatureMode::Raw, "one of \"raw\", \"decimate(k)\", \"stats\"";
    // adversarial training
    total_steps: usize = 5000, "a non-negative integer";
    batch_size: usize = 256, "a non-negative integer";
    disc_steps: usize = 1, "a non-negative integer";
    gen_steps: usize = 0, "a non-negative integer";
    gamma: f64 = 0.9, "a number";
    lr_disc: f64 = 1e-3, "a number";
    lr_policy: f64 = 3e-4, "a number";
    logit_clamp: f64 = 40.0, "a number";
    log_std_init: f64 = 0.0, "a number";
    hidden: usize = 64, "a non-negative integer";
    /// Fraction of healthy trajectories held out for threshold calibration.
    val_fraction: f64 = 0.2, "a number";
    // detection
    threshold_method: ThresholdMethod = ThresholdMethod::SigmaRule, "one of \"sigma_rule\", \"otsu\", \"kmeans2\"";
    sigma_k: f64 = 3.0, "a number";
    persistence: usize = 3, "a non-negative integer";
    // baselines
    iforest_psi: usize = 256, "a non-negative integer";
    iforest_trees: usize = 100, "a non-negative integer";
    ae_hidden: usize = 32, "a non-negative integer";
    ae_latent: usize = 8, "a non-negative integer";
    ae_steps: usize = 3000, "a non-negative integer";
    ae_batch: usize = 128, "a non-negative integer";
    ae_lr: f64 = 1e-3, "a number";
    static_hidden: usize = 64, "a non-negative integer";
    static_noise_dim: usize = 16, "a non-negative integer";
    static_steps: usize = 3000, "a non-negative integer";
    static_batch: usize = 128, "a non-negative integer";
    model: ModelKind = ModelKind::Airl, "one of \"airl\", \"iforest\", \"ae\", \"static\"";
    // paths (not part of the digest)
    out_dir: String = "out".to_string(), "a string";
    /// Defaults to `<out_dir>/data/manifest.json`.
    manifest: Option<String> = None, "a string or null";
    /// Defaults to `<out_dir>/model.json`.
    model_path: Option<String> = None, "a string or null";
}

const PATH_KEYS: [&str; 3] = ["out_dir", "manifest", "model_path"];

/// `--win-len` -> `win_len`.
pub fn flag_to_key(flag: &str) -> String {
    flag.replace('-', "_")
}

/// JSON if it parses as the field's type, otherwise the raw string.
fn set_from_str(cfg: &mut RunConfig, key: &str, raw: &str) -> Result<(), ConfigError> {
    if let Ok(v) = serde_json::from_str::<Value>(raw) {
        if cfg.set_value(key, v).is_ok() {
            return Ok(());
        }
    }
    cfg.set_value(key, Value::String(raw.to_string()))
}

/// Splits `--key value` / `--key=value` pairs.
pub fn parse_flag_pairs(args: &[String]) -> Result<Vec<(String, String)>, ConfigError> {
    let mut out = Vec::new();
    let mut it = args.iter();
    while let Some(a) = it.next() {
        let Some(body) = a.strip_prefix("--") else {
            return Err(ConfigError::BadFlag(a.clone()));
        };
        match body.split_once('=') {
            Some((k, v)) => out.push((k.to_string(), v.to_string())),
            None => {
                let v = it.next().ok_or_else(|| ConfigError::MissingValue(body.to_string()))?;
                out.push((body.to_string(), v.clone()));
            }
        }
    }
    Ok(out)
}

impl RunConfig {
    /// Overlays a JSON object.
    pub fn apply_json(&mut self, text: &str) -> Result<(), ConfigError> {
        if text.trim().is_empty() {
            return Ok(());
        }
        let v: Value = serde_json::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))?;
        let Value::Object(map) = v else {
            return Err(ConfigError::Parse("top level must be an object".into()));
        };
        for (k, v) in map {
            self.set_value(&k, v)?;
        }
        Ok(())
    }

    pub fn apply_file(&mut self, path: &Path) -> Result<(), ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError::Read {
            path: path.to_path_buf(),
            msg: e.to_string(),
        })?;
        self.apply_json(&text)
    }

    /// Applies `AIRLFD_<KEY>` variables; other variables are ignored.
    pub fn apply_env<I: IntoIterator<Item = (String, String)>>(&mut self, vars: I) -> Result<(), ConfigError> {
        let mut vars: Vec<(String, String)> = vars
            .into_iter()
            .filter(|(k, _)| k.starts_with(ENV_PREFIX))
            .collect();
        vars.sort();
        for (name, v) in vars {
            let key = name[ENV_PREFIX.len()..].to_ascii_lowercase();
            if !Self::KEYS.contains(&key.as_str()) {
                return Err(ConfigError::UnknownKey(name));
            }
            set_from_str(self, &key, &v)?;
        }
        Ok(())
    }

    pub fn apply_flags(&mut self, pairs: &[(String, String)]) -> Result<(), ConfigError> {
        for (flag, v) in pairs {
            set_from_str(self, &flag_to_key(flag), v)?;
        }
        Ok(())
    }

    /// Full resolution with the documented precedence, then validation.
    pub fn resolve<I>(file: Option<&Path>, env: I, flags: &[String]) -> Result<RunConfig, ConfigError>
    where
        I: IntoIterator<Item = (String, String)>,
    {
        let mut cfg = RunConfig::default();
        if let Some(p) = file {
            cfg.apply_file(p)?;
        }
        cfg.apply_env(env)?;
        cfg.apply_flags(&parse_flag_pairs(flags)?)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let bad = |m: String| Err(ConfigError::Invalid(m));
        self.synth_config().validate().or_else(|e| bad(e.to_string()))?;
        self.train_config().validate().or_else(|e| bad(e.to_string()))?;
        if self.win_len < 8 || self.stride == 0 {
            return bad("win_len must be >= 8 and stride >= 1".into());
        }
        if !(self.val_fraction > 0.0 && self.val_fraction < 1.0) {
            return bad("val_fraction must lie in (0, 1)".into());
        }
        if self.persistence == 0 {
            return bad("persistence must be >= 1".into());
        }
        if self.sigma_k.is_nan() || self.sigma_k < 0.0 {
            return bad("sigma_k must be >= 0".into());
        }
        Ok(())
    }

    /// Canonical JSON (sorted keys, no paths).
    pub fn canonical_json(&self) -> String {
        let Value::Object(map) = serde_json::to_value(self).expect("config serializes") else {
            unreachable!()
        };
        let sorted: Map<String, Value> = map
            .into_iter()
            .filter(|(k, _)| !PATH_KEYS.contains(&k.as_str()))
            .collect::<std::collections::BTreeMap<_, _>>()
            .into_iter()
            .collect();
        serde_json::to_string(&Value::Object(sorted)).expect("config serializes")
    }

    /// Hex sha256 of [`RunConfig::canonical_json`].
    pub fn digest(&self) -> String {
        Sha256::digest(self.canonical_json().as_bytes())
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect()
    }

    pub fn out_dir(&self) -> PathBuf {
        PathBuf::from(&self.out_dir)
    }

    pub fn data_dir(&self) -> PathBuf {
        self.out_dir().join("data")
    }

    pub fn manifest_path(&self) -> PathBuf {
        self.manifest
            .as_ref()
            .map(PathBuf::from)
            .unwrap_or_else(|| self.data_dir().join("manifest.json"))
    }

    pub fn model_path(&self) -> PathBuf {
        self.model_path
            .as_ref()
            .map(PathBuf::from)
            .unwrap_or_else(|| self.out_dir().join("model.json"))
    }

    pub fn synth_config(&self) -> SynthConfig {
        SynthConfig {
            n_files: self.n_files,
            samples_per_file: self.samples_per_file,
            onset_file: self.onset_file,
            regime: self.regime,
            ar_radius: self.ar_radius,
            ar_angle: self.ar_angle,
            noise_std: self.noise_std,
            seed: self.seed,
        }
    }

    pub fn feature_config(&self) -> FeatureConfig {
        FeatureConfig {
            win_len: self.win_len,
            stride: self.stride,
            mode: self.feature_mode,
        }
    }

    pub fn train_config(&self) -> TrainConfig<f64> {
        TrainConfig {
            total_steps: self.total_steps,
            batch_size: self.batch_size,
            disc_steps_per_round: self.disc_steps,
            gen_steps_per_round: self.gen_steps,
            gamma: self.gamma,
            lr_disc: self.lr_disc,
            lr_policy: self.lr_policy,
            logit_clamp: self.logit_clamp,
            log_std_init: self.log_std_init,
            hidden: self.hidden,
            seed: self.seed,
        }
    }

    pub fn iforest_config(&self) -> IForestConfig {
        IForestConfig {
            psi: self.iforest_psi,
            n_trees: self.iforest_trees,
            seed: self.seed,
        }
    }

    pub fn ae_config(&self) -> AeConfig {
        AeConfig {
            hidden: self.ae_hidden,
            latent: self.ae_latent,
            steps: self.ae_steps,
            batch: self.ae_batch,
            lr: self.ae_lr,
            seed: self.seed,
        }
    }

    /// Same optimizer settings as the adversarial trainer.
    pub fn static_config(&self) -> StaticConfig {
        StaticConfig {
            hidden: self.static_hidden,
            noise_dim: self.static_noise_dim,
            steps: self.static_steps,
            batch: self.static_batch,
            lr_disc: self.lr_disc,
            lr_gen: self.lr_policy,
            seed: self.seed,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn no_env() -> Vec<(String, String)> {
        Vec::new()
    }

    fn s(xs: &[&str]) -> Vec<String> {
        xs.iter().map(|x| x.to_string()).collect()
    }

    #[test]
    fn empty_config_is_defaults() {
        let mut c = RunConfig::default();
        c.apply_json("{}").unwrap();
        c.apply_json("  \n").unwrap();
        assert_eq!(c, RunConfig::default());
        assert_eq!(c.gamma, 0.9);
        assert_eq!(c.persistence, 3);
        assert_eq!(c.sigma_k, 3.0);
        assert_eq!(c.win_len, 8);
        assert!(c.validate().is_ok());
    }

    #[test]
    fn unknown_and_mistyped_keys() {
        let mut c = RunConfig::default();
        assert_eq!(c.apply_json(r#"{"gamm": 0.9}"#), Err(ConfigError::UnknownKey("gamm".into())));
        let e = c.apply_json(r#"{"win_len": "wide"}"#).unwrap_err();
        assert_eq!(
            e,
            ConfigError::TypeError {
                key: "win_len".into(),
                expected: "a non-negative integer".into()
            }
        );
        assert!(matches!(c.apply_json(r#"{"regime": "sideways"}"#), Err(ConfigError::TypeError { key, .. }) if key == "regime"));
        assert!(matches!(c.apply_json("[1]"), Err(ConfigError::Parse(_))));
    }

    #[test]
    fn precedence_file_env_flags() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("c.json");
        std::fs::write(&p, r#"{"gamma": 0.9, "seed": 4, "hidden": 16}"#).unwrap();
        let env = vec![
            ("AIRLFD_SEED".to_string(), "5".to_string()),
            ("AIRLFD_HIDDEN".to_string(), "20".to_string()),
            ("PATH".to_string(), "/bin".to_string()),
        ];
        let c = RunConfig::resolve(Some(&p), env, &s(&["--gamma", "0.5", "--hidden=24"])).unwrap();
        assert_eq!((c.gamma, c.seed, c.hidden), (0.5, 5, 24));
        let e = RunConfig::resolve(None, vec![("AIRLFD_GAMM".to_string(), "1".to_string())], &[]).unwrap_err();
        assert_eq!(e, ConfigError::UnknownKey("AIRLFD_GAMM".into()));
    }

    #[test]
    fn flag_values_parse_by_field_type() {
        let c = RunConfig::resolve(
            None,
            no_env(),
            &s(&["--regime", "boundary-reset", "--onset-file", "null", "--regime", "healthy-only", "--out-dir", "123", "--feature-mode", "decimate(4)", "--threshold-method", "otsu", "--model", "static"]),
        )
        .unwrap();
        assert_eq!(c.regime, Regime::HealthyOnly);
        assert_eq!(c.onset_file, None);
        assert_eq!(c.out_dir, "123");
        assert_eq!(c.feature_mode, FeatureMode::Decimate(4));
        assert_eq!(c.threshold_method, ThresholdMethod::Otsu);
        assert_eq!(c.model, ModelKind::Static);
        assert_eq!(RunConfig::resolve(None, no_env(), &s(&["--gamma"])), Err(ConfigError::MissingValue("gamma".into())));
        assert_eq!(RunConfig::resolve(None, no_env(), &s(&["gamma"])), Err(ConfigError::BadFlag("gamma".into())));
        assert!(matches!(RunConfig::resolve(None, no_env(), &s(&["--gamma", "1.5"])), Err(ConfigError::Invalid(_))));
    }

    #[test]
    fn digest_ignores_paths_and_tracks_values() {
        let a = RunConfig::default();
        let mut b = a.clone();
        b.out_dir = "elsewhere".into();
        b.model_path = Some("m.json".into());
        assert_eq!(a.digest(), b.digest());
        b.gamma = 0.5;
        assert_ne!(a.digest(), b.digest());
        assert_eq!(a.digest().len(), 64);
        assert!(!a.canonical_json().contains("out_dir"));
    }

    #[test]
    fn every_key_round_trips_through_json() {
        let c = RunConfig::default();
        let Value::Object(map) = serde_json::to_value(&c).unwrap() else { panic!() };
        assert_eq!(map.len(), RunConfig::KEYS.len());
        let mut d = RunConfig::default();
        d.apply_json(&serde_json::to_string(&map).unwrap()).unwrap();
        assert_eq!(c, d);
    }
}
