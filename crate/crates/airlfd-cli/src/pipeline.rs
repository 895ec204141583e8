//! The protocol end to end, without touching disk: split healthy files,
//! fit on the training part, score everything, threshold, detect, evaluate.

use airlfd::airlcore::{train_airl, AirlModel, TrainHistory};
use airlfd::baselines::{ae_fit, iforest_fit, score_set_with, set_windows, static_fit, WindowScorer};
use airlfd::detector::{
    detect_onset, kmeans2_threshold, otsu_threshold, score_set, sigma_threshold, OnsetDecision, ScoreSeries,
    ThresholdMethod, ThresholdSpec,
};
use airlfd::evalkit::{evaluate_run, DetectionReport};
use airlfd::rng::{self, substream, STREAM_SPLIT};
use airlfd::signalio::{fit_normalizer, transitions_for, Manifest, Normalizer, Recording, TransitionSet};
use airlfd::synthrig::gen_run;

use crate::config::{ModelKind, RunConfig};
use crate::error::{CliError, Result};

pub struct Dataset {
    pub recordings: Vec<Recording<f64>>,
    pub manifest: Manifest,
}

impl Dataset {
    pub fn onset_true(&self) -> Option<usize> {
        self.manifest.onset_true
    }

    fn select(&self, ids: &[usize]) -> Vec<&Recording<f64>> {
        ids.iter().map(|&i| &self.recordings[i]).collect()
    }
}

pub fn synthesize(cfg: &RunConfig) -> Result<Dataset> {
    let (recordings, mut manifest) = gen_run::<f64>(&cfg.synth_config())?;
    manifest.config_digest = Some(cfg.digest());
    Ok(Dataset { recordings, manifest })
}

/// Loads the manifest named by the config; file paths are relative to it.
pub fn load_dataset(cfg: &RunConfig) -> Result<Dataset> {
    let path = cfg.manifest_path();
    let manifest = Manifest::load(&path)?;
    let base = path.parent().map(|p| p.to_path_buf()).unwrap_or_default();
    let recordings = manifest.load_recordings(&base)?;
    Ok(Dataset { recordings, manifest })
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Split {
    pub train: Vec<usize>,
    pub validation: Vec<usize>,
}

/// Seeded permutation of the healthy ids; the first `round(frac * n)`
/// (at least 2) become validation.
pub fn split_healthy(healthy: &[usize], frac: f64, seed: u64) -> Result<Split> {
    let n = healthy.len();
    if n < 3 {
        return Err(CliError::Data(format!("need at least 3 healthy files, have {n}")));
    }
    let n_val = ((frac * n as f64).round() as usize).clamp(2, n - 1);
    let mut perm = healthy.to_vec();
    rng::shuffle(&mut perm, &mut substream(seed, STREAM_SPLIT));
    let mut validation = perm[..n_val].to_vec();
    let mut train = perm[n_val..].to_vec();
    validation.sort_unstable();
    train.sort_unstable();
    Ok(Split { train, validation })
}

pub fn split_for(cfg: &RunConfig, ds: &Dataset) -> Result<Split> {
    split_healthy(&ds.manifest.healthy_ids(), cfg.val_fraction, cfg.seed)
}

pub struct Prepared {
    pub split: Split,
    pub normalizer: Normalizer<f64>,
    pub train: TransitionSet<f64>,
}

pub fn prepare(cfg: &RunConfig, ds: &Dataset) -> Result<Prepared> {
    let split = split_for(cfg, ds)?;
    let train_recs = ds.select(&split.train);
    let normalizer = fit_normalizer(&train_recs.iter().map(|r| (*r).clone()).collect::<Vec<_>>())?;
    let train = transitions_for(&train_recs, &normalizer, &cfg.feature_config())?;
    Ok(Prepared {
        split,
        normalizer,
        train,
    })
}

pub fn train_model(cfg: &RunConfig, ds: &Dataset) -> Result<(AirlModel<f64>, TrainHistory<f64>)> {
    let prep = prepare(cfg, ds)?;
    let (mut model, hist) = train_airl(&prep.train, prep.normalizer, cfg.feature_config(), &cfg.train_config())?;
    model.meta.validation_ids = prep.split.validation;
    model.meta.config_digest = Some(cfg.digest());
    Ok((model, hist))
}

pub fn all_transitions(ds: &Dataset, norm: &Normalizer<f64>, cfg: &airlfd::signalio::FeatureConfig) -> Result<TransitionSet<f64>> {
    let all: Vec<&Recording<f64>> = ds.recordings.iter().collect();
    Ok(transitions_for(&all, norm, cfg)?)
}

pub fn airl_scores(model: &AirlModel<f64>, ds: &Dataset) -> Result<ScoreSeries<f64>> {
    let set = all_transitions(ds, &model.normalizer, &model.feature)?;
    Ok(score_set(model, &set)?)
}

/// Fits the selected baseline on the training split and scores every file.
/// Returns the series and the validation ids.
pub fn baseline_scores(cfg: &RunConfig, kind: ModelKind, ds: &Dataset) -> Result<(ScoreSeries<f64>, Vec<usize>)> {
    let prep = prepare(cfg, ds)?;
    let windows = set_windows(&prep.train);
    let scorer: Box<dyn WindowScorer<f64>> = match kind {
        ModelKind::IForest => Box::new(iforest_fit(&windows, &cfg.iforest_config())?),
        ModelKind::Ae => Box::new(ae_fit(&windows, &cfg.ae_config())?),
        ModelKind::Static => Box::new(static_fit(&windows, &cfg.static_config())?),
        ModelKind::Airl => return Err(CliError::Usage("airl is not a baseline; use train + score".into())),
    };
    let set = all_transitions(ds, &prep.normalizer, &cfg.feature_config())?;
    Ok((score_set_with(scorer.as_ref(), &set)?, prep.split.validation))
}

pub fn compute_threshold(cfg: &RunConfig, series: &ScoreSeries<f64>, validation: &[usize]) -> Result<ThresholdSpec<f64>> {
    let spec = match cfg.threshold_method {
        ThresholdMethod::SigmaRule => {
            let val: Vec<f64> = validation.iter().filter_map(|&i| series.score_of(i)).collect();
            sigma_threshold(&val, cfg.sigma_k)?
        }
        ThresholdMethod::Otsu => otsu_threshold(&series.scores())?,
        ThresholdMethod::Kmeans2 => kmeans2_threshold(&series.scores())?,
    };
    if !spec.value.is_finite() {
        return Err(CliError::Numeric(format!("non-finite threshold {}", spec.value)));
    }
    Ok(spec)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub series: ScoreSeries<f64>,
    pub threshold: ThresholdSpec<f64>,
    pub decision: OnsetDecision<f64>,
    pub report: DetectionReport<f64>,
}

pub fn evaluate(cfg: &RunConfig, series: ScoreSeries<f64>, validation: &[usize], onset_true: Option<usize>) -> Result<Outcome> {
    let threshold = compute_threshold(cfg, &series, validation)?;
    let decision = detect_onset(&series, threshold.value, cfg.persistence)?;
    let report = evaluate_run(&series, &decision, onset_true)?;
    Ok(Outcome {
        series,
        threshold,
        decision,
        report,
    })
}

/// Fit, score and evaluate one model on an in-memory dataset.
pub fn run_model(cfg: &RunConfig, kind: ModelKind, ds: &Dataset) -> Result<Outcome> {
    let (series, validation) = match kind {
        ModelKind::Airl => {
            let (model, _) = train_model(cfg, ds)?;
            (airl_scores(&model, ds)?, model.meta.validation_ids)
        }
        _ => baseline_scores(cfg, kind, ds)?,
    };
    evaluate(cfg, series, &validation, ds.onset_true())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn split_is_seeded_disjoint_and_sized() {
        let healthy: Vec<usize> = (0..30).collect();
        let a = split_healthy(&healthy, 0.2, 0).unwrap();
        assert_eq!(a, split_healthy(&healthy, 0.2, 0).unwrap());
        assert_ne!(a, split_healthy(&healthy, 0.2, 1).unwrap());
        assert_eq!(a.validation.len(), 6);
        assert_eq!(a.train.len(), 24);
        assert!(a.validation.iter().all(|v| !a.train.contains(v)));
        assert_eq!(split_healthy(&[0, 1, 2], 0.2, 0).unwrap().validation.len(), 2);
        assert!(split_healthy(&[0, 1], 0.2, 0).is_err());
    }

    #[test]
    fn small_run_end_to_end() {
        let cfg = RunConfig {
            n_files: 12,
            samples_per_file: 1024,
            onset_file: Some(8),
            total_steps: 50,
            batch_size: 64,
            iforest_psi: 64,
            iforest_trees: 10,
            ae_steps: 20,
            static_steps: 20,
            ..RunConfig::default()
        };
        let ds = synthesize(&cfg).unwrap();
        for kind in [ModelKind::Airl, ModelKind::IForest, ModelKind::Ae, ModelKind::Static] {
            let out = run_model(&cfg, kind, &ds).unwrap();
            assert_eq!(out.series.entries.len(), 12);
            assert_eq!(out.report.onset_true, Some(8));
            assert!(out.threshold.value.is_finite());
        }
    }
}
