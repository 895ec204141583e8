use airlfd::airlcore::{disc_prob, train_airl, TrainConfig};
use airlfd::detector::{detect_onset, score_set, sigma_threshold};
use airlfd::signalio::{fit_normalizer, transitions_for, FeatureConfig, FeatureMode, Recording, TransitionSet};
use airlfd::synthrig::{gen_run, Regime, SynthConfig};
use airlfd::Real;

const FEATURE: FeatureConfig = FeatureConfig {
    win_len: 8,
    stride: 8,
    mode: FeatureMode::Raw,
};

fn synth(seed: u64) -> Vec<Recording<f64>> {
    let cfg = SynthConfig {
        n_files: 40,
        samples_per_file: 4096,
        onset_file: Some(12),
        regime: Regime::ImpulseRamp,
        seed,
        ..Default::default()
    };
    gen_run::<f64>(&cfg).unwrap().0
}

fn subset<T>(recs: &[Recording<T>], ids: impl Iterator<Item = usize>) -> Vec<&Recording<T>> {
    ids.map(|i| &recs[i]).collect()
}

fn mean_prob<T: Real>(model: &airlfd::airlcore::AirlModel<T>, set: &TransitionSet<T>) -> f64 {
    let ps: Vec<f64> = set
        .iter()
        .map(|t| disc_prob(model, &t.s, &t.a, &t.s_next).unwrap().to_f64_lossy())
        .collect();
    ps.iter().sum::<f64>() / ps.len() as f64
}

#[test]
fn held_out_healthy_looks_more_expert_than_faulty() {
    for seed in 0..3 {
        let recs = synth(seed);
        let train: Vec<Recording<f64>> = recs[..9].to_vec();
        let norm = fit_normalizer(&train).unwrap();
        let expert = transitions_for(&subset(&recs, 0..9), &norm, &FEATURE).unwrap();
        let held = transitions_for(&subset(&recs, 9..12), &norm, &FEATURE).unwrap();
        let faulty = transitions_for(&subset(&recs, 12..40), &norm, &FEATURE).unwrap();
        let cfg = TrainConfig {
            total_steps: 2000,
            seed,
            ..TrainConfig::default()
        };
        let (model, hist) = train_airl(&expert, norm, FEATURE, &cfg).unwrap();
        assert!(hist.disc_loss.iter().all(|l| l.is_finite()));
        let (h, f) = (mean_prob(&model, &held), mean_prob(&model, &faulty));
        assert!(h > f, "seed {seed}: healthy {h} vs faulty {f}");
    }
}

#[test]
fn f32_pipeline_detects_late_fault() {
    let cfg = SynthConfig {
        n_files: 36,
        samples_per_file: 2048,
        onset_file: Some(10),
        seed: 4,
        ..Default::default()
    };
    let (recs, manifest) = gen_run::<f32>(&cfg).unwrap();
    assert_eq!(manifest.onset_true, Some(10));
    let norm = fit_normalizer(&recs[..7]).unwrap();
    let expert = transitions_for(&subset(&recs, 0..7), &norm, &FEATURE).unwrap();
    let tcfg = TrainConfig::<f32> {
        total_steps: 800,
        seed: 4,
        ..TrainConfig::default()
    };
    let (model, _) = train_airl(&expert, norm, FEATURE, &tcfg).unwrap();
    let all = transitions_for(&subset(&recs, 0..36), &model.normalizer, &FEATURE).unwrap();
    let series = score_set(&model, &all).unwrap();
    let healthy: Vec<f32> = (7..10).map(|i| series.score_of(i).unwrap()).collect();
    let thr = sigma_threshold(&healthy, 3.0f32).unwrap();
    let decision = detect_onset(&series, thr.value, 3).unwrap();
    let onset = decision.onset.expect("fault at amplitude cap should be detected");
    assert!(onset >= 10, "onset {onset} before the fault");
}
