use airlfd_cli::main_with;
use std::path::Path;

fn run(args: &[&str], env: &[(&str, &str)]) -> i32 {
    let mut full = vec!["airlfd"];
    full.extend_from_slice(args);
    let env = env.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect();
    main_with(full, env)
}

const SMALL: &[&str] = &[
    "--n-files", "10", "--onset-file", "6", "--samples-per-file", "1024", "--total-steps", "50",
    "--batch-size", "64", "--ae-steps", "20", "--static-steps", "20", "--iforest-trees", "10",
];

fn with_small<'a>(cmd: &'a str, out: &'a str, extra: &[&'a str]) -> Vec<&'a str> {
    let mut v = vec![cmd, "--out-dir", out];
    v.extend_from_slice(SMALL);
    v.extend_from_slice(extra);
    v
}

#[test]
fn help_and_bad_usage_exit_codes() {
    assert_eq!(run(&["--help"], &[]), 0);
    assert_eq!(run(&["nonsense"], &[]), 1);
    assert_eq!(run(&["synth", "--gamm", "1"], &[]), 1);
    assert_eq!(run(&["synth", "--gamma", "\"x\""], &[]), 1);
}

#[test]
fn unknown_env_key_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    assert_eq!(run(&["synth", "--out-dir", out], &[("AIRLFD_NOPE", "1")]), 1);
    assert!(!dir.path().join("data").exists());
}

#[test]
fn missing_inputs_are_data_errors() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    assert_eq!(run(&["detect", "--out-dir", out], &[]), 2);
    assert_eq!(run(&["train", "--out-dir", out], &[]), 2);
    assert_eq!(run(&["eval", "--out-dir", out], &[]), 2);
}

#[test]
fn full_command_chain() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    for cmd in ["synth", "train", "score", "detect", "eval", "plot"] {
        assert_eq!(run(&with_small(cmd, out, &[]), &[]), 0, "{cmd}");
    }
    for model in ["iforest", "ae", "static"] {
        for cmd in ["baseline", "detect", "eval"] {
            assert_eq!(run(&with_small(cmd, out, &["--model", model]), &[]), 0, "{cmd} {model}");
        }
    }
    assert_eq!(run(&with_small("score", out, &["--model", "ae"]), &[]), 1);
    let d = Path::new(out);
    for f in ["model.json", "scores_airl.csv", "detect_airl.json", "report_airl.json", "plot_airl.svg", "report_static.json"] {
        assert!(d.join(f).exists(), "{f}");
    }
    let report: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(d.join("report_airl.json")).unwrap()).unwrap();
    assert_eq!(report["onset_true"], 6);
    let digest = report["config_digest"].as_str().unwrap();
    let csv = std::fs::read_to_string(d.join("scores_airl.csv")).unwrap();
    assert!(csv.starts_with(&format!("# config_digest={digest}")));
}

#[test]
fn env_overrides_file_and_flags_override_env() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let cfg = dir.path().join("run.json");
    std::fs::write(&cfg, r#"{"n_files": 9, "samples_per_file": 512, "onset_file": 4}"#).unwrap();
    let c = cfg.to_str().unwrap();
    assert_eq!(run(&["synth", "-c", c, "--out-dir", out], &[("AIRLFD_N_FILES", "7")]), 0);
    let m: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("data/manifest.json")).unwrap()).unwrap();
    assert_eq!(m["files"].as_array().unwrap().len(), 7);
    assert_eq!(run(&["synth", "-c", c, "--out-dir", out, "--n-files", "5"], &[("AIRLFD_N_FILES", "7")]), 0);
    let m: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("data/manifest.json")).unwrap()).unwrap();
    assert_eq!(m["files"].as_array().unwrap().len(), 5);
}
