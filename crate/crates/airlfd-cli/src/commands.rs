use std::path::PathBuf;

use airlfd::airlcore::{load_model, model_to_json};
use airlfd::detector::{detect_onset, OnsetDecision};
use airlfd::evalkit::{evaluate_run, RunReport};
use airlfd::real::mean;
use airlfd::signalio::Manifest;
use airlfd::synthrig::recording_csv;

use crate::config::{ModelKind, RunConfig};
use crate::error::{CliError, Result};
use crate::files::{
    detect_name, plot_name, read_json, read_scores, report_name, scores_csv, scores_name, to_json, DetectFile, Outputs,
};
use crate::gradcheck::run_gradcheck;
use crate::pipeline;
use crate::plot::{render_svg, PlotSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Synth,
    Train,
    Score,
    Detect,
    Baseline,
    Eval,
    Gradcheck,
    Plot,
}

/// Runs one command; on failure every file it wrote is removed again.
pub fn run(cmd: Command, cfg: &RunConfig) -> Result<Vec<PathBuf>> {
    let mut out = Outputs::default();
    let res = match cmd {
        Command::Synth => synth(cfg, &mut out),
        Command::Train => train(cfg, &mut out),
        Command::Score => score(cfg, &mut out),
        Command::Detect => detect(cfg, &mut out),
        Command::Baseline => baseline(cfg, &mut out),
        Command::Eval => eval(cfg, &mut out),
        Command::Gradcheck => gradcheck(cfg, &mut out),
        Command::Plot => plot(cfg, &mut out),
    };
    match res {
        Ok(()) => Ok(out.paths().to_vec()),
        Err(e) => {
            out.rollback();
            Err(e)
        }
    }
}

fn synth(cfg: &RunConfig, out: &mut Outputs) -> Result<()> {
    let ds = pipeline::synthesize(cfg)?;
    let mpath = cfg.manifest_path();
    let base = mpath.parent().map(|p| p.to_path_buf()).unwrap_or_default();
    for (rec, name) in ds.recordings.iter().zip(&ds.manifest.files) {
        out.write(&base.join(name), recording_csv(rec).as_bytes())?;
    }
    out.write(&mpath, to_json(&ds.manifest).as_bytes())?;
    println!(
        "synth: {} files ({}), onset_true {:?} -> {}",
        ds.recordings.len(),
        cfg.regime,
        ds.manifest.onset_true,
        mpath.display()
    );
    Ok(())
}

fn train(cfg: &RunConfig, out: &mut Outputs) -> Result<()> {
    let ds = pipeline::load_dataset(cfg)?;
    let (model, hist) = pipeline::train_model(cfg, &ds)?;
    let tail = hist.disc_loss.len().saturating_sub(100);
    let path = cfg.model_path();
    out.write(&path, model_to_json(&model).as_bytes())?;
    println!(
        "train: {} steps, disc loss {:.4}, accuracy {:.3}, validation {:?} -> {}",
        cfg.total_steps,
        mean(&hist.disc_loss[tail..]),
        mean(&hist.disc_accuracy[tail..]),
        model.meta.validation_ids,
        path.display()
    );
    Ok(())
}

fn write_scores(
    cfg: &RunConfig,
    out: &mut Outputs,
    kind: ModelKind,
    series: &airlfd::detector::ScoreSeries<f64>,
    validation: &[usize],
) -> Result<()> {
    let thr = pipeline::compute_threshold(cfg, series, validation)?;
    if thr.degenerate {
        eprintln!("warning: validation scores have zero spread; threshold equals their mean");
    }
    let path = cfg.out_dir().join(scores_name(kind.name()));
    out.write(&path, scores_csv(&cfg.digest(), series, thr.value).as_bytes())?;
    println!(
        "{kind}: {} trajectories, {} threshold {:.6} -> {}",
        series.entries.len(),
        thr.method,
        thr.value,
        path.display()
    );
    Ok(())
}

fn score(cfg: &RunConfig, out: &mut Outputs) -> Result<()> {
    if cfg.model != ModelKind::Airl {
        return Err(CliError::Usage(format!(
            "score works on the trained AIRL model; use `baseline --model {}`",
            cfg.model
        )));
    }
    let model = load_model::<f64>(&cfg.model_path())?;
    let ds = pipeline::load_dataset(cfg)?;
    let series = pipeline::airl_scores(&model, &ds)?;
    write_scores(cfg, out, ModelKind::Airl, &series, &model.meta.validation_ids)
}

fn baseline(cfg: &RunConfig, out: &mut Outputs) -> Result<()> {
    if cfg.model == ModelKind::Airl {
        return Err(CliError::Usage("baseline needs --model iforest, ae or static".into()));
    }
    let ds = pipeline::load_dataset(cfg)?;
    let (series, validation) = pipeline::baseline_scores(cfg, cfg.model, &ds)?;
    write_scores(cfg, out, cfg.model, &series, &validation)
}

fn detect(cfg: &RunConfig, out: &mut Outputs) -> Result<()> {
    let name = cfg.model.name();
    let scores = read_scores(&cfg.out_dir().join(scores_name(name)))?;
    let d = detect_onset(&scores.series, scores.threshold, cfg.persistence)?;
    let file = DetectFile {
        model: name.to_string(),
        config_digest: cfg.digest(),
        threshold_method: cfg.threshold_method.to_string(),
        threshold: d.threshold,
        persistence: d.persistence,
        onset: d.onset,
    };
    let path = cfg.out_dir().join(detect_name(name));
    out.write(&path, to_json(&file).as_bytes())?;
    println!("detect: onset {:?} (persistence {}) -> {}", d.onset, d.persistence, path.display());
    Ok(())
}

fn eval(cfg: &RunConfig, out: &mut Outputs) -> Result<()> {
    let name = cfg.model.name();
    let scores = read_scores(&cfg.out_dir().join(scores_name(name)))?;
    let det: DetectFile = read_json(&cfg.out_dir().join(detect_name(name)))?;
    let manifest = Manifest::load(&cfg.manifest_path())?;
    let decision = OnsetDecision {
        onset: det.onset,
        persistence: det.persistence,
        threshold: det.threshold,
    };
    let report = evaluate_run(&scores.series, &decision, manifest.onset_true)?;
    let path = cfg.out_dir().join(report_name(name));
    let run = RunReport {
        model: name.to_string(),
        config_digest: cfg.digest(),
        report,
    };
    out.write(&path, to_json(&run).as_bytes())?;
    let r = &run.report;
    println!(
        "eval: onset_pred {:?}, onset_true {:?}, delay {:?}, false alarms {:?}, pdc {:?}, auc {:?} -> {}",
        r.onset_pred,
        r.onset_true,
        r.delay_files,
        r.false_alarms,
        r.pdc,
        r.auc,
        path.display()
    );
    Ok(())
}

fn gradcheck(cfg: &RunConfig, out: &mut Outputs) -> Result<()> {
    let rep = run_gradcheck(cfg)?;
    for (net, e) in &rep.max_rel_error {
        println!("{net:<18} {e:.3e}");
    }
    let path = cfg.out_dir().join("gradcheck.json");
    out.write(&path, to_json(&rep).as_bytes())?;
    if !rep.pass {
        return Err(CliError::Numeric(format!(
            "gradient check failed: max relative error above {}",
            rep.tolerance
        )));
    }
    println!("gradcheck: all networks within {} -> {}", rep.tolerance, path.display());
    Ok(())
}

fn plot(cfg: &RunConfig, out: &mut Outputs) -> Result<()> {
    let name = cfg.model.name();
    let scores = read_scores(&cfg.out_dir().join(scores_name(name)))?;
    let dpath = cfg.out_dir().join(detect_name(name));
    let onset_pred = if dpath.exists() {
        read_json::<DetectFile>(&dpath)?.onset
    } else {
        None
    };
    let mpath = cfg.manifest_path();
    let onset_true = if mpath.exists() {
        Manifest::load(&mpath)?.onset_true
    } else {
        None
    };
    let digest = cfg.digest();
    let svg = render_svg(&PlotSpec {
        model: name,
        digest: &digest,
        series: &scores.series,
        threshold: scores.threshold,
        onset_pred,
        onset_true,
    });
    let path = cfg.out_dir().join(plot_name(name));
    out.write(&path, svg.as_bytes())?;
    println!("plot: -> {}", path.display());
    Ok(())
}
