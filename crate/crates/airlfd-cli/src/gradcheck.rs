//! Finite-difference checks of every network at its configured size.

use std::collections::BTreeMap;

use airlfd::airlcore::{disc_loss_and_grads, init_model, policy_objective, sample_generated};
use airlfd::baselines::{ae_loss_and_grads, static_disc_loss_and_grads, static_gen_loss_and_grads, StaticDisc, WindowAe};
use airlfd::numcore::{grad_check_errors, init_mlp_rng, max_error, two_layer};
use airlfd::rng::{std_normal, substream, StreamRng};
use airlfd::signalio::{Normalizer, Transition};
use serde::Serialize;

use crate::config::RunConfig;
use crate::error::Result;

pub const TOLERANCE: f64 = 1e-4;
const EPS: f64 = 1e-5;
const BATCH: usize = 4;
const STREAM_GRADCHECK: u64 = 0x6772_6164;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GradcheckReport {
    pub config_digest: String,
    pub tolerance: f64,
    pub max_rel_error: BTreeMap<String, f64>,
    pub pass: bool,
}

fn normal_vec(n: usize, r: &mut StreamRng) -> Vec<f64> {
    (0..n).map(|_| std_normal(r)).collect()
}

fn normal_batch(k: usize, n: usize, r: &mut StreamRng) -> Vec<Vec<f64>> {
    (0..k).map(|_| normal_vec(n, r)).collect()
}

/// Splits per-coordinate errors into named contiguous blocks.
fn record(out: &mut BTreeMap<String, f64>, errs: &[f64], blocks: &[(&str, usize)]) {
    let mut off = 0;
    for &(name, n) in blocks {
        out.insert(name.to_string(), max_error(&errs[off..off + n]));
        off += n;
    }
    debug_assert_eq!(off, errs.len());
}

pub fn run_gradcheck(cfg: &RunConfig) -> Result<GradcheckReport> {
    let feature = cfg.feature_config();
    let d = feature.dim();
    let mut r = substream(cfg.seed, STREAM_GRADCHECK);
    let mut errors = BTreeMap::new();

    let norm = Normalizer { mean: 0.0, std: 1.0 };
    let model = init_model(d, norm, feature, &cfg.train_config())?;
    let expert: Vec<Transition<f64>> = (0..BATCH)
        .map(|_| {
            let s = normal_vec(d, &mut r);
            let a = normal_vec(d, &mut r);
            Transition { s, s_next: a.clone(), a, trajectory_id: 0 }
        })
        .collect();
    let states: Vec<&[f64]> = expert.iter().map(|t| t.s.as_slice()).collect();
    let gen = sample_generated(&model, &states, &mut r)?;
    let mut work = model.clone();
    let errs = grad_check_errors(
        &model.disc_flat(),
        |th| {
            work.set_disc_flat(th);
            let (st, g) = disc_loss_and_grads(&work, &expert, &gen).expect("shapes match");
            let mut v = g.reward.flat();
            v.extend(g.value.flat());
            (st.loss, v)
        },
        EPS,
    );
    record(
        &mut errors,
        &errs,
        &[
            ("reward_net", model.disc.reward_net.n_params()),
            ("value_net", model.disc.value_net.n_params()),
        ],
    );

    let noise = normal_batch(BATCH, d, &mut r);
    let mut work = model.clone();
    let errs = grad_check_errors(
        &model.policy_flat(),
        |th| {
            work.set_policy_flat(th);
            policy_objective(&work, &states, &noise).expect("shapes match")
        },
        EPS,
    );
    record(
        &mut errors,
        &errs,
        &[("policy_mean_net", model.policy.mean_net.n_params()), ("policy_log_std", d)],
    );

    let ae = WindowAe::new(d, &cfg.ae_config(), &mut r)?;
    let windows = normal_batch(BATCH, d, &mut r);
    let wrefs: Vec<&[f64]> = windows.iter().map(|w| w.as_slice()).collect();
    let mut work = ae.clone();
    let mut ws = ae.workspace();
    let errs = grad_check_errors(
        &ae.flat(),
        |th| {
            work.set_flat(th);
            let (l, g) = ae_loss_and_grads(&work, &wrefs, &mut ws);
            (l, g.flat())
        },
        EPS,
    );
    record(
        &mut errors,
        &errs,
        &[("ae_encoder", ae.encoder.n_params()), ("ae_decoder", ae.decoder.n_params())],
    );

    let sc = cfg.static_config();
    let sd = StaticDisc {
        disc: init_mlp_rng(&two_layer(d, sc.hidden, 1), &mut r)?,
        generator: init_mlp_rng(&two_layer(sc.noise_dim, sc.hidden, d), &mut r)?,
    };
    let fake = normal_batch(BATCH, d, &mut r);
    let z = normal_batch(BATCH, sc.noise_dim, &mut r);
    let mut work = sd.clone();
    let errs = grad_check_errors(
        &sd.disc.flat(),
        |th| {
            work.disc.set_flat(th);
            let (l, g) = static_disc_loss_and_grads(&work, &wrefs, &fake);
            (l, g.flat())
        },
        EPS,
    );
    errors.insert("static_disc".into(), max_error(&errs));
    let mut work = sd.clone();
    let errs = grad_check_errors(
        &sd.generator.flat(),
        |th| {
            work.generator.set_flat(th);
            let (l, g) = static_gen_loss_and_grads(&work, &z);
            (l, g.flat())
        },
        EPS,
    );
    errors.insert("static_generator".into(), max_error(&errs));

    let pass = errors.values().all(|&e| e <= TOLERANCE);
    Ok(GradcheckReport {
        config_digest: cfg.digest(),
        tolerance: TOLERANCE,
        max_rel_error: errors,
        pass,
    })
}
