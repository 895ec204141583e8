//! Gaussian transition policy, structured discriminator and adversarial training.
//!
//! The discriminator logit is `r(s,a) + gamma*V(s') - V(s) - log pi(a|s)`,
//! clamped to `+-logit_clamp`. Generation is one step from a real expert
//! state with `s' := a`, so policy gradients are pathwise.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::numcore::{init_mlp_rng, two_layer, AdamConfig, AdamState, Cache, Mlp, NumError};
use crate::real::{sigmoid, softplus, Real};
use crate::rng::{self, std_normal, substream, StreamRng};
use crate::signalio::{FeatureConfig, Normalizer, Transition, TransitionSet};

pub const LOG_STD_MIN: f64 = -4.0;
pub const LOG_STD_MAX: f64 = 1.0;
pub const FORMAT_VERSION: &str = "1";

const HALF_LN_2PI: f64 = 0.918_938_533_204_672_8;

#[derive(Debug, Error)]
pub enum AirlError {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimMismatch { expected: usize, got: usize },
    #[error("empty batch")]
    EmptyBatch,
    #[error("insufficient data: {have} transitions, batch needs {need}")]
    InsufficientData { have: usize, need: usize },
    #[error("bad train config: {0}")]
    BadConfig(String),
    #[error("bad model format: {0}")]
    BadFormat(String),
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("numeric failure: {0}")]
    NonFinite(String),
    #[error(transparent)]
    Num(#[from] NumError),
}

pub type Result<T> = std::result::Result<T, AirlError>;

fn check_dim(expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(AirlError::DimMismatch { expected, got })
    }
}

/// Diagonal Gaussian with a state-dependent mean and a state-independent scale.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct GaussianPolicy<T> {
    pub mean_net: Mlp<T>,
    pub log_std: Vec<T>,
}

impl<T: Real> GaussianPolicy<T> {
    pub fn dim(&self) -> usize {
        self.log_std.len()
    }

    pub fn clamp_log_std(&mut self) {
        let (lo, hi) = (T::c(LOG_STD_MIN), T::c(LOG_STD_MAX));
        for l in self.log_std.iter_mut() {
            *l = l.max(lo).min(hi);
        }
    }

    fn log_std_at(&self, j: usize) -> T {
        self.log_std[j].max(T::c(LOG_STD_MIN)).min(T::c(LOG_STD_MAX))
    }

    fn logdensity_with(&self, s: &[T], a: &[T], cache: &mut Cache<T>) -> T {
        let mu = self.mean_net.forward_into(s, cache);
        let mut acc = T::zero();
        for j in 0..a.len() {
            let ls = self.log_std_at(j);
            let z = (a[j] - mu[j]) / ls.exp();
            acc += z * z + ls + ls + T::c(2.0 * HALF_LN_2PI);
        }
        -acc / T::c(2.0)
    }
}

pub fn policy_logdensity<T: Real>(policy: &GaussianPolicy<T>, s: &[T], a: &[T]) -> Result<T> {
    check_dim(policy.dim(), s.len())?;
    check_dim(policy.dim(), a.len())?;
    Ok(policy.logdensity_with(s, a, &mut policy.mean_net.new_cache()))
}

/// `a = mu(s) + exp(log_std) * eps`; returns `(a, eps)`.
pub fn policy_sample<T: Real>(policy: &GaussianPolicy<T>, s: &[T], rng: &mut StreamRng) -> (Vec<T>, Vec<T>) {
    let mut cache = policy.mean_net.new_cache();
    sample_with(policy, s, rng, &mut cache)
}

fn sample_with<T: Real>(policy: &GaussianPolicy<T>, s: &[T], rng: &mut StreamRng, cache: &mut Cache<T>) -> (Vec<T>, Vec<T>) {
    let mu = policy.mean_net.forward_into(s, cache);
    let eps: Vec<T> = (0..mu.len()).map(|_| T::c(std_normal(rng))).collect();
    let a = (0..mu.len()).map(|j| mu[j] + policy.log_std_at(j).exp() * eps[j]).collect();
    (a, eps)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct StructuredDiscriminator<T> {
    pub reward_net: Mlp<T>,
    pub value_net: Mlp<T>,
    pub gamma: T,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct ModelMeta {
    pub seed: u64,
    pub steps: usize,
    /// Healthy trajectories held out of training (threshold calibration).
    #[serde(default)]
    pub validation_ids: Vec<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub config_digest: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AirlModel<T> {
    pub policy: GaussianPolicy<T>,
    pub disc: StructuredDiscriminator<T>,
    pub normalizer: Normalizer<T>,
    pub feature: FeatureConfig,
    pub logit_clamp: T,
    pub meta: ModelMeta,
}

/// The four sub-terms of the discriminator logit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiscTerms<T> {
    pub reward: T,
    pub value_s: T,
    pub value_next: T,
    pub log_pi: T,
}

impl<T: Real> DiscTerms<T> {
    pub fn shaped_reward(&self, gamma: T) -> T {
        self.reward + gamma * self.value_next - self.value_s
    }

    pub fn raw_logit(&self, gamma: T) -> T {
        self.shaped_reward(gamma) - self.log_pi
    }
}

/// Reusable buffers for evaluating a model.
#[derive(Debug, Clone, Default)]
pub struct Workspace<T> {
    sa: Vec<T>,
    r: Cache<T>,
    vs: Cache<T>,
    vn: Cache<T>,
    pi: Cache<T>,
    dsa: Vec<T>,
    dvn: Vec<T>,
}

impl<T: Real> AirlModel<T> {
    pub fn state_dim(&self) -> usize {
        self.policy.dim()
    }

    pub fn workspace(&self) -> Workspace<T> {
        let d = self.state_dim();
        Workspace {
            sa: vec![T::zero(); 2 * d],
            r: self.disc.reward_net.new_cache(),
            vs: self.disc.value_net.new_cache(),
            vn: self.disc.value_net.new_cache(),
            pi: self.policy.mean_net.new_cache(),
            dsa: vec![T::zero(); 2 * d],
            dvn: vec![T::zero(); d],
        }
    }

    fn check(&self, s: &[T], a: &[T], sn: &[T]) -> Result<()> {
        let d = self.state_dim();
        check_dim(d, s.len())?;
        check_dim(d, a.len())?;
        check_dim(d, sn.len())
    }

    /// Forward pass of all sub-terms; caches stay in `ws` for a backward pass.
    pub fn terms_with(&self, s: &[T], a: &[T], sn: &[T], ws: &mut Workspace<T>) -> DiscTerms<T> {
        let d = s.len();
        ws.sa.resize(2 * d, T::zero());
        ws.sa[..d].copy_from_slice(s);
        ws.sa[d..].copy_from_slice(a);
        let reward = self.disc.reward_net.forward_into(&ws.sa, &mut ws.r)[0];
        let value_s = self.disc.value_net.forward_into(s, &mut ws.vs)[0];
        let value_next = self.disc.value_net.forward_into(sn, &mut ws.vn)[0];
        let log_pi = self.policy.logdensity_with(s, a, &mut ws.pi);
        DiscTerms {
            reward,
            value_s,
            value_next,
            log_pi,
        }
    }

    pub fn clamp_logit(&self, raw: T) -> T {
        raw.max(-self.logit_clamp).min(self.logit_clamp)
    }

    pub fn logit_with(&self, s: &[T], a: &[T], sn: &[T], ws: &mut Workspace<T>) -> T {
        self.clamp_logit(self.terms_with(s, a, sn, ws).raw_logit(self.disc.gamma))
    }

    pub fn prob_with(&self, s: &[T], a: &[T], sn: &[T], ws: &mut Workspace<T>) -> T {
        sigmoid(self.logit_with(s, a, sn, ws))
    }
    /// Reward then value parameters, laid end to end.
    pub fn disc_flat(&self) -> Vec<T> {
        let mut v = self.disc.reward_net.flat();
        v.extend(self.disc.value_net.flat());
        v
    }

    pub fn set_disc_flat(&mut self, theta: &[T]) {
        let k = self.disc.reward_net.n_params();
        self.disc.reward_net.set_flat(&theta[..k]);
        self.disc.value_net.set_flat(&theta[k..]);
    }

    /// Mean-net parameters then `log_std`.
    pub fn policy_flat(&self) -> Vec<T> {
        let mut v = self.policy.mean_net.flat();
        v.extend(&self.policy.log_std);
        v
    }

    pub fn set_policy_flat(&mut self, theta: &[T]) {
        let k = self.policy.mean_net.n_params();
        self.policy.mean_net.set_flat(&theta[..k]);
        self.policy.log_std.copy_from_slice(&theta[k..]);
    }
}

pub fn disc_terms<T: Real>(model: &AirlModel<T>, s: &[T], a: &[T], s_next: &[T]) -> Result<DiscTerms<T>> {
    model.check(s, a, s_next)?;
    Ok(model.terms_with(s, a, s_next, &mut model.workspace()))
}

pub fn disc_logit<T: Real>(model: &AirlModel<T>, s: &[T], a: &[T], s_next: &[T]) -> Result<T> {
    model.check(s, a, s_next)?;
    Ok(model.logit_with(s, a, s_next, &mut model.workspace()))
}

pub fn disc_prob<T: Real>(model: &AirlModel<T>, s: &[T], a: &[T], s_next: &[T]) -> Result<T> {
    Ok(sigmoid(disc_logit(model, s, a, s_next)?))
}

/// Gradients of the discriminator parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscGrads<T> {
    pub reward: Mlp<T>,
    pub value: Mlp<T>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiscStats<T> {
    pub loss: T,
    pub accuracy: T,
}

/// Mean softplus-form BCE (expert -> 1, generated -> 0) and its gradient w.r.t. r and V.
pub fn disc_loss_and_grads<T: Real>(
    model: &AirlModel<T>,
    expert: &[Transition<T>],
    generated: &[Transition<T>],
) -> Result<(DiscStats<T>, DiscGrads<T>)> {
    if expert.is_empty() || generated.is_empty() {
        return Err(AirlError::EmptyBatch);
    }
    let mut ws = model.workspace();
    let mut grads = DiscGrads {
        reward: model.disc.reward_net.zeros_like(),
        value: model.disc.value_net.zeros_like(),
    };
    let n = T::from_usize_lossy(expert.len() + generated.len());
    let gamma = model.disc.gamma;
    let (mut loss, mut correct) = (T::zero(), 0usize);
    let labelled = expert.iter().map(|t| (t, true)).chain(generated.iter().map(|t| (t, false)));
    for (t, is_expert) in labelled {
        model.check(&t.s, &t.a, &t.s_next)?;
        let raw = model.terms_with(&t.s, &t.a, &t.s_next, &mut ws).raw_logit(gamma);
        let l = model.clamp_logit(raw);
        let (li, dl) = if is_expert {
            (softplus(-l), -sigmoid(-l))
        } else {
            (softplus(l), sigmoid(l))
        };
        loss += li;
        if (l > T::zero()) == is_expert && l != T::zero() {
            correct += 1;
        }
        if raw.abs() > model.logit_clamp {
            continue;
        }
        let g = dl / n;
        model.disc.reward_net.backward_accum(&mut ws.r, &[g], Some(&mut grads.reward), None);
        model.disc.value_net.backward_accum(&mut ws.vn, &[gamma * g], Some(&mut grads.value), None);
        model.disc.value_net.backward_accum(&mut ws.vs, &[-g], Some(&mut grads.value), None);
    }
    let stats = DiscStats {
        loss: loss / n,
        accuracy: T::from_usize_lossy(correct) / n,
    };
    Ok((stats, grads))
}

/// Adam states for the two parameter groups.
#[derive(Debug, Clone, PartialEq)]
pub struct AirlOptim<T> {
    pub disc: AdamState<T>,
    pub policy: AdamState<T>,
}

impl<T: Real> AirlOptim<T> {
    pub fn new(model: &AirlModel<T>, lr_disc: f64, lr_policy: f64) -> Self {
        let nd = model.disc.reward_net.n_params() + model.disc.value_net.n_params();
        let np = model.policy.mean_net.n_params() + model.policy.dim();
        AirlOptim {
            disc: AdamState::new(nd, AdamConfig::with_lr(lr_disc)),
            policy: AdamState::new(np, AdamConfig::with_lr(lr_policy)),
        }
    }
}

/// One Adam step on r and V; returns the pre-step loss and accuracy.
pub fn disc_update<T: Real>(
    model: &mut AirlModel<T>,
    expert: &[Transition<T>],
    generated: &[Transition<T>],
    adam: &mut AdamState<T>,
) -> Result<DiscStats<T>> {
    let (stats, g) = disc_loss_and_grads(model, expert, generated)?;
    let mut params = model.disc.reward_net.parts_mut();
    params.extend(model.disc.value_net.parts_mut());
    let mut grads = g.reward.parts();
    grads.extend(g.value.parts());
    adam.step_parts(params, grads)?;
    Ok(stats)
}

/// One generated transition per state: `a ~ pi(.|s)`, `s_next = a`.
pub fn sample_generated<T: Real>(model: &AirlModel<T>, states: &[&[T]], rng: &mut StreamRng) -> Result<Vec<Transition<T>>> {
    if states.is_empty() {
        return Err(AirlError::EmptyBatch);
    }
    let mut cache = model.policy.mean_net.new_cache();
    states
        .iter()
        .map(|s| {
            check_dim(model.state_dim(), s.len())?;
            let (a, _) = sample_with(&model.policy, s, rng, &mut cache);
            Ok(Transition {
                s: s.to_vec(),
                s_next: a.clone(),
                a,
                trajectory_id: usize::MAX,
            })
        })
        .collect()
}

/// Policy objective `mean[f(s,a,a) - log pi(a|s)]` for fixed noise, with its
/// gradient over `[mean_net params..., log_std...]`.
///
/// `f(s, a)` returns the shaped reward and its gradient w.r.t. `a`.
pub fn policy_objective_with<T: Real, F>(
    policy: &GaussianPolicy<T>,
    mut f: F,
    states: &[&[T]],
    noise: &[Vec<T>],
) -> Result<(T, Vec<T>)>
where
    F: FnMut(&[T], &[T]) -> (T, Vec<T>),
{
    if states.is_empty() {
        return Err(AirlError::EmptyBatch);
    }
    let d = policy.dim();
    let n = T::from_usize_lossy(states.len());
    let mut g_mean = policy.mean_net.zeros_like();
    let mut g_ls = vec![T::zero(); d];
    let mut mu_cache = policy.mean_net.new_cache();
    let mut pi_cache = policy.mean_net.new_cache();
    let mut dmu = vec![T::zero(); d];
    let mut obj = T::zero();
    for (s, eps) in states.iter().zip(noise) {
        check_dim(d, s.len())?;
        check_dim(d, eps.len())?;
        let mu = policy.mean_net.forward_into(s, &mut mu_cache).to_vec();
        let sig: Vec<T> = (0..d).map(|j| policy.log_std_at(j).exp()).collect();
        let a: Vec<T> = (0..d).map(|j| mu[j] + sig[j] * eps[j]).collect();
        let (fv, dfda) = f(s, &a);
        obj += fv - policy.logdensity_with(s, &a, &mut pi_cache);
        for j in 0..d {
            dmu[j] = dfda[j] / n;
            let ls = policy.log_std[j];
            if ls >= T::c(LOG_STD_MIN) && ls <= T::c(LOG_STD_MAX) {
                // -log pi contributes +log_std after reparameterization
                g_ls[j] += (dfda[j] * sig[j] * eps[j] + T::one()) / n;
            }
        }
        policy.mean_net.backward_accum(&mut mu_cache, &dmu, Some(&mut g_mean), None);
    }
    let mut grad = g_mean.flat();
    grad.extend(g_ls);
    Ok((obj / n, grad))
}

/// [`policy_objective_with`] using the model's own `r + gamma V(a) - V(s)`.
pub fn policy_objective<T: Real>(model: &AirlModel<T>, states: &[&[T]], noise: &[Vec<T>]) -> Result<(T, Vec<T>)> {
    let d = model.state_dim();
    let gamma = model.disc.gamma;
    let mut ws = model.workspace();
    let f = |s: &[T], a: &[T]| {
        let t = model.terms_with(s, a, a, &mut ws);
        model.disc.reward_net.backward_accum(&mut ws.r, &[T::one()], None, Some(&mut ws.dsa));
        model.disc.value_net.backward_accum(&mut ws.vn, &[gamma], None, Some(&mut ws.dvn));
        let g = (0..d).map(|j| ws.dsa[d + j] + ws.dvn[j]).collect();
        (t.shaped_reward(gamma), g)
    };
    policy_objective_with(&model.policy, f, states, noise)
}

/// One Adam ascent step on the policy against reward `f`; returns the pre-step objective.
pub fn policy_update_with<T: Real, F>(
    policy: &mut GaussianPolicy<T>,
    f: F,
    states: &[&[T]],
    rng: &mut StreamRng,
    adam: &mut AdamState<T>,
) -> Result<T>
where
    F: FnMut(&[T], &[T]) -> (T, Vec<T>),
{
    let d = policy.dim();
    let noise: Vec<Vec<T>> = states
        .iter()
        .map(|_| (0..d).map(|_| T::c(std_normal(rng))).collect())
        .collect();
    let (obj, grad) = policy_objective_with(policy, f, states, &noise)?;
    let neg: Vec<T> = grad.iter().map(|g| -*g).collect();
    let split = policy.mean_net.n_params();
    let mut params = policy.mean_net.parts_mut();
    let mut grads: Vec<&[T]> = Vec::with_capacity(params.len() + 1);
    let mut off = 0;
    for p in &params {
        grads.push(&neg[off..off + p.len()]);
        off += p.len();
    }
    debug_assert_eq!(off, split);
    grads.push(&neg[split..]);
    params.push(policy.log_std.as_mut_slice());
    adam.step_parts(params, grads)?;
    policy.clamp_log_std();
    Ok(obj)
}

/// One Adam ascent step on the policy with r and V frozen; returns the pre-step objective.
pub fn policy_update<T: Real>(
    model: &mut AirlModel<T>,
    states: &[&[T]],
    rng: &mut StreamRng,
    adam: &mut AdamState<T>,
) -> Result<T> {
    let d = model.state_dim();
    let AirlModel { policy, disc, .. } = model;
    let gamma = disc.gamma;
    let mut sa = vec![T::zero(); 2 * d];
    let (mut rc, mut vc, mut vsc) = (disc.reward_net.new_cache(), disc.value_net.new_cache(), disc.value_net.new_cache());
    let (mut dsa, mut dvn) = (vec![T::zero(); 2 * d], vec![T::zero(); d]);
    let f = |s: &[T], a: &[T]| {
        sa[..d].copy_from_slice(s);
        sa[d..].copy_from_slice(a);
        let r = disc.reward_net.forward_into(&sa, &mut rc)[0];
        let vn = disc.value_net.forward_into(a, &mut vc)[0];
        let vs = disc.value_net.forward_into(s, &mut vsc)[0];
        disc.reward_net.backward_accum(&mut rc, &[T::one()], None, Some(&mut dsa));
        disc.value_net.backward_accum(&mut vc, &[gamma], None, Some(&mut dvn));
        let g = (0..d).map(|j| dsa[d + j] + dvn[j]).collect();
        (r + gamma * vn - vs, g)
    };
    policy_update_with(policy, f, states, rng, adam)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct TrainConfig<T> {
    pub total_steps: usize,
    pub batch_size: usize,
    pub disc_steps_per_round: usize,
    /// Zero keeps the policy at its initialization.
    pub gen_steps_per_round: usize,
    pub gamma: T,
    pub lr_disc: f64,
    pub lr_policy: f64,
    pub logit_clamp: T,
    pub log_std_init: T,
    pub hidden: usize,
    pub seed: u64,
}

impl<T: Real> Default for TrainConfig<T> {
    fn default() -> Self {
        TrainConfig {
            total_steps: 5000,
            batch_size: 256,
            disc_steps_per_round: 1,
            gen_steps_per_round: 0,
            gamma: T::c(0.9),
            lr_disc: 1e-3,
            lr_policy: 3e-4,
            logit_clamp: T::c(40.0),
            log_std_init: T::zero(),
            hidden: 64,
            seed: 0,
        }
    }
}

impl<T: Real> TrainConfig<T> {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(AirlError::BadConfig(m.to_string()));
        if self.total_steps == 0 || self.batch_size == 0 || self.disc_steps_per_round == 0 || self.hidden == 0 {
            return bad("total_steps, batch_size, disc_steps_per_round and hidden must be >= 1");
        }
        if !(self.gamma >= T::zero() && self.gamma < T::one()) {
            return bad("gamma must lie in [0, 1)");
        }
        if !(self.logit_clamp > T::zero()) {
            return bad("logit_clamp must be > 0");
        }
        if !(self.lr_disc > 0.0 && self.lr_policy >= 0.0) {
            return bad("learning rates must be positive");
        }
        let ls = self.log_std_init.to_f64_lossy();
        if !(LOG_STD_MIN..=LOG_STD_MAX).contains(&ls) {
            return bad("log_std_init outside [-4, 1]");
        }
        Ok(())
    }
}

/// Untrained model with the given architecture.
pub fn init_model<T: Real>(
    d: usize,
    normalizer: Normalizer<T>,
    feature: FeatureConfig,
    cfg: &TrainConfig<T>,
) -> Result<AirlModel<T>> {
    cfg.validate()?;
    check_dim(feature.dim(), d)?;
    let h = cfg.hidden;
    let mean_net = init_mlp_rng(&two_layer(d, h, d), &mut substream(cfg.seed, rng::STREAM_INIT_POLICY))?;
    let reward_net = init_mlp_rng(&two_layer(2 * d, h, 1), &mut substream(cfg.seed, rng::STREAM_INIT_REWARD))?;
    let value_net = init_mlp_rng(&two_layer(d, h, 1), &mut substream(cfg.seed, rng::STREAM_INIT_VALUE))?;
    Ok(AirlModel {
        policy: GaussianPolicy {
            mean_net,
            log_std: vec![cfg.log_std_init; d],
        },
        disc: StructuredDiscriminator {
            reward_net,
            value_net,
            gamma: cfg.gamma,
        },
        normalizer,
        feature,
        logit_clamp: cfg.logit_clamp,
        meta: ModelMeta {
            seed: cfg.seed,
            ..ModelMeta::default()
        },
    })
}

/// Per-round training record.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct TrainHistory<T> {
    pub disc_loss: Vec<T>,
    pub disc_accuracy: Vec<T>,
    pub policy_objective: Vec<T>,
}

/// Epoch-wise shuffled minibatches of indices.
pub(crate) struct Batcher {
    order: Vec<usize>,
    pos: usize,
}

impl Batcher {
    pub(crate) fn new(n: usize) -> Self {
        Batcher {
            order: (0..n).collect(),
            pos: n,
        }
    }

    pub(crate) fn next(&mut self, k: usize, rng: &mut StreamRng) -> &[usize] {
        if self.pos + k > self.order.len() {
            rng::shuffle(&mut self.order, rng);
            self.pos = 0;
        }
        self.pos += k;
        &self.order[self.pos - k..self.pos]
    }
}

/// Adversarial training on healthy transitions.
pub fn train_airl<T: Real>(
    expert: &TransitionSet<T>,
    normalizer: Normalizer<T>,
    feature: FeatureConfig,
    cfg: &TrainConfig<T>,
) -> Result<(AirlModel<T>, TrainHistory<T>)> {
    cfg.validate()?;
    let data: Vec<&Transition<T>> = expert.iter().collect();
    if data.len() < cfg.batch_size {
        return Err(AirlError::InsufficientData {
            have: data.len(),
            need: cfg.batch_size,
        });
    }
    let d = data[0].s.len();
    let mut model = init_model(d, normalizer, feature, cfg)?;
    let mut rng = substream(cfg.seed, rng::STREAM_TRAIN);
    center_reward(&mut model, &data, &mut rng)?;

    let mut opt = AirlOptim::new(&model, cfg.lr_disc, cfg.lr_policy);
    let mut batcher = Batcher::new(data.len());
    let mut hist = TrainHistory::default();
    let mut ebatch: Vec<Transition<T>> = Vec::with_capacity(cfg.batch_size);
    for _ in 0..cfg.total_steps {
        let mut stats = DiscStats {
            loss: T::nan(),
            accuracy: T::nan(),
        };
        for _ in 0..cfg.disc_steps_per_round {
            ebatch.clear();
            ebatch.extend(batcher.next(cfg.batch_size, &mut rng).iter().map(|&i| data[i].clone()));
            let states: Vec<&[T]> = ebatch.iter().map(|t| t.s.as_slice()).collect();
            let gen = sample_generated(&model, &states, &mut rng)?;
            stats = disc_update(&mut model, &ebatch, &gen, &mut opt.disc)?;
        }
        let mut obj = T::nan();
        for _ in 0..cfg.gen_steps_per_round {
            let idx = batcher.next(cfg.batch_size, &mut rng).to_vec();
            let states: Vec<&[T]> = idx.iter().map(|&i| data[i].s.as_slice()).collect();
            obj = policy_update(&mut model, &states, &mut rng, &mut opt.policy)?;
        }
        if !stats.loss.is_finite() {
            return Err(AirlError::NonFinite("training diverged (non-finite loss)".into()));
        }
        hist.disc_loss.push(stats.loss);
        hist.disc_accuracy.push(stats.accuracy);
        hist.policy_objective.push(obj);
    }
    model.meta.steps = cfg.total_steps;
    Ok((model, hist))
}

/// Shifts the reward output bias so generated logits start centred at zero.
///
/// For wide windows `-log pi` alone would push every generated logit into
/// the clamp, where the discriminator has no gradient.
fn center_reward<T: Real>(model: &mut AirlModel<T>, data: &[&Transition<T>], rng: &mut StreamRng) -> Result<()> {
    let k = data.len().min(256);
    let states: Vec<&[T]> = data[..k].iter().map(|t| t.s.as_slice()).collect();
    let gen = sample_generated(model, &states, rng)?;
    let mut ws = model.workspace();
    let mut off = T::zero();
    for t in &gen {
        off += model.terms_with(&t.s, &t.a, &t.s_next, &mut ws).raw_logit(model.disc.gamma);
    }
    off /= T::from_usize_lossy(gen.len());
    let last = model.disc.reward_net.layers.len() - 1;
    model.disc.reward_net.layers[last].biases[0] -= off;
    Ok(())
}

/// On-disk layout of a model.
#[derive(Serialize, Deserialize)]
#[serde(bound = "T: Real", deny_unknown_fields)]
struct ModelFile<T> {
    format_version: String,
    state_dim: usize,
    gamma: T,
    logit_clamp: T,
    feature: FeatureConfig,
    normalizer: Normalizer<T>,
    policy: GaussianPolicy<T>,
    reward_net: Mlp<T>,
    value_net: Mlp<T>,
    meta: ModelMeta,
}

pub fn model_to_json<T: Real>(model: &AirlModel<T>) -> String {
    let f = ModelFile {
        format_version: FORMAT_VERSION.to_string(),
        state_dim: model.state_dim(),
        gamma: model.disc.gamma,
        logit_clamp: model.logit_clamp,
        feature: model.feature,
        normalizer: model.normalizer,
        policy: model.policy.clone(),
        reward_net: model.disc.reward_net.clone(),
        value_net: model.disc.value_net.clone(),
        meta: model.meta.clone(),
    };
    let mut s = serde_json::to_string_pretty(&f).expect("model serializes");
    s.push('\n');
    s
}

pub fn model_from_json<T: Real>(text: &str) -> Result<AirlModel<T>> {
    let bad = |m: String| AirlError::BadFormat(m);
    let v: serde_json::Value = serde_json::from_str(text).map_err(|e| bad(e.to_string()))?;
    match v.get("format_version").and_then(|x| x.as_str()) {
        Some(FORMAT_VERSION) => {}
        Some(other) => {
            return Err(bad(format!(
                "format_version \"{other}\" not supported (reader supports \"{FORMAT_VERSION}\")"
            )))
        }
        None => return Err(bad("missing format_version".into())),
    }
    let f: ModelFile<T> = serde_json::from_value(v).map_err(|e| bad(e.to_string()))?;
    let d = f.state_dim;
    let shape = |name: &str, net: &Mlp<T>, i: usize, o: usize| -> Result<()> {
        net.validate().map_err(|e| bad(format!("{name}: {e}")))?;
        if net.input_dim() != i || net.output_dim() != o {
            return Err(bad(format!(
                "{name} maps {} -> {}, expected {i} -> {o}",
                net.input_dim(),
                net.output_dim()
            )));
        }
        Ok(())
    };
    shape("policy.mean_net", &f.policy.mean_net, d, d)?;
    shape("reward_net", &f.reward_net, 2 * d, 1)?;
    shape("value_net", &f.value_net, d, 1)?;
    if f.policy.log_std.len() != d || f.feature.dim() != d {
        return Err(bad(format!("log_std / feature dims disagree with state_dim {d}")));
    }
    if !(f.normalizer.std > T::zero()) || !(f.logit_clamp > T::zero()) {
        return Err(bad("normalizer std and logit_clamp must be positive".into()));
    }
    Ok(AirlModel {
        policy: f.policy,
        disc: StructuredDiscriminator {
            reward_net: f.reward_net,
            value_net: f.value_net,
            gamma: f.gamma,
        },
        normalizer: f.normalizer,
        feature: f.feature,
        logit_clamp: f.logit_clamp,
        meta: f.meta,
    })
}

pub fn save_model<T: Real>(model: &AirlModel<T>, path: &Path) -> Result<()> {
    std::fs::write(path, model_to_json(model)).map_err(|source| AirlError::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub fn load_model<T: Real>(path: &Path) -> Result<AirlModel<T>> {
    let text = std::fs::read_to_string(path).map_err(|source| AirlError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    model_from_json(&text)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numcore::{grad_check_flat, Activation, Layer, LayerSpec};
    use crate::signalio::FeatureMode;

    fn feature(d: usize) -> FeatureConfig {
        FeatureConfig {
            win_len: 8 * d,
            stride: 8 * d,
            mode: FeatureMode::Decimate(8),
        }
    }

    fn model(d: usize, seed: u64) -> AirlModel<f64> {
        let cfg = TrainConfig {
            hidden: 6,
            seed,
            log_std_init: -0.3,
            ..TrainConfig::default()
        };
        let norm = Normalizer { mean: 0.0, std: 1.0 };
        init_model(d, norm, feature(d), &cfg).unwrap()
    }

    fn randv(n: usize, rng: &mut StreamRng) -> Vec<f64> {
        (0..n).map(|_| std_normal(rng)).collect()
    }

    fn linear_const(i: usize, o: usize, w: f64, b: f64) -> Mlp<f64> {
        Mlp {
            layers: vec![Layer {
                spec: LayerSpec::new(i, o, Activation::Identity),
                weights: vec![w; i * o],
                biases: vec![b; o],
            }],
        }
    }

    /// d=1 policy whose mean is the identity map.
    fn identity_policy(log_std: f64) -> GaussianPolicy<f64> {
        GaussianPolicy {
            mean_net: linear_const(1, 1, 1.0, 0.0),
            log_std: vec![log_std],
        }
    }

    #[test]
    fn logdensity_examples() {
        let p = identity_policy(0.0);
        let l = policy_logdensity(&p, &[0.3], &[0.3]).unwrap();
        assert!((l + 0.9189385332046727).abs() < 1e-12);
        let l = policy_logdensity(&p, &[0.3], &[1.3]).unwrap();
        assert!((l + 1.4189385332046727).abs() < 1e-12);
        assert!(matches!(
            policy_logdensity(&p, &[0.3, 1.0], &[1.3]),
            Err(AirlError::DimMismatch { .. })
        ));
    }

    #[test]
    fn logdensity_integrates_to_one() {
        // importance-sample the d=2 density with a wider N(0, 2^2) proposal
        let p = GaussianPolicy {
            mean_net: linear_const(2, 2, 0.0, 0.4),
            log_std: vec![-0.5, 0.2],
        };
        let mut r = substream(5, 5);
        let n = 100_000;
        let mut acc = 0.0;
        for _ in 0..n {
            let z = randv(2, &mut r);
            let a = [2.0 * z[0], 2.0 * z[1]];
            let lq = -0.5 * (z[0] * z[0] + z[1] * z[1]) - 2.0 * (2f64.ln() + HALF_LN_2PI);
            acc += (policy_logdensity(&p, &[0.0, 0.0], &a).unwrap() - lq).exp();
        }
        let est = acc / n as f64;
        assert!((est - 1.0).abs() < 0.02, "{est}");
    }

    #[test]
    fn sample_examples() {
        let p = identity_policy(-4.0);
        let mut r = substream(1, 2);
        let within = (0..100_000)
            .filter(|_| (policy_sample(&p, &[0.7], &mut r).0[0] - 0.7).abs() < 0.1)
            .count();
        // exp(-4) ~ 0.018, so 0.1 is ~5.5 sigma
        assert_eq!(within, 100_000);

        let a1 = policy_sample(&p, &[0.7], &mut substream(3, 3));
        let a2 = policy_sample(&p, &[0.7], &mut substream(3, 3));
        assert_eq!(a1, a2);

        let p = identity_policy(0.0);
        let n = 10_000;
        let m = (0..n).map(|_| policy_sample(&p, &[0.7], &mut r).0[0]).sum::<f64>() / n as f64;
        assert!((m - 0.7).abs() < 3.0 / (n as f64).sqrt(), "{m}");
        let (a, e) = policy_sample(&p, &[0.2], &mut r);
        assert!((a[0] - 0.2 - e[0]).abs() < 1e-15);
    }

    /// Model with constant sub-terms: r = rv, V = vs everywhere, log pi = 0 unless overridden.
    fn const_model(rv: f64, v: f64, gamma: f64) -> AirlModel<f64> {
        let mut m = model(8, 0);
        m.disc.reward_net = linear_const(16, 1, 0.0, rv);
        m.disc.value_net = linear_const(8, 1, 0.0, v);
        m.disc.gamma = gamma;
        m
    }

    #[test]
    fn logit_examples() {
        let m = const_model(1.0, 2.0, 0.9);
        let s = vec![0.1; 8];
        let t = disc_terms(&m, &s, &s, &s).unwrap();
        assert_eq!((t.reward, t.value_s, t.value_next), (1.0, 2.0, 2.0));
        let d = DiscTerms { reward: 1.0f64, value_s: 2.0, value_next: 1.0, log_pi: 0.0 };
        assert!((d.raw_logit(0.9) + 0.1).abs() < 1e-15);
        assert!((sigmoid(d.raw_logit(0.9)) - 0.47502081252106).abs() < 1e-12);

        let m = const_model(3.0, 0.0, 0.0);
        let t = disc_terms(&m, &s, &s, &s).unwrap();
        assert_eq!(t.shaped_reward(0.0), 3.0);

        let m = const_model(1e6, 0.0, 0.9);
        assert_eq!(disc_logit(&m, &s, &s, &s).unwrap(), 40.0);
        let m = const_model(-1e6, 0.0, 0.9);
        assert_eq!(disc_logit(&m, &s, &s, &s).unwrap(), -40.0);
        assert!(disc_prob(&m, &s, &s, &s).unwrap() < 1e-15);
        assert!(1.0 - disc_prob(&const_model(1e6, 0.0, 0.9), &s, &s, &s).unwrap() < 1e-15);
        assert!(disc_logit(&m, &s, &s[..7], &s).is_err());
    }

    #[test]
    fn logit_recomposes_from_terms() {
        let m = model(8, 3);
        let mut r = substream(9, 9);
        for _ in 0..1000 {
            let (s, a) = (randv(8, &mut r), randv(8, &mut r));
            let t = disc_terms(&m, &s, &a, &a).unwrap();
            let lp = policy_logdensity(&m.policy, &s, &a).unwrap();
            assert_eq!(lp, t.log_pi);
            let recomposed = t.reward + m.disc.gamma * t.value_next - t.value_s - lp;
            let direct = disc_logit(&m, &s, &a, &a).unwrap();
            assert!((recomposed.clamp(-40.0, 40.0) - direct).abs() <= 1e-12);
        }
    }

    #[test]
    fn shaping_constant_shifts_all_logits_equally() {
        let m = model(8, 4);
        let mut shifted = m.clone();
        shifted.disc.value_net.layers[1].biases[0] += 0.75;
        let mut r = substream(1, 4);
        for _ in 0..50 {
            let (s, a) = (randv(8, &mut r), randv(8, &mut r));
            let l0 = disc_logit(&m, &s, &a, &a).unwrap();
            let l1 = disc_logit(&shifted, &s, &a, &a).unwrap();
            assert!((l1 - l0 - (0.9 - 1.0) * 0.75).abs() < 1e-12);
        }
    }

    fn toy_batches(d: usize, n: usize, seed: u64) -> (Vec<Transition<f64>>, Vec<Transition<f64>>) {
        let mut r = substream(seed, 1);
        let mk = |shift: f64, r: &mut StreamRng| {
            let s: Vec<f64> = randv(d, r).iter().map(|x| x * 0.3 + shift).collect();
            let a: Vec<f64> = randv(d, r).iter().map(|x| x * 0.3 + shift).collect();
            Transition { s, s_next: a.clone(), a, trajectory_id: 0 }
        };
        let e = (0..n).map(|_| mk(1.0, &mut r)).collect();
        let g = (0..n).map(|_| mk(-1.0, &mut r)).collect();
        (e, g)
    }

    /// Reward that exactly cancels `-log pi` so the logit is a chosen constant.
    fn logit_zero_model() -> AirlModel<f64> {
        // d = 8, policy mean 0, log_std 0: log pi(a) = -0.5|a|^2 - 8*HALF_LN_2PI.
        // With all transitions at a = 0 the logit is r - log pi = r + 8*HALF_LN_2PI.
        let mut m = const_model(-8.0 * HALF_LN_2PI, 0.0, 0.9);
        m.policy.mean_net = linear_const(8, 8, 0.0, 0.0);
        m.policy.log_std = vec![0.0; 8];
        m
    }

    #[test]
    fn balanced_logit_zero_loss_is_ln2() {
        let m = logit_zero_model();
        let z = Transition { s: vec![0.0; 8], a: vec![0.0; 8], s_next: vec![0.0; 8], trajectory_id: 0 };
        let (st, _) = disc_loss_and_grads(&m, &[z.clone(), z.clone()], &[z.clone(), z]).unwrap();
        assert!((st.loss - std::f64::consts::LN_2).abs() < 1e-12);
    }

    #[test]
    fn saturated_logits_give_tiny_loss() {
        // r = 1e6 * a_0 pushes a_0 = +1 to the +40 clamp and a_0 = -1 to -40
        let mut m = const_model(0.0, 0.0, 0.9);
        m.disc.reward_net.layers[0].weights = (0..16).map(|i| if i == 8 { 1e6 } else { 0.0 }).collect();
        let tr = |x: f64| {
            let mut a = vec![0.0; 8];
            a[0] = x;
            Transition { s: vec![0.0; 8], s_next: a.clone(), a, trajectory_id: 0 }
        };
        assert_eq!(disc_logit(&m, &tr(1.0).s, &tr(1.0).a, &tr(1.0).s_next).unwrap(), 40.0);
        let (st, g) = disc_loss_and_grads(&m, &[tr(1.0)], &[tr(-1.0)]).unwrap();
        assert!(st.loss < 1e-15, "{}", st.loss);
        assert_eq!(st.accuracy, 1.0);
        assert!(g.reward.flat().iter().all(|&v| v == 0.0));
        assert!(matches!(disc_loss_and_grads(&m, &[], &[tr(1.0)]), Err(AirlError::EmptyBatch)));
    }

    #[test]
    fn disc_gradients_match_finite_differences() {
        for seed in 0..3 {
            let base = model(8, seed);
            let (e, _) = toy_batches(8, 5, seed);
            let gen = sample_generated(&base, &e.iter().map(|t| t.s.as_slice()).collect::<Vec<_>>(), &mut substream(seed, 3)).unwrap();
            let mut work = base.clone();
            let err = grad_check_flat(
                &base.disc_flat(),
                |th| {
                    work.set_disc_flat(th);
                    let (st, g) = disc_loss_and_grads(&work, &e, &gen).unwrap();
                    let mut v = g.reward.flat();
                    v.extend(g.value.flat());
                    (st.loss, v)
                },
                1e-5,
            );
            assert!(err < 1e-4, "seed {seed}: {err}");
        }
    }

    #[test]
    fn policy_gradients_match_finite_differences() {
        for seed in 0..3 {
            let base = model(8, seed);
            let mut r = substream(seed, 8);
            let states: Vec<Vec<f64>> = (0..6).map(|_| randv(8, &mut r)).collect();
            let noise: Vec<Vec<f64>> = (0..6).map(|_| randv(8, &mut r)).collect();
            let refs: Vec<&[f64]> = states.iter().map(|s| s.as_slice()).collect();
            let mut work = base.clone();
            let err = grad_check_flat(
                &base.policy_flat(),
                |th| {
                    work.set_policy_flat(th);
                    policy_objective(&work, &refs, &noise).unwrap()
                },
                1e-5,
            );
            assert!(err < 1e-4, "seed {seed}: {err}");
        }
    }

    #[test]
    fn disc_update_separates_toy_batch() {
        let mut m = model(2, 1);
        let (e, g) = toy_batches(2, 32, 2);
        let mut adam = AirlOptim::new(&m, 1e-2, 0.0).disc;
        let first = disc_update(&mut m, &e, &g, &mut adam).unwrap().loss;
        let mut last = first;
        for _ in 0..199 {
            last = disc_update(&mut m, &e, &g, &mut adam).unwrap().loss;
        }
        assert!(last < 0.1 && last < first, "{first} -> {last}");
    }

    #[test]
    fn generated_transitions_follow_proxy_identity() {
        let m = model(8, 2);
        let mut r = substream(2, 2);
        let states: Vec<Vec<f64>> = (0..10).map(|_| randv(8, &mut r)).collect();
        let refs: Vec<&[f64]> = states.iter().map(|s| s.as_slice()).collect();
        let g = sample_generated(&m, &refs, &mut r).unwrap();
        assert_eq!(g.len(), 10);
        assert!(g.iter().all(|t| t.a == t.s_next));
        assert!(matches!(sample_generated(&m, &[], &mut r), Err(AirlError::EmptyBatch)));
    }

    #[test]
    fn generated_near_state_for_identity_policy_at_floor() {
        let mut m = model(8, 2);
        let mut id = linear_const(8, 8, 0.0, 0.0);
        for j in 0..8 {
            id.layers[0].weights[j * 8 + j] = 1.0;
        }
        m.policy = GaussianPolicy { mean_net: id, log_std: vec![-4.0; 8] };
        let mut r = substream(2, 6);
        let states: Vec<Vec<f64>> = (0..200).map(|_| randv(8, &mut r)).collect();
        let refs: Vec<&[f64]> = states.iter().map(|s| s.as_slice()).collect();
        for t in sample_generated(&m, &refs, &mut r).unwrap() {
            for (a, s) in t.s_next.iter().zip(&t.s) {
                assert!((a - s).abs() < 0.1);
            }
        }
    }

    #[test]
    fn policy_update_pulls_mean_toward_state() {
        let d = 4;
        let mut policy = model(d, 6).policy;
        let mut r = substream(6, 1);
        let states: Vec<Vec<f64>> = (0..16).map(|_| randv(d, &mut r)).collect();
        let refs: Vec<&[f64]> = states.iter().map(|s| s.as_slice()).collect();
        // r(s, a) = -|a - s|^2
        let reward = |s: &[f64], a: &[f64]| {
            let v = -a.iter().zip(s).map(|(x, y)| (x - y).powi(2)).sum::<f64>();
            (v, a.iter().zip(s).map(|(x, y)| -2.0 * (x - y)).collect::<Vec<_>>())
        };
        let dist = |p: &GaussianPolicy<f64>| {
            states
                .iter()
                .map(|s| p.mean_net.forward(s).unwrap().0.iter().zip(s).map(|(a, b)| (a - b).powi(2)).sum::<f64>())
                .sum::<f64>()
        };
        let noise: Vec<Vec<f64>> = (0..16).map(|_| randv(d, &mut r)).collect();
        let objective = |p: &GaussianPolicy<f64>| policy_objective_with(p, reward, &refs, &noise).unwrap().0;
        let mut adam = AdamState::new(policy.mean_net.n_params() + d, AdamConfig::with_lr(3e-3));
        let (d0, o0) = (dist(&policy), objective(&policy));
        let mut checkpoints = vec![o0];
        for step in 1..=500 {
            policy_update_with(&mut policy, reward, &refs, &mut r, &mut adam).unwrap();
            if step % 100 == 0 {
                checkpoints.push(objective(&policy));
            }
        }
        // stochastic steps jitter around the optimum once converged
        assert!(checkpoints.windows(2).all(|w| w[1] > w[0] - 0.05), "{checkpoints:?}");
        assert!(checkpoints[5] > checkpoints[0] + 1.0, "{checkpoints:?}");
        assert!(dist(&policy) < 0.05 * d0, "{d0} -> {}", dist(&policy));
    }

    #[test]
    fn zero_gradient_fixture_leaves_policy_unchanged() {
        let mut m = const_model(0.5, 0.0, 0.9);
        m.policy.log_std = vec![LOG_STD_MAX; 8];
        m.policy.mean_net = linear_const(8, 8, 0.1, 0.0);
        let before = m.policy.clone();
        let mut r = substream(0, 0);
        let states: Vec<Vec<f64>> = (0..8).map(|_| randv(8, &mut r)).collect();
        let refs: Vec<&[f64]> = states.iter().map(|s| s.as_slice()).collect();
        let mut adam = AirlOptim::new(&m, 3e-4, 3e-4).policy;
        for _ in 0..5 {
            policy_update(&mut m, &refs, &mut r, &mut adam).unwrap();
        }
        assert_eq!(m.policy, before);
    }

    #[test]
    fn log_std_clamped_after_update() {
        let mut m = model(8, 1);
        m.policy.log_std = vec![0.999; 8];
        let mut r = substream(1, 1);
        let states: Vec<Vec<f64>> = (0..8).map(|_| randv(8, &mut r)).collect();
        let refs: Vec<&[f64]> = states.iter().map(|s| s.as_slice()).collect();
        let mut adam = AirlOptim::new(&m, 3e-4, 0.5).policy;
        for _ in 0..10 {
            policy_update(&mut m, &refs, &mut r, &mut adam).unwrap();
            assert!(m.policy.log_std.iter().all(|&l| (LOG_STD_MIN..=LOG_STD_MAX).contains(&l)));
        }
    }

    #[test]
    fn json_roundtrip_reproduces_probs() {
        let mut m = model(8, 7);
        m.meta.validation_ids = vec![3, 9];
        let text = model_to_json(&m);
        let back: AirlModel<f64> = model_from_json(&text).unwrap();
        assert_eq!(back, m);
        let mut r = substream(7, 7);
        for _ in 0..100 {
            let (s, a) = (randv(8, &mut r), randv(8, &mut r));
            assert_eq!(disc_prob(&m, &s, &a, &a).unwrap(), disc_prob(&back, &s, &a, &a).unwrap());
        }
        assert_eq!(model_to_json(&back), text);
    }

    #[test]
    fn json_format_errors() {
        let text = model_to_json(&model(8, 7));
        assert!(matches!(model_from_json::<f64>(&text[..text.len() / 2]), Err(AirlError::BadFormat(_))));
        let v2 = text.replacen("\"format_version\": \"1\"", "\"format_version\": \"2\"", 1);
        match model_from_json::<f64>(&v2) {
            Err(AirlError::BadFormat(msg)) => assert!(msg.contains("\"2\"") && msg.contains("\"1\""), "{msg}"),
            other => panic!("{other:?}"),
        }
        let shape = text.replacen("\"state_dim\": 8", "\"state_dim\": 4", 1);
        assert!(matches!(model_from_json::<f64>(&shape), Err(AirlError::BadFormat(_))));
    }

    #[test]
    fn file_roundtrip_and_missing() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("m.json");
        let m = model(8, 1);
        save_model(&m, &p).unwrap();
        assert_eq!(load_model::<f64>(&p).unwrap(), m);
        assert!(matches!(load_model::<f64>(&dir.path().join("nope.json")), Err(AirlError::Io { .. })));
    }

    #[test]
    fn train_config_validation() {
        let ok = TrainConfig::<f64>::default();
        assert!(ok.validate().is_ok());
        assert!(TrainConfig { gamma: 1.0, ..ok }.validate().is_err());
        assert!(TrainConfig { batch_size: 0, ..ok }.validate().is_err());
        assert!(TrainConfig { logit_clamp: 0.0, ..ok }.validate().is_err());
        assert!(TrainConfig { log_std_init: 2.0, ..ok }.validate().is_err());
    }

    fn toy_set(n_traj: usize, len: usize, seed: u64) -> TransitionSet<f64> {
        let mut r = substream(seed, 40);
        let trajectories = (0..n_traj)
            .map(|id| {
                let ws: Vec<Vec<f64>> = (0..=len).map(|_| randv(8, &mut r)).collect();
                crate::signalio::Trajectory {
                    trajectory_id: id,
                    transitions: ws
                        .windows(2)
                        .map(|p| Transition { s: p[0].clone(), a: p[1].clone(), s_next: p[1].clone(), trajectory_id: id })
                        .collect(),
                }
            })
            .collect();
        TransitionSet { trajectories }
    }

    #[test]
    fn training_is_deterministic() {
        let set = toy_set(3, 40, 1);
        let cfg = TrainConfig { total_steps: 30, batch_size: 32, hidden: 8, gen_steps_per_round: 1, seed: 4, ..TrainConfig::default() };
        let norm = Normalizer { mean: 0.0, std: 1.0 };
        let (m1, h1) = train_airl(&set, norm, feature(8), &cfg).unwrap();
        let (m2, h2) = train_airl(&set, norm, feature(8), &cfg).unwrap();
        assert_eq!(h1, h2);
        assert_eq!(m1, m2);
        assert_eq!(h1.disc_loss.len(), 30);
        assert_eq!(m1.meta.steps, 30);
        let big = TrainConfig { batch_size: 1000, ..cfg };
        assert!(matches!(
            train_airl(&set, norm, feature(8), &big),
            Err(AirlError::InsufficientData { have: 120, need: 1000 })
        ));
    }

    #[test]
    fn generic_over_f32() {
        let cfg = TrainConfig::<f32> { hidden: 4, ..TrainConfig::default() };
        let m = init_model(8, Normalizer { mean: 0.0f32, std: 1.0 }, feature(8), &cfg).unwrap();
        let s = vec![0.1f32; 8];
        let p = disc_prob(&m, &s, &s, &s).unwrap();
        assert!(p > 0.0 && p < 1.0);
    }
}
