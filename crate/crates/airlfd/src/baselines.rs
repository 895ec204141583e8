//! Comparators scored per window: isolation forest, window autoencoder and a
//! static (single-window, no transitions) adversarial discriminator.

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::airlcore::Batcher;
use crate::detector::{ScoreSeries, TrajectoryScore};
use crate::numcore::{init_mlp_rng, two_layer, AdamConfig, AdamState, Cache, Mlp, NumError};
use crate::real::{sigmoid, softplus, Real};
use crate::rng::{self, substream, StreamRng, STREAM_BASELINE};
use crate::signalio::{Trajectory, TransitionSet};

pub const EULER_GAMMA: f64 = 0.5772156649;

#[derive(Debug, Error, PartialEq)]
pub enum BaselineError {
    #[error("insufficient data: have {have}, need {need}")]
    InsufficientData { have: usize, need: usize },
    #[error("bad config: {0}")]
    BadConfig(String),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimMismatch { expected: usize, got: usize },
    #[error(transparent)]
    Num(#[from] NumError),
}

pub type Result<T> = std::result::Result<T, BaselineError>;

/// Anything that maps one window to an anomaly score (higher = more anomalous).
pub trait WindowScorer<T: Real> {
    fn score_window(&self, w: &[T]) -> T;
}

/// The windows of a trajectory: every state plus the final next-state.
pub fn trajectory_windows<T>(traj: &Trajectory<T>) -> Vec<&[T]> {
    let mut out: Vec<&[T]> = traj.transitions.iter().map(|t| t.s.as_slice()).collect();
    if let Some(last) = traj.transitions.last() {
        out.push(&last.s_next);
    }
    out
}

pub fn set_windows<T>(set: &TransitionSet<T>) -> Vec<&[T]> {
    set.trajectories.iter().flat_map(trajectory_windows).collect()
}

/// Mean window score; `None` for an empty trajectory.
pub fn trajectory_score_with<T: Real, S: WindowScorer<T> + ?Sized>(scorer: &S, traj: &Trajectory<T>) -> Option<T> {
    let ws = trajectory_windows(traj);
    if ws.is_empty() {
        return None;
    }
    let mut acc = T::zero();
    for w in &ws {
        acc += scorer.score_window(w);
    }
    Some(acc / T::from_usize_lossy(ws.len()))
}

pub fn score_set_with<T: Real, S: WindowScorer<T> + ?Sized>(scorer: &S, set: &TransitionSet<T>) -> Result<ScoreSeries<T>> {
    let mut entries = Vec::with_capacity(set.trajectories.len());
    for t in &set.trajectories {
        let score = trajectory_score_with(scorer, t).ok_or(BaselineError::InsufficientData { have: 0, need: 1 })?;
        entries.push(TrajectoryScore {
            trajectory_id: t.trajectory_id,
            n_transitions: t.len(),
            score,
        });
    }
    let mut s = ScoreSeries { entries };
    s.sort();
    Ok(s)
}

fn check_dims<T>(ws: &[&[T]]) -> Result<usize> {
    let d = ws.first().map(|w| w.len()).unwrap_or(0);
    if d == 0 {
        return Err(BaselineError::InsufficientData { have: 0, need: 1 });
    }
    for w in ws {
        if w.len() != d {
            return Err(BaselineError::DimMismatch { expected: d, got: w.len() });
        }
    }
    Ok(d)
}

// ---------------------------------------------------------------- iforest

/// Average unsuccessful-search path length of a binary search tree on `n` points.
pub fn avg_path_len(n: usize) -> f64 {
    if n < 2 {
        return 0.0;
    }
    let n = n as f64;
    2.0 * ((n - 1.0).ln() + EULER_GAMMA) - 2.0 * (n - 1.0) / n
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", bound = "T: Real")]
pub enum Node<T> {
    Split { attr: usize, value: T, left: usize, right: usize },
    Leaf { depth: usize, size: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct ITree<T> {
    /// Root is node 0.
    pub nodes: Vec<Node<T>>,
}

impl<T: Real> ITree<T> {
    pub fn path_length(&self, x: &[T]) -> f64 {
        let mut i = 0;
        loop {
            match &self.nodes[i] {
                Node::Split { attr, value, left, right } => {
                    i = if x[*attr] < *value { *left } else { *right };
                }
                Node::Leaf { depth, size } => return *depth as f64 + avg_path_len(*size),
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct IsoForest<T> {
    pub trees: Vec<ITree<T>>,
    pub psi: usize,
    pub height_limit: usize,
    pub dim: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct IForestConfig {
    pub psi: usize,
    pub n_trees: usize,
    pub seed: u64,
}

impl Default for IForestConfig {
    fn default() -> Self {
        IForestConfig { psi: 256, n_trees: 100, seed: 0 }
    }
}

#[allow(clippy::needless_range_loop)]
fn grow<T: Real>(
    nodes: &mut Vec<Node<T>>,
    data: &[&[T]],
    idx: &mut [usize],
    depth: usize,
    limit: usize,
    rng: &mut StreamRng,
) -> usize {
    let me = nodes.len();
    nodes.push(Node::Leaf { depth, size: idx.len() });
    if depth >= limit || idx.len() <= 1 {
        return me;
    }
    let d = data[idx[0]].len();
    let mut ranges = Vec::new();
    for a in 0..d {
        let (mut lo, mut hi) = (data[idx[0]][a], data[idx[0]][a]);
        for &i in idx.iter() {
            lo = lo.min(data[i][a]);
            hi = hi.max(data[i][a]);
        }
        if hi > lo {
            ranges.push((a, lo, hi));
        }
    }
    if ranges.is_empty() {
        return me;
    }
    let (attr, lo, hi) = ranges[rng.random_range(0..ranges.len())];
    let value = lo + (hi - lo) * T::c(rng::uniform(rng));
    let mut split = 0;
    for k in 0..idx.len() {
        if data[idx[k]][attr] < value {
            idx.swap(k, split);
            split += 1;
        }
    }
    let (l, r) = idx.split_at_mut(split);
    let left = grow(nodes, data, l, depth + 1, limit, rng);
    let right = grow(nodes, data, r, depth + 1, limit, rng);
    nodes[me] = Node::Split { attr, value, left, right };
    me
}

pub fn iforest_fit<T: Real>(windows: &[&[T]], cfg: &IForestConfig) -> Result<IsoForest<T>> {
    if cfg.psi < 2 || cfg.n_trees == 0 {
        return Err(BaselineError::BadConfig("need psi >= 2 and at least one tree".into()));
    }
    if windows.len() < cfg.psi {
        return Err(BaselineError::InsufficientData {
            have: windows.len(),
            need: cfg.psi,
        });
    }
    let dim = check_dims(windows)?;
    let height_limit = (cfg.psi as f64).log2().ceil() as usize;
    let mut r = substream(cfg.seed, STREAM_BASELINE);
    let mut pool: Vec<usize> = (0..windows.len()).collect();
    let mut trees = Vec::with_capacity(cfg.n_trees);
    for _ in 0..cfg.n_trees {
        // partial Fisher-Yates: the first psi slots become the subsample
        for k in 0..cfg.psi {
            let j = r.random_range(k..pool.len());
            pool.swap(k, j);
        }
        let mut idx = pool[..cfg.psi].to_vec();
        let mut nodes = Vec::new();
        grow(&mut nodes, windows, &mut idx, 0, height_limit, &mut r);
        trees.push(ITree { nodes });
    }
    Ok(IsoForest {
        trees,
        psi: cfg.psi,
        height_limit,
        dim,
    })
}

impl<T: Real> IsoForest<T> {
    pub fn mean_path_length(&self, x: &[T]) -> f64 {
        self.trees.iter().map(|t| t.path_length(x)).sum::<f64>() / self.trees.len() as f64
    }
}

/// `2^(-E[h] / c(psi))`.
pub fn iforest_score<T: Real>(forest: &IsoForest<T>, w: &[T]) -> T {
    T::c(2f64.powf(-forest.mean_path_length(w) / avg_path_len(forest.psi)))
}

impl<T: Real> WindowScorer<T> for IsoForest<T> {
    fn score_window(&self, w: &[T]) -> T {
        iforest_score(self, w)
    }
}

// ---------------------------------------------------------------- autoencoder

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AeConfig {
    pub hidden: usize,
    pub latent: usize,
    pub steps: usize,
    pub batch: usize,
    pub lr: f64,
    pub seed: u64,
}

impl Default for AeConfig {
    fn default() -> Self {
        AeConfig {
            hidden: 32,
            latent: 8,
            steps: 3000,
            batch: 128,
            lr: 1e-3,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct WindowAe<T> {
    pub encoder: Mlp<T>,
    pub decoder: Mlp<T>,
}

pub struct AeWorkspace<T> {
    enc: Cache<T>,
    dec: Cache<T>,
    dy: Vec<T>,
    dz: Vec<T>,
}

impl<T: Real> WindowAe<T> {
    pub fn new(d: usize, cfg: &AeConfig, rng: &mut StreamRng) -> Result<Self> {
        let encoder = init_mlp_rng(&two_layer(d, cfg.hidden, cfg.latent), rng)?;
        let decoder = init_mlp_rng(&two_layer(cfg.latent, cfg.hidden, d), rng)?;
        Ok(WindowAe { encoder, decoder })
    }

    pub fn dim(&self) -> usize {
        self.encoder.input_dim()
    }

    pub fn workspace(&self) -> AeWorkspace<T> {
        AeWorkspace {
            enc: self.encoder.new_cache(),
            dec: self.decoder.new_cache(),
            dy: vec![T::zero(); self.dim()],
            dz: vec![T::zero(); self.encoder.output_dim()],
        }
    }

    pub fn zeros_like(&self) -> Self {
        WindowAe {
            encoder: self.encoder.zeros_like(),
            decoder: self.decoder.zeros_like(),
        }
    }

    pub fn flat(&self) -> Vec<T> {
        let mut v = self.encoder.flat();
        v.extend(self.decoder.flat());
        v
    }

    pub fn set_flat(&mut self, theta: &[T]) {
        let n = self.encoder.n_params();
        self.encoder.set_flat(&theta[..n]);
        self.decoder.set_flat(&theta[n..]);
    }

    pub fn reconstruct(&self, w: &[T], ws: &mut AeWorkspace<T>) -> Vec<T> {
        let z = self.encoder.forward_into(w, &mut ws.enc);
        self.decoder.forward_into(z, &mut ws.dec).to_vec()
    }
}

fn mse<T: Real>(a: &[T], b: &[T]) -> T {
    let mut acc = T::zero();
    for (&x, &y) in a.iter().zip(b) {
        acc += (x - y) * (x - y);
    }
    acc / T::from_usize_lossy(a.len())
}

/// Mean per-window MSE over `batch`, with gradients.
pub fn ae_loss_and_grads<T: Real>(ae: &WindowAe<T>, batch: &[&[T]], ws: &mut AeWorkspace<T>) -> (T, WindowAe<T>) {
    let mut g = ae.zeros_like();
    let d = ae.dim();
    let scale = T::c(2.0) / T::from_usize_lossy(d * batch.len());
    let mut loss = T::zero();
    for w in batch {
        let z = ae.encoder.forward_into(w, &mut ws.enc);
        let y = ae.decoder.forward_into(z, &mut ws.dec);
        loss += mse(y, w);
        for j in 0..d {
            ws.dy[j] = (y[j] - w[j]) * scale;
        }
        ae.decoder.backward_accum(&mut ws.dec, &ws.dy, Some(&mut g.decoder), Some(&mut ws.dz));
        ae.encoder.backward_accum(&mut ws.enc, &ws.dz, Some(&mut g.encoder), None);
    }
    (loss / T::from_usize_lossy(batch.len()), g)
}

pub fn ae_fit<T: Real>(windows: &[&[T]], cfg: &AeConfig) -> Result<WindowAe<T>> {
    let d = check_dims(windows)?;
    if cfg.batch == 0 || cfg.latent == 0 || cfg.hidden == 0 {
        return Err(BaselineError::BadConfig("batch, latent and hidden must be positive".into()));
    }
    // canonical order, so the fit does not depend on how the caller listed windows
    let mut data: Vec<&[T]> = windows.to_vec();
    data.sort_by(|a, b| {
        a.iter()
            .zip(b.iter())
            .map(|(x, y)| x.partial_cmp(y).unwrap_or(std::cmp::Ordering::Equal))
            .find(|o| o.is_ne())
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    let mut r = substream(cfg.seed, STREAM_BASELINE);
    let mut ae = WindowAe::new(d, cfg, &mut r)?;
    let mut adam = AdamState::new(ae.encoder.n_params() + ae.decoder.n_params(), AdamConfig::with_lr(cfg.lr));
    let mut ws = ae.workspace();
    let k = cfg.batch.min(data.len());
    let mut batcher = Batcher::new(data.len());
    let mut batch: Vec<&[T]> = Vec::with_capacity(k);
    for _ in 0..cfg.steps {
        batch.clear();
        batch.extend(batcher.next(k, &mut r).iter().map(|&i| data[i]));
        let (_, g) = ae_loss_and_grads(&ae, &batch, &mut ws);
        let mut params = ae.encoder.parts_mut();
        params.extend(ae.decoder.parts_mut());
        let mut grads = g.encoder.parts();
        grads.extend(g.decoder.parts());
        adam.step_parts(params, grads)?;
    }
    Ok(ae)
}

/// Reconstruction MSE of one window.
pub fn ae_score<T: Real>(ae: &WindowAe<T>, w: &[T]) -> T {
    let mut ws = ae.workspace();
    mse(&ae.reconstruct(w, &mut ws), w)
}

impl<T: Real> WindowScorer<T> for WindowAe<T> {
    fn score_window(&self, w: &[T]) -> T {
        ae_score(self, w)
    }
}

// ---------------------------------------------------------------- static discriminator

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StaticConfig {
    pub hidden: usize,
    pub noise_dim: usize,
    pub steps: usize,
    pub batch: usize,
    pub lr_disc: f64,
    pub lr_gen: f64,
    pub seed: u64,
}

impl Default for StaticConfig {
    fn default() -> Self {
        StaticConfig {
            hidden: 64,
            noise_dim: 16,
            steps: 3000,
            batch: 128,
            lr_disc: 1e-3,
            lr_gen: 3e-4,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct StaticDisc<T> {
    pub disc: Mlp<T>,
    pub generator: Mlp<T>,
}

impl<T: Real> StaticDisc<T> {
    pub fn dim(&self) -> usize {
        self.disc.input_dim()
    }

    pub fn noise_dim(&self) -> usize {
        self.generator.input_dim()
    }

    pub fn logit(&self, w: &[T], cache: &mut Cache<T>) -> T {
        self.disc.forward_into(w, cache)[0]
    }

    pub fn generate(&self, rng: &mut StreamRng, cache: &mut Cache<T>) -> Vec<T> {
        let z: Vec<T> = (0..self.noise_dim()).map(|_| T::c(rng::std_normal(rng))).collect();
        self.generator.forward_into(&z, cache).to_vec()
    }
}

/// Discriminator BCE (real -> 1, fake -> 0) averaged over both halves, with gradients.
pub fn static_disc_loss_and_grads<T: Real>(sd: &StaticDisc<T>, real: &[&[T]], fake: &[Vec<T>]) -> (T, Mlp<T>) {
    let mut g = sd.disc.zeros_like();
    let mut c = sd.disc.new_cache();
    let n = T::from_usize_lossy(real.len() + fake.len());
    let mut loss = T::zero();
    for w in real {
        let l = sd.logit(w, &mut c);
        loss += softplus(-l);
        sd.disc.backward_accum(&mut c, &[-sigmoid(-l) / n], Some(&mut g), None);
    }
    for w in fake {
        let l = sd.logit(w, &mut c);
        loss += softplus(l);
        sd.disc.backward_accum(&mut c, &[sigmoid(l) / n], Some(&mut g), None);
    }
    (loss / n, g)
}

/// Non-saturating generator loss `mean softplus(-logit(G(z)))`, with generator gradients.
pub fn static_gen_loss_and_grads<T: Real>(sd: &StaticDisc<T>, noise: &[Vec<T>]) -> (T, Mlp<T>) {
    let mut g = sd.generator.zeros_like();
    let (mut dc, mut gc) = (sd.disc.new_cache(), sd.generator.new_cache());
    let mut dx = vec![T::zero(); sd.dim()];
    let n = T::from_usize_lossy(noise.len());
    let mut loss = T::zero();
    for z in noise {
        let fake = sd.generator.forward_into(z, &mut gc).to_vec();
        let l = sd.logit(&fake, &mut dc);
        loss += softplus(-l);
        sd.disc.backward_accum(&mut dc, &[-sigmoid(-l) / n], None, Some(&mut dx));
        sd.generator.backward_accum(&mut gc, &dx, Some(&mut g), None);
    }
    (loss / n, g)
}

fn noise_batch<T: Real>(k: usize, dim: usize, rng: &mut StreamRng) -> Vec<Vec<T>> {
    (0..k).map(|_| (0..dim).map(|_| T::c(rng::std_normal(rng))).collect()).collect()
}

pub fn static_fit<T: Real>(windows: &[&[T]], cfg: &StaticConfig) -> Result<StaticDisc<T>> {
    let d = check_dims(windows)?;
    if cfg.batch == 0 || cfg.noise_dim == 0 || cfg.hidden == 0 {
        return Err(BaselineError::BadConfig("batch, noise_dim and hidden must be positive".into()));
    }
    let mut r = substream(cfg.seed, STREAM_BASELINE);
    let mut sd = StaticDisc {
        disc: init_mlp_rng(&two_layer(d, cfg.hidden, 1), &mut r)?,
        generator: init_mlp_rng(&two_layer(cfg.noise_dim, cfg.hidden, d), &mut r)?,
    };
    let mut adam_d = AdamState::for_mlp(&sd.disc, AdamConfig::with_lr(cfg.lr_disc));
    let mut adam_g = AdamState::for_mlp(&sd.generator, AdamConfig::with_lr(cfg.lr_gen));
    let mut gc = sd.generator.new_cache();
    let k = cfg.batch.min(windows.len());
    let mut batcher = Batcher::new(windows.len());
    let mut real: Vec<&[T]> = Vec::with_capacity(k);
    for _ in 0..cfg.steps {
        real.clear();
        real.extend(batcher.next(k, &mut r).iter().map(|&i| windows[i]));
        let fake: Vec<Vec<T>> = (0..k).map(|_| sd.generate(&mut r, &mut gc)).collect();
        let (_, gd) = static_disc_loss_and_grads(&sd, &real, &fake);
        adam_d.step_parts(sd.disc.parts_mut(), gd.parts())?;

        let z = noise_batch(k, cfg.noise_dim, &mut r);
        let (_, gg) = static_gen_loss_and_grads(&sd, &z);
        adam_g.step_parts(sd.generator.parts_mut(), gg.parts())?;
    }
    Ok(sd)
}

/// `1 - D(w)`.
pub fn static_score<T: Real>(sd: &StaticDisc<T>, w: &[T]) -> T {
    let mut c = sd.disc.new_cache();
    T::one() - sigmoid(sd.logit(w, &mut c))
}

/// Discriminator BCE on real windows vs. fresh generator samples.
pub fn static_disc_loss<T: Real>(sd: &StaticDisc<T>, real: &[&[T]], rng: &mut StreamRng) -> T {
    let mut gc = sd.generator.new_cache();
    let fake: Vec<Vec<T>> = (0..real.len()).map(|_| sd.generate(rng, &mut gc)).collect();
    static_disc_loss_and_grads(sd, real, &fake).0
}

impl<T: Real> WindowScorer<T> for StaticDisc<T> {
    fn score_window(&self, w: &[T]) -> T {
        static_score(self, w)
    }
}
