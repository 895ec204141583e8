//! Small fully-connected networks with hand-written backprop, Adam, and a
//! central-difference gradient checker.

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::real::Real;
use crate::rng::{substream, uniform};

#[derive(Debug, Error, PartialEq)]
pub enum NumError {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimMismatch { expected: usize, got: usize },
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
}

pub type Result<T> = std::result::Result<T, NumError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Tanh,
    Identity,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LayerSpec {
    pub in_dim: usize,
    pub out_dim: usize,
    pub activation: Activation,
}

impl LayerSpec {
    pub fn new(in_dim: usize, out_dim: usize, activation: Activation) -> Self {
        LayerSpec { in_dim, out_dim, activation }
    }
}

/// `in -> hidden (tanh) -> out (identity)`.
pub fn two_layer(input: usize, hidden: usize, output: usize) -> Vec<LayerSpec> {
    vec![
        LayerSpec::new(input, hidden, Activation::Tanh),
        LayerSpec::new(hidden, output, Activation::Identity),
    ]
}

/// Dense layer; `weights` is row-major `out_dim x in_dim`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct Layer<T> {
    #[serde(flatten)]
    pub spec: LayerSpec,
    pub weights: Vec<T>,
    pub biases: Vec<T>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct Mlp<T> {
    pub layers: Vec<Layer<T>>,
}

/// Per-layer inputs and outputs of the last forward pass, plus backprop scratch.
#[derive(Debug, Clone, Default)]
pub struct Cache<T> {
    inputs: Vec<Vec<T>>,
    outputs: Vec<Vec<T>>,
    delta: Vec<T>,
    delta_prev: Vec<T>,
}

impl<T: Real> Cache<T> {
    pub fn output(&self) -> &[T] {
        self.outputs.last().map(|v| v.as_slice()).unwrap_or(&[])
    }
}

fn check_chain(specs: &[LayerSpec]) -> Result<()> {
    if specs.is_empty() {
        return Err(NumError::ShapeMismatch("no layers".into()));
    }
    for s in specs {
        if s.in_dim == 0 || s.out_dim == 0 {
            return Err(NumError::ShapeMismatch("zero-sized layer".into()));
        }
    }
    for p in specs.windows(2) {
        if p[0].out_dim != p[1].in_dim {
            return Err(NumError::DimMismatch {
                expected: p[0].out_dim,
                got: p[1].in_dim,
            });
        }
    }
    Ok(())
}

/// Xavier-uniform weights, zero biases.
pub fn init_mlp<T: Real>(specs: &[LayerSpec], seed: u64) -> Result<Mlp<T>> {
    init_mlp_rng(specs, &mut substream(seed, 0))
}

pub fn init_mlp_rng<T: Real, R: Rng + ?Sized>(specs: &[LayerSpec], rng: &mut R) -> Result<Mlp<T>> {
    check_chain(specs)?;
    let layers = specs
        .iter()
        .map(|&spec| {
            let bound = (6.0 / (spec.in_dim + spec.out_dim) as f64).sqrt();
            let weights = (0..spec.in_dim * spec.out_dim)
                .map(|_| T::c((2.0 * uniform(rng) - 1.0) * bound))
                .collect();
            Layer {
                spec,
                weights,
                biases: vec![T::zero(); spec.out_dim],
            }
        })
        .collect();
    Ok(Mlp { layers })
}

impl<T: Real> Mlp<T> {
    pub fn specs(&self) -> Vec<LayerSpec> {
        self.layers.iter().map(|l| l.spec).collect()
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].spec.in_dim
    }

    pub fn output_dim(&self) -> usize {
        self.layers[self.layers.len() - 1].spec.out_dim
    }

    /// Checks the chain of dims and that buffers match the specs.
    pub fn validate(&self) -> Result<()> {
        check_chain(&self.specs())?;
        for (i, l) in self.layers.iter().enumerate() {
            if l.weights.len() != l.spec.in_dim * l.spec.out_dim || l.biases.len() != l.spec.out_dim {
                return Err(NumError::ShapeMismatch(format!("layer {i} buffers do not match spec")));
            }
            if l.weights.iter().chain(&l.biases).any(|v| !v.is_finite()) {
                return Err(NumError::ShapeMismatch(format!("layer {i} has non-finite entries")));
            }
        }
        Ok(())
    }

    /// Same shape, all zeros. Used as a gradient accumulator.
    pub fn zeros_like(&self) -> Mlp<T> {
        Mlp {
            layers: self
                .layers
                .iter()
                .map(|l| Layer {
                    spec: l.spec,
                    weights: vec![T::zero(); l.weights.len()],
                    biases: vec![T::zero(); l.biases.len()],
                })
                .collect(),
        }
    }

    pub fn fill_zero(&mut self) {
        for v in self.parts_mut() {
            v.iter_mut().for_each(|x| *x = T::zero());
        }
    }

    pub fn n_params(&self) -> usize {
        self.layers.iter().map(|l| l.weights.len() + l.biases.len()).sum()
    }

    /// Parameter buffers in a fixed order (w0, b0, w1, b1, ...).
    pub fn parts(&self) -> Vec<&[T]> {
        self.layers.iter().flat_map(|l| [l.weights.as_slice(), l.biases.as_slice()]).collect()
    }

    pub fn parts_mut(&mut self) -> Vec<&mut [T]> {
        self.layers
            .iter_mut()
            .flat_map(|l| [l.weights.as_mut_slice(), l.biases.as_mut_slice()])
            .collect()
    }

    pub fn flat(&self) -> Vec<T> {
        self.parts().concat()
    }

    pub fn set_flat(&mut self, theta: &[T]) {
        assert_eq!(theta.len(), self.n_params());
        let mut off = 0;
        for p in self.parts_mut() {
            let n = p.len();
            p.copy_from_slice(&theta[off..off + n]);
            off += n;
        }
    }

    pub fn scale(&mut self, k: T) {
        for p in self.parts_mut() {
            p.iter_mut().for_each(|x| *x *= k);
        }
    }

    pub fn add_assign(&mut self, other: &Mlp<T>) {
        for (p, q) in self.parts_mut().into_iter().zip(other.parts()) {
            p.iter_mut().zip(q).for_each(|(a, &b)| *a += b);
        }
    }

    pub fn new_cache(&self) -> Cache<T> {
        Cache {
            inputs: self.layers.iter().map(|l| vec![T::zero(); l.spec.in_dim]).collect(),
            outputs: self.layers.iter().map(|l| vec![T::zero(); l.spec.out_dim]).collect(),
            delta: Vec::new(),
            delta_prev: Vec::new(),
        }
    }

    /// Forward pass into a reusable cache. Panics on a size mismatch.
    pub fn forward_into<'c>(&self, x: &[T], cache: &'c mut Cache<T>) -> &'c [T] {
        assert_eq!(x.len(), self.input_dim(), "input dim");
        if cache.inputs.len() != self.layers.len() {
            *cache = self.new_cache();
        }
        cache.inputs[0].copy_from_slice(x);
        for (li, l) in self.layers.iter().enumerate() {
            if li > 0 {
                cache.inputs[li].copy_from_slice(&cache.outputs[li - 1]);
            }
            let input = &cache.inputs[li];
            let out = &mut cache.outputs[li];
            let n_in = l.spec.in_dim;
            for (o, y) in out.iter_mut().enumerate() {
                let row = &l.weights[o * n_in..(o + 1) * n_in];
                let mut z = l.biases[o];
                for (w, xi) in row.iter().zip(input) {
                    z += *w * *xi;
                }
                *y = match l.spec.activation {
                    Activation::Tanh => z.tanh(),
                    Activation::Identity => z,
                };
            }
        }
        cache.output()
    }

    pub fn forward(&self, x: &[T]) -> Result<(Vec<T>, Cache<T>)> {
        if x.len() != self.input_dim() {
            return Err(NumError::DimMismatch {
                expected: self.input_dim(),
                got: x.len(),
            });
        }
        let mut cache = self.new_cache();
        let y = self.forward_into(x, &mut cache).to_vec();
        Ok((y, cache))
    }

    /// Output only.
    pub fn eval(&self, x: &[T], cache: &mut Cache<T>) -> Vec<T> {
        self.forward_into(x, cache).to_vec()
    }

    /// Adds the gradient of `y . dy` into `grads` (if given); writes the input gradient into `dx` (if given).
    pub fn backward_accum(&self, cache: &mut Cache<T>, dy: &[T], mut grads: Option<&mut Mlp<T>>, dx: Option<&mut [T]>) {
        assert_eq!(dy.len(), self.output_dim(), "output dim");
        let Cache {
            inputs,
            outputs,
            delta,
            delta_prev,
        } = cache;
        delta.clear();
        delta.extend_from_slice(dy);
        for li in (0..self.layers.len()).rev() {
            let l = &self.layers[li];
            let n_in = l.spec.in_dim;
            if l.spec.activation == Activation::Tanh {
                for (d, y) in delta.iter_mut().zip(&outputs[li]) {
                    *d *= T::one() - *y * *y;
                }
            }
            if let Some(g) = grads.as_deref_mut() {
                let g = &mut g.layers[li];
                let input = &inputs[li];
                for (o, &d) in delta.iter().enumerate() {
                    g.biases[o] += d;
                    let grow = &mut g.weights[o * n_in..(o + 1) * n_in];
                    for (gw, xi) in grow.iter_mut().zip(input) {
                        *gw += d * *xi;
                    }
                }
            }
            if li == 0 && dx.is_none() {
                break;
            }
            delta_prev.clear();
            delta_prev.resize(n_in, T::zero());
            for (o, &d) in delta.iter().enumerate() {
                let row = &l.weights[o * n_in..(o + 1) * n_in];
                for (p, w) in delta_prev.iter_mut().zip(row) {
                    *p += *w * d;
                }
            }
            std::mem::swap(delta, delta_prev);
        }
        if let Some(dx) = dx {
            dx.copy_from_slice(delta);
        }
    }

    pub fn backward(&self, cache: &Cache<T>, dy: &[T]) -> Result<(Mlp<T>, Vec<T>)> {
        if dy.len() != self.output_dim() {
            return Err(NumError::ShapeMismatch(format!(
                "dy has {} entries, network outputs {}",
                dy.len(),
                self.output_dim()
            )));
        }
        if cache.inputs.len() != self.layers.len()
            || cache.inputs.iter().zip(&self.layers).any(|(x, l)| x.len() != l.spec.in_dim)
        {
            return Err(NumError::ShapeMismatch("cache does not belong to this network".into()));
        }
        let mut grads = self.zeros_like();
        let mut dx = vec![T::zero(); self.input_dim()];
        let mut c = cache.clone();
        self.backward_accum(&mut c, dy, Some(&mut grads), Some(&mut dx));
        Ok((grads, dx))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            lr: 3e-4,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

impl AdamConfig {
    pub fn with_lr(lr: f64) -> Self {
        AdamConfig { lr, ..Self::default() }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdamState<T> {
    pub m: Vec<T>,
    pub v: Vec<T>,
    pub t: u64,
    pub cfg: AdamConfig,
}

impl<T: Real> AdamState<T> {
    pub fn new(n_params: usize, cfg: AdamConfig) -> Self {
        AdamState {
            m: vec![T::zero(); n_params],
            v: vec![T::zero(); n_params],
            t: 0,
            cfg,
        }
    }

    pub fn for_mlp(mlp: &Mlp<T>, cfg: AdamConfig) -> Self {
        Self::new(mlp.n_params(), cfg)
    }

    /// One bias-corrected update over parameter buffers laid end to end.
    pub fn step_parts(&mut self, params: Vec<&mut [T]>, grads: Vec<&[T]>) -> Result<()> {
        let n: usize = params.iter().map(|p| p.len()).sum();
        let ng: usize = grads.iter().map(|g| g.len()).sum();
        if n != self.m.len() || ng != n || params.len() != grads.len() {
            return Err(NumError::ShapeMismatch(format!(
                "adam state has {} slots, params {n}, grads {ng}",
                self.m.len()
            )));
        }
        self.t += 1;
        let c = &self.cfg;
        let (b1, b2) = (T::c(c.beta1), T::c(c.beta2));
        let bc1 = T::one() - T::c(c.beta1.powf(self.t as f64));
        let bc2 = T::one() - T::c(c.beta2.powf(self.t as f64));
        let (lr, eps) = (T::c(c.lr), T::c(c.eps));
        let mut off = 0;
        for (p, g) in params.into_iter().zip(grads) {
            if p.len() != g.len() {
                return Err(NumError::ShapeMismatch("param/grad buffer length".into()));
            }
            for (i, (x, &gi)) in p.iter_mut().zip(g).enumerate() {
                let k = off + i;
                self.m[k] = b1 * self.m[k] + (T::one() - b1) * gi;
                self.v[k] = b2 * self.v[k] + (T::one() - b2) * gi * gi;
                let mh = self.m[k] / bc1;
                let vh = self.v[k] / bc2;
                *x -= lr * mh / (vh.sqrt() + eps);
            }
            off += p.len();
        }
        Ok(())
    }
}

pub fn adam_step<T: Real>(params: &mut Mlp<T>, grads: &Mlp<T>, state: &mut AdamState<T>) -> Result<()> {
    if params.specs() != grads.specs() {
        return Err(NumError::ShapeMismatch("grads do not match params".into()));
    }
    state.step_parts(params.parts_mut(), grads.parts())
}

/// Central differences over every coordinate of `theta`.
///
/// `f` returns the loss and its analytic gradient at the given point; the
/// result is `|analytic - numeric| / max(1, |numeric|)` per coordinate.
pub fn grad_check_errors<T: Real, F>(theta: &[T], mut f: F, eps: T) -> Vec<T>
where
    F: FnMut(&[T]) -> (T, Vec<T>),
{
    let (_, analytic) = f(theta);
    assert_eq!(analytic.len(), theta.len());
    let mut x = theta.to_vec();
    let two = T::c(2.0);
    let mut errs = Vec::with_capacity(x.len());
    for i in 0..x.len() {
        let orig = x[i];
        x[i] = orig + eps;
        let (lp, _) = f(&x);
        x[i] = orig - eps;
        let (lm, _) = f(&x);
        x[i] = orig;
        let num = (lp - lm) / (two * eps);
        errs.push((analytic[i] - num).abs() / T::one().max(num.abs()));
    }
    errs
}

/// Worst coordinate of [`grad_check_errors`]; NaN propagates.
pub fn max_error<T: Real>(errs: &[T]) -> T {
    let mut worst = T::zero();
    for &e in errs {
        if e.is_nan() {
            return e;
        }
        worst = worst.max(e);
    }
    worst
}

pub fn grad_check_flat<T: Real, F>(theta: &[T], f: F, eps: T) -> T
where
    F: FnMut(&[T]) -> (T, Vec<T>),
{
    max_error(&grad_check_errors(theta, f, eps))
}

/// Gradient check of a scalar loss of a network's parameters at input `x`.
pub fn grad_check<T: Real, F>(params: &Mlp<T>, x: &[T], loss: F, eps: T) -> T
where
    F: Fn(&Mlp<T>, &[T]) -> (T, Mlp<T>),
{
    let mut work = params.clone();
    grad_check_flat(
        &params.flat(),
        |theta| {
            work.set_flat(theta);
            let (l, g) = loss(&work, x);
            (l, g.flat())
        },
        eps,
    )
}

/// Loss `sum_j w_j y_j` for fixed random weights; the workhorse of the checks below.
pub fn projection_loss<T: Real>(net: &Mlp<T>, x: &[T], w: &[T]) -> (T, Mlp<T>) {
    let (y, cache) = net.forward(x).expect("input dim");
    let l = y.iter().zip(w).fold(T::zero(), |s, (a, b)| s + *a * *b);
    let (g, _) = net.backward(&cache, w).expect("output dim");
    (l, g)
}
