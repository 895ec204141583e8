//! Reward models of healthy machinery dynamics learned by adversarial inverse
//! reinforcement learning, and fault-onset detection on top of them.
//!
//! Everything numeric is generic over [`Real`]; the aliases below pin the
//! default `f64` instantiation used by the command-line tool.

// `!(x > y)` is used on purpose so NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod airlcore;
pub mod baselines;
pub mod detector;
pub mod evalkit;
pub mod numcore;
pub mod real;
pub mod rng;
pub mod signalio;
pub mod synthrig;

pub use real::Real;

/// Default scalar.
pub type Scalar = f64;

pub type Mlp = numcore::Mlp<Scalar>;
pub type AdamState = numcore::AdamState<Scalar>;
pub type Recording = signalio::Recording<Scalar>;
pub type Normalizer = signalio::Normalizer<Scalar>;
pub type TransitionSet = signalio::TransitionSet<Scalar>;
pub type AirlModel = airlcore::AirlModel<Scalar>;
pub type GaussianPolicy = airlcore::GaussianPolicy<Scalar>;
pub type StructuredDiscriminator = airlcore::StructuredDiscriminator<Scalar>;
pub type TrainConfig = airlcore::TrainConfig<Scalar>;
pub type IsoForest = baselines::IsoForest<Scalar>;
pub type WindowAe = baselines::WindowAe<Scalar>;
pub type StaticDisc = baselines::StaticDisc<Scalar>;
