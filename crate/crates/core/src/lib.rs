//! Curiosity-prioritized experience replay for model-based agents in
//! changing environments.
//!
//! The numeric core ([`sumtree`], [`replay`], [`worldmodel`]) is generic over
//! a [`Scalar`](scalar::Scalar) (`f32` or `f64`). The aliases below fix it to
//! `f64`, which is what the agent and environments use.

pub mod agent;
pub mod envs;
pub mod error;
pub mod replay;
pub mod scalar;
pub mod sumtree;
pub mod worldmodel;

pub use error::{Error, Result};
pub use replay::Strategy;
pub use scalar::Scalar;

pub type SumTree = sumtree::SumTree<f64>;
pub type SumTreeF32 = sumtree::SumTree<f32>;
pub type PrioritizedBuffer = replay::PrioritizedBuffer<f64>;
pub type PrioritizedBufferF32 = replay::PrioritizedBuffer<f32>;
pub type PriorityParams = replay::PriorityParams<f64>;
pub type Transition = replay::Transition<f64>;
pub type DynamicsModel = worldmodel::DynamicsModel<f64>;
pub type DisagreementEnsemble = worldmodel::DisagreementEnsemble<f64>;
