//! Policies for a small electricity consumer facing a coincident-peak (CP)
//! charge: over a billing horizon of `T` rounds the consumer earns revenue
//! `g(x_t)` per round and pays `cp_rate * x_t*` at the single round `t*`
//! where the system load peaks, while ramp constraints couple consecutive
//! consumption choices.
//!
//! The crate provides three policy families plus the shared machinery to
//! train and evaluate them:
//!
//! * [`reward::naive_consumption`] — the constant benchmark that amortizes
//!   the charge across rounds;
//! * [`oracle`] — an exact-up-to-discretization backward-induction solution
//!   on a (consumption, observed-max) grid, the ground truth at small `T`;
//! * [`neural`] — a small sigmoid network trained on Monte Carlo rollout
//!   targets produced by [`sampler`].
//!
//! All numerics are generic over the scalar type via [`num::Real`]
//! (`f32` or `f64`); the `*64` aliases below fix the default precision used
//! by the file formats and the CLI.

pub mod config;
pub mod domain;
pub mod error;
pub mod eval;
pub mod neural;
pub mod num;
pub mod oracle;
pub mod reward;
pub mod roots;
pub mod sampler;

pub use error::{Error, Result};
pub use num::Real;

/// Default-precision aliases; every file format stores 64-bit values.
pub type ScenarioConfig64 = domain::ScenarioConfig<f64>;
pub type ScenarioParams64 = domain::ScenarioParams<f64>;
pub type RevenueFunction64 = domain::RevenueFunction<f64>;
pub type LoadModel64 = domain::LoadModel<f64>;
pub type EpisodeTrace64 = reward::EpisodeTrace<f64>;
pub type PolicyTable64 = oracle::PolicyTable<f64>;
pub type TrainingSample64 = sampler::TrainingSample<f64>;
pub type MlpPolicy64 = neural::MlpPolicy<f64>;
pub type PolicyHandle64 = eval::PolicyHandle<f64>;
