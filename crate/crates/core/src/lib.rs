//! Simulation, filtering and calibration of stochastic differential equations.
//!
//! The crate covers five models (Ornstein–Uhlenbeck, OU with Gaussian jumps,
//! Black–Karasinski, Heston and Bates), Euler–Maruyama simulators for each,
//! exact-transition maximum likelihood, linear and extended Kalman filters with
//! their marginal likelihoods, and a particle extended Kalman filter.
//!
//! Every stochastic routine takes a [`RandomSource`] and is a pure function of
//! its inputs and that source.

// `!(x > 0.0)` is the idiom here because it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod kalman;
pub mod likelihood;
pub mod models;
pub mod optim;
pub mod particle;
pub mod path;
pub mod random;
pub mod stats;

pub use error::{Error, Result};
pub use models::{
    BatesParams, BkParams, HestonParams, JumpConvention, JumpParams, ModelParams, ModelTag,
    OuParams,
};
pub use path::Path;
pub use random::RandomSource;
