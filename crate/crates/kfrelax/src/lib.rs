//! RELAX/LAX gradient estimation with Kronecker-factored natural-gradient
//! surrogate training.
//!
//! The crate provides the numeric building blocks for low-variance gradient
//! estimation of expectations over discrete (and continuous) random
//! variables:
//!
//! * [`linalg`] — minimal dense linear algebra (damped SPD inversion,
//!   Kronecker products for oracles);
//! * [`mlp`] — a small fixed-architecture perceptron with reverse,
//!   forward-tangent and double-backprop passes;
//! * [`sample`] — a seeded generator plus relaxed / conditional-relaxed
//!   sampling for Bernoulli and categorical variables;
//! * [`estimators`] — REINFORCE, LAX and RELAX estimators for the synthetic
//!   Bernoulli problem and a continuous demo, plus the surrogate
//!   variance-objective gradient;
//! * [`kfac`] — per-layer Kronecker-factored curvature state and the damped
//!   natural-gradient step;
//! * [`optim`] — SGD and Adam;
//! * [`envs`] — CartPole and Acrobot re-implementations;
//! * [`rl`] — categorical policies, trajectory collection with relaxed-sample
//!   recording, the RL RELAX gradient, and tabular-MDP checks of the
//!   compatible-approximation lemmas;
//! * [`measure`] — Monte-Carlo estimator mean/variance measurement.
//!
//! The crate is `no_std`-compatible (with `alloc`); disable the default
//! `std` feature to build without the standard library.

#![cfg_attr(not(feature = "std"), no_std)]
#![deny(unsafe_code)]
// Per-layer loops index several parallel arrays at once; the explicit index
// form reads better than zipped iterators there.
#![allow(clippy::needless_range_loop)]

extern crate alloc;

pub(crate) mod math;

pub mod envs;
pub mod estimators;
pub mod kfac;
pub mod linalg;
pub mod measure;
pub mod mlp;
pub mod optim;
pub mod rl;
pub mod sample;

pub use linalg::{Matrix, Vector};
pub use sample::Rng;
