//! Imagination-limited Q-learning for offline reinforcement learning.
//!
//! Two fidelities share this crate:
//!
//! * [`tabular`] holds exact finite-MDP operators (Bellman, support-constrained
//!   Bellman and the imagination-limited backup) together with numerical audits
//!   of their convergence and value-gap bounds.
//! * [`agent`] is the deep learner: double critics trained on in-sample and
//!   out-of-distribution targets, where OOD targets are the minimum of a
//!   dynamics-model imagination value and a diffusion-behavior limitation value.
//!
//! The crate is `no_std` (with `alloc`) when built without the default `std`
//! feature; the `std` feature only switches numerical kernels to runtime CPU
//! dispatch.

#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

pub mod agent;
pub mod diffusion;
pub mod dynamics;
pub mod envs;
pub mod error;
pub mod nn;
pub mod real;
pub mod rng;
pub mod snapshot;
pub mod tabular;

pub use error::{Error, Result};
pub use real::Real;
