//! Hybrid photonic-classical neural networks and their architecture search.
//!
//! The crate is organised bottom-up:
//!
//! * [`tensor`] — a small dense reverse-mode autodiff engine with the layers,
//!   optimizer and learning-rate schedules the searched models need.
//! * [`photonic`] — exact simulation of a linear-optical layer: Fock bases,
//!   interferometer meshes, permanents and output distributions, with
//!   analytic gradients.
//! * [`data`] — Digits/MNIST readers, standardization, PCA and splits.
//! * [`model`] — the hybrid model assembled from a genome, its training loop,
//!   the matched classical baseline and checkpoints.
//! * [`ga`] — the genetic architecture search.
//! * [`timing`] — per-image hardware latency estimation with Monte Carlo
//!   uncertainty.
//! * [`analysis`] — correlation statistics and quantum-contribution metrics.
//!
//! Interchangeable algorithms (amplitude backends, LR schedules, depth
//! models, fitness evaluators) are looked up by name through [`registry`].

pub mod analysis;
pub mod data;
pub mod error;
pub mod ga;
pub mod model;
pub mod photonic;
pub mod registry;
pub mod rng;
pub mod tensor;
pub mod timing;

pub use error::{Error, Result};
