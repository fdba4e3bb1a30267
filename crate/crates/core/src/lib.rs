//! Deterministic federated-learning simulator.
//!
//! The crate trains a small dense classifier across simulated clients holding
//! Dirichlet-skewed slices of a dataset, under three strategies:
//!
//! * size-weighted averaging (`fedavg`),
//! * the same with a proximal pull toward the broadcast model (`fedprox`),
//! * adaptive knowledge-distillation local training combined with
//!   reliability×diversity aggregation weights (`fedkper`).
//!
//! Runs are evaluated with a forgetting-oriented metric suite (recovery
//! intervals, consistency, backward-transfer forgetting, global/local
//! balance) and every experiment is a pure function of its configuration and
//! seed: reruns produce byte-identical CSV outputs, even with parallel client
//! training.

pub mod data;
pub mod error;
pub mod fl;
pub mod harness;
pub mod metrics;
pub mod nn;
pub mod rng;

pub use error::{Error, Result};
