//! Density-matrix VQE with coherent and incoherent noise, the transforms that
//! rewrite that noise as a perturbed observable, and the robustness sweeps
//! built on them.
//!
//! Modules, bottom up: [`operators`] and [`pauli`] (dense operators and
//! states), [`ansatz`] (parameterized circuits), [`noise`] (errors and
//! channels), [`equivalence`] (pushing noise to the output), [`engine`]
//! (cost, gradient, training) and [`experiments`] (problems, sweeps, fits,
//! configs and self-checks).

pub mod ansatz;
pub mod engine;
pub mod equivalence;
pub mod error;
pub mod experiments;
pub mod noise;
pub mod operators;
pub mod pauli;

pub use error::{Error, Result};
