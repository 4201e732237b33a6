//! Simulation, renewal numerics and limit-theorem checks for processes with
//! regenerative increments.
//!
//! A process `Z(t)` has regenerative increments over renewal epochs
//! `T_n = xi_1 + ... + xi_n` when the pairs (cycle duration, path increment
//! over the cycle) are i.i.d. This crate simulates such processes from a
//! registry of cycle models, computes renewal-theoretic quantities
//! deterministically, and runs each limit theorem (CLT, moment convergence,
//! laws of large numbers, mean expansions, tightness) as a falsifiable
//! Monte Carlo check returning a [`theorem_suite::Verdict`].

pub mod cli;
pub mod cycle_models;
pub mod error;
pub mod estimators;
pub mod process;
pub mod renewal_numerics;
pub mod stream;
pub mod theorem_suite;

pub use cycle_models::{center_model, CycleModel, CyclePath, CycleSample, Interpolation, ModelKind};
pub use error::{RegenError, Result};
pub use stream::{Stream, StreamSeed};

/// Version string echoed into run reports.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
