//! Leland-type hedging of a European call under proportional transaction
//! costs in jump-diffusion models with stochastic volatility.
//!
//! The crate simulates `(S, y)` paths, prices with an enlarged volatility,
//! runs the discrete cost-adjusted hedge, evaluates the limiting trading
//! volume `Gamma` and its correctors, and drives Monte Carlo experiments.

pub mod asymptotics;
pub mod error;
pub mod experiment;
pub mod hedging;
pub mod model;
pub mod normal;
pub mod output;
pub mod pricing;
pub mod quadrature;
pub mod rng;
pub mod stats;

pub use error::{Error, Result};
