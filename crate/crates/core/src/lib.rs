//! Exact mean and variance of discounted quadratic costs of continuous-time
//! linear systems driven by Gaussian white noise, LQG closed-loop synthesis,
//! and a Monte Carlo simulator used as an independent check.
//!
//! The cost `J_T = int_0^T e^{2 alpha t} x^T Q x dt` of `x' = A x + v` is
//! evaluated either through Lyapunov-equation solutions ([`cost_lyap`]) or
//! through a single block matrix exponential ([`cost_expm`]);
//! [`cost_expm::auto_cost_stats`] picks between them.

pub mod cost_expm;
pub mod cost_lyap;
pub mod error;
pub mod gaussian_moments;
pub mod linalg;
pub mod monte_carlo;
pub mod lqg;
pub mod state_moments;
pub mod tuner;

pub use cost_expm::{auto_cost_stats, cost_stats_expm};
pub use cost_lyap::{CostSpec, CostStats, Horizon, Method};
pub use error::{ConditionCheck, Error, Result};
pub use linalg::{Matrix, Vector};
pub use lqg::{GainPair, LqgPlant};
pub use state_moments::LtiSystem;
