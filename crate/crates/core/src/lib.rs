//! Rényi-DP accounting for the last iterate of projected Noisy-SGD over a
//! bounded domain.
//!
//! Only the final iterate is released, so the privacy loss converges: after a
//! burn-in period, additional iterations cost nothing. The accountant tracks a
//! forward infinite-Wasserstein distance between adjacent processes, then
//! optimizes a shift schedule that certifies the Rényi divergence of the last
//! iterates. Smooth, (strongly) convex, and Hölder-continuous-gradient losses
//! are supported under full-batch, without-replacement, and shuffled cyclic
//! mini-batch strategies.
//!
//! The `oracle` module provides independent numerical verification: an exact
//! 1-D density-propagation engine, a coupled-trajectory Wasserstein checker,
//! and an analytic Hölder-constant estimator.

pub mod baselines;
pub mod cli;
pub mod config;
pub mod maps;
pub mod mechanisms;
pub mod optimizer;
pub mod oracle;
pub mod tracking;

pub use config::{Convexity, LossAssumptions, SgdConfig, Strategy, ValidatedProblem};
pub use maps::GrowthMap;
pub use optimizer::{BoundResult, ShiftSchedule};
pub use tracking::WassersteinTrace;
