//! Shift-schedule optimization.
//!
//! Every bound here is certified by an explicit feasible schedule: the
//! optimizer can be imperfect without ever invalidating a result, because any
//! feasible (tau, beta, a) yields a true bound. The search always contains the
//! two baseline-recovering schedules, so the returned epsilon never exceeds
//! the Pareto frontier of composition and output perturbation.

mod cyclic;
mod holder;
mod smooth;
mod subsampled;
mod suffix;

pub use cyclic::{bound_cyclic_fixed, bound_cyclic_shuffled, ShuffledBound};
pub use holder::bound_holder_full;
pub use smooth::{bound_smooth_full, bound_smooth_full_with_tau};
pub use subsampled::bound_subsampled;

use crate::baselines;
use crate::config::{Strategy, ValidatedProblem};
use crate::mechanisms::MechanismError;
use crate::tracking::{self, WassersteinTrace};
use serde::Serialize;
use thiserror::Error;

/// A certifying schedule: the horizon splits at tau, and each later step
/// splits its noise budget beta_t between composition and shift reduction,
/// spending shift a_t.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ShiftSchedule {
    pub tau: usize,
    /// beta_t for t = tau..T-1; beta_t = 0 encodes a step whose noise is spent
    /// entirely on the shift (no composition charged at that step).
    pub beta: Vec<f64>,
    /// a_t for t = tau..T-1.
    pub a: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Default)]
pub struct Diagnostics {
    pub objective_evals: u64,
    pub feasibility_residual: f64,
    pub iterations: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundResult {
    pub epsilon: f64,
    pub alpha: f64,
    pub schedule: ShiftSchedule,
    pub composition: f64,
    pub output_perturbation: f64,
    pub diagnostics: Diagnostics,
}

#[derive(Debug, Error)]
pub enum OptimizerError {
    #[error(transparent)]
    Mechanism(#[from] MechanismError),
    #[error("empty sweep values")]
    EmptySweep,
    #[error("sweep T value must be a nonnegative integer, got {0}")]
    BadSweepT(f64),
    #[error("swept configuration invalid: {0}")]
    InvalidSweptConfig(String),
    #[error(transparent)]
    Trace(#[from] tracking::TraceError),
}

/// Objective value of an arbitrary full-batch schedule, without optimizing.
///
/// Degenerate rules: beta_t = 1 forbids a shift at t (infinite if a_t > 0);
/// beta_t = 0 drops the composition term and charges the full shift cost.
pub fn evaluate_forced_full_batch(problem: &ValidatedProblem, schedule: &ShiftSchedule) -> f64 {
    let scale = problem.config.alpha / (2.0 * problem.config.sigma * problem.config.sigma);
    let g = problem.full_batch_sensitivity();
    let mut total = 0.0;
    for (&beta, &a) in schedule.beta.iter().zip(&schedule.a) {
        if beta > 0.0 {
            total += g * g / beta;
        }
        if beta < 1.0 {
            total += a * a / (1.0 - beta);
        } else if a > 0.0 {
            return f64::INFINITY;
        }
    }
    scale * total
}

/// The composition-recovering schedule tau = 0, beta = 1, a = 0.
pub fn composition_schedule(t: usize) -> ShiftSchedule {
    ShiftSchedule {
        tau: 0,
        beta: vec![1.0; t],
        a: vec![0.0; t],
    }
}

/// The output-perturbation-recovering schedule: a single unsplit step at
/// T-1 absorbing the whole remaining discrepancy.
///
/// The shift must cover the discrepancy accumulated through the final step,
/// D_T, not D_{T-1}: the differing step may be the last one.
pub fn output_perturbation_schedule(trace: &WassersteinTrace, diameter: f64) -> ShiftSchedule {
    let t = trace.horizon();
    ShiftSchedule {
        tau: t.saturating_sub(1),
        beta: vec![0.0],
        a: vec![trace.values[t].min(diameter)],
    }
}

pub(crate) fn empty_result(problem: &ValidatedProblem) -> Result<BoundResult, OptimizerError> {
    Ok(BoundResult {
        epsilon: 0.0,
        alpha: problem.config.alpha,
        schedule: ShiftSchedule {
            tau: 0,
            beta: vec![],
            a: vec![],
        },
        composition: baselines::composition_bound(problem)?,
        output_perturbation: baselines::output_perturbation_bound(problem),
        diagnostics: Diagnostics::default(),
    })
}

/// Exhaustive tau scan at desk scale, coarse-to-fine beyond; unimodality in
/// tau is unproven, so every candidate evaluated is a valid bound regardless
/// of which one wins.
pub(crate) fn tau_candidates(t: usize, exhaustive_limit: usize, best_hint: Option<usize>) -> Vec<usize> {
    if t <= exhaustive_limit {
        return (0..t).collect();
    }
    let stride = t.div_ceil(exhaustive_limit / 8);
    let mut taus: Vec<usize> = (0..t).step_by(stride).collect();
    if let Some(center) = best_hint {
        let lo = center.saturating_sub(stride);
        let hi = (center + stride).min(t - 1);
        taus.extend(lo..=hi);
    }
    taus.sort_unstable();
    taus.dedup();
    taus
}

/// Dispatches to the bound matching the problem's strategy and smoothness,
/// building the corresponding tracking trace internally.
pub fn compute_bound(
    problem: &ValidatedProblem,
    num_sequences: usize,
    seed: u64,
) -> Result<BoundResult, OptimizerError> {
    let a = &problem.assumptions;
    let c = &problem.config;
    match c.strategy {
        Strategy::FullBatch => {
            if let Some(lip) = problem.update_lipschitz {
                let trace = tracking::track_full_lipschitz(
                    lip, c.eta, c.clip_k, c.n, c.diameter_d, c.t,
                );
                bound_smooth_full(problem, &trace)
            } else {
                let trace = tracking::track_full_holder(
                    a.holder_l,
                    a.holder_lambda,
                    c.eta,
                    c.clip_k,
                    c.n,
                    c.diameter_d,
                    c.t,
                );
                bound_holder_full(problem, &trace)
            }
        }
        Strategy::WoReplacement => {
            let trace = tracking::track_subsampled(
                a.holder_l,
                a.holder_lambda,
                c.eta,
                c.clip_k,
                c.b,
                c.diameter_d,
                c.t,
            );
            bound_subsampled(problem, &trace)
        }
        Strategy::ShuffledCyclic => {
            let shuffled = bound_cyclic_shuffled(problem, num_sequences, seed)?;
            Ok(shuffled.worst)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepAxis {
    T,
    Alpha,
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepRow {
    pub axis_value: f64,
    pub result: BoundResult,
    pub runtime_ms: f64,
}

/// Recomputes the bound and both baselines at each value of the chosen axis.
pub fn sweep(
    problem: &ValidatedProblem,
    axis: SweepAxis,
    values: &[f64],
    num_sequences: usize,
    seed: u64,
) -> Result<Vec<SweepRow>, OptimizerError> {
    if values.is_empty() {
        return Err(OptimizerError::EmptySweep);
    }
    let mut rows = Vec::with_capacity(values.len());
    for &value in values {
        let mut config = problem.config;
        match axis {
            SweepAxis::T => {
                if value < 0.0 || value.fract() != 0.0 || value > usize::MAX as f64 {
                    return Err(OptimizerError::BadSweepT(value));
                }
                config.t = value as usize;
            }
            SweepAxis::Alpha => config.alpha = value,
        }
        let swept = crate::config::validate(&problem.assumptions, &config).map_err(|v| {
            OptimizerError::InvalidSweptConfig(
                v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join("; "),
            )
        })?;
        let start = std::time::Instant::now();
        let result = compute_bound(&swept, num_sequences, seed)?;
        rows.push(SweepRow {
            axis_value: value,
            result,
            runtime_ms: start.elapsed().as_secs_f64() * 1e3,
        });
    }
    Ok(rows)
}
