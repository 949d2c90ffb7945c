//! Forward infinite-Wasserstein distance recursions.
//!
//! Each tracker produces the sequence D_0..D_T upper-bounding the W-infinity
//! distance between the adjacent Noisy-SGD processes under a batch strategy
//! and loss class. The stored values are clipped at the domain diameter at
//! every step; only min(D_t, D) is ever consumed downstream.

use crate::maps::GrowthMap;
use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum TraceStrategy {
    FullLipschitz,
    FullHolder,
    Subsampled,
    Cyclic,
}

/// The sequence D_0..D_T of W-infinity upper bounds, clipped at the diameter.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WassersteinTrace {
    pub values: Vec<f64>,
    pub strategy: TraceStrategy,
    /// Realized encounter times of the differing datapoint, cyclic only.
    pub encounter_times: Option<Vec<usize>>,
}

#[derive(Debug, Error, PartialEq)]
pub enum TraceError {
    #[error("encounter times must be strictly increasing and lie in [0, T): {0}")]
    MalformedEncounters(String),
}

impl WassersteinTrace {
    pub fn horizon(&self) -> usize {
        self.values.len() - 1
    }

    /// Two-column CSV body (t, D_t).
    pub fn to_csv(&self) -> String {
        let mut out = String::from("t,d_t\n");
        for (t, v) in self.values.iter().enumerate() {
            out.push_str(&format!("{t},{v:.11e}\n"));
        }
        out
    }
}

fn run_recursion(
    expand: impl Fn(f64) -> f64,
    increment: f64,
    worst_increment: f64,
    diameter: f64,
    horizon: usize,
) -> Vec<f64> {
    let mut values = Vec::with_capacity(horizon + 1);
    values.push(0.0);
    let mut d = 0.0_f64;
    for _ in 0..horizon {
        d = (expand(d) + increment)
            .min(d + worst_increment)
            .min(diameter);
        values.push(d);
    }
    values
}

/// Lipschitz full-batch recursion: D_t = min(c D_{t-1} + 2 eta K / n, D_{t-1} + 2 eta K, D).
pub fn track_full_lipschitz(
    c: f64,
    eta: f64,
    clip_k: f64,
    n: usize,
    diameter: f64,
    horizon: usize,
) -> WassersteinTrace {
    let step = 2.0 * eta * clip_k;
    WassersteinTrace {
        values: run_recursion(|d| c * d, step / n as f64, step, diameter, horizon),
        strategy: TraceStrategy::FullLipschitz,
        encounter_times: None,
    }
}

/// Hölder full-batch recursion, with g(.; eta L) replacing the linear map.
pub fn track_full_holder(
    l: f64,
    lambda: f64,
    eta: f64,
    clip_k: f64,
    n: usize,
    diameter: f64,
    horizon: usize,
) -> WassersteinTrace {
    let g = GrowthMap::new(eta * l, lambda);
    let step = 2.0 * eta * clip_k;
    WassersteinTrace {
        values: run_recursion(
            |d| g.eval_unchecked(d),
            step / n as f64,
            step,
            diameter,
            horizon,
        ),
        strategy: TraceStrategy::FullHolder,
        encounter_times: None,
    }
}

/// Without-replacement recursion: effective constant eta L (b-1)/b and
/// increment 2 eta K / b.
pub fn track_subsampled(
    l: f64,
    lambda: f64,
    eta: f64,
    clip_k: f64,
    b: usize,
    diameter: f64,
    horizon: usize,
) -> WassersteinTrace {
    let l_eff = eta * l * (b as f64 - 1.0) / b as f64;
    let g = GrowthMap::new(l_eff, lambda);
    let step = 2.0 * eta * clip_k;
    WassersteinTrace {
        values: run_recursion(
            |d| g.eval_unchecked(d),
            step / b as f64,
            step,
            diameter,
            horizon,
        ),
        strategy: TraceStrategy::Subsampled,
        encounter_times: None,
    }
}

/// Shuffled cyclic recursion with the realized encounter times of the
/// differing datapoint, one per epoch.
pub fn track_cyclic(
    l: f64,
    lambda: f64,
    eta: f64,
    clip_k: f64,
    b: usize,
    diameter: f64,
    horizon: usize,
    encounter_times: &[usize],
) -> Result<WassersteinTrace, TraceError> {
    for w in encounter_times.windows(2) {
        if w[0] >= w[1] {
            return Err(TraceError::MalformedEncounters(format!("{encounter_times:?}")));
        }
    }
    if let Some(&last) = encounter_times.last() {
        if last >= horizon {
            return Err(TraceError::MalformedEncounters(format!(
                "encounter {last} not before horizon {horizon}"
            )));
        }
    }

    let g_batch = GrowthMap::new(eta * l * (b as f64 - 1.0) / b as f64, lambda);
    let g_full = GrowthMap::new(eta * l, lambda);
    let step = 2.0 * eta * clip_k;
    let batch_incr = step / b as f64;

    let mut values = Vec::with_capacity(horizon + 1);
    values.push(0.0);
    let mut d = 0.0_f64;
    let first = encounter_times.first().copied();
    let is_later_encounter = |t: usize| encounter_times.iter().skip(1).any(|&e| e == t);
    for t in 1..=horizon {
        d = match first {
            None => 0.0,
            Some(t0) if t <= t0 => 0.0,
            Some(t0) if t == t0 + 1 => batch_incr.min(diameter),
            _ if is_later_encounter(t - 1) => (g_batch.eval_unchecked(d) + batch_incr)
                .min(d + step)
                .min(diameter),
            _ => g_full.eval_unchecked(d).min(d + step).min(diameter),
        };
        values.push(d);
    }
    Ok(WassersteinTrace {
        values,
        strategy: TraceStrategy::Cyclic,
        encounter_times: Some(encounter_times.to_vec()),
    })
}
