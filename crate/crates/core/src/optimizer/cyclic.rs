//! Shuffled cyclic mini-batch bounds.
//!
//! For a fixed batch sequence only the steps that encounter the differing
//! datapoint carry a composition term; every other step runs with beta = 0
//! and spends its whole noise budget on the shift. The shuffled aggregate is
//! a log-mean-exp over sampled (or exhaustively enumerated) encounter
//! profiles, reported as an estimate alongside the certified worst case.

use super::suffix::{optimize_suffix, SuffixSolution};
use super::{
    empty_result, output_perturbation_schedule, tau_candidates, BoundResult, Diagnostics,
    OptimizerError, ShiftSchedule,
};
use crate::baselines;
use crate::config::ValidatedProblem;
use crate::maps::GrowthMap;
use crate::tracking::{track_cyclic, WassersteinTrace};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

/// Bound for one realized sequence of encounter times.
pub fn bound_cyclic_fixed(
    problem: &ValidatedProblem,
    encounter_times: &[usize],
    trace: &WassersteinTrace,
) -> Result<BoundResult, OptimizerError> {
    let cfg = &problem.config;
    let t = cfg.t;
    if t == 0 {
        return empty_result(problem);
    }
    debug_assert_eq!(trace.horizon(), t);
    let g = problem.batch_sensitivity();
    let scale = cfg.alpha / (2.0 * cfg.sigma * cfg.sigma);
    let d = cfg.diameter_d;
    let map = GrowthMap::new(
        cfg.eta * problem.assumptions.holder_l,
        problem.assumptions.holder_lambda,
    );
    let mut is_enc = vec![false; t];
    for &e in encounter_times {
        if e < t {
            is_enc[e] = true;
        }
    }

    let taus = tau_candidates(t, 128, None);
    let solutions: Vec<(usize, SuffixSolution)> = taus
        .par_iter()
        .map(|&tau| {
            let enc = &is_enc[tau..];
            let cost = move |shifts: &[f64]| -> f64 {
                shifts
                    .iter()
                    .zip(enc)
                    .map(|(&a, &hit)| {
                        if hit {
                            (g + a) * (g + a)
                        } else {
                            a * a
                        }
                    })
                    .sum()
            };
            (
                tau,
                optimize_suffix(t - tau, trace.values[tau].min(d), &map, &cost),
            )
        })
        .collect();

    let mut evals = 0u64;
    let mut iters = 0u64;
    let mut best: Option<(f64, usize, &SuffixSolution)> = None;
    for (tau, sol) in &solutions {
        evals += sol.evals;
        iters += sol.iters;
        if best.map_or(true, |(b, _, _)| sol.cost < b) {
            best = Some((sol.cost, *tau, sol));
        }
    }
    let (cost, tau, sol) = best.expect("at least one tau candidate");
    let mut epsilon = scale * cost;
    let beta = sol
        .a
        .iter()
        .zip(&is_enc[tau..])
        .map(|(&a, &hit)| {
            if hit {
                g / (g + a)
            } else {
                0.0
            }
        })
        .collect();
    let mut schedule = ShiftSchedule {
        tau,
        beta,
        a: sol.a.clone(),
    };
    let mut residual = sol.residual;

    let op = output_perturbation_schedule(trace, d);
    let op_eps = scale * op.a[0] * op.a[0];
    if op_eps < epsilon {
        epsilon = op_eps;
        schedule = op;
        residual = 0.0;
    }

    Ok(BoundResult {
        epsilon,
        alpha: cfg.alpha,
        schedule,
        composition: baselines::composition_bound(problem)?,
        output_perturbation: baselines::output_perturbation_bound(problem),
        diagnostics: Diagnostics {
            objective_evals: evals,
            feasibility_residual: residual,
            iterations: iters,
        },
    })
}

/// Aggregate over encounter profiles.
#[derive(Debug, Clone, Serialize)]
pub struct ShuffledBound {
    /// Log-mean-exp aggregate in (alpha-1) scale; a Monte-Carlo estimate
    /// unless `exhaustive` is set, in which case it is the exact expectation.
    pub estimate: f64,
    /// Certified bound for the worst sampled/enumerated profile.
    pub worst: BoundResult,
    pub exhaustive: bool,
    pub num_sequences: usize,
    pub seed: u64,
}

fn encounters_from_positions(positions: &[usize], steps_per_epoch: usize, t: usize) -> Vec<usize> {
    positions
        .iter()
        .enumerate()
        .filter_map(|(epoch, &u)| {
            let step = epoch * steps_per_epoch + u;
            (step < t).then_some(step)
        })
        .collect()
}

/// Shuffled cyclic bound: each epoch places the differing point uniformly
/// among its batches. Enumerates all profiles when there are at most 10^4,
/// otherwise samples with the given seed.
pub fn bound_cyclic_shuffled(
    problem: &ValidatedProblem,
    num_sequences: usize,
    seed: u64,
) -> Result<ShuffledBound, OptimizerError> {
    let cfg = &problem.config;
    let a = &problem.assumptions;
    let t = cfg.t;
    if t == 0 {
        return Ok(ShuffledBound {
            estimate: 0.0,
            worst: empty_result(problem)?,
            exhaustive: true,
            num_sequences: 0,
            seed,
        });
    }
    let spe = cfg.n / cfg.b;
    let epochs = t.div_ceil(spe);
    let total_profiles = (spe as f64).powi(epochs as i32);
    let exhaustive = total_profiles <= 1e4;

    let profiles: Vec<Vec<usize>> = if exhaustive {
        let count = total_profiles as usize;
        (0..count)
            .map(|mut idx| {
                (0..epochs)
                    .map(|_| {
                        let u = idx % spe;
                        idx /= spe;
                        u
                    })
                    .collect()
            })
            .collect()
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..num_sequences.max(1))
            .map(|_| (0..epochs).map(|_| rng.gen_range(0..spe)).collect())
            .collect()
    };

    let results: Vec<BoundResult> = profiles
        .par_iter()
        .map(|positions| {
            let enc = encounters_from_positions(positions, spe, t);
            let trace = track_cyclic(
                a.holder_l,
                a.holder_lambda,
                cfg.eta,
                cfg.clip_k,
                cfg.b,
                cfg.diameter_d,
                t,
                &enc,
            )?;
            bound_cyclic_fixed(problem, &enc, &trace)
        })
        .collect::<Result<_, _>>()?;

    let am1 = cfg.alpha - 1.0;
    let max_x = results
        .iter()
        .map(|r| am1 * r.epsilon)
        .fold(f64::NEG_INFINITY, f64::max);
    let mean: f64 = results
        .iter()
        .map(|r| (am1 * r.epsilon - max_x).exp())
        .sum::<f64>()
        / results.len() as f64;
    let estimate = (max_x + mean.ln()) / am1;

    let worst = results
        .iter()
        .max_by(|x, y| x.epsilon.partial_cmp(&y.epsilon).unwrap())
        .expect("at least one profile")
        .clone();

    Ok(ShuffledBound {
        estimate,
        worst,
        exhaustive,
        num_sequences: results.len(),
        seed,
    })
}
