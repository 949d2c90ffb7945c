//! Without-replacement mini-batch bound.
//!
//! Per-step composition cost is the sampled Gaussian mechanism
//! S_alpha(b/n, beta_t sigma b / (2 eta K)); since no closed-form beta
//! elimination exists, each step picks the best beta from a fixed log-spaced
//! grid of exactly evaluated S_alpha values during the search (a grid point is
//! itself a valid schedule choice, so no interpolation error enters the
//! bound), then the winner's betas are refined by golden section on the exact
//! quadrature.

use super::suffix::{optimize_suffix, SuffixSolution};
use super::{
    empty_result, output_perturbation_schedule, tau_candidates, BoundResult, Diagnostics,
    OptimizerError, ShiftSchedule,
};
use crate::baselines;
use crate::config::ValidatedProblem;
use crate::maps::GrowthMap;
use crate::mechanisms::sgm_renyi;
use crate::tracking::WassersteinTrace;
use rayon::prelude::*;

const BETA_GRID: usize = 48;
const BETA_MIN: f64 = 1e-4;

struct StepModel {
    betas: Vec<f64>,
    sgm: Vec<f64>,
    scale: f64,
}

impl StepModel {
    fn build(problem: &ValidatedProblem) -> Result<Self, OptimizerError> {
        let cfg = &problem.config;
        let q = cfg.b as f64 / cfg.n as f64;
        let noise_base = cfg.sigma * cfg.b as f64 / (2.0 * cfg.eta * cfg.clip_k);
        let ln_min = BETA_MIN.ln();
        let betas: Vec<f64> = (0..BETA_GRID)
            .map(|j| {
                if j == BETA_GRID - 1 {
                    1.0
                } else {
                    (ln_min * (1.0 - j as f64 / (BETA_GRID - 1) as f64)).exp()
                }
            })
            .collect();
        let sgm = betas
            .iter()
            .map(|&beta| sgm_renyi(cfg.alpha, q, beta * noise_base))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Self {
            betas,
            sgm,
            scale: cfg.alpha / (2.0 * cfg.sigma * cfg.sigma),
        })
    }

    /// Best per-step cost and the beta achieving it.
    fn step(&self, a: f64) -> (f64, f64) {
        let mut best = (f64::INFINITY, 1.0);
        for (&beta, &s) in self.betas.iter().zip(&self.sgm) {
            let shift = if beta < 1.0 {
                self.scale * a * a / (1.0 - beta)
            } else if a > 0.0 {
                continue;
            } else {
                0.0
            };
            let total = s + shift;
            if total < best.0 {
                best = (total, beta);
            }
        }
        best
    }

    /// Exact golden-section refinement of one step's beta.
    fn refine(&self, problem: &ValidatedProblem, a: f64) -> (f64, f64) {
        let (mut best_cost, mut best_beta) = self.step(a);
        if a == 0.0 {
            return (best_cost, best_beta);
        }
        let cfg = &problem.config;
        let q = cfg.b as f64 / cfg.n as f64;
        let noise_base = cfg.sigma * cfg.b as f64 / (2.0 * cfg.eta * cfg.clip_k);
        let mut lo = (best_beta / 3.0).max(BETA_MIN);
        let mut hi = (best_beta * 3.0).min(1.0 - 1e-12);
        for _ in 0..30 {
            let x1 = hi - 0.618_033_988_749_894_9 * (hi - lo);
            let x2 = lo + 0.618_033_988_749_894_9 * (hi - lo);
            let f = |beta: f64| -> f64 {
                match sgm_renyi(cfg.alpha, q, beta * noise_base) {
                    Ok(s) => s + self.scale * a * a / (1.0 - beta),
                    Err(_) => f64::INFINITY,
                }
            };
            let (f1, f2) = (f(x1), f(x2));
            let (x, v) = if f1 < f2 { (x1, f1) } else { (x2, f2) };
            if v < best_cost {
                best_cost = v;
                best_beta = x;
            }
            if f1 <= f2 {
                hi = x2;
            } else {
                lo = x1;
            }
        }
        (best_cost, best_beta)
    }
}

/// Without-replacement bound over the tau-indexed suffix schedules.
pub fn bound_subsampled(
    problem: &ValidatedProblem,
    trace: &WassersteinTrace,
) -> Result<BoundResult, OptimizerError> {
    let cfg = &problem.config;
    let t = cfg.t;
    if t == 0 {
        return empty_result(problem);
    }
    debug_assert_eq!(trace.horizon(), t);
    let d = cfg.diameter_d;
    let model = StepModel::build(problem)?;
    let map = GrowthMap::new(cfg.eta * problem.assumptions.holder_l, problem.assumptions.holder_lambda);

    let taus = tau_candidates(t, 128, None);
    let solutions: Vec<(usize, SuffixSolution)> = taus
        .par_iter()
        .map(|&tau| {
            let cost = |shifts: &[f64]| -> f64 { shifts.iter().map(|&a| model.step(a).0).sum() };
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
    let (_, tau, sol) = best.expect("at least one tau candidate");

    // refine the winner's betas on the exact quadrature
    let mut epsilon = 0.0;
    let mut beta = Vec::with_capacity(sol.a.len());
    for &a in &sol.a {
        let (cost, b) = model.refine(problem, a);
        epsilon += cost;
        beta.push(b);
    }
    let mut schedule = ShiftSchedule {
        tau,
        beta,
        a: sol.a.clone(),
    };
    let mut residual = sol.residual;

    let op = output_perturbation_schedule(trace, d);
    let op_eps = model.scale * op.a[0] * op.a[0];
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
