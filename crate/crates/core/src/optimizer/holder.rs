//! Full-batch bound for Hölder-continuous gradients.
//!
//! The per-step beta split is eliminated in closed form exactly as in the
//! smooth case, leaving a search over suffix shifts whose feasibility runs
//! through the backward recursion A_{t-1} = h(A_t + a_{t-1}). When lambda = 1
//! the recursion is linear and the exact smooth KKT solver is used instead of
//! the derivative-free search.

use super::smooth::solve_suffix_kkt;
use super::suffix::{beta_from_a, optimize_suffix, SuffixSolution};
use super::{
    empty_result, output_perturbation_schedule, tau_candidates, BoundResult, Diagnostics,
    OptimizerError, ShiftSchedule,
};
use crate::baselines;
use crate::config::ValidatedProblem;
use crate::maps::GrowthMap;
use crate::tracking::WassersteinTrace;
use rayon::prelude::*;

fn solve_tau(problem: &ValidatedProblem, big_m: f64, m: usize) -> SuffixSolution {
    let a = &problem.assumptions;
    let cfg = &problem.config;
    let g = problem.full_batch_sensitivity();
    if a.holder_lambda == 1.0 {
        let kkt = solve_suffix_kkt(g, 1.0 + cfg.eta * a.holder_l, m, big_m);
        return SuffixSolution {
            a: kkt.a,
            cost: kkt.cost,
            residual: kkt.residual,
            evals: kkt.evals,
            iters: kkt.iters,
        };
    }
    let map = GrowthMap::new(cfg.eta * a.holder_l, a.holder_lambda);
    let cost = move |shifts: &[f64]| -> f64 {
        shifts.iter().map(|&ak| (g + ak) * (g + ak)).sum()
    };
    optimize_suffix(m, big_m, &map, &cost)
}

/// Full-batch Hölder bound with exhaustive tau scan at desk scale.
pub fn bound_holder_full(
    problem: &ValidatedProblem,
    trace: &WassersteinTrace,
) -> Result<BoundResult, OptimizerError> {
    let cfg = &problem.config;
    let t = cfg.t;
    if t == 0 {
        return empty_result(problem);
    }
    debug_assert_eq!(trace.horizon(), t);
    let g = problem.full_batch_sensitivity();
    let scale = cfg.alpha / (2.0 * cfg.sigma * cfg.sigma);
    let d = cfg.diameter_d;

    let exhaustive_limit = if problem.assumptions.holder_lambda == 1.0 {
        4096
    } else {
        256
    };
    let mut taus = tau_candidates(t, exhaustive_limit, None);
    let mut solutions: Vec<(usize, SuffixSolution)> = taus
        .par_iter()
        .map(|&tau| (tau, solve_tau(problem, trace.values[tau].min(d), t - tau)))
        .collect();
    if t > exhaustive_limit {
        let coarse_best = solutions
            .iter()
            .min_by(|x, y| x.1.cost.partial_cmp(&y.1.cost).unwrap())
            .map(|(tau, _)| *tau);
        taus = tau_candidates(t, exhaustive_limit, coarse_best);
        solutions = taus
            .par_iter()
            .map(|&tau| (tau, solve_tau(problem, trace.values[tau].min(d), t - tau)))
            .collect();
    }

    let mut evals = 0u64;
    let mut iters = 0u64;
    let mut best: Option<(f64, usize, &SuffixSolution)> = None;
    for (tau, sol) in &solutions {
        evals += sol.evals;
        iters += sol.iters;
        let eps = scale * sol.cost;
        if best.map_or(true, |(b, _, _)| eps < b) {
            best = Some((eps, *tau, sol));
        }
    }
    let (mut epsilon, tau, sol) = best.expect("at least one tau candidate");
    let mut schedule = ShiftSchedule {
        tau,
        beta: beta_from_a(g, &sol.a),
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

#[cfg(test)]
mod tests {
    use super::super::test_fixtures::{reference_problem, reference_holder};
    use super::*;
    use crate::config::Convexity;
    use crate::tracking::{track_full_holder, track_full_lipschitz};

    fn run_holder(lambda: f64, t: usize) -> BoundResult {
        let p = reference_holder(lambda, t);
        let trace = track_full_holder(1.0, lambda, 0.1, 2.0, 5, 1.0, t);
        bound_holder_full(&p, &trace).unwrap()
    }

    #[test]
    fn lambda_one_agrees_with_smooth_path() {
        for &t in &[5usize, 30, 120] {
            let p = reference_problem(Convexity::NonConvex, t);
            let trace = track_full_lipschitz(1.1, 0.1, 2.0, 5, 1.0, t);
            let smooth = super::super::bound_smooth_full(&p, &trace).unwrap();
            let holder = run_holder(1.0, t);
            assert!(
                (smooth.epsilon - holder.epsilon).abs() <= 1e-6 * smooth.epsilon.max(1e-12),
                "T={t}: {} vs {}",
                smooth.epsilon,
                holder.epsilon
            );
        }
    }

    #[test]
    fn dominates_pareto_frontier() {
        for &t in &[1usize, 10, 50, 200] {
            let r = run_holder(0.5, t);
            assert!(r.epsilon <= r.composition.min(r.output_perturbation) + 1e-12);
        }
    }

    #[test]
    fn sweep_shape_flat_after_plateau() {
        let e100 = run_holder(0.5, 100).epsilon;
        let e200 = run_holder(0.5, 200).epsilon;
        let e400 = run_holder(0.5, 400).epsilon;
        assert!(e200 <= e100 + 1e-9);
        assert!(e400 <= e200 + 1e-9);
        assert!(e400 < 1.0);
    }

    #[test]
    fn t1_is_single_step_composition() {
        let r = run_holder(0.5, 1);
        assert!((r.epsilon - 0.0064).abs() < 1e-12);
    }

    #[test]
    fn residual_within_tolerance() {
        for &t in &[3usize, 12, 60] {
            let r = run_holder(0.5, t);
            assert!(r.diagnostics.feasibility_residual <= 1e-9);
        }
    }
}
