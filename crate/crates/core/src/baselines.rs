//! Composition and output-perturbation reference bounds; their pointwise
//! minimum is the Pareto frontier the schedule optimizer must dominate.

use crate::config::{Strategy, ValidatedProblem};
use crate::mechanisms::{gaussian_rdp, sgm_renyi, MechanismError};

/// Standard composition over all steps.
///
/// Full batch: T * alpha * (2 eta K / n)^2 / (2 sigma^2). Without replacement:
/// T * S_alpha(b/n, sigma b / (2 eta K)). Cyclic: charges only encounter steps,
/// worst case one per (possibly partial) epoch.
pub fn composition_bound(problem: &ValidatedProblem) -> Result<f64, MechanismError> {
    let c = &problem.config;
    let t = c.t as f64;
    match c.strategy {
        Strategy::FullBatch => {
            let g = problem.full_batch_sensitivity();
            Ok(t * gaussian_rdp(c.alpha, g, c.sigma)?)
        }
        Strategy::WoReplacement => {
            let q = c.b as f64 / c.n as f64;
            let noise_ratio = c.sigma * c.b as f64 / (2.0 * c.eta * c.clip_k);
            Ok(t * sgm_renyi(c.alpha, q, noise_ratio)?)
        }
        Strategy::ShuffledCyclic => {
            let steps_per_epoch = c.n / c.b;
            let encounters = (c.t + steps_per_epoch - 1) / steps_per_epoch;
            let g = problem.batch_sensitivity();
            Ok(encounters as f64 * gaussian_rdp(c.alpha, g, c.sigma)?)
        }
    }
}

/// Gaussian mechanism with sensitivity equal to the domain diameter:
/// alpha * D^2 / (2 sigma^2).
pub fn output_perturbation_bound(problem: &ValidatedProblem) -> f64 {
    let c = &problem.config;
    c.alpha * c.diameter_d * c.diameter_d / (2.0 * c.sigma * c.sigma)
}

/// Pointwise minimum of the two baselines.
pub fn pareto_frontier(problem: &ValidatedProblem) -> Result<f64, MechanismError> {
    Ok(composition_bound(problem)?.min(output_perturbation_bound(problem)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::{validate, Convexity, LossAssumptions, SgdConfig};

    fn reference_problem(t: usize) -> ValidatedProblem {
        let a = LossAssumptions {
            holder_l: 1.0,
            holder_lambda: 1.0,
            convexity: Convexity::StronglyConvex { m: 1.0 },
            lipschitz_k: 2.0,
        };
        let c = SgdConfig {
            eta: 0.1,
            sigma: 1.0,
            clip_k: 2.0,
            n: 5,
            b: 5,
            t,
            diameter_d: 1.0,
            strategy: Strategy::FullBatch,
            alpha: 2.0,
        };
        validate(&a, &c).unwrap()
    }

    #[test]
    fn composition_reference_problem_t100() {
        // 2 eta K / n = 0.08; 100 * 2 * 0.0064 / 2 = 0.64
        let v = composition_bound(&reference_problem(100)).unwrap();
        assert!((v - 0.64).abs() < 1e-12, "{v}");
    }

    #[test]
    fn composition_zero_steps() {
        assert_eq!(composition_bound(&reference_problem(0)).unwrap(), 0.0);
    }

    #[test]
    fn composition_linear_in_t() {
        let one = composition_bound(&reference_problem(1)).unwrap();
        let many = composition_bound(&reference_problem(37)).unwrap();
        assert!((many - 37.0 * one).abs() < 1e-12);
    }

    #[test]
    fn wo_replacement_full_batch_collapse() {
        // b = n makes q = 1 and the per-step term a plain Gaussian pair with
        // sensitivity 1 at noise sigma b / (2 eta K), matching 2 eta K / b.
        let mut p = reference_problem(10);
        p.config.strategy = Strategy::WoReplacement;
        let wo = composition_bound(&p).unwrap();
        let full = composition_bound(&reference_problem(10)).unwrap();
        assert!((wo - full).abs() < 1e-12, "{wo} vs {full}");
    }

    #[test]
    fn cyclic_charges_epochs_only() {
        let mut p = reference_problem(10);
        p.config.strategy = Strategy::ShuffledCyclic;
        p.config.b = 1;
        // 10 steps, 5 steps per epoch: 2 encounters at sensitivity 2 eta K / b = 0.4
        let v = composition_bound(&p).unwrap();
        assert!((v - 2.0 * 2.0 * 0.4 * 0.4 / 2.0).abs() < 1e-12, "{v}");
        // partial epoch still counts
        p.config.t = 11;
        let v = composition_bound(&p).unwrap();
        assert!((v - 3.0 * 2.0 * 0.4 * 0.4 / 2.0).abs() < 1e-12, "{v}");
    }

    #[test]
    fn output_perturbation_examples() {
        let p = reference_problem(100);
        assert!((output_perturbation_bound(&p) - 1.0).abs() < 1e-15);
        let mut p2 = p;
        p2.config.sigma = 2.0;
        assert!((output_perturbation_bound(&p2) - 0.25).abs() < 1e-15);
        let mut p3 = p;
        p3.config.diameter_d = 1e-9;
        assert!(output_perturbation_bound(&p3) < 1e-17);
    }

    #[test]
    fn pareto_crossover() {
        // composition wins at small T, output perturbation at huge T; equality
        // at T = n^2 D^2 / (4 eta^2 K^2) = 25 / 0.16 = 156.25
        assert!((pareto_frontier(&reference_problem(10)).unwrap() - 0.064).abs() < 1e-12);
        assert_eq!(pareto_frontier(&reference_problem(10_000)).unwrap(), 1.0);
        let crossover: f64 = 25.0 / (4.0 * 0.01 * 4.0);
        assert!((crossover - 156.25).abs() < 1e-12);
        let below = composition_bound(&reference_problem(156)).unwrap();
        let above = composition_bound(&reference_problem(157)).unwrap();
        assert!(below < 1.0 && above > 1.0);
    }
}
