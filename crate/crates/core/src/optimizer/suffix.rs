//! Shared suffix-schedule search for the Hölder-type bounds.
//!
//! Feasibility is enforced by construction: shift profiles are scaled by a
//! scalar s found by bisection so the backward recursion A_T = 0,
//! A_{t-1} = h(A_t + a_{t-1}) lands at A_tau >= M. Any such profile certifies
//! a valid bound, so the surrounding derivative-free search (golden section
//! over the geometric ratio, then coordinate-wise refinement on short
//! suffixes) can only loosen, never invalidate, the result.

use crate::maps::GrowthMap;

pub(crate) fn beta_from_a(g: f64, a: &[f64]) -> Vec<f64> {
    a.iter()
        .map(|&ak| {
            if g > 0.0 {
                g / (g + ak)
            } else if ak > 0.0 {
                0.0
            } else {
                1.0
            }
        })
        .collect()
}

pub(crate) struct SuffixSolution {
    pub a: Vec<f64>,
    pub cost: f64,
    pub residual: f64,
    pub evals: u64,
    pub iters: u64,
}

/// A_tau of the backward recursion for a given suffix shift vector.
fn reduce_backward(map: &GrowthMap, a: &[f64]) -> f64 {
    let mut acc = 0.0;
    for &ak in a.iter().rev() {
        acc = map.inverse_unchecked(acc + ak);
    }
    acc
}

/// Scale the profile so the recursion reaches big_m; returns the scaled
/// vector. Monotone in s because h is increasing.
fn shoot(map: &GrowthMap, profile: &[f64], big_m: f64, evals: &mut u64) -> Vec<f64> {
    if big_m == 0.0 {
        return vec![0.0; profile.len()];
    }
    let scaled = |s: f64| -> Vec<f64> { profile.iter().map(|&p| s * p).collect() };
    let mut hi = 1.0_f64;
    let mut guard = 0;
    loop {
        *evals += 1;
        if reduce_backward(map, &scaled(hi)) >= big_m {
            break;
        }
        hi *= 2.0;
        guard += 1;
        if guard > 2000 {
            break;
        }
    }
    let mut lo = 0.0_f64;
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        *evals += 1;
        if reduce_backward(map, &scaled(mid)) >= big_m {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    scaled(hi)
}

fn geometric_profile(ln_r: f64, m: usize) -> Vec<f64> {
    // normalized so the largest entry is 1; scale is absorbed by shooting
    let shift = if ln_r > 0.0 { ln_r * (m as f64 - 1.0) } else { 0.0 };
    (0..m).map(|k| (ln_r * k as f64 - shift).exp()).collect()
}

/// Track the best over every evaluated point of a golden-section pass;
/// unimodality is not assumed.
fn golden_min(lo: f64, hi: f64, iters: usize, f: &mut impl FnMut(f64) -> f64) -> (f64, f64) {
    const PHI: f64 = 0.618_033_988_749_894_9;
    let mut best = (lo, f(lo));
    for &x in &[hi, 0.5 * (lo + hi)] {
        let v = f(x);
        if v < best.1 {
            best = (x, v);
        }
    }
    let (mut a, mut b) = (lo, hi);
    let mut x1 = b - PHI * (b - a);
    let mut x2 = a + PHI * (b - a);
    let mut f1 = f(x1);
    let mut f2 = f(x2);
    for _ in 0..iters {
        if f1 < best.1 {
            best = (x1, f1);
        }
        if f2 < best.1 {
            best = (x2, f2);
        }
        if f1 <= f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - PHI * (b - a);
            f1 = f(x1);
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + PHI * (b - a);
            f2 = f(x2);
        }
    }
    best
}

/// Optimize a feasible suffix shift vector against an arbitrary total-cost
/// functional.
pub(crate) fn optimize_suffix(
    m: usize,
    big_m: f64,
    map: &GrowthMap,
    cost: &(dyn Fn(&[f64]) -> f64 + Sync),
) -> SuffixSolution {
    debug_assert!(m > 0);
    let mut evals = 0u64;
    let mut iters = 0u64;

    if big_m == 0.0 {
        let a = vec![0.0; m];
        let c = cost(&a);
        return SuffixSolution {
            a,
            cost: c,
            residual: 0.0,
            evals: 1,
            iters: 0,
        };
    }

    // concentrated candidate: a_tau = g(M) alone gives A_tau = h(g(M)) = M
    let mut concentrated = vec![0.0; m];
    concentrated[0] = map.eval_unchecked(big_m);
    let mut best_a = concentrated;
    let mut best_cost = cost(&best_a);
    evals += 1;

    {
        let mut objective = |ln_r: f64| -> f64 {
            iters += 1;
            let a = shoot(map, &geometric_profile(ln_r, m), big_m, &mut evals);
            let c = cost(&a);
            if c < best_cost {
                best_cost = c;
                best_a = a;
            }
            c
        };
        golden_min(-3.0, 3.0, 40, &mut objective);
    }

    if m <= 16 {
        // coordinate-wise multiplicative refinement with re-shooting, so every
        // trial vector stays feasible
        for _ in 0..3 {
            for k in 0..m {
                let base = best_a.clone();
                let mut objective = |ln_u: f64| -> f64 {
                    iters += 1;
                    let mut profile = base.clone();
                    profile[k] *= ln_u.exp();
                    if profile.iter().all(|&p| p == 0.0) {
                        return f64::INFINITY;
                    }
                    let a = shoot(map, &profile, big_m, &mut evals);
                    let c = cost(&a);
                    if c < best_cost {
                        best_cost = c;
                        best_a = a;
                    }
                    c
                };
                golden_min(-8.0, 3.0, 24, &mut objective);
            }
        }
    }

    let mut final_evals = evals;
    let residual = (big_m - reduce_backward(map, &best_a)).max(0.0);
    final_evals += 1;
    SuffixSolution {
        a: best_a,
        cost: best_cost,
        residual,
        evals: final_evals,
        iters,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn backward_recursion_linear_case() {
        // h(z) = z / (1 + l): A_tau = sum a_k (1+l)^{-(k+1)}
        let map = GrowthMap::new(0.1, 1.0);
        let a = [0.3, 0.2, 0.1];
        let expected: f64 = a
            .iter()
            .enumerate()
            .map(|(k, &ak)| ak * 1.1_f64.powi(-(k as i32 + 1)))
            .sum();
        assert!((reduce_backward(&map, &a) - expected).abs() < 1e-12);
    }

    #[test]
    fn shooting_hits_target_from_above() {
        let map = GrowthMap::new(0.1, 0.5);
        let mut evals = 0;
        let a = shoot(&map, &[1.0, 0.5, 0.25], 0.4, &mut evals);
        let reached = reduce_backward(&map, &a);
        assert!(reached >= 0.4);
        assert!(reached <= 0.4 * (1.0 + 1e-9));
    }

    #[test]
    fn golden_finds_quadratic_minimum() {
        let mut f = |x: f64| (x - 0.7) * (x - 0.7);
        let (x, v) = golden_min(-3.0, 3.0, 60, &mut f);
        assert!((x - 0.7).abs() < 1e-6);
        assert!(v < 1e-12);
    }

    #[test]
    fn optimize_zero_target_returns_zero_schedule() {
        let map = GrowthMap::new(0.1, 0.5);
        let sol = optimize_suffix(4, 0.0, &map, &|a| a.iter().map(|&x| (0.08 + x) * (0.08 + x)).sum());
        assert_eq!(sol.a, vec![0.0; 4]);
        assert!((sol.cost - 4.0 * 0.0064).abs() < 1e-15);
    }

    #[test]
    fn optimize_beats_concentrated_candidate_when_spreading_helps() {
        let map = GrowthMap::new(0.1, 0.5);
        let cost = |a: &[f64]| -> f64 { a.iter().map(|&x| (0.08 + x) * (0.08 + x)).sum() };
        let sol = optimize_suffix(6, 0.5, &map, &cost);
        let mut concentrated = vec![0.0; 6];
        concentrated[0] = map.eval(0.5).unwrap();
        assert!(sol.cost <= cost(&concentrated) + 1e-12);
        assert!(sol.residual <= 1e-9);
    }
}
