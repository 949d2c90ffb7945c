//! Per-step contraction/expansion maps of the gradient update.
//!
//! `lipschitz_update_constant` gives the Lipschitz constant of the gradient
//! update under smoothness and (strong) convexity. [`GrowthMap`] is the
//! one-step shift expansion g(x) = x + L_eff * x^lambda for Hölder gradients,
//! together with its inverse h.

use crate::config::{Convexity, LossAssumptions};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum MapError {
    #[error("argument must be nonnegative, got {0}")]
    NegativeArgument(f64),
    #[error("step size {eta} violates {condition}")]
    StepSize { eta: f64, condition: &'static str },
}

/// Lipschitz constant of the gradient update map w -> w - eta * clip(grad l(w)).
///
/// Smooth non-convex: 1 + eta*L. Convex with eta <= 2/L: 1. m-strongly convex
/// with eta <= 1/L: 1 - eta*m.
pub fn lipschitz_update_constant(assumptions: &LossAssumptions, eta: f64) -> Result<f64, MapError> {
    let l = assumptions.holder_l;
    match assumptions.convexity {
        Convexity::NonConvex => Ok(1.0 + eta * l),
        Convexity::Convex => {
            if l > 0.0 && eta > 2.0 / l {
                Err(MapError::StepSize {
                    eta,
                    condition: "eta <= 2/L required for c=1",
                })
            } else {
                Ok(1.0)
            }
        }
        Convexity::StronglyConvex { m } => {
            if l > 0.0 && eta > 1.0 / l {
                Err(MapError::StepSize {
                    eta,
                    condition: "eta <= 1/L required for c=1-eta*m",
                })
            } else {
                Ok(1.0 - eta * m)
            }
        }
    }
}

/// The growth map g(x) = x + L_eff * x^lambda and its inverse h.
///
/// Strictly increasing and continuous on [0, inf) with g(0) = 0, so the
/// inverse exists. h(z) <= z: inverting g converts a post-step shift back into
/// a smaller pre-step shift.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GrowthMap {
    pub l_eff: f64,
    pub lambda: f64,
}

const H_ABS_TOL: f64 = 1e-12;
const H_MAX_ITER: usize = 200;

impl GrowthMap {
    pub fn new(l_eff: f64, lambda: f64) -> Self {
        assert!(l_eff >= 0.0, "l_eff must be nonnegative");
        assert!(
            lambda > 0.0 && lambda <= 1.0,
            "lambda must lie in (0, 1], got {lambda}"
        );
        Self { l_eff, lambda }
    }

    /// g(x) = x + L_eff * x^lambda.
    pub fn eval(&self, x: f64) -> Result<f64, MapError> {
        if x < 0.0 {
            return Err(MapError::NegativeArgument(x));
        }
        Ok(self.eval_unchecked(x))
    }

    #[inline]
    pub(crate) fn eval_unchecked(&self, x: f64) -> f64 {
        if self.lambda == 1.0 {
            // Keeps the lambda=1 trace bit-identical to the linear recursion
            // with c = 1 + l_eff.
            (1.0 + self.l_eff) * x
        } else {
            x + self.l_eff * x.powf(self.lambda)
        }
    }

    /// h(z) = g^{-1}(z), the unique x >= 0 with g(x) = z.
    ///
    /// Closed form for lambda in {1/2, 1}; bracketed bisection on [0, z]
    /// otherwise (g(0) = 0 <= z <= g(z)). Bisection rather than Newton because
    /// g' blows up at 0 for lambda < 1.
    pub fn inverse(&self, z: f64) -> Result<f64, MapError> {
        if z < 0.0 {
            return Err(MapError::NegativeArgument(z));
        }
        Ok(self.inverse_unchecked(z))
    }

    #[inline]
    pub(crate) fn inverse_unchecked(&self, z: f64) -> f64 {
        if self.l_eff == 0.0 || z == 0.0 {
            return z;
        }
        if self.lambda == 1.0 {
            return z / (1.0 + self.l_eff);
        }
        if self.lambda == 0.5 {
            let l = self.l_eff;
            let u = 0.5 * (-l + (l * l + 4.0 * z).sqrt());
            return u * u;
        }
        // bisect on ln x: for small lambda the inverse can be many orders of
        // magnitude below z, which a linear bracket cannot resolve
        let ln_z = z.ln();
        let mut hi = ln_z;
        let mut lo = (ln_z - 1.0).min(-745.0);
        for _ in 0..H_MAX_ITER {
            let mid = 0.5 * (lo + hi);
            if self.eval_unchecked(mid.exp()) < z {
                lo = mid;
            } else {
                hi = mid;
            }
            if hi - lo <= H_ABS_TOL {
                break;
            }
        }
        (0.5 * (lo + hi)).exp()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::Convexity;
    use proptest::prelude::*;

    fn assumptions(convexity: Convexity) -> LossAssumptions {
        LossAssumptions {
            holder_l: 1.0,
            holder_lambda: 1.0,
            convexity,
            lipschitz_k: 2.0,
        }
    }

    #[test]
    fn update_constant_smooth_nonconvex() {
        let c = lipschitz_update_constant(&assumptions(Convexity::NonConvex), 0.1).unwrap();
        assert!((c - 1.1).abs() < 1e-15);
    }

    #[test]
    fn update_constant_convex() {
        let c = lipschitz_update_constant(&assumptions(Convexity::Convex), 0.1).unwrap();
        assert_eq!(c, 1.0);
    }

    #[test]
    fn update_constant_strongly_convex() {
        let c =
            lipschitz_update_constant(&assumptions(Convexity::StronglyConvex { m: 1.0 }), 0.1)
                .unwrap();
        assert!((c - 0.9).abs() < 1e-15);
    }

    #[test]
    fn update_constant_rejects_large_step() {
        let err = lipschitz_update_constant(&assumptions(Convexity::Convex), 3.0).unwrap_err();
        assert!(matches!(err, MapError::StepSize { .. }));
        let err =
            lipschitz_update_constant(&assumptions(Convexity::StronglyConvex { m: 1.0 }), 1.5)
                .unwrap_err();
        assert!(matches!(err, MapError::StepSize { .. }));
    }

    #[test]
    fn g_eval_examples() {
        let g = GrowthMap::new(1.0, 0.5);
        assert_eq!(g.eval(0.0).unwrap(), 0.0);
        assert!((g.eval(1.0).unwrap() - 2.0).abs() < 1e-15);
        let g = GrowthMap::new(0.3, 1.0);
        assert!((g.eval(2.0).unwrap() - 2.6).abs() < 1e-15);
        assert!(g.eval(-1.0).is_err());
    }

    #[test]
    fn h_examples() {
        let g = GrowthMap::new(1.0, 0.5);
        assert_eq!(g.inverse(0.0).unwrap(), 0.0);
        // x + sqrt(x) = 2 has root x = 1.
        assert!((g.inverse(2.0).unwrap() - 1.0).abs() < 1e-10);
        let g = GrowthMap::new(1.0, 1.0);
        assert!((g.inverse(3.0).unwrap() - 1.5).abs() < 1e-15);
    }

    #[test]
    fn h_closed_form_half_matches_bisection() {
        // Force the generic bisection path with a lambda bitwise != 0.5 but
        // mathematically equal enough to compare against the closed form.
        let mut rng_state = 0x9e3779b97f4a7c15_u64;
        let mut next = move || {
            rng_state = rng_state.wrapping_mul(6364136223846793005).wrapping_add(1);
            (rng_state >> 11) as f64 / (1u64 << 53) as f64
        };
        for _ in 0..1000 {
            let l = next() * 10.0;
            let z = next() * 100.0;
            let closed = GrowthMap::new(l, 0.5).inverse(z).unwrap();
            let generic = GrowthMap { l_eff: l, lambda: 0.5 + 0.0_f64 };
            // call the bisection directly
            let bis = {
                let g = generic;
                let mut lo = 0.0_f64;
                let mut hi = z;
                for _ in 0..H_MAX_ITER {
                    let mid = 0.5 * (lo + hi);
                    if mid + g.l_eff * mid.powf(g.lambda) < z {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                    if hi - lo <= H_ABS_TOL {
                        break;
                    }
                }
                0.5 * (lo + hi)
            };
            assert!(
                (closed - bis).abs() <= 1e-10 * closed.max(1.0),
                "closed={closed} bisection={bis} l={l} z={z}"
            );
        }
    }

    proptest! {
        #[test]
        fn roundtrip_g_of_h(l in 0.0..10.0f64, lambda in 0.05..=1.0f64, z in 0.0..100.0f64) {
            let g = GrowthMap::new(l, lambda);
            let x = g.inverse(z).unwrap();
            let back = g.eval(x).unwrap();
            prop_assert!((back - z).abs() <= 1e-10 * z.max(1.0), "z={z} back={back}");
        }

        #[test]
        fn h_monotone_and_contractive(l in 0.0..10.0f64, lambda in 1e-3..=1.0f64,
                                      z1 in 0.0..100.0f64, dz in 1e-6..10.0f64) {
            let g = GrowthMap::new(l, lambda);
            let z2 = z1 + dz;
            let h1 = g.inverse(z1).unwrap();
            let h2 = g.inverse(z2).unwrap();
            prop_assert!(h1 < h2);
            prop_assert!(h1 <= z1 + 1e-12);
            if l > 0.0 && z1 > 1e-9 {
                prop_assert!(h1 < z1);
            }
        }
    }
}
