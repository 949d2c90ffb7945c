//! Sampling-based Hölder-constant estimation for 1-D gradient functions.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Maximum of |grad(x) - grad(y)| / |x - y|^lambda over random pairs drawn
/// uniformly from the interval. A sample maximum, hence always a lower bound
/// on the true Hölder constant.
pub fn estimate_holder(
    grad: impl Fn(f64) -> f64,
    lo: f64,
    hi: f64,
    lambda: f64,
    num_pairs: usize,
    seed: u64,
) -> f64 {
    assert!(lambda > 0.0 && lambda <= 1.0);
    assert!(num_pairs >= 1);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best = 0.0_f64;
    for _ in 0..num_pairs {
        let x = lo + (hi - lo) * rng.gen::<f64>();
        let y = lo + (hi - lo) * rng.gen::<f64>();
        if x == y {
            continue;
        }
        let ratio = (grad(x) - grad(y)).abs() / (x - y).abs().powf(lambda);
        best = best.max(ratio);
    }
    best
}

/// Built-in gradient functions for the CLI: (function, default lambda,
/// analytic Hölder constant when known).
pub fn zoo(name: &str) -> Option<(fn(f64) -> f64, f64, Option<f64>)> {
    match name {
        // sign(x)|x|^(1/3), the gradient of (3/4)|x|^(4/3); its 1/3-Hölder
        // constant is 2^(2/3), attained by opposite-sign pairs
        "abs_cuberoot_grad" => Some((
            |x| x.signum() * x.abs().powf(1.0 / 3.0),
            1.0 / 3.0,
            Some(2.0_f64.powf(2.0 / 3.0)),
        )),
        "linear" => Some((|x| 1.5 * x, 1.0, Some(1.5))),
        "constant" => Some((|_| 0.25, 1.0, Some(0.0))),
        _ => None,
    }
}
