//! Domain types for loss assumptions and algorithm parameters, with
//! validation of every precondition the bounds require.

use serde::{Deserialize, Serialize};
use std::fmt;

/// Convexity class of the per-sample loss.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Convexity {
    NonConvex,
    Convex,
    StronglyConvex { m: f64 },
}

/// The (L, lambda) Hölder class of the loss gradient plus the Lipschitz
/// constant K of the loss itself. K doubles as the gradient-norm bound under
/// which clipping is inactive.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossAssumptions {
    pub holder_l: f64,
    pub holder_lambda: f64,
    pub convexity: Convexity,
    pub lipschitz_k: f64,
}

/// Mini-batch strategy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    FullBatch,
    WoReplacement,
    ShuffledCyclic,
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Strategy::FullBatch => write!(f, "full_batch"),
            Strategy::WoReplacement => write!(f, "wo_replacement"),
            Strategy::ShuffledCyclic => write!(f, "shuffled_cyclic"),
        }
    }
}

/// Noisy-SGD hyperparameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SgdConfig {
    pub eta: f64,
    pub sigma: f64,
    pub clip_k: f64,
    pub n: usize,
    pub b: usize,
    pub t: usize,
    pub diameter_d: f64,
    pub strategy: Strategy,
    pub alpha: f64,
}

/// A single violated precondition, phrased after the condition it breaks.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Violation {
    pub field: &'static str,
    pub message: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.field, self.message)
    }
}

/// Assumptions and config that passed validation, carrying the contraction
/// class of the gradient update map.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ValidatedProblem {
    pub assumptions: LossAssumptions,
    pub config: SgdConfig,
    /// Lipschitz constant of the gradient update when lambda = 1; None in the
    /// genuinely Hölder regime lambda < 1.
    pub update_lipschitz: Option<f64>,
}

/// Validate assumptions and config against the preconditions of the bounds.
///
/// Deterministic and total: every input yields either a problem or a nonempty
/// violation list.
pub fn validate(
    assumptions: &LossAssumptions,
    config: &SgdConfig,
) -> Result<ValidatedProblem, Vec<Violation>> {
    let mut violations = Vec::new();
    let mut push = |field: &'static str, message: String| {
        violations.push(Violation { field, message });
    };

    let a = assumptions;
    let c = config;

    if !(a.holder_lambda > 0.0 && a.holder_lambda <= 1.0) {
        push(
            "holder_lambda",
            format!("holder_lambda out of (0,1]: {}", a.holder_lambda),
        );
    }
    if !(a.holder_l >= 0.0) {
        push("holder_l", format!("L must be nonnegative: {}", a.holder_l));
    }
    if !(a.lipschitz_k >= 0.0 && a.lipschitz_k.is_finite()) {
        push(
            "lipschitz_k",
            format!("K must be finite and nonnegative: {}", a.lipschitz_k),
        );
    }
    if let Convexity::StronglyConvex { m } = a.convexity {
        if !(m > 0.0) {
            push("convexity", format!("m must be positive: {m}"));
        }
    }
    let is_convex_class = !matches!(a.convexity, Convexity::NonConvex);
    if is_convex_class {
        if a.holder_lambda != 1.0 {
            push(
                "convexity",
                format!(
                    "convex contraction requires smoothness (lambda = 1), got lambda = {}",
                    a.holder_lambda
                ),
            );
        }
        // Clipping must provably be inactive for the contraction constants:
        // require the loss Lipschitz bound to sit inside the clip radius.
        if a.lipschitz_k > c.clip_k {
            push(
                "lipschitz_k",
                format!(
                    "K-Lipschitz bound {} exceeds clip radius {}; clipping may be active, \
                     contraction unproven",
                    a.lipschitz_k, c.clip_k
                ),
            );
        }
    }
    match a.convexity {
        Convexity::Convex if a.holder_l > 0.0 && c.eta > 2.0 / a.holder_l => push(
            "eta",
            format!("eta <= 2/L required for c=1: eta = {} > {}", c.eta, 2.0 / a.holder_l),
        ),
        Convexity::StronglyConvex { .. } if a.holder_l > 0.0 && c.eta > 1.0 / a.holder_l => push(
            "eta",
            format!("eta <= 1/L required for c=1-eta*m: eta = {} > {}", c.eta, 1.0 / a.holder_l),
        ),
        _ => {}
    }

    if !(c.eta > 0.0) {
        push("eta", format!("eta must be positive: {}", c.eta));
    }
    if !(c.sigma > 0.0) {
        push("sigma", format!("sigma must be positive: {}", c.sigma));
    }
    if !(c.clip_k > 0.0) {
        push("clip_k", format!("clip_k must be positive: {}", c.clip_k));
    }
    if c.n == 0 {
        push("n", "n must be positive".to_string());
    }
    if c.b == 0 {
        push("b", "b must be positive".to_string());
    }
    if c.b > c.n {
        push("b", format!("b = {} exceeds n = {}", c.b, c.n));
    }
    if !(c.diameter_d > 0.0) {
        push(
            "diameter_d",
            format!("diameter must be positive: {}", c.diameter_d),
        );
    }
    if !(c.alpha > 1.0) {
        push("alpha", format!("alpha must exceed 1: {}", c.alpha));
    }
    match c.strategy {
        Strategy::FullBatch if c.b != c.n => {
            push("b", format!("full_batch requires b = n, got b = {} n = {}", c.b, c.n));
        }
        Strategy::ShuffledCyclic if c.b != 0 && c.n % c.b != 0 => {
            push(
                "b",
                format!(
                    "shuffled_cyclic requires b to divide n, got b = {} n = {}; \
                     drop the trailing points explicitly",
                    c.b, c.n
                ),
            );
        }
        _ => {}
    }

    if !violations.is_empty() {
        return Err(violations);
    }

    let update_lipschitz = if a.holder_lambda == 1.0 {
        Some(
            crate::maps::lipschitz_update_constant(a, c.eta)
                .expect("step-size preconditions already checked"),
        )
    } else {
        None
    };

    Ok(ValidatedProblem {
        assumptions: *a,
        config: *c,
        update_lipschitz,
    })
}

impl ValidatedProblem {
    /// Per-step sensitivity numerator 2*eta*K / batch-or-dataset divisor for
    /// the full-batch analysis.
    pub(crate) fn full_batch_sensitivity(&self) -> f64 {
        2.0 * self.config.eta * self.config.clip_k / self.config.n as f64
    }

    pub(crate) fn batch_sensitivity(&self) -> f64 {
        2.0 * self.config.eta * self.config.clip_k / self.config.b as f64
    }
}
