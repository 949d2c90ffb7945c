//! Independent numerical verification of the accounting bounds: exact 1-D
//! density propagation, coupled-trajectory Wasserstein checks, and a
//! sampling-based Hölder-constant estimator.

mod estimator;
mod measure;
mod toy;

pub use estimator::{estimate_holder, zoo};
pub use measure::{renyi_divergence_mixed, symmetric_renyi, MixedMeasure1D, OracleError};
pub use toy::{
    coupled_w_inf_check, propagate_density, verify_bound, CoupledReport, DatasetVariant, ToyKind,
    ToyProblem1D, VerifyReport, HOLDER_KAPPA,
};
