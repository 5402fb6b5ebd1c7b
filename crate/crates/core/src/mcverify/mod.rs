//! Monte Carlo verification of integration by parts and quasi-invariance with
//! cylinder test functions and paired (common random number) estimates.

mod checks;
mod cylinder;
mod stats;

pub use checks::{
    density_check, divergence_check, ibp_check, qi_check, QiOptions, MEAN_CHECK_THRESHOLD,
    MIN_SAMPLES,
};
pub use cylinder::{directional_derivative, CylinderFunction, GRADIENT_STEP};
pub use stats::{mc_stats, mean_and_se, pairwise_sum, BiasEstimate, MCReport, DEFAULT_THRESHOLD};
