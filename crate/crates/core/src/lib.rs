//! Honest adaptive confidence intervals for the value of a multivariate
//! regression function at a point, under coordinate-wise monotone Hölder
//! classes.
//!
//! The pipeline: describe the function-class ladder (`function_class`),
//! solve the ordered modulus problems in closed form (`modulus`), turn them
//! into optimal one-sided bounds (`ci_onesided`), intersect with Bonferroni
//! or correlation-calibrated levels (`ci_adaptive`), benchmark against
//! fixed-length minimax intervals (`minimax_ci`), estimate the noise level
//! when unknown (`variance`), and reproduce the reference simulations
//! (`simulate`).

pub mod ci_adaptive;
pub mod ci_onesided;
pub mod dist;
pub mod error;
pub mod function_class;
pub mod geometry;
pub mod minimax_ci;
pub mod modulus;
pub mod numeric;
pub mod simulate;
pub mod variance;

pub use ci_adaptive::{
    adaptive_onesided_lower, adaptive_onesided_upper, adaptivity_constant, bonferroni_ci,
    calibrated_ci, calibration_cov, tau_star, AdaptiveCI, CalibrationCov, CiMethod, TauStar,
};
pub use ci_onesided::{hinge_weights, lower_bound, upper_bound, OneSidedBound, Side};
pub use error::{Error, Result};
pub use function_class::{
    check_nesting, conservative_constant, envelope_lower, envelope_upper, membership_feasible,
    ClassLadder, HolderClass, NestingReport,
};
pub use geometry::{IndexSet, MonotoneNorm};
pub use minimax_ci::{cv_biased_normal, minimax_fixed_ci, FixedLengthCI};
pub use modulus::{
    forward_modulus, inverse_modulus, inverse_modulus_monotone_only, omega_prime, Design,
    ModulusProblem, ModulusSolution, MonotoneOnlyDirection, OrderedPair,
};
pub use simulate::{rate_check, run_scenario, truth_eval, Scenario, SimReport, Truth};
pub use variance::{estimate_sigma2, SmootherTrace};
