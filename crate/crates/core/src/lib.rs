//! Causal standardization metrics for repeated-attempt data.
//!
//! Given attempt-level records (covariates, player, binary outcome), this
//! crate estimates counterfactual evaluation parameters — direct
//! standardization, indirect standardization, and performance above random
//! replacement — using substitution, one-step, and cross-fitted targeted
//! (TMLE) estimators with influence-function-based confidence intervals.
//! A simulation harness with exact oracles verifies the estimators'
//! statistical guarantees, and profiling utilities produce leaderboards,
//! funnel-plot geometry, propensity clustering, and positivity diagnostics.

pub mod crossfit;
pub mod dataset;
pub mod error;
pub mod estimand;
pub mod estimators;
pub mod ingest;
pub mod learners;
pub mod profiling;
pub mod simulation;
pub mod stats;

pub use crate::dataset::{AttemptRecord, Dataset};
pub use crate::error::{Error, Result};
pub use crate::estimand::{
    conditioning_indices, empirical_success_rate, ConstraintOp, EstimandKind, EstimandSpec,
    InterventionDistribution, XCondition,
};
pub use crate::estimators::{
    compute_eif, estimate_contrast, estimate_onestep, estimate_substitution, estimate_tmle,
    wald_ci, ContrastResult, EstimateResult, EstimatorKind, EstimatorOptions, ResultFlag,
};
