//! Point estimation and inference for the three evaluation parameters via
//! substitution, one-step correction, and targeted (TMLE) estimation.

mod contrast;
mod eif;
mod onestep;
mod substitution;
mod tmle;
pub mod vonmises;

pub use contrast::{estimate_contrast, ContrastKind, ContrastResult};
pub use eif::compute_eif;
pub use onestep::estimate_onestep;
pub use substitution::estimate_substitution;
pub use tmle::estimate_tmle;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimand::EstimandSpec;
use crate::stats::{mean, two_sided_z};

/// Which estimator produced a result.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EstimatorKind {
    Substitution,
    OneStep,
    Tmle,
}

impl EstimatorKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            EstimatorKind::Substitution => "substitution",
            EstimatorKind::OneStep => "onestep",
            EstimatorKind::Tmle => "tmle",
        }
    }
}

/// Metadata flags attached to estimate results.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ResultFlag {
    /// The point estimate fell outside [0, 1] (possible for one-step).
    OutOfRange,
    /// Targeting finished but the empirical EIF equation was not solved to
    /// the 1e-6 tolerance.
    TargetingIncomplete,
    /// The conditioning set is very small; treat the interval with caution.
    SmallSample,
}

/// Shared estimator options.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimatorOptions {
    /// Confidence level for Wald intervals.
    pub level: f64,
    /// Fit the fluctuation parameter on pooled out-of-sample predictions
    /// instead of per training fold. Either way a pooled completion round
    /// runs last so the empirical EIF equation is solved exactly.
    pub epsilon_pool: bool,
}

impl Default for EstimatorOptions {
    fn default() -> Self {
        EstimatorOptions {
            level: 0.95,
            epsilon_pool: false,
        }
    }
}

/// A point estimate with optional EIF-based inference.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EstimateResult {
    pub psi: f64,
    /// Per-observation EIF values; empty for the substitution estimator.
    pub eif: Vec<f64>,
    pub se: Option<f64>,
    pub ci: Option<(f64, f64)>,
    pub level: f64,
    pub estimator: EstimatorKind,
    pub spec: EstimandSpec,
    pub eif_mean: Option<f64>,
    pub flags: Vec<ResultFlag>,
    pub n: usize,
    pub conditioning_n: usize,
}

impl EstimateResult {
    pub fn has_flag(&self, flag: ResultFlag) -> bool {
        self.flags.contains(&flag)
    }
}

/// Wald interval `psi ± z_{(1+level)/2} * sd(eif) / sqrt(n)`. The EIF is
/// (near) mean zero by construction, so its second moment is used as the
/// variance.
pub fn wald_ci(psi: f64, eif: &[f64], n: usize, level: f64) -> Result<(f64, f64)> {
    if n < 2 {
        return Err(Error::InvalidConfig(
            "Wald interval needs at least 2 observations".into(),
        ));
    }
    if !(0.0..1.0).contains(&level) {
        return Err(Error::InvalidConfig(format!(
            "confidence level must be in [0, 1), got {level}"
        )));
    }
    let se = eif_standard_error(eif, n)?;
    let z = two_sided_z(level);
    Ok((psi - z * se, psi + z * se))
}

/// Standard error from per-observation EIF values: `sqrt(mean(eif^2) / n)`.
pub fn eif_standard_error(eif: &[f64], n: usize) -> Result<f64> {
    if eif.is_empty() {
        return Err(Error::DegenerateEif);
    }
    let second_moment = mean(&eif.iter().map(|d| d * d).collect::<Vec<f64>>());
    if second_moment <= 0.0 {
        return Err(Error::DegenerateEif);
    }
    Ok((second_moment / n as f64).sqrt())
}
