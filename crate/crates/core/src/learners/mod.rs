//! Built-in probabilistic learners for binary outcomes plus a stacked
//! ensemble (Super Learner) used for nuisance estimation.
//!
//! All learners share the same contract: fit on an `n x p` feature matrix
//! with 0/1 targets, predict a probability per row, and clip predictions to
//! `[1e-6, 1 - 1e-6]` so downstream inverse weights stay bounded.

mod logistic;
mod propensity;
mod stack;
mod stumps;

pub use logistic::{fit_logistic, LogisticModel};
pub use propensity::{fit_propensity, PropensityModel};
pub use stack::{fit_super_learner, SuperLearnerModel};
pub use stumps::{fit_boosted_stumps, StumpModel};

use ndarray::ArrayView2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stats::clip_prob;

/// Configuration of one candidate learner.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LearnerSpec {
    Mean,
    Logistic { ridge: f64 },
    BoostedStumps { rounds: usize, shrinkage: f64 },
}

impl LearnerSpec {
    /// Logistic learner with the default separation-guarding ridge.
    pub fn default_logistic() -> Self {
        LearnerSpec::Logistic { ridge: 1e-6 }
    }
}

/// A fitted binary-outcome learner.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub enum BinaryLearnerModel {
    Mean { rate: f64 },
    Logistic(LogisticModel),
    BoostedStumps(StumpModel),
}

impl BinaryLearnerModel {
    /// Predicted success probability for one encoded feature row, clipped
    /// to `[1e-6, 1 - 1e-6]`.
    pub fn predict_row(&self, x: &[f64]) -> f64 {
        match self {
            BinaryLearnerModel::Mean { rate } => *rate,
            BinaryLearnerModel::Logistic(m) => m.predict_row(x),
            BinaryLearnerModel::BoostedStumps(m) => m.predict_row(x),
        }
    }
}

/// Fit the constant learner: predicts the clipped empirical mean of the
/// targets for any input.
pub fn fit_mean(targets: &[f64]) -> Result<BinaryLearnerModel> {
    if targets.is_empty() {
        return Err(Error::EmptyData("mean learner targets"));
    }
    let rate = clip_prob(targets.iter().sum::<f64>() / targets.len() as f64);
    Ok(BinaryLearnerModel::Mean { rate })
}

/// Fit one candidate learner according to its spec.
pub fn fit_learner(
    spec: &LearnerSpec,
    features: ArrayView2<'_, f64>,
    targets: &[f64],
) -> Result<BinaryLearnerModel> {
    match spec {
        LearnerSpec::Mean => fit_mean(targets),
        LearnerSpec::Logistic { ridge } => {
            let model = fit_logistic(features, targets, *ridge, None)?;
            Ok(BinaryLearnerModel::Logistic(model))
        }
        LearnerSpec::BoostedStumps { rounds, shrinkage } => {
            let model = fit_boosted_stumps(features, targets, *rounds, *shrinkage)?;
            Ok(BinaryLearnerModel::BoostedStumps(model))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mean_learner_predicts_empirical_mean() {
        let m = fit_mean(&[1.0, 1.0, 0.0, 0.0]).unwrap();
        assert_eq!(m.predict_row(&[123.0]), 0.5);
    }

    #[test]
    fn mean_learner_clips_degenerate_targets() {
        let m = fit_mean(&[1.0, 1.0, 1.0]).unwrap();
        assert_eq!(m.predict_row(&[]), 1.0 - 1e-6);
    }

    #[test]
    fn mean_learner_quarter() {
        let m = fit_mean(&[1.0, 0.0, 0.0, 0.0]).unwrap();
        assert_eq!(m.predict_row(&[]), 0.25);
    }

    #[test]
    fn mean_learner_rejects_empty() {
        assert!(matches!(fit_mean(&[]), Err(Error::EmptyData(_))));
    }
}
