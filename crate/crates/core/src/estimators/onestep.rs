//! One-step bias correction: add the empirical mean of the estimated EIF,
//! evaluated at the plug-in value, to the plug-in estimate.
//!
//! The corrected estimate is not constrained to [0, 1]; results outside the
//! parameter space are flagged rather than truncated.

use crate::crossfit::NuisanceMatrices;
use crate::dataset::Dataset;
use crate::error::Result;
use crate::estimand::{conditioning_indices, EstimandSpec};
use crate::estimators::eif::{eif_values, EifInputs};
use crate::estimators::substitution::plugin_value;
use crate::estimators::{wald_ci, EstimateResult, EstimatorKind, EstimatorOptions, ResultFlag};
use crate::stats::mean;

pub fn estimate_onestep(
    data: &Dataset,
    spec: &EstimandSpec,
    nuisances: &NuisanceMatrices,
    options: &EstimatorOptions,
) -> Result<EstimateResult> {
    let idx = conditioning_indices(data, spec)?;
    let plugin = plugin_value(spec, nuisances, &idx);
    let inputs = EifInputs::from_nuisances(nuisances);
    let eif_at_plugin = eif_values(data, spec, &inputs, plugin)?;
    let psi = plugin + mean(&eif_at_plugin);

    let eif = eif_values(data, spec, &inputs, psi)?;
    let eif_mean = mean(&eif);
    let n = data.n();
    let se = crate::estimators::eif_standard_error(&eif, n)?;
    let ci = wald_ci(psi, &eif, n, options.level)?;

    let mut flags = Vec::new();
    if !(0.0..=1.0).contains(&psi) {
        flags.push(ResultFlag::OutOfRange);
    }

    Ok(EstimateResult {
        psi,
        eif,
        se: Some(se),
        ci: Some(ci),
        level: options.level,
        estimator: EstimatorKind::OneStep,
        spec: spec.clone(),
        eif_mean: Some(eif_mean),
        flags,
        n,
        conditioning_n: idx.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::crossfit::{FoldAssignment, FoldMarginals};
    use crate::dataset::AttemptRecord;
    use crate::estimand::EstimandKind;
    use ndarray::Array2;

    /// Balanced fixture: two players, one binary covariate cell structure,
    /// propensities exactly 0.5, outcomes arranged so cell means are exact.
    fn balanced_fixture() -> (Dataset, NuisanceMatrices) {
        // 8 records: (player, y): player 1 has mean 0.5, player 2 has 0.5.
        let players = [1, 1, 1, 1, 2, 2, 2, 2];
        let ys = [1.0, 0.0, 1.0, 0.0, 1.0, 0.0, 1.0, 0.0];
        let records: Vec<AttemptRecord> = players
            .iter()
            .zip(&ys)
            .map(|(&a, &y)| AttemptRecord::new(vec![0.0], a, y))
            .collect();
        let data = Dataset::with_default_labels(records, 2).unwrap();
        let n = data.n();
        // mu biased upward by +0.1 from the cell means.
        let mu = Array2::from_elem((n, 2), 0.6);
        let pi = Array2::from_elem((n, 2), 0.5);
        let folds = FoldAssignment::resubstitution(n);
        let nuis = NuisanceMatrices::from_parts(
            mu,
            vec![0.6; n],
            pi,
            folds.fold_of().to_vec(),
            vec![FoldMarginals {
                p_player: vec![0.5, 0.5],
                q_x: 1.0,
                r_joint: vec![0.5, 0.5],
            }],
        )
        .unwrap();
        (data, nuis)
    }

    #[test]
    fn onestep_removes_uniform_outcome_bias() {
        // Plug-in is 0.6 (biased by +0.1); the weighted-residual correction
        // is exactly +(ybar - mu) = -0.1, recovering the truth 0.5.
        let (data, nuis) = balanced_fixture();
        let spec = EstimandSpec::new(EstimandKind::Direct, 1);
        let r = estimate_onestep(&data, &spec, &nuis, &EstimatorOptions::default()).unwrap();
        assert!((r.psi - 0.5).abs() < 1e-12, "psi = {}", r.psi);
        assert!(r.se.unwrap() > 0.0);
    }

    #[test]
    fn onestep_equals_plugin_when_residuals_vanish() {
        // Y equals mu deterministically: the correction is exactly zero.
        let players = [1, 2, 1, 2];
        let ys = [1.0, 0.0, 1.0, 0.0];
        let records: Vec<AttemptRecord> = players
            .iter()
            .zip(&ys)
            .map(|(&a, &y)| AttemptRecord::new(vec![0.0], a, y))
            .collect();
        let data = Dataset::with_default_labels(records, 2).unwrap();
        let n = data.n();
        let mut mu = Array2::<f64>::zeros((n, 2));
        for i in 0..n {
            mu[[i, 0]] = 1.0 - 1e-6;
            mu[[i, 1]] = 1e-6;
        }
        // Force Y = mu exactly by overriding with clipped-extreme values.
        let pi = Array2::from_elem((n, 2), 0.5);
        let folds = FoldAssignment::resubstitution(n);
        let nuis = NuisanceMatrices::from_parts(
            mu,
            vec![0.5; n],
            pi,
            folds.fold_of().to_vec(),
            vec![FoldMarginals {
                p_player: vec![0.5, 0.5],
                q_x: 1.0,
                r_joint: vec![0.5, 0.5],
            }],
        )
        .unwrap();
        let spec = EstimandSpec::new(EstimandKind::Direct, 1);
        let plugin = plugin_value(&spec, &nuis, &[0, 1, 2, 3]);
        let r = estimate_onestep(&data, &spec, &nuis, &EstimatorOptions::default()).unwrap();
        // Residuals are O(1e-6) from clipping; correction is of that order.
        assert!((r.psi - plugin).abs() < 1e-5);
    }

    #[test]
    fn onestep_may_leave_unit_interval_and_flags_it() {
        // Small plug-in with a large negative correction: nuisances wildly
        // overpredict for the focal player's own attempts.
        let players = [1, 1, 2, 2, 2, 2, 2, 2];
        let ys = [0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 1.0];
        let records: Vec<AttemptRecord> = players
            .iter()
            .zip(&ys)
            .map(|(&a, &y)| AttemptRecord::new(vec![0.0], a, y))
            .collect();
        let data = Dataset::with_default_labels(records, 2).unwrap();
        let n = data.n();
        let mu = Array2::from_elem((n, 2), 0.9);
        let mut pi = Array2::<f64>::zeros((n, 2));
        for i in 0..n {
            pi[[i, 0]] = 0.05;
            pi[[i, 1]] = 0.95;
        }
        let folds = FoldAssignment::resubstitution(n);
        let nuis = NuisanceMatrices::from_parts(
            mu,
            vec![0.9; n],
            pi,
            folds.fold_of().to_vec(),
            vec![FoldMarginals {
                p_player: vec![0.25, 0.75],
                q_x: 1.0,
                r_joint: vec![0.25, 0.75],
            }],
        )
        .unwrap();
        let spec = EstimandSpec::new(EstimandKind::Direct, 1);
        let r = estimate_onestep(&data, &spec, &nuis, &EstimatorOptions::default()).unwrap();
        assert!(r.psi < 0.0, "psi = {}", r.psi);
        assert!(r.has_flag(ResultFlag::OutOfRange));
    }
}
