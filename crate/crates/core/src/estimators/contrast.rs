//! Evaluation contrasts: a player's empirical success rate minus their
//! indirect-standardization or random-replacement parameter.

use serde::{Deserialize, Serialize};

use crate::crossfit::{FoldAssignment, NuisanceMatrices};
use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::estimand::{conditioning_indices, empirical_success_rate, EstimandKind, EstimandSpec};
use crate::estimators::{
    eif_standard_error, estimate_tmle, EstimatorOptions, ResultFlag,
};
use crate::stats::two_sided_z;

/// Conditioning sets below this size get a small-sample flag.
const SMALL_SAMPLE_N: usize = 30;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ContrastKind {
    IndirectContrast,
    RandContrast,
}

/// Difference between a player's empirical rate and a counterfactual
/// parameter, with EIF-based inference for the difference.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ContrastResult {
    pub kind: ContrastKind,
    pub player: usize,
    pub delta: f64,
    pub se: f64,
    pub ci: (f64, f64),
    pub level: f64,
    pub empirical_rate: f64,
    pub psi: f64,
    pub flags: Vec<ResultFlag>,
}

/// Estimate `empirical rate - psi` for an indirect or random-replacement
/// spec, using the targeted estimate of psi. The contrast EIF subtracts the
/// parameter's EIF from the EIF of the conditional empirical mean.
pub fn estimate_contrast(
    data: &Dataset,
    spec: &EstimandSpec,
    nuisances: &NuisanceMatrices,
    folds: &FoldAssignment,
    options: &EstimatorOptions,
) -> Result<ContrastResult> {
    let kind = match spec.kind {
        EstimandKind::Indirect => ContrastKind::IndirectContrast,
        EstimandKind::RandomReplacement => ContrastKind::RandContrast,
        EstimandKind::Direct => {
            return Err(Error::InvalidConfig(
                "contrasts are defined for indirect and random-replacement parameters".into(),
            ))
        }
    };
    let a = spec.focal_player;
    let idx = conditioning_indices(data, spec)?;
    let rate = empirical_success_rate(data, a, &spec.x_condition)?;
    let tmle = estimate_tmle(data, spec, nuisances, folds, options)?;

    let n = data.n();
    let p_cond = idx.len() as f64 / n as f64;
    let mut eif = vec![0.0; n];
    for &i in &idx {
        eif[i] = (data.record(i).y - rate) / p_cond;
    }
    for (d, t) in eif.iter_mut().zip(&tmle.eif) {
        *d -= t;
    }

    let delta = rate - tmle.psi;
    let se = eif_standard_error(&eif, n)?;
    let z = two_sided_z(options.level);
    let ci = (delta - z * se, delta + z * se);

    let mut flags = tmle.flags.clone();
    if idx.len() < SMALL_SAMPLE_N {
        flags.push(ResultFlag::SmallSample);
    }

    Ok(ContrastResult {
        kind,
        player: a,
        delta,
        se,
        ci,
        level: options.level,
        empirical_rate: rate,
        psi: tmle.psi,
        flags,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::crossfit::FoldMarginals;
    use crate::dataset::AttemptRecord;
    use ndarray::Array2;

    fn exchangeable_fixture() -> (Dataset, NuisanceMatrices, FoldAssignment) {
        // Both players share the same outcome law; the random-replacement
        // contrast is zero in truth.
        let players = [1, 2, 1, 2, 1, 2, 1, 2];
        let ys = [1.0, 1.0, 0.0, 0.0, 1.0, 1.0, 0.0, 0.0];
        let records: Vec<AttemptRecord> = players
            .iter()
            .zip(&ys)
            .map(|(&a, &y)| AttemptRecord::new(vec![0.0], a, y))
            .collect();
        let data = Dataset::with_default_labels(records, 2).unwrap();
        let n = data.n();
        let mu = Array2::from_elem((n, 2), 0.5);
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
        (data, nuis, folds)
    }

    #[test]
    fn identical_players_have_zero_contrast() {
        let (data, nuis, folds) = exchangeable_fixture();
        let spec = EstimandSpec::new(EstimandKind::RandomReplacement, 1);
        let r =
            estimate_contrast(&data, &spec, &nuis, &folds, &EstimatorOptions::default()).unwrap();
        assert!(r.delta.abs() < 1e-9, "delta = {}", r.delta);
        assert!(r.se > 0.0);
        assert_eq!(r.kind, ContrastKind::RandContrast);
    }

    #[test]
    fn direct_contrast_is_rejected() {
        let (data, nuis, folds) = exchangeable_fixture();
        let spec = EstimandSpec::new(EstimandKind::Direct, 1);
        assert!(
            estimate_contrast(&data, &spec, &nuis, &folds, &EstimatorOptions::default()).is_err()
        );
    }

    #[test]
    fn small_conditioning_set_is_flagged() {
        let (data, nuis, folds) = exchangeable_fixture();
        let spec = EstimandSpec::new(EstimandKind::Indirect, 2);
        let r =
            estimate_contrast(&data, &spec, &nuis, &folds, &EstimatorOptions::default()).unwrap();
        assert!(r.flags.contains(&ResultFlag::SmallSample));
    }
}
