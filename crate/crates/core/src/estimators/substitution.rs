//! Plug-in (substitution) estimation: average the relevant cross-fitted
//! nuisance predictions over the conditioning set.

use crate::crossfit::NuisanceMatrices;
use crate::dataset::Dataset;
use crate::error::Result;
use crate::estimand::{conditioning_indices, EstimandKind, EstimandSpec};
use crate::estimators::{EstimateResult, EstimatorKind, EstimatorOptions};

/// Substitution estimate. No influence function is attached, so no standard
/// error or interval is reported.
pub fn estimate_substitution(
    data: &Dataset,
    spec: &EstimandSpec,
    nuisances: &NuisanceMatrices,
    options: &EstimatorOptions,
) -> Result<EstimateResult> {
    let idx = conditioning_indices(data, spec)?;
    let psi = plugin_value(spec, nuisances, &idx);
    Ok(EstimateResult {
        psi,
        eif: Vec::new(),
        se: None,
        ci: None,
        level: options.level,
        estimator: EstimatorKind::Substitution,
        spec: spec.clone(),
        eif_mean: None,
        flags: Vec::new(),
        n: data.n(),
        conditioning_n: idx.len(),
    })
}

/// The plug-in functional over the given conditioning indices.
pub(crate) fn plugin_value(
    spec: &EstimandSpec,
    nuisances: &NuisanceMatrices,
    idx: &[usize],
) -> f64 {
    let m = nuisances.m();
    let focal = spec.focal_player;
    let total: f64 = idx
        .iter()
        .map(|&i| match spec.kind {
            EstimandKind::Direct => nuisances.mu[[i, focal - 1]],
            EstimandKind::Indirect => nuisances.m_bar[i],
            EstimandKind::RandomReplacement => {
                (0..m).map(|a| nuisances.mu[[i, a]]).sum::<f64>() / m as f64
            }
        })
        .sum();
    total / idx.len() as f64
}
