//! Efficient influence function evaluation for the three parameters.
//!
//! Each EIF is a weighted outcome residual plus a centered conditional-mean
//! term. With a non-trivial covariate conditioning set, every term carries
//! the indicator of the set, and the normalizing constant is the fold-wise
//! empirical probability of the full conditioning event (the covariate set
//! alone for the direct parameter, jointly with the focal player for the
//! indirect and random-replacement parameters).

use ndarray::ArrayView2;

use crate::crossfit::{FoldMarginals, NuisanceMatrices};
use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::estimand::{EstimandKind, EstimandSpec};

/// Borrowed nuisance values; lets the targeting step evaluate the EIF at
/// fluctuated predictions without rebuilding `NuisanceMatrices`.
pub(crate) struct EifInputs<'a> {
    pub mu: ArrayView2<'a, f64>,
    pub m_bar: &'a [f64],
    pub pi: ArrayView2<'a, f64>,
    pub fold_of: &'a [usize],
    pub fold_marginals: &'a [FoldMarginals],
}

impl<'a> EifInputs<'a> {
    pub fn from_nuisances(nuisances: &'a NuisanceMatrices) -> Self {
        EifInputs {
            mu: nuisances.mu.view(),
            m_bar: &nuisances.m_bar,
            pi: nuisances.pi.view(),
            fold_of: nuisances.fold_of.as_slice(),
            fold_marginals: &nuisances.fold_marginals,
        }
    }
}

/// Per-observation EIF values at the supplied parameter value.
pub fn compute_eif(
    data: &Dataset,
    spec: &EstimandSpec,
    nuisances: &NuisanceMatrices,
    psi: f64,
) -> Result<Vec<f64>> {
    eif_values(data, spec, &EifInputs::from_nuisances(nuisances), psi)
}

pub(crate) fn eif_values(
    data: &Dataset,
    spec: &EstimandSpec,
    inputs: &EifInputs<'_>,
    psi: f64,
) -> Result<Vec<f64>> {
    if !psi.is_finite() {
        return Err(Error::NonFinite("psi passed to EIF"));
    }
    let n = data.n();
    let m = data.m();
    let focal = spec.focal_player;
    let mut out = vec![0.0; n];

    for (i, slot) in out.iter_mut().enumerate() {
        let rec = data.record(i);
        if !spec.x_condition.contains(&rec.x) {
            continue;
        }
        let fm = &inputs.fold_marginals[inputs.fold_of[i]];
        let value = match spec.kind {
            EstimandKind::Direct => {
                let q = fm.q_x;
                if q <= 0.0 {
                    return Err(Error::NonFinite("fold marginal P(X in X') is zero"));
                }
                let mu_a = inputs.mu[[i, focal - 1]];
                let resid = if rec.player == focal {
                    (rec.y - mu_a) / inputs.pi[[i, focal - 1]]
                } else {
                    0.0
                };
                (resid + mu_a - psi) / q
            }
            EstimandKind::Indirect => {
                let r = fm.r_joint[focal - 1];
                if r <= 0.0 {
                    return Err(Error::NonFinite("fold marginal P(A=a, X in X') is zero"));
                }
                let mbar = inputs.m_bar[i];
                let mut v = inputs.pi[[i, focal - 1]] * (rec.y - mbar);
                if rec.player == focal {
                    v += mbar - psi;
                }
                v / r
            }
            EstimandKind::RandomReplacement => {
                let r = fm.r_joint[focal - 1];
                if r <= 0.0 {
                    return Err(Error::NonFinite("fold marginal P(A=a, X in X') is zero"));
                }
                // The residual sum over players collapses to the observed one.
                let own = rec.player - 1;
                let ratio = inputs.pi[[i, focal - 1]] / inputs.pi[[i, own]];
                let mut v = ratio * (rec.y - inputs.mu[[i, own]]) / m as f64;
                if rec.player == focal {
                    let g = (0..m).map(|a| inputs.mu[[i, a]]).sum::<f64>() / m as f64;
                    v += g - psi;
                }
                v / r
            }
        };
        if !value.is_finite() {
            return Err(Error::NonFinite("EIF value"));
        }
        out[i] = value;
    }
    Ok(out)
}
