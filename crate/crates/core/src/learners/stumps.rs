//! Gradient boosting with depth-1 trees (stumps) on the logistic loss.
//!
//! Splits are found by exhaustive scan over midpoints of sorted unique
//! feature values, maximizing the second-order loss reduction; leaf values
//! are Newton steps. There is no subsampling, so fits are deterministic
//! given the inputs.

use ndarray::ArrayView2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stats::{clip_prob, expit, logit};

const HESS_FLOOR: f64 = 1e-12;
const MIN_GAIN: f64 = 1e-12;

/// One fitted stump. Rows with `x[feature] <= threshold` take the left
/// value. Leaf values already include the shrinkage factor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Stump {
    pub feature: usize,
    pub threshold: f64,
    pub left: f64,
    pub right: f64,
}

/// A boosted-stump model: a base log-odds score plus additive stumps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StumpModel {
    pub base_score: f64,
    pub stumps: Vec<Stump>,
}

impl StumpModel {
    pub fn predict_row(&self, x: &[f64]) -> f64 {
        let mut f = self.base_score;
        for s in &self.stumps {
            f += if x[s.feature] <= s.threshold {
                s.left
            } else {
                s.right
            };
        }
        clip_prob(expit(f))
    }
}

/// Fit `rounds` of boosted stumps with the given shrinkage in (0, 1].
/// Boosting stops early once no split reduces the loss.
pub fn fit_boosted_stumps(
    features: ArrayView2<'_, f64>,
    targets: &[f64],
    rounds: usize,
    shrinkage: f64,
) -> Result<StumpModel> {
    let n = features.nrows();
    let p = features.ncols();
    if n == 0 || targets.is_empty() {
        return Err(Error::EmptyData("boosted stumps"));
    }
    if rounds == 0 {
        return Err(Error::InvalidConfig("boosting rounds must be >= 1".into()));
    }
    if !(shrinkage > 0.0 && shrinkage <= 1.0) {
        return Err(Error::InvalidConfig("shrinkage must be in (0, 1]".into()));
    }
    if features.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("stump features"));
    }

    let mean = targets.iter().sum::<f64>() / n as f64;
    let base_score = logit(clip_prob(mean));

    // Pre-sorted row orders per feature; reused every round.
    let orders: Vec<Vec<usize>> = (0..p)
        .map(|f| {
            let mut idx: Vec<usize> = (0..n).collect();
            idx.sort_by(|&a, &b| {
                features[[a, f]]
                    .partial_cmp(&features[[b, f]])
                    .expect("finite features")
            });
            idx
        })
        .collect();

    let mut raw = vec![base_score; n];
    let mut stumps = Vec::new();

    for _ in 0..rounds {
        let mut grad = vec![0.0; n];
        let mut hess = vec![0.0; n];
        let mut g_total = 0.0;
        let mut h_total = 0.0;
        for i in 0..n {
            let prob = expit(raw[i]);
            grad[i] = targets[i] - prob;
            hess[i] = (prob * (1.0 - prob)).max(HESS_FLOOR);
            g_total += grad[i];
            h_total += hess[i];
        }
        let base_objective = g_total * g_total / h_total;

        let mut best: Option<(f64, usize, f64, f64, f64)> = None; // gain, feature, threshold, gl, hl
        for f in 0..p {
            let order = &orders[f];
            let mut gl = 0.0;
            let mut hl = 0.0;
            for w in 0..(n - 1) {
                let i = order[w];
                gl += grad[i];
                hl += hess[i];
                let v = features[[i, f]];
                let next = features[[order[w + 1], f]];
                if next <= v {
                    continue;
                }
                let mut threshold = 0.5 * (v + next);
                if threshold >= next {
                    threshold = v;
                }
                let gr = g_total - gl;
                let hr = h_total - hl;
                let gain = gl * gl / hl + gr * gr / hr - base_objective;
                if best.as_ref().is_none_or(|b| gain > b.0) {
                    best = Some((gain, f, threshold, gl, hl));
                }
            }
        }

        let Some((gain, feature, threshold, gl, hl)) = best else {
            break;
        };
        if gain <= MIN_GAIN {
            break;
        }
        let gr = g_total - gl;
        let hr = h_total - hl;
        let stump = Stump {
            feature,
            threshold,
            left: shrinkage * gl / hl,
            right: shrinkage * gr / hr,
        };
        for i in 0..n {
            raw[i] += if features[[i, feature]] <= stump.threshold {
                stump.left
            } else {
                stump.right
            };
        }
        stumps.push(stump);
    }

    Ok(StumpModel { base_score, stumps })
}
