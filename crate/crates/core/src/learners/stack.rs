//! Super Learner: stack candidate learners by minimizing cross-validated
//! Bernoulli log loss over the weight simplex.

use ndarray::{Array2, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::learners::{fit_learner, BinaryLearnerModel, LearnerSpec};
use crate::stats::{clip_prob, log_loss};

const META_ITERATIONS: usize = 500;
const META_STEP: f64 = 0.1;
const META_TOL: f64 = 1e-9;

/// A fitted stacked ensemble: full-data candidate fits, simplex weights,
/// and the cross-validated losses that produced them.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SuperLearnerModel {
    pub candidates: Vec<BinaryLearnerModel>,
    pub weights: Vec<f64>,
    pub cv_losses: Vec<f64>,
    pub ensemble_cv_loss: f64,
}

impl SuperLearnerModel {
    /// Weighted-average probability for one feature row.
    pub fn predict_row(&self, x: &[f64]) -> f64 {
        let p = self
            .candidates
            .iter()
            .zip(&self.weights)
            .map(|(c, w)| w * c.predict_row(x))
            .sum();
        clip_prob(p)
    }
}

/// Fit a Super Learner with `k` stacking folds (assigned round-robin in row
/// order, so the fit is deterministic given the inputs).
pub fn fit_super_learner(
    features: ArrayView2<'_, f64>,
    targets: &[f64],
    candidates: &[LearnerSpec],
    k: usize,
) -> Result<SuperLearnerModel> {
    let n = features.nrows();
    if n == 0 {
        return Err(Error::EmptyData("super learner"));
    }
    if candidates.is_empty() {
        return Err(Error::InvalidConfig("no candidate learners".into()));
    }
    if k < 2 {
        return Err(Error::InvalidConfig("stacking folds must be >= 2".into()));
    }
    if n < k {
        return Err(Error::InvalidConfig(format!(
            "need at least {k} rows for {k}-fold stacking, got {n}"
        )));
    }

    let n_cand = candidates.len();
    let mut cv_pred = Array2::<f64>::zeros((n, n_cand));
    for fold in 0..k {
        let train_rows: Vec<usize> = (0..n).filter(|i| i % k != fold).collect();
        let valid_rows: Vec<usize> = (0..n).filter(|i| i % k == fold).collect();
        let train_x = features.select(Axis(0), &train_rows);
        let train_y: Vec<f64> = train_rows.iter().map(|&i| targets[i]).collect();
        for (c, spec) in candidates.iter().enumerate() {
            let model = fit_learner(spec, train_x.view(), &train_y)?;
            for &i in &valid_rows {
                let row: Vec<f64> = features.row(i).to_vec();
                cv_pred[[i, c]] = model.predict_row(&row);
            }
        }
    }

    let cv_losses: Vec<f64> = (0..n_cand)
        .map(|c| {
            let col: Vec<f64> = cv_pred.column(c).to_vec();
            log_loss(&col, targets)
        })
        .collect();

    let weights = if n_cand == 1 {
        vec![1.0]
    } else {
        optimize_simplex_weights(&cv_pred, targets)
    };

    let blended: Vec<f64> = (0..n)
        .map(|i| {
            (0..n_cand)
                .map(|c| weights[c] * cv_pred[[i, c]])
                .sum::<f64>()
        })
        .collect();
    let ensemble_cv_loss = log_loss(&blended, targets);

    let fitted: Result<Vec<BinaryLearnerModel>> = candidates
        .iter()
        .map(|spec| fit_learner(spec, features, targets))
        .collect();

    Ok(SuperLearnerModel {
        candidates: fitted?,
        weights,
        cv_losses,
        ensemble_cv_loss,
    })
}

/// Minimize the Bernoulli log loss of blended probabilities over the weight
/// simplex by projected gradient descent.
fn optimize_simplex_weights(cv_pred: &Array2<f64>, targets: &[f64]) -> Vec<f64> {
    let n = cv_pred.nrows();
    let n_cand = cv_pred.ncols();
    let mut w = vec![1.0 / n_cand as f64; n_cand];
    let mut grad = vec![0.0; n_cand];
    for _ in 0..META_ITERATIONS {
        grad.iter_mut().for_each(|g| *g = 0.0);
        for i in 0..n {
            let q: f64 = (0..n_cand).map(|c| w[c] * cv_pred[[i, c]]).sum();
            let q = clip_prob(q);
            let d = (q - targets[i]) / (q * (1.0 - q));
            for c in 0..n_cand {
                grad[c] += d * cv_pred[[i, c]];
            }
        }
        let scale = 1.0 / n as f64;
        let proposal: Vec<f64> = w
            .iter()
            .zip(&grad)
            .map(|(wi, gi)| wi - META_STEP * gi * scale)
            .collect();
        let next = project_to_simplex(&proposal);
        let delta = w
            .iter()
            .zip(&next)
            .fold(0.0f64, |acc, (a, b)| acc.max((a - b).abs()));
        w = next;
        if delta < META_TOL {
            break;
        }
    }
    w
}

/// Euclidean projection onto the probability simplex.
fn project_to_simplex(v: &[f64]) -> Vec<f64> {
    let mut sorted = v.to_vec();
    sorted.sort_by(|a, b| b.partial_cmp(a).expect("finite weights"));
    let mut cumulative = 0.0;
    let mut theta = 0.0;
    for (k, &u) in sorted.iter().enumerate() {
        cumulative += u;
        let candidate = (cumulative - 1.0) / (k + 1) as f64;
        if u - candidate > 0.0 {
            theta = candidate;
        }
    }
    v.iter().map(|&u| (u - theta).max(0.0)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::Array2;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    use crate::stats::expit;

    #[test]
    fn single_candidate_gets_weight_one() {
        let x = Array2::<f64>::zeros((10, 1));
        let y: Vec<f64> = (0..10).map(|i| (i % 2) as f64).collect();
        let m = fit_super_learner(x.view(), &y, &[LearnerSpec::Mean], 5).unwrap();
        assert_eq!(m.weights, vec![1.0]);
    }

    #[test]
    fn strong_logistic_signal_dominates_the_mean() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let n = 2000;
        let mut flat = Vec::with_capacity(n);
        let mut y = Vec::with_capacity(n);
        for _ in 0..n {
            let x: f64 = rng.gen_range(-2.0..2.0);
            flat.push(x);
            let p = expit(3.0 * x);
            y.push((rng.gen::<f64>() < p) as i32 as f64);
        }
        let x = Array2::from_shape_vec((n, 1), flat).unwrap();
        let m = fit_super_learner(
            x.view(),
            &y,
            &[LearnerSpec::Mean, LearnerSpec::default_logistic()],
            5,
        )
        .unwrap();
        assert!(
            m.weights[1] >= 0.9,
            "logistic weight {} below 0.9 (cv losses {:?})",
            m.weights[1],
            m.cv_losses
        );
        assert!(m.cv_losses[1] < m.cv_losses[0]);
    }

    #[test]
    fn duplicate_candidates_tie_without_losing_loss() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let n = 200;
        let mut flat = Vec::new();
        let mut y = Vec::new();
        for _ in 0..n {
            let x: f64 = rng.gen_range(-1.0..1.0);
            flat.push(x);
            y.push((rng.gen::<f64>() < expit(x)) as i32 as f64);
        }
        let x = Array2::from_shape_vec((n, 1), flat).unwrap();
        let specs = [LearnerSpec::default_logistic(), LearnerSpec::default_logistic()];
        let m = fit_super_learner(x.view(), &y, &specs, 5).unwrap();
        assert!((m.ensemble_cv_loss - m.cv_losses[0]).abs() < 1e-10);
        assert!((m.weights.iter().sum::<f64>() - 1.0).abs() < 1e-10);
    }

    #[test]
    fn weights_lie_on_simplex_and_ensemble_beats_candidates() {
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let n = 400;
        let mut flat = Vec::new();
        let mut y = Vec::new();
        for _ in 0..n {
            let x: f64 = rng.gen_range(-1.0..1.0);
            let z: f64 = rng.gen_range(-1.0..1.0);
            flat.extend_from_slice(&[x, z]);
            y.push((rng.gen::<f64>() < expit(1.5 * x - z)) as i32 as f64);
        }
        let x = Array2::from_shape_vec((n, 2), flat).unwrap();
        let specs = [
            LearnerSpec::Mean,
            LearnerSpec::default_logistic(),
            LearnerSpec::BoostedStumps {
                rounds: 30,
                shrinkage: 0.2,
            },
        ];
        let m = fit_super_learner(x.view(), &y, &specs, 5).unwrap();
        assert!((m.weights.iter().sum::<f64>() - 1.0).abs() < 1e-10);
        assert!(m.weights.iter().all(|&w| w >= 0.0));
        let min_loss = m.cv_losses.iter().cloned().fold(f64::INFINITY, f64::min);
        assert!(m.ensemble_cv_loss <= min_loss + 1e-8);
    }

    #[test]
    fn simplex_projection_basics() {
        let p = project_to_simplex(&[0.5, 0.5]);
        assert!((p[0] - 0.5).abs() < 1e-12);
        let p = project_to_simplex(&[2.0, 0.0]);
        assert!((p[0] - 1.0).abs() < 1e-12 && p[1].abs() < 1e-12);
        let p = project_to_simplex(&[-1.0, -1.0, -1.0]);
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    mod properties {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn projection_lands_on_the_simplex_and_is_idempotent(
                v in proptest::collection::vec(-5.0f64..5.0, 1..8)
            ) {
                let p = project_to_simplex(&v);
                prop_assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-9);
                prop_assert!(p.iter().all(|&w| w >= 0.0));
                let again = project_to_simplex(&p);
                for (a, b) in p.iter().zip(&again) {
                    prop_assert!((a - b).abs() < 1e-9);
                }
            }
        }
    }
}
