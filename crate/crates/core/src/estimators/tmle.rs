//! Targeted estimation: fluctuate the initial outcome predictions along a
//! logistic submodel whose covariate carries the EIF residual weight, then
//! plug the updated predictions into the parameter mapping.
//!
//! Targeting runs in two stages. The first follows the cross-fitted
//! algorithm literally: for each fold, a scalar fluctuation is fit on the
//! fold's training set (in-sample predictions as offsets) and applied to
//! the held-out validation predictions. The second stage fits one pooled
//! fluctuation per targeting problem on the out-of-sample predictions,
//! which drives the empirical EIF equation to zero exactly rather than up
//! to sampling error. With `epsilon_pool` set, only the pooled stage runs.

use ndarray::Array2;

use crate::crossfit::{training_predictions, FoldAssignment, NuisanceMatrices};
use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::estimand::{conditioning_indices, EstimandKind, EstimandSpec};
use crate::estimators::eif::{eif_values, EifInputs};
use crate::estimators::{
    eif_standard_error, wald_ci, EstimateResult, EstimatorKind, EstimatorOptions, ResultFlag,
};
use crate::stats::{expit, logit, mean};

const EIF_MEAN_TOL: f64 = 1e-6;
const EPSILON_LIMIT: f64 = 10.0;
const SCORE_TOL: f64 = 1e-10;

pub fn estimate_tmle(
    data: &Dataset,
    spec: &EstimandSpec,
    nuisances: &NuisanceMatrices,
    folds: &FoldAssignment,
    options: &EstimatorOptions,
) -> Result<EstimateResult> {
    let idx = conditioning_indices(data, spec)?;
    let n = data.n();
    let m = data.m();
    let focal = spec.focal_player;
    let in_x: Vec<bool> = data
        .records()
        .iter()
        .map(|r| spec.x_condition.contains(&r.x))
        .collect();

    let mut mu_star = nuisances.mu.clone();
    let mut m_bar_star = nuisances.m_bar.clone();

    // Stage 1: per-fold fluctuations fit on training data, applied to the
    // held-out predictions.
    if !options.epsilon_pool && !folds.is_resubstitution() {
        for j in 0..folds.fold_count() {
            let Some(train_pred) = training_predictions(data, folds, nuisances, j) else {
                break; // injected nuisances carry no fold models
            };
            fluctuate_fold(
                data,
                spec,
                nuisances,
                folds,
                j,
                &train_pred.mu,
                &train_pred.m_bar,
                &train_pred.pi,
                &in_x,
                &mut mu_star,
                &mut m_bar_star,
            )?;
        }
    }

    // Stage 2: pooled completion on out-of-sample predictions.
    match spec.kind {
        EstimandKind::Direct => {
            let h: Vec<f64> = (0..n)
                .map(|i| {
                    if !in_x[i] {
                        return 0.0;
                    }
                    let fm = nuisances.marginals_for(i);
                    1.0 / (fm.q_x * nuisances.pi[[i, focal - 1]])
                })
                .collect();
            pooled_update_column(data, &h, focal, Some(focal), &in_x, &mut mu_star)?;
        }
        EstimandKind::Indirect => {
            let h: Vec<f64> = (0..n)
                .map(|i| {
                    if !in_x[i] {
                        return 0.0;
                    }
                    let fm = nuisances.marginals_for(i);
                    nuisances.pi[[i, focal - 1]] / fm.r_joint[focal - 1]
                })
                .collect();
            // Every in-set record participates in the fit.
            let offsets: Vec<f64> = m_bar_star.iter().map(|&v| logit(v)).collect();
            let (fit_o, fit_h, fit_y): (Vec<f64>, Vec<f64>, Vec<f64>) = {
                let mut o = Vec::new();
                let mut hh = Vec::new();
                let mut yy = Vec::new();
                for i in 0..n {
                    if in_x[i] {
                        o.push(offsets[i]);
                        hh.push(h[i]);
                        yy.push(data.record(i).y);
                    }
                }
                (o, hh, yy)
            };
            let eps = solve_epsilon(&fit_o, &fit_h, &fit_y)?;
            for i in 0..n {
                if in_x[i] {
                    m_bar_star[i] = expit(offsets[i] + eps * h[i]);
                }
            }
        }
        EstimandKind::RandomReplacement => {
            for a_prime in 1..=m {
                let h: Vec<f64> = (0..n)
                    .map(|i| {
                        if !in_x[i] {
                            return 0.0;
                        }
                        let fm = nuisances.marginals_for(i);
                        nuisances.pi[[i, focal - 1]]
                            / (fm.r_joint[focal - 1] * nuisances.pi[[i, a_prime - 1]])
                    })
                    .collect();
                pooled_update_column(data, &h, a_prime, Some(a_prime), &in_x, &mut mu_star)?;
            }
        }
    }

    // Substitution step over the conditioning set, weighted by the
    // fold-wise conditioning-event marginals so the EIF's centered term
    // averages to zero exactly. With fold-constant marginals this is the
    // plain mean.
    let mut num = 0.0;
    let mut den = 0.0;
    for &i in &idx {
        let fm = nuisances.marginals_for(i);
        let w = match spec.kind {
            EstimandKind::Direct => 1.0 / fm.q_x,
            EstimandKind::Indirect | EstimandKind::RandomReplacement => {
                1.0 / fm.r_joint[focal - 1]
            }
        };
        let g = match spec.kind {
            EstimandKind::Direct => mu_star[[i, focal - 1]],
            EstimandKind::Indirect => m_bar_star[i],
            EstimandKind::RandomReplacement => {
                (0..m).map(|a| mu_star[[i, a]]).sum::<f64>() / m as f64
            }
        };
        num += w * g;
        den += w;
    }
    let psi = num / den;

    let inputs = EifInputs {
        mu: mu_star.view(),
        m_bar: &m_bar_star,
        pi: nuisances.pi.view(),
        fold_of: &nuisances.fold_of,
        fold_marginals: &nuisances.fold_marginals,
    };
    let eif = eif_values(data, spec, &inputs, psi)?;
    let eif_mean = mean(&eif);
    let se = eif_standard_error(&eif, n)?;
    let ci = wald_ci(psi, &eif, n, options.level)?;

    let mut flags = Vec::new();
    if eif_mean.abs() > EIF_MEAN_TOL {
        flags.push(ResultFlag::TargetingIncomplete);
    }

    Ok(EstimateResult {
        psi,
        eif,
        se: Some(se),
        ci: Some(ci),
        level: options.level,
        estimator: EstimatorKind::Tmle,
        spec: spec.clone(),
        eif_mean: Some(eif_mean),
        flags,
        n,
        conditioning_n: idx.len(),
    })
}

/// Stage-1 fluctuation for one fold: fit epsilon on the fold's training
/// records (in-sample offsets and weights) and update the fold's validation
/// predictions from the initial cross-fitted values.
#[allow(clippy::too_many_arguments)]
fn fluctuate_fold(
    data: &Dataset,
    spec: &EstimandSpec,
    nuisances: &NuisanceMatrices,
    folds: &FoldAssignment,
    j: usize,
    mu_train: &Array2<f64>,
    m_bar_train: &[f64],
    pi_train: &Array2<f64>,
    in_x: &[bool],
    mu_star: &mut Array2<f64>,
    m_bar_star: &mut Vec<f64>,
) -> Result<()> {
    let m = data.m();
    let focal = spec.focal_player;
    let fm = &nuisances.fold_marginals[j];
    let train = folds.training(j);

    match spec.kind {
        EstimandKind::Direct => {
            let mut o = Vec::new();
            let mut h = Vec::new();
            let mut y = Vec::new();
            for (row, &i) in train.iter().enumerate() {
                let rec = data.record(i);
                if rec.player == focal && in_x[i] {
                    o.push(logit(mu_train[[row, focal - 1]]));
                    h.push(1.0 / (fm.q_x * pi_train[[row, focal - 1]]));
                    y.push(rec.y);
                }
            }
            let eps = solve_epsilon(&o, &h, &y)?;
            for &i in folds.validation(j) {
                if in_x[i] {
                    let cov = 1.0 / (fm.q_x * nuisances.pi[[i, focal - 1]]);
                    mu_star[[i, focal - 1]] =
                        expit(logit(nuisances.mu[[i, focal - 1]]) + eps * cov);
                }
            }
        }
        EstimandKind::Indirect => {
            let mut o = Vec::new();
            let mut h = Vec::new();
            let mut y = Vec::new();
            for (row, &i) in train.iter().enumerate() {
                if in_x[i] {
                    o.push(logit(m_bar_train[row]));
                    h.push(pi_train[[row, focal - 1]] / fm.r_joint[focal - 1]);
                    y.push(data.record(i).y);
                }
            }
            let eps = solve_epsilon(&o, &h, &y)?;
            for &i in folds.validation(j) {
                if in_x[i] {
                    let cov = nuisances.pi[[i, focal - 1]] / fm.r_joint[focal - 1];
                    m_bar_star[i] = expit(logit(nuisances.m_bar[i]) + eps * cov);
                }
            }
        }
        EstimandKind::RandomReplacement => {
            for a_prime in 1..=m {
                let mut o = Vec::new();
                let mut h = Vec::new();
                let mut y = Vec::new();
                for (row, &i) in train.iter().enumerate() {
                    let rec = data.record(i);
                    if rec.player == a_prime && in_x[i] {
                        o.push(logit(mu_train[[row, a_prime - 1]]));
                        h.push(
                            pi_train[[row, focal - 1]]
                                / (fm.r_joint[focal - 1] * pi_train[[row, a_prime - 1]]),
                        );
                        y.push(rec.y);
                    }
                }
                let eps = solve_epsilon(&o, &h, &y)?;
                for &i in folds.validation(j) {
                    if in_x[i] {
                        let cov = nuisances.pi[[i, focal - 1]]
                            / (fm.r_joint[focal - 1] * nuisances.pi[[i, a_prime - 1]]);
                        mu_star[[i, a_prime - 1]] =
                            expit(logit(nuisances.mu[[i, a_prime - 1]]) + eps * cov);
                    }
                }
            }
        }
    }
    Ok(())
}

/// Pooled fluctuation of one outcome column: fit on records whose player
/// matches `fit_player` (within the covariate set), update the column for
/// every in-set record, both from the current values.
fn pooled_update_column(
    data: &Dataset,
    h: &[f64],
    column_player: usize,
    fit_player: Option<usize>,
    in_x: &[bool],
    mu_star: &mut Array2<f64>,
) -> Result<()> {
    let n = data.n();
    let col = column_player - 1;
    let mut o = Vec::new();
    let mut hh = Vec::new();
    let mut y = Vec::new();
    for i in 0..n {
        if !in_x[i] {
            continue;
        }
        let rec = data.record(i);
        if fit_player.is_none_or(|p| rec.player == p) {
            o.push(logit(mu_star[[i, col]]));
            hh.push(h[i]);
            y.push(rec.y);
        }
    }
    let eps = solve_epsilon(&o, &hh, &y)?;
    if eps == 0.0 {
        return Ok(());
    }
    for i in 0..n {
        if in_x[i] {
            mu_star[[i, col]] = expit(logit(mu_star[[i, col]]) + eps * h[i]);
        }
    }
    Ok(())
}

/// Solve the one-dimensional offset-logistic score equation
/// `sum h_i (y_i - expit(o_i + eps h_i)) = 0` by Newton iteration with a
/// bisection fallback on [-10, 10]. A root outside that range signals
/// extreme weights, reported as `FluctuationDiverged`.
fn solve_epsilon(offsets: &[f64], h: &[f64], y: &[f64]) -> Result<f64> {
    if offsets.is_empty() || h.iter().all(|&v| v == 0.0) {
        return Ok(0.0);
    }
    // Saturated offsets: every residual is a pure probability-clipping
    // artifact, so the offset already maximizes the likelihood and the
    // score equation has no finite root.
    let max_resid = offsets
        .iter()
        .zip(y)
        .map(|(&o, &yi)| (yi - expit(o)).abs())
        .fold(0.0f64, f64::max);
    if max_resid <= 2.0 * crate::stats::PROB_CLIP {
        return Ok(0.0);
    }
    let score = |e: f64| -> f64 {
        offsets
            .iter()
            .zip(h)
            .zip(y)
            .map(|((&o, &hi), &yi)| hi * (yi - expit(o + e * hi)))
            .sum()
    };
    let curvature = |e: f64| -> f64 {
        offsets
            .iter()
            .zip(h)
            .map(|(&o, &hi)| {
                let p = expit(o + e * hi);
                hi * hi * p * (1.0 - p)
            })
            .sum()
    };

    let mut eps = 0.0f64;
    for _ in 0..50 {
        let s = score(eps);
        if s.abs() < SCORE_TOL {
            break;
        }
        let c: f64 = curvature(eps);
        if c <= 0.0 || !c.is_finite() {
            break;
        }
        let step = (s / c).clamp(-4.0, 4.0);
        eps += step;
        if step.abs() < 1e-13 {
            break;
        }
        if eps.abs() > EPSILON_LIMIT + 1.0 {
            break;
        }
    }

    if score(eps).abs() > SCORE_TOL || eps.abs() > EPSILON_LIMIT {
        // The score is strictly decreasing; bracket the root on the allowed
        // range or report divergence.
        if score(-EPSILON_LIMIT) < 0.0 {
            return Err(Error::FluctuationDiverged {
                epsilon: -EPSILON_LIMIT,
            });
        }
        if score(EPSILON_LIMIT) > 0.0 {
            return Err(Error::FluctuationDiverged {
                epsilon: EPSILON_LIMIT,
            });
        }
        let (mut lo, mut hi) = (-EPSILON_LIMIT, EPSILON_LIMIT);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if score(mid) > 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        eps = 0.5 * (lo + hi);
    }
    Ok(eps)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::crossfit::FoldMarginals;
    use crate::dataset::AttemptRecord;
    use crate::stats::logit;
    use ndarray::Array2;

    #[test]
    fn epsilon_zero_when_offset_already_optimal() {
        // Residuals sum to zero under the covariate weighting.
        let o = vec![logit(0.5); 4];
        let h = vec![2.0; 4];
        let y = vec![1.0, 0.0, 1.0, 0.0];
        let eps = solve_epsilon(&o, &h, &y).unwrap();
        assert!(eps.abs() < 1e-12);
    }

    #[test]
    fn epsilon_matches_grid_search_oracle() {
        let o = vec![logit(0.3), logit(0.4), logit(0.5), logit(0.6), logit(0.7)];
        let h = vec![1.0, 2.0, 0.5, 1.5, 1.0];
        let y = vec![1.0, 1.0, 0.0, 1.0, 0.0];
        let eps = solve_epsilon(&o, &h, &y).unwrap();
        // Golden-section search on the offset-logistic log-likelihood.
        let loglik = |e: f64| -> f64 {
            o.iter()
                .zip(&h)
                .zip(&y)
                .map(|((&oi, &hi), &yi)| {
                    let eta = oi + e * hi;
                    yi * eta - (1.0 + eta.exp()).ln()
                })
                .sum()
        };
        let (mut lo, mut hi) = (-10.0, 10.0);
        for _ in 0..300 {
            let m1 = lo + (hi - lo) / 3.0;
            let m2 = hi - (hi - lo) / 3.0;
            if loglik(m1) < loglik(m2) {
                lo = m1;
            } else {
                hi = m2;
            }
        }
        let oracle = 0.5 * (lo + hi);
        assert!((eps - oracle).abs() < 1e-7, "eps = {eps}, oracle = {oracle}");
    }

    #[test]
    fn epsilon_divergence_reported() {
        // All outcomes 1 with tiny weights: the MLE runs off to +infinity.
        let o = vec![logit(0.01); 6];
        let h = vec![0.05; 6];
        let y = vec![1.0; 6];
        assert!(matches!(
            solve_epsilon(&o, &h, &y),
            Err(Error::FluctuationDiverged { .. })
        ));
    }

    #[test]
    fn saturated_initial_fit_leaves_tmle_at_substitution() {
        // Y equals the initial prediction (up to clipping): epsilon = 0 for
        // every player, so TMLE equals the plug-in exactly.
        let players = [1, 2, 1, 2, 1, 2];
        let ys = [1.0, 0.0, 1.0, 0.0, 1.0, 0.0];
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
        let spec = EstimandSpec::new(EstimandKind::RandomReplacement, 1);
        let r =
            estimate_tmle(&data, &spec, &nuis, &folds, &EstimatorOptions::default()).unwrap();
        // Plug-in: mean over player-1 records of (mu1 + mu2)/2 = 0.5.
        assert!((r.psi - 0.5).abs() < 1e-9, "psi = {}", r.psi);
        assert!(r.eif_mean.unwrap().abs() < 1e-10);
        assert!(!r.has_flag(ResultFlag::TargetingIncomplete));
    }

    #[test]
    fn tmle_stays_in_unit_interval_where_onestep_exits() {
        // Upward-biased outcome model with a tiny focal propensity: the
        // one-step correction overshoots below zero on this fixture while
        // the targeted update stays a probability.
        let players = [1, 1, 2, 2, 2, 2, 2, 2];
        let ys = [0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 1.0];
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
        let r =
            estimate_tmle(&data, &spec, &nuis, &folds, &EstimatorOptions::default()).unwrap();
        assert!((0.0..=1.0).contains(&r.psi), "psi = {}", r.psi);
        assert!(r.eif_mean.unwrap().abs() < 1e-6);
    }
}
