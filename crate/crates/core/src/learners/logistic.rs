//! Ridge-penalized logistic regression fit by iteratively reweighted least
//! squares, with an optional per-row offset on the linear predictor.
//!
//! Features are standardized internally (the ridge penalty applies on the
//! standardized scale, intercept unpenalized) and coefficients are
//! back-transformed to the original units for prediction. Columns with zero
//! variance are excluded from the solve and receive coefficient zero.

use ndarray::ArrayView2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stats::{clip_prob, expit};

const SCORE_TOL: f64 = 1e-9;
const MAX_ITER: usize = 100;
const MIN_SCALE: f64 = 1e-12;

/// A fitted logistic regression model. `intercept` and `coefficients` are
/// on the original feature scale; predictions ignore any offset used during
/// fitting.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LogisticModel {
    pub intercept: f64,
    pub coefficients: Vec<f64>,
    pub converged: bool,
    /// Sup-norm of the penalized score at the returned solution, in the
    /// standardized parametrization the solver works in.
    pub score_sup: f64,
    ridge: f64,
    means: Vec<f64>,
    scales: Vec<f64>,
    beta_std: Vec<f64>,
    active: Vec<usize>,
}

impl LogisticModel {
    pub fn predict_row(&self, x: &[f64]) -> f64 {
        let mut eta = self.intercept;
        for (b, v) in self.coefficients.iter().zip(x) {
            eta += b * v;
        }
        clip_prob(expit(eta))
    }

    /// Recompute the sup-norm of the penalized score at the stored solution
    /// from raw data; used by tests as an optimality check independent of
    /// the solver's own bookkeeping.
    pub fn penalized_score_sup(
        &self,
        features: ArrayView2<'_, f64>,
        targets: &[f64],
        offset: Option<&[f64]>,
    ) -> f64 {
        let n = features.nrows();
        let k = self.active.len();
        let mut score = vec![0.0; k + 1];
        for i in 0..n {
            let mut eta = self.beta_std[0] + offset.map_or(0.0, |o| o[i]);
            for (j, &col) in self.active.iter().enumerate() {
                let z = (features[[i, col]] - self.means[j]) / self.scales[j];
                eta += self.beta_std[j + 1] * z;
            }
            let r = targets[i] - expit(eta);
            score[0] += r;
            for (j, &col) in self.active.iter().enumerate() {
                let z = (features[[i, col]] - self.means[j]) / self.scales[j];
                score[j + 1] += z * r;
            }
        }
        for j in 0..k {
            score[j + 1] -= self.ridge * self.beta_std[j + 1];
        }
        score.iter().fold(0.0, |acc, s| acc.max(s.abs()))
    }
}

/// Fit a logistic regression maximizing the ridge-penalized Bernoulli
/// log-likelihood, with `offset` added to the linear predictor row-wise.
pub fn fit_logistic(
    features: ArrayView2<'_, f64>,
    targets: &[f64],
    ridge: f64,
    offset: Option<&[f64]>,
) -> Result<LogisticModel> {
    let n = features.nrows();
    let p = features.ncols();
    if n == 0 || targets.is_empty() {
        return Err(Error::EmptyData("logistic regression"));
    }
    if targets.len() != n {
        return Err(Error::InvalidConfig(format!(
            "feature rows {n} != target length {}",
            targets.len()
        )));
    }
    if ridge < 0.0 {
        return Err(Error::InvalidConfig("ridge must be non-negative".into()));
    }
    if features.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("logistic features"));
    }
    if let Some(o) = offset {
        if o.len() != n || o.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("logistic offset"));
        }
    }

    // Standardize; drop zero-variance columns from the solve.
    let mut active = Vec::new();
    let mut means = Vec::new();
    let mut scales = Vec::new();
    for col in 0..p {
        let c = features.column(col);
        let mu = c.sum() / n as f64;
        let var = c.iter().map(|v| (v - mu) * (v - mu)).sum::<f64>() / n as f64;
        let sd = var.sqrt();
        if sd > MIN_SCALE {
            active.push(col);
            means.push(mu);
            scales.push(sd);
        }
    }
    let k = active.len();
    let dim = k + 1;
    let mut z = vec![0.0; n * k];
    for i in 0..n {
        for (j, &col) in active.iter().enumerate() {
            z[i * k + j] = (features[[i, col]] - means[j]) / scales[j];
        }
    }

    let mut beta = vec![0.0; dim];
    let mut eta = vec![0.0; n];
    let mut prob = vec![0.0; n];
    let mut score = vec![0.0; dim];
    let mut hessian = vec![0.0; dim * dim];

    let eval_eta = |beta: &[f64], eta: &mut [f64]| {
        for i in 0..n {
            let mut e = beta[0] + offset.map_or(0.0, |o| o[i]);
            for j in 0..k {
                e += beta[j + 1] * z[i * k + j];
            }
            eta[i] = e;
        }
    };
    let penalized_loglik = |beta: &[f64], eta: &[f64]| {
        let mut ll = 0.0;
        for i in 0..n {
            // log-likelihood written to stay finite for large |eta|
            ll += targets[i] * eta[i] - softplus(eta[i]);
        }
        for b in beta.iter().skip(1) {
            ll -= 0.5 * ridge * b * b;
        }
        ll
    };

    eval_eta(&beta, &mut eta);
    let mut ll = penalized_loglik(&beta, &eta);
    let mut converged = false;
    let mut score_sup = f64::INFINITY;

    for _ in 0..MAX_ITER {
        for i in 0..n {
            prob[i] = expit(eta[i]);
        }
        // Penalized score.
        score.iter_mut().for_each(|s| *s = 0.0);
        for i in 0..n {
            let r = targets[i] - prob[i];
            score[0] += r;
            for j in 0..k {
                score[j + 1] += z[i * k + j] * r;
            }
        }
        for j in 1..dim {
            score[j] -= ridge * beta[j];
        }
        score_sup = score.iter().fold(0.0f64, |acc, s| acc.max(s.abs()));
        if score_sup < SCORE_TOL {
            converged = true;
            break;
        }
        // Penalized Fisher information.
        hessian.iter_mut().for_each(|h| *h = 0.0);
        for i in 0..n {
            let w = (prob[i] * (1.0 - prob[i])).max(1e-10);
            hessian[0] += w;
            for j in 0..k {
                let zij = z[i * k + j];
                hessian[j + 1] += w * zij;
                for l in 0..=j {
                    hessian[(j + 1) * dim + (l + 1)] += w * zij * z[i * k + l];
                }
            }
        }
        for j in 1..dim {
            hessian[j * dim] = hessian[j];
            hessian[j * dim + j] += ridge;
        }
        for j in 1..dim {
            for l in (j + 1)..dim {
                hessian[j * dim + l] = hessian[l * dim + j];
            }
        }

        let delta = match solve_symmetric(&mut hessian.clone(), &score, dim) {
            Some(d) => d,
            None => {
                if ridge == 0.0 {
                    return Err(Error::SingularSystem);
                }
                return Err(Error::NonFinite("logistic normal equations"));
            }
        };

        // Step-halving on the penalized log-likelihood.
        let mut step = 1.0;
        let mut accepted = false;
        for _ in 0..20 {
            let cand: Vec<f64> = beta
                .iter()
                .zip(&delta)
                .map(|(b, d)| b + step * d)
                .collect();
            eval_eta(&cand, &mut eta);
            let cand_ll = penalized_loglik(&cand, &eta);
            if cand_ll.is_finite() && cand_ll >= ll - 1e-12 {
                beta = cand;
                ll = cand_ll;
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if !accepted {
            break;
        }
    }
    if !converged {
        // Recompute the final score for reporting.
        eval_eta(&beta, &mut eta);
        score.iter_mut().for_each(|s| *s = 0.0);
        for i in 0..n {
            let r = targets[i] - expit(eta[i]);
            score[0] += r;
            for j in 0..k {
                score[j + 1] += z[i * k + j] * r;
            }
        }
        for j in 1..dim {
            score[j] -= ridge * beta[j];
        }
        score_sup = score.iter().fold(0.0f64, |acc, s| acc.max(s.abs()));
        converged = score_sup < SCORE_TOL;
    }

    // Back-transform to raw scale.
    let mut coefficients = vec![0.0; p];
    let mut intercept = beta[0];
    for (j, &col) in active.iter().enumerate() {
        coefficients[col] = beta[j + 1] / scales[j];
        intercept -= beta[j + 1] * means[j] / scales[j];
    }

    Ok(LogisticModel {
        intercept,
        coefficients,
        converged,
        score_sup,
        ridge,
        means,
        scales,
        beta_std: beta,
        active,
    })
}

#[inline]
fn softplus(x: f64) -> f64 {
    if x > 30.0 {
        x
    } else if x < -30.0 {
        0.0
    } else {
        (1.0 + x.exp()).ln()
    }
}

/// Solve `A x = b` for a small symmetric positive-definite system via
/// Gaussian elimination with partial pivoting. Returns `None` when the
/// system is numerically singular.
fn solve_symmetric(a: &mut [f64], b: &[f64], dim: usize) -> Option<Vec<f64>> {
    let mut x = b.to_vec();
    let scale = a
        .iter()
        .fold(0.0f64, |acc, v| acc.max(v.abs()))
        .max(f64::MIN_POSITIVE);
    for col in 0..dim {
        let mut pivot_row = col;
        let mut pivot = a[col * dim + col].abs();
        for row in (col + 1)..dim {
            let v = a[row * dim + col].abs();
            if v > pivot {
                pivot = v;
                pivot_row = row;
            }
        }
        if pivot < 1e-12 * scale {
            return None;
        }
        if pivot_row != col {
            for j in 0..dim {
                a.swap(col * dim + j, pivot_row * dim + j);
            }
            x.swap(col, pivot_row);
        }
        let d = a[col * dim + col];
        for row in (col + 1)..dim {
            let f = a[row * dim + col] / d;
            if f == 0.0 {
                continue;
            }
            for j in col..dim {
                a[row * dim + j] -= f * a[col * dim + j];
            }
            x[row] -= f * x[col];
        }
    }
    for col in (0..dim).rev() {
        let mut v = x[col];
        for j in (col + 1)..dim {
            v -= a[col * dim + j] * x[j];
        }
        x[col] = v / a[col * dim + col];
    }
    Some(x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stats::logit;
    use ndarray::Array2;

    fn matrix(rows: &[&[f64]]) -> Array2<f64> {
        let p = rows[0].len();
        let flat: Vec<f64> = rows.iter().flat_map(|r| r.iter().copied()).collect();
        Array2::from_shape_vec((rows.len(), p), flat).unwrap()
    }

    #[test]
    fn symmetric_data_forces_zero_intercept() {
        let x = matrix(&[&[-1.0], &[1.0], &[-1.0], &[1.0]]);
        let y = [0.0, 1.0, 0.0, 1.0];
        let m = fit_logistic(x.view(), &y, 1e-4, None).unwrap();
        assert!(m.intercept.abs() < 1e-6, "intercept = {}", m.intercept);
        assert!(m.coefficients[0] > 0.0);
        assert!(m.converged);
    }

    #[test]
    fn zero_variance_feature_fits_intercept_only() {
        // 10 targets with mean 0.3; the constant column must get slope 0 and
        // the intercept must equal logit(0.3), even at ridge 0.
        let rows: Vec<&[f64]> = vec![&[5.0]; 10];
        let x = matrix(&rows);
        let y = [1.0, 1.0, 1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0];
        let m = fit_logistic(x.view(), &y, 0.0, None).unwrap();
        assert!((m.intercept - logit(0.3)).abs() < 1e-8);
        assert_eq!(m.coefficients[0], 0.0);
        let m2 = fit_logistic(x.view(), &y, 1e-4, None).unwrap();
        assert_eq!(m2.coefficients[0], 0.0);
    }

    // Brute-force oracle for the one-parameter (intercept-only) problem:
    // golden-section search over the penalized log-likelihood.
    fn brute_force_intercept(y: &[f64], ridge_unused: f64) -> f64 {
        let _ = ridge_unused; // intercept unpenalized
        let f = |b: f64| -> f64 {
            y.iter()
                .map(|&yi| yi * b - (1.0 + b.exp()).ln())
                .sum::<f64>()
        };
        let (mut lo, mut hi) = (-20.0, 20.0);
        for _ in 0..200 {
            let m1 = lo + (hi - lo) / 3.0;
            let m2 = hi - (hi - lo) / 3.0;
            if f(m1) < f(m2) {
                lo = m1;
            } else {
                hi = m2;
            }
        }
        0.5 * (lo + hi)
    }

    #[test]
    fn intercept_matches_brute_force_oracle() {
        let y = [1.0, 1.0, 1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0];
        let x = Array2::<f64>::zeros((10, 0));
        let m = fit_logistic(x.view(), &y, 0.0, None).unwrap();
        let oracle = brute_force_intercept(&y, 0.0);
        assert!((m.intercept - oracle).abs() < 1e-6);
        assert!((m.intercept - logit(0.3)).abs() < 1e-8);
    }

    #[test]
    fn offset_already_optimal_gives_zero_coefficients() {
        let x = Array2::<f64>::zeros((4, 0));
        let y = [1.0, 0.0, 1.0, 0.0];
        let offset = vec![logit(0.5); 4];
        let m = fit_logistic(x.view(), &y, 0.0, Some(&offset)).unwrap();
        assert!(m.intercept.abs() < 1e-9);
    }

    #[test]
    fn penalized_score_vanishes_at_optimum() {
        let x = matrix(&[
            &[0.1, 2.0],
            &[-0.3, 1.0],
            &[0.7, -1.5],
            &[1.2, 0.3],
            &[-0.8, -0.2],
            &[0.4, 1.1],
            &[0.0, -2.0],
            &[-1.1, 0.9],
        ]);
        let y = [1.0, 0.0, 1.0, 1.0, 0.0, 1.0, 0.0, 0.0];
        let m = fit_logistic(x.view(), &y, 1e-6, None).unwrap();
        assert!(m.converged);
        assert!(m.score_sup < 1e-9);
        assert!(m.penalized_score_sup(x.view(), &y, None) < 1e-8);
    }

    #[test]
    fn duplicate_columns_singular_without_ridge() {
        let x = matrix(&[&[1.0, 1.0], &[2.0, 2.0], &[3.0, 3.0], &[4.0, 4.0]]);
        let y = [0.0, 0.0, 1.0, 1.0];
        assert!(matches!(
            fit_logistic(x.view(), &y, 0.0, None),
            Err(Error::SingularSystem)
        ));
        assert!(fit_logistic(x.view(), &y, 1e-6, None).is_ok());
    }

    #[test]
    fn rejects_non_finite_features() {
        let x = matrix(&[&[f64::NAN], &[1.0]]);
        let y = [0.0, 1.0];
        assert!(matches!(
            fit_logistic(x.view(), &y, 0.0, None),
            Err(Error::NonFinite(_))
        ));
    }

    #[test]
    fn separated_data_stays_finite_with_ridge() {
        let x = matrix(&[&[0.0], &[0.0], &[1.0], &[1.0]]);
        let y = [0.0, 0.0, 1.0, 1.0];
        let m = fit_logistic(x.view(), &y, 1e-6, None).unwrap();
        let p0 = m.predict_row(&[0.0]);
        let p1 = m.predict_row(&[1.0]);
        assert!(p0 >= 1e-6 && p1 <= 1.0 - 1e-6);
        assert!(p0 < 0.01 && p1 > 0.99);
    }
}
