//! Fold construction and out-of-sample nuisance prediction.
//!
//! Folds are stratified by player so every player appears in every training
//! set; otherwise fold-wise assignment marginals could hit zero and the
//! influence-function weights would be undefined.

use ndarray::Array2;
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::estimand::XCondition;
use crate::learners::{
    fit_propensity, fit_super_learner, LearnerSpec, PropensityModel, SuperLearnerModel,
};

/// Candidate library plus stacking-fold count for one nuisance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LearnerLibrary {
    pub candidates: Vec<LearnerSpec>,
    pub stacking_folds: usize,
}

impl LearnerLibrary {
    pub fn new(candidates: Vec<LearnerSpec>, stacking_folds: usize) -> Self {
        LearnerLibrary {
            candidates,
            stacking_folds,
        }
    }

    /// Mean-only library; used to induce nuisance misspecification in
    /// simulation scenarios.
    pub fn mean_only() -> Self {
        LearnerLibrary::new(vec![LearnerSpec::Mean], 2)
    }

    /// Mean + ridge-logistic library.
    pub fn mean_logistic() -> Self {
        LearnerLibrary::new(vec![LearnerSpec::Mean, LearnerSpec::default_logistic()], 5)
    }
}

/// Learner configuration for all three nuisances. The marginal outcome
/// regression reuses the outcome library without the player features.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LearnerConfig {
    pub outcome: LearnerLibrary,
    pub propensity: LearnerLibrary,
}

impl Default for LearnerConfig {
    fn default() -> Self {
        let full = LearnerLibrary::new(
            vec![
                LearnerSpec::Mean,
                LearnerSpec::default_logistic(),
                LearnerSpec::BoostedStumps {
                    rounds: 50,
                    shrinkage: 0.1,
                },
            ],
            5,
        );
        LearnerConfig {
            outcome: full.clone(),
            propensity: full,
        }
    }
}

/// Default cross-fitting fold count for a dataset of size `n`.
pub fn default_fold_count(n: usize) -> usize {
    if n >= 5000 {
        10
    } else {
        5
    }
}

/// A cross-fitting fold assignment: per-record fold index plus the
/// training/validation index sets.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldAssignment {
    fold_count: usize,
    fold_of: Vec<usize>,
    validation: Vec<Vec<usize>>,
    training: Vec<Vec<usize>>,
    resubstitution: bool,
}

impl FoldAssignment {
    pub fn fold_count(&self) -> usize {
        self.fold_count
    }

    pub fn fold_of(&self) -> &[usize] {
        &self.fold_of
    }

    pub fn validation(&self, j: usize) -> &[usize] {
        &self.validation[j]
    }

    pub fn training(&self, j: usize) -> &[usize] {
        &self.training[j]
    }

    pub fn is_resubstitution(&self) -> bool {
        self.resubstitution
    }

    /// The degenerate single-fold assignment where the training and
    /// validation sets are both the full sample. Used when nuisances are
    /// injected exactly (oracle tests) rather than cross-fitted.
    pub fn resubstitution(n: usize) -> Self {
        let all: Vec<usize> = (0..n).collect();
        FoldAssignment {
            fold_count: 1,
            fold_of: vec![0; n],
            validation: vec![all.clone()],
            training: vec![all],
            resubstitution: true,
        }
    }
}

/// Build a stratified fold assignment: each player's records are shuffled
/// and dealt round-robin over folds, so fold sizes are near-equal and every
/// player with at least two records appears in every training set.
pub fn make_folds(
    n: usize,
    players: &[usize],
    fold_count: usize,
    seed: u64,
) -> Result<FoldAssignment> {
    if fold_count < 2 {
        return Err(Error::InvalidConfig("fold count must be >= 2".into()));
    }
    if players.len() != n {
        return Err(Error::InvalidConfig(
            "player list length does not match n".into(),
        ));
    }
    if n < fold_count {
        return Err(Error::InvalidConfig(format!(
            "cannot split {n} records into {fold_count} folds"
        )));
    }
    let m = players.iter().copied().max().unwrap_or(0);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut fold_of = vec![usize::MAX; n];

    for a in 1..=m {
        let mut own: Vec<usize> = (0..n).filter(|&i| players[i] == a).collect();
        let count = own.len();
        if count < 2 {
            return Err(Error::InsufficientPlayerData { player: a, count });
        }
        own.shuffle(&mut rng);
        let start = rng.gen_range(0..fold_count);
        for (k, &i) in own.iter().enumerate() {
            fold_of[i] = (start + k) % fold_count;
        }
    }

    let mut validation = vec![Vec::new(); fold_count];
    for (i, &f) in fold_of.iter().enumerate() {
        if f == usize::MAX {
            return Err(Error::InvalidConfig(format!(
                "record {i} has player index 0"
            )));
        }
        validation[f].push(i);
    }
    let training: Vec<Vec<usize>> = (0..fold_count)
        .map(|j| (0..n).filter(|&i| fold_of[i] != j).collect())
        .collect();

    // Full player coverage in every training set.
    for a in 1..=m {
        let total = players.iter().filter(|&&p| p == a).count();
        for t in &validation {
            let in_validation = t.iter().filter(|&&i| players[i] == a).count();
            if total - in_validation == 0 {
                return Err(Error::InsufficientPlayerData {
                    player: a,
                    count: total,
                });
            }
        }
    }

    Ok(FoldAssignment {
        fold_count,
        fold_of,
        validation,
        training,
        resubstitution: false,
    })
}

/// Empirical marginals computed on one fold's training set: player
/// frequencies, the covariate-condition frequency, and their joint.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldMarginals {
    pub p_player: Vec<f64>,
    pub q_x: f64,
    pub r_joint: Vec<f64>,
}

/// The fitted models backing one fold, retained so the targeting step can
/// form in-sample predictions on the fold's training set.
#[derive(Debug, Clone)]
pub struct FoldModels {
    pub outcome: SuperLearnerModel,
    pub marginal_outcome: SuperLearnerModel,
    pub propensity: PropensityModel,
}

/// Cross-fitted nuisance predictions. Every entry in `mu`, `m_bar`, and
/// `pi` is out of sample: record `i`'s values come from the models trained
/// without fold `fold_of[i]`.
#[derive(Debug, Clone)]
pub struct NuisanceMatrices {
    pub mu: Array2<f64>,
    pub m_bar: Vec<f64>,
    pub pi: Array2<f64>,
    pub fold_of: Vec<usize>,
    pub fold_marginals: Vec<FoldMarginals>,
    pub fold_models: Option<Vec<FoldModels>>,
}

impl NuisanceMatrices {
    /// Assemble nuisance matrices from precomputed values (for example the
    /// exact truth of a simulated data-generating process). No fold models
    /// are attached, so targeting falls back to pooled fluctuation.
    pub fn from_parts(
        mu: Array2<f64>,
        m_bar: Vec<f64>,
        pi: Array2<f64>,
        fold_of: Vec<usize>,
        fold_marginals: Vec<FoldMarginals>,
    ) -> Result<Self> {
        let n = mu.nrows();
        if m_bar.len() != n || pi.nrows() != n || fold_of.len() != n {
            return Err(Error::InvalidConfig(
                "nuisance component lengths disagree".into(),
            ));
        }
        if pi.ncols() != mu.ncols() {
            return Err(Error::InvalidConfig(
                "mu and pi must have the same player dimension".into(),
            ));
        }
        if let Some(&max_fold) = fold_of.iter().max() {
            if max_fold >= fold_marginals.len() {
                return Err(Error::InvalidConfig(
                    "fold index exceeds marginal count".into(),
                ));
            }
        }
        Ok(NuisanceMatrices {
            mu,
            m_bar,
            pi,
            fold_of,
            fold_marginals,
            fold_models: None,
        })
    }

    pub fn n(&self) -> usize {
        self.mu.nrows()
    }

    pub fn m(&self) -> usize {
        self.mu.ncols()
    }

    /// Marginals for the fold containing record `i`.
    pub fn marginals_for(&self, i: usize) -> &FoldMarginals {
        &self.fold_marginals[self.fold_of[i]]
    }
}

/// Design matrix for the outcome regression: covariates followed by the
/// player one-hot block.
fn outcome_row(x: &[f64], player: usize, m: usize, buf: &mut Vec<f64>) {
    buf.clear();
    buf.extend_from_slice(x);
    for a in 1..=m {
        buf.push((a == player) as i32 as f64);
    }
}

struct FoldFit {
    mu_rows: Vec<(usize, Vec<f64>)>,
    m_bar_rows: Vec<(usize, f64)>,
    pi_rows: Vec<(usize, Vec<f64>)>,
    marginals: FoldMarginals,
    models: FoldModels,
}

fn fit_one_fold(
    data: &Dataset,
    train: &[usize],
    valid: &[usize],
    config: &LearnerConfig,
    x_condition: &XCondition,
) -> Result<FoldFit> {
    let m = data.m();
    let dim = data.covariate_dim();
    let n_train = train.len();

    let mut outcome_x = Array2::<f64>::zeros((n_train, dim + m));
    let mut marginal_x = Array2::<f64>::zeros((n_train, dim));
    let mut y = Vec::with_capacity(n_train);
    let mut players = Vec::with_capacity(n_train);
    let mut buf = Vec::with_capacity(dim + m);
    for (row, &i) in train.iter().enumerate() {
        let rec = data.record(i);
        outcome_row(&rec.x, rec.player, m, &mut buf);
        for (c, &v) in buf.iter().enumerate() {
            outcome_x[[row, c]] = v;
        }
        for (c, &v) in rec.x.iter().enumerate() {
            marginal_x[[row, c]] = v;
        }
        y.push(rec.y);
        players.push(rec.player);
    }

    let outcome = fit_super_learner(
        outcome_x.view(),
        &y,
        &config.outcome.candidates,
        config.outcome.stacking_folds,
    )?;
    let marginal_outcome = fit_super_learner(
        marginal_x.view(),
        &y,
        &config.outcome.candidates,
        config.outcome.stacking_folds,
    )?;
    let propensity = fit_propensity(
        marginal_x.view(),
        &players,
        m,
        &config.propensity.candidates,
        config.propensity.stacking_folds,
    )?;

    // Empirical marginals over the training set.
    let mut p_player = vec![0.0; m];
    let mut r_joint = vec![0.0; m];
    let mut q_count = 0usize;
    for &i in train {
        let rec = data.record(i);
        p_player[rec.player - 1] += 1.0;
        if x_condition.contains(&rec.x) {
            q_count += 1;
            r_joint[rec.player - 1] += 1.0;
        }
    }
    let nt = n_train as f64;
    for v in p_player.iter_mut() {
        *v /= nt;
    }
    for v in r_joint.iter_mut() {
        *v /= nt;
    }
    let marginals = FoldMarginals {
        p_player,
        q_x: q_count as f64 / nt,
        r_joint,
    };

    // Out-of-sample predictions on the validation set.
    let mut mu_rows = Vec::with_capacity(valid.len());
    let mut m_bar_rows = Vec::with_capacity(valid.len());
    let mut pi_rows = Vec::with_capacity(valid.len());
    for &i in valid {
        let rec = data.record(i);
        let mut mu_row = vec![0.0; m];
        for a in 1..=m {
            outcome_row(&rec.x, a, m, &mut buf);
            mu_row[a - 1] = outcome.predict_row(&buf);
        }
        mu_rows.push((i, mu_row));
        m_bar_rows.push((i, marginal_outcome.predict_row(&rec.x)));
        pi_rows.push((i, propensity.predict_row(&rec.x)));
    }

    Ok(FoldFit {
        mu_rows,
        m_bar_rows,
        pi_rows,
        marginals,
        models: FoldModels {
            outcome,
            marginal_outcome,
            propensity,
        },
    })
}

/// Cross-fit all nuisances: for each fold, fit the outcome regression,
/// marginal outcome regression, and propensity model on the training set
/// and predict on the held-out validation set. Folds run in parallel and
/// are reduced in fold order, so the output is seed-reproducible.
pub fn fit_nuisances(
    data: &Dataset,
    folds: &FoldAssignment,
    config: &LearnerConfig,
    x_condition: &XCondition,
) -> Result<NuisanceMatrices> {
    let n = data.n();
    let m = data.m();
    let fits: Result<Vec<FoldFit>> = (0..folds.fold_count())
        .into_par_iter()
        .map(|j| fit_one_fold(data, folds.training(j), folds.validation(j), config, x_condition))
        .collect();
    let fits = fits?;

    let mut mu = Array2::<f64>::zeros((n, m));
    let mut m_bar = vec![0.0; n];
    let mut pi = Array2::<f64>::zeros((n, m));
    let mut fold_marginals = Vec::with_capacity(fits.len());
    let mut fold_models = Vec::with_capacity(fits.len());
    for fit in fits {
        for (i, row) in fit.mu_rows {
            for (a, v) in row.into_iter().enumerate() {
                mu[[i, a]] = v;
            }
        }
        for (i, v) in fit.m_bar_rows {
            m_bar[i] = v;
        }
        for (i, row) in fit.pi_rows {
            for (a, v) in row.into_iter().enumerate() {
                pi[[i, a]] = v;
            }
        }
        fold_marginals.push(fit.marginals);
        fold_models.push(fit.models);
    }

    Ok(NuisanceMatrices {
        mu,
        m_bar,
        pi,
        fold_of: folds.fold_of().to_vec(),
        fold_marginals,
        fold_models: Some(fold_models),
    })
}

/// In-sample predictions of one fold's models on its own training rows,
/// aligned with `folds.training(j)`.
pub struct TrainingPredictions {
    pub mu: Array2<f64>,
    pub m_bar: Vec<f64>,
    pub pi: Array2<f64>,
}

/// Predictions of fold `j`'s models on fold `j`'s training set, as required
/// by the per-fold targeting step. Returns `None` when fold models were not
/// retained (injected nuisances).
pub fn training_predictions(
    data: &Dataset,
    folds: &FoldAssignment,
    nuisances: &NuisanceMatrices,
    j: usize,
) -> Option<TrainingPredictions> {
    if folds.is_resubstitution() {
        // Training set equals the validation set; reuse the stored matrices.
        return Some(TrainingPredictions {
            mu: nuisances.mu.clone(),
            m_bar: nuisances.m_bar.clone(),
            pi: nuisances.pi.clone(),
        });
    }
    let models = nuisances.fold_models.as_ref()?.get(j)?;
    let train = folds.training(j);
    let m = data.m();
    let mut mu_train = Array2::<f64>::zeros((train.len(), m));
    let mut m_bar_train = vec![0.0; train.len()];
    let mut pi_train = Array2::<f64>::zeros((train.len(), m));
    let mut buf = Vec::with_capacity(data.covariate_dim() + m);
    for (row, &i) in train.iter().enumerate() {
        let rec = data.record(i);
        for a in 1..=m {
            outcome_row(&rec.x, a, m, &mut buf);
            mu_train[[row, a - 1]] = models.outcome.predict_row(&buf);
        }
        m_bar_train[row] = models.marginal_outcome.predict_row(&rec.x);
        let p = models.propensity.predict_row(&rec.x);
        for (a, v) in p.into_iter().enumerate() {
            pi_train[[row, a]] = v;
        }
    }
    Some(TrainingPredictions {
        mu: mu_train,
        m_bar: m_bar_train,
        pi: pi_train,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::AttemptRecord;
    use crate::stats::expit;
    use rand_chacha::ChaCha8Rng;

    fn toy_dataset(n: usize, seed: u64) -> Dataset {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let records = (0..n)
            .map(|_| {
                let x: f64 = rng.gen_range(-1.0..1.0);
                let player = if rng.gen::<f64>() < expit(x) { 1 } else { 2 };
                let y = (rng.gen::<f64>() < 0.7) as i32 as f64;
                AttemptRecord::new(vec![x], player, y)
            })
            .collect();
        Dataset::with_default_labels(records, 2).unwrap()
    }

    #[test]
    fn folds_partition_and_balance() {
        let players: Vec<usize> = (0..10).map(|_| 1).collect();
        // Single player fails the m >= 2 dataset rule upstream, but the fold
        // builder itself only needs the per-player counts.
        let f = make_folds(10, &players, 5, 7).unwrap();
        let sizes: Vec<usize> = (0..5).map(|j| f.validation(j).len()).collect();
        assert_eq!(sizes, vec![2, 2, 2, 2, 2]);
        let mut seen = [false; 10];
        for j in 0..5 {
            for &i in f.validation(j) {
                assert!(!seen[i]);
                seen[i] = true;
            }
        }
        assert!(seen.iter().all(|&s| s));
    }

    #[test]
    fn folds_are_deterministic() {
        let players: Vec<usize> = (0..40).map(|i| 1 + (i % 3)).collect();
        let a = make_folds(40, &players, 4, 123).unwrap();
        let b = make_folds(40, &players, 4, 123).unwrap();
        assert_eq!(a, b);
        let c = make_folds(40, &players, 4, 124).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn single_observation_player_is_rejected() {
        let mut players: Vec<usize> = (0..20).map(|_| 1).collect();
        players[19] = 2;
        let err = make_folds(20, &players, 2, 1).unwrap_err();
        assert!(matches!(
            err,
            Error::InsufficientPlayerData { player: 2, count: 1 }
        ));
    }

    #[test]
    fn every_player_in_every_training_set() {
        let players: Vec<usize> = (0..30).map(|i| 1 + (i % 5)).collect();
        let f = make_folds(30, &players, 3, 9).unwrap();
        for j in 0..3 {
            for a in 1..=5 {
                assert!(
                    f.training(j).iter().any(|&i| players[i] == a),
                    "player {a} missing from training set {j}"
                );
            }
        }
    }

    #[test]
    fn nuisances_are_in_range_and_rows_sum_to_one() {
        let data = toy_dataset(120, 42);
        let folds = make_folds(120, &data.players(), 3, 5).unwrap();
        let config = LearnerConfig {
            outcome: LearnerLibrary::mean_logistic(),
            propensity: LearnerLibrary::mean_logistic(),
        };
        let nuis = fit_nuisances(&data, &folds, &config, &XCondition::all()).unwrap();
        for i in 0..data.n() {
            assert!(nuis.m_bar[i] >= 1e-6 && nuis.m_bar[i] <= 1.0 - 1e-6);
            let mut row_sum = 0.0;
            for a in 0..2 {
                assert!(nuis.mu[[i, a]] >= 1e-6 && nuis.mu[[i, a]] <= 1.0 - 1e-6);
                row_sum += nuis.pi[[i, a]];
            }
            assert!((row_sum - 1.0).abs() < 1e-10);
        }
        for fm in &nuis.fold_marginals {
            assert!((fm.p_player.iter().sum::<f64>() - 1.0).abs() < 1e-10);
            assert!(fm.p_player.iter().all(|&p| p > 0.0));
            assert_eq!(fm.q_x, 1.0);
        }
    }

    #[test]
    fn constant_outcome_rate_recovered() {
        // mu is constant 0.7; cross-fitted predictions should be near 0.7.
        let data = toy_dataset(1000, 11);
        let folds = make_folds(1000, &data.players(), 5, 3).unwrap();
        let config = LearnerConfig {
            outcome: LearnerLibrary::mean_logistic(),
            propensity: LearnerLibrary::mean_logistic(),
        };
        let nuis = fit_nuisances(&data, &folds, &config, &XCondition::all()).unwrap();
        let mut worst = 0.0f64;
        for i in 0..data.n() {
            for a in 0..2 {
                worst = worst.max((nuis.mu[[i, a]] - 0.7).abs());
            }
        }
        assert!(worst < 0.08, "worst deviation {worst}");
    }

    #[test]
    fn refitting_with_same_seed_is_bit_identical() {
        let data = toy_dataset(150, 8);
        let folds = make_folds(150, &data.players(), 3, 77).unwrap();
        let config = LearnerConfig {
            outcome: LearnerLibrary::mean_logistic(),
            propensity: LearnerLibrary::mean_logistic(),
        };
        let a = fit_nuisances(&data, &folds, &config, &XCondition::all()).unwrap();
        let b = fit_nuisances(&data, &folds, &config, &XCondition::all()).unwrap();
        assert_eq!(a.mu, b.mu);
        assert_eq!(a.pi, b.pi);
        assert_eq!(a.m_bar, b.m_bar);
    }
}
