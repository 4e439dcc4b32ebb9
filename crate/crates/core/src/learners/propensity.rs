//! Player-assignment (propensity) model: one one-vs-rest Super Learner per
//! player, normalized so each prediction row sums to one.

use ndarray::ArrayView2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::learners::{fit_super_learner, LearnerSpec, SuperLearnerModel};
use crate::stats::PROB_CLIP;

/// Fitted propensity model over `m` players.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PropensityModel {
    per_player: Vec<SuperLearnerModel>,
    m: usize,
}

impl PropensityModel {
    pub fn m(&self) -> usize {
        self.m
    }

    /// Predicted assignment probabilities for one feature row: one-vs-rest
    /// probabilities normalized to sum to 1, clipped below at 1e-6, then
    /// renormalized.
    pub fn predict_row(&self, x: &[f64]) -> Vec<f64> {
        let mut p: Vec<f64> = self.per_player.iter().map(|sl| sl.predict_row(x)).collect();
        let total: f64 = p.iter().sum();
        for v in p.iter_mut() {
            *v /= total;
        }
        let mut clipped = false;
        for v in p.iter_mut() {
            if *v < PROB_CLIP {
                *v = PROB_CLIP;
                clipped = true;
            }
        }
        if clipped {
            let total: f64 = p.iter().sum();
            for v in p.iter_mut() {
                *v /= total;
            }
        }
        p
    }
}

/// Fit the propensity model on a training split. Every player in `1..=m`
/// must appear at least once; an absent player signals a practical
/// positivity failure upstream of this call.
pub fn fit_propensity(
    features: ArrayView2<'_, f64>,
    players: &[usize],
    m: usize,
    candidates: &[LearnerSpec],
    stacking_folds: usize,
) -> Result<PropensityModel> {
    if m < 2 {
        return Err(Error::InvalidConfig(format!(
            "propensity model needs m >= 2 players, got {m}"
        )));
    }
    if players.len() != features.nrows() {
        return Err(Error::InvalidConfig(
            "player list length does not match feature rows".into(),
        ));
    }
    let mut counts = vec![0usize; m + 1];
    for &a in players {
        if a == 0 || a > m {
            return Err(Error::InvalidConfig(format!(
                "player index {a} outside 1..={m}"
            )));
        }
        counts[a] += 1;
    }
    for a in 1..=m {
        if counts[a] == 0 {
            return Err(Error::DegeneratePlayer(a));
        }
    }

    let per_player: Result<Vec<SuperLearnerModel>> = (1..=m)
        .map(|a| {
            let targets: Vec<f64> = players.iter().map(|&pi| (pi == a) as i32 as f64).collect();
            fit_super_learner(features, &targets, candidates, stacking_folds)
        })
        .collect();

    Ok(PropensityModel {
        per_player: per_player?,
        m,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::Array2;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn fair_coin_assignment_recovered() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let n = 2000;
        let mut flat = Vec::new();
        let mut players = Vec::new();
        for _ in 0..n {
            flat.push(rng.gen_range(-1.0..1.0));
            players.push(if rng.gen::<bool>() { 1 } else { 2 });
        }
        let x = Array2::from_shape_vec((n, 1), flat).unwrap();
        let m = fit_propensity(
            x.view(),
            &players,
            2,
            &[LearnerSpec::Mean, LearnerSpec::default_logistic()],
            5,
        )
        .unwrap();
        for probe in [-0.9, 0.0, 0.9] {
            let p = m.predict_row(&[probe]);
            assert!((p[0] - 0.5).abs() < 0.05, "p = {:?}", p);
        }
    }

    #[test]
    fn rejects_single_player_universe() {
        let x = Array2::<f64>::zeros((4, 1));
        let players = vec![1, 1, 1, 1];
        assert!(fit_propensity(x.view(), &players, 1, &[LearnerSpec::Mean], 2).is_err());
    }

    #[test]
    fn absent_player_is_degenerate() {
        let x = Array2::<f64>::zeros((4, 1));
        let players = vec![1, 1, 1, 1];
        let err = fit_propensity(x.view(), &players, 2, &[LearnerSpec::Mean], 2).unwrap_err();
        assert!(matches!(err, Error::DegeneratePlayer(2)));
    }

    #[test]
    fn rows_sum_to_one_for_random_inputs() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let n = 120;
        let mut flat = Vec::new();
        let mut players = Vec::new();
        for i in 0..n {
            flat.extend_from_slice(&[rng.gen_range(-3.0..3.0), rng.gen_range(0.0..1.0)]);
            players.push(1 + (i % 3));
        }
        let x = Array2::from_shape_vec((n, 2), flat).unwrap();
        let m = fit_propensity(
            x.view(),
            &players,
            3,
            &[LearnerSpec::Mean, LearnerSpec::default_logistic()],
            4,
        )
        .unwrap();
        for _ in 0..1000 {
            let probe = [rng.gen_range(-3.0..3.0), rng.gen_range(0.0..1.0)];
            let p = m.predict_row(&probe);
            assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-10);
            assert!(p.iter().all(|&v| v > 0.0));
        }
    }

    #[test]
    fn mean_over_players_is_inverse_m_per_row() {
        // Normalization identity: each row's probabilities average to 1/m.
        let x = Array2::<f64>::zeros((12, 1));
        let players: Vec<usize> = (0..12).map(|i| 1 + (i % 4)).collect();
        let m = fit_propensity(x.view(), &players, 4, &[LearnerSpec::Mean], 3).unwrap();
        let p = m.predict_row(&[0.0]);
        let mean = p.iter().sum::<f64>() / 4.0;
        assert!((mean - 0.25).abs() < 1e-12);
    }
}
