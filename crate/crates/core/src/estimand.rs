//! Estimand specifications: which counterfactual parameter to target, for
//! which focal player, and over which reference sub-population.

use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::error::{Error, Result};

/// The three counterfactual parameters.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EstimandKind {
    /// Counterfactual success rate had every attempt in the reference
    /// population been taken by the focal player.
    Direct,
    /// Counterfactual success rate had the focal player's attempts been
    /// reassigned according to the observed assignment mechanism.
    Indirect,
    /// Counterfactual success rate had the focal player's attempts been
    /// reassigned uniformly at random over all players.
    #[serde(rename = "rand")]
    RandomReplacement,
}

impl EstimandKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            EstimandKind::Direct => "direct",
            EstimandKind::Indirect => "indirect",
            EstimandKind::RandomReplacement => "rand",
        }
    }
}

/// A single comparison applied to one encoded covariate column.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConstraintOp {
    Eq(f64),
    Ge(f64),
    Le(f64),
    Range(f64, f64),
}

impl ConstraintOp {
    fn holds(&self, v: f64) -> bool {
        match *self {
            ConstraintOp::Eq(c) => v == c,
            ConstraintOp::Ge(c) => v >= c,
            ConstraintOp::Le(c) => v <= c,
            ConstraintOp::Range(lo, hi) => v >= lo && v <= hi,
        }
    }
}

/// Covariate-space conditioning set: a conjunction of per-column
/// interval/equality constraints over the encoded covariate vector.
/// The empty conjunction is the always-true predicate.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct XCondition {
    pub constraints: Vec<(usize, ConstraintOp)>,
}

impl XCondition {
    /// The always-true predicate (the full covariate space).
    pub fn all() -> Self {
        XCondition::default()
    }

    pub fn single(column: usize, op: ConstraintOp) -> Self {
        XCondition {
            constraints: vec![(column, op)],
        }
    }

    pub fn is_trivial(&self) -> bool {
        self.constraints.is_empty()
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        self.constraints.iter().all(|(col, op)| op.holds(x[*col]))
    }
}

/// How a stochastic intervention reassigns an attempt to a player.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InterventionDistribution {
    /// Always assign player `a`.
    Degenerate(usize),
    /// Reassign according to the observed assignment mechanism P(A | X).
    Observational,
    /// Reassign uniformly at random over all players.
    Uniform,
}

impl InterventionDistribution {
    /// Intervention probabilities over players given the (estimated or true)
    /// propensity row for the attempt. The returned vector has length `m`
    /// and sums to 1.
    pub fn probabilities(&self, propensity_row: &[f64], m: usize) -> Vec<f64> {
        match *self {
            InterventionDistribution::Degenerate(a) => {
                let mut p = vec![0.0; m];
                p[a - 1] = 1.0;
                p
            }
            InterventionDistribution::Observational => propensity_row.to_vec(),
            InterventionDistribution::Uniform => vec![1.0 / m as f64; m],
        }
    }
}

/// A fully specified estimand: parameter kind, focal player, and the
/// covariate conditioning set. The player conditioning set is derived from
/// the kind: `Direct` conditions on all players, the other two condition on
/// the focal player's own attempts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimandSpec {
    pub kind: EstimandKind,
    pub focal_player: usize,
    #[serde(default)]
    pub x_condition: XCondition,
}

impl EstimandSpec {
    pub fn new(kind: EstimandKind, focal_player: usize) -> Self {
        EstimandSpec {
            kind,
            focal_player,
            x_condition: XCondition::all(),
        }
    }

    pub fn with_x_condition(mut self, x_condition: XCondition) -> Self {
        self.x_condition = x_condition;
        self
    }

    /// The intervention distribution implied by the estimand kind.
    pub fn intervention(&self) -> InterventionDistribution {
        match self.kind {
            EstimandKind::Direct => InterventionDistribution::Degenerate(self.focal_player),
            EstimandKind::Indirect => InterventionDistribution::Observational,
            EstimandKind::RandomReplacement => InterventionDistribution::Uniform,
        }
    }

    /// Whether a record's player satisfies the derived player conditioning
    /// set.
    pub fn player_in_reference(&self, player: usize) -> bool {
        match self.kind {
            EstimandKind::Direct => true,
            EstimandKind::Indirect | EstimandKind::RandomReplacement => {
                player == self.focal_player
            }
        }
    }
}

/// Indices of records in the estimand's conditioning set, in dataset order.
pub fn conditioning_indices(data: &Dataset, spec: &EstimandSpec) -> Result<Vec<usize>> {
    let idx: Vec<usize> = data
        .records()
        .iter()
        .enumerate()
        .filter(|(_, r)| spec.player_in_reference(r.player) && spec.x_condition.contains(&r.x))
        .map(|(i, _)| i)
        .collect();
    if idx.is_empty() {
        return Err(Error::EmptyConditioningSet);
    }
    Ok(idx)
}

/// Empirical success rate of player `a` over attempts in the covariate
/// conditioning set.
pub fn empirical_success_rate(
    data: &Dataset,
    a: usize,
    x_condition: &XCondition,
) -> Result<f64> {
    let mut sum = 0.0;
    let mut count = 0usize;
    for r in data.records() {
        if r.player == a && x_condition.contains(&r.x) {
            sum += r.y;
            count += 1;
        }
    }
    if count == 0 {
        return Err(Error::EmptyConditioningSet);
    }
    Ok(sum / count as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::AttemptRecord;

    fn toy(players: &[usize], xs: &[f64], ys: &[f64]) -> Dataset {
        let records = players
            .iter()
            .zip(xs)
            .zip(ys)
            .map(|((&a, &x), &y)| AttemptRecord::new(vec![x], a, y))
            .collect();
        let m = *players.iter().max().unwrap();
        Dataset::with_default_labels(records, m.max(2)).unwrap()
    }

    #[test]
    fn success_rate_simple_mean() {
        let d = toy(&[1, 1], &[0.0, 0.0], &[1.0, 0.0]);
        let r = empirical_success_rate(&d, 1, &XCondition::all()).unwrap();
        assert_eq!(r, 0.5);
    }

    #[test]
    fn success_rate_degenerate_outcomes() {
        let d = toy(&[1, 1, 2], &[0.0, 0.0, 0.0], &[1.0, 1.0, 0.0]);
        assert_eq!(empirical_success_rate(&d, 1, &XCondition::all()).unwrap(), 1.0);
    }

    #[test]
    fn success_rate_empty_set_errors() {
        let d = toy(&[1, 1], &[0.0, 0.0], &[1.0, 0.0]);
        let err = empirical_success_rate(&d, 2, &XCondition::all()).unwrap_err();
        assert!(matches!(err, Error::EmptyConditioningSet));
    }

    #[test]
    fn conditioning_random_replacement_picks_focal_records() {
        let d = toy(&[1, 2, 1], &[0.0; 3], &[0.0; 3]);
        let spec = EstimandSpec::new(EstimandKind::RandomReplacement, 1);
        assert_eq!(conditioning_indices(&d, &spec).unwrap(), vec![0, 2]);
    }

    #[test]
    fn conditioning_direct_takes_all_records() {
        let d = toy(&[1, 2, 1], &[0.0; 3], &[0.0; 3]);
        let spec = EstimandSpec::new(EstimandKind::Direct, 2);
        assert_eq!(conditioning_indices(&d, &spec).unwrap(), vec![0, 1, 2]);
    }

    #[test]
    fn conditioning_applies_x_predicate() {
        let d = toy(&[1, 1, 1], &[-1.0, 2.0, 3.0], &[0.0; 3]);
        let spec = EstimandSpec::new(EstimandKind::Indirect, 1)
            .with_x_condition(XCondition::single(0, ConstraintOp::Ge(0.0)));
        assert_eq!(conditioning_indices(&d, &spec).unwrap(), vec![1, 2]);
    }

    #[test]
    fn conditioning_direct_invariant_to_focal_player() {
        let d = toy(&[1, 2, 1, 2], &[0.0; 4], &[0.0; 4]);
        let a = conditioning_indices(&d, &EstimandSpec::new(EstimandKind::Direct, 1)).unwrap();
        let b = conditioning_indices(&d, &EstimandSpec::new(EstimandKind::Direct, 2)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn conditioning_is_idempotent_and_ordered() {
        let d = toy(&[1, 2, 1, 2, 1], &[0.0; 5], &[0.0; 5]);
        let spec = EstimandSpec::new(EstimandKind::Indirect, 1);
        let a = conditioning_indices(&d, &spec).unwrap();
        let b = conditioning_indices(&d, &spec).unwrap();
        assert_eq!(a, b);
        assert!(a.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn intervention_probabilities_sum_to_one() {
        let pi = vec![0.2, 0.3, 0.5];
        for kind in [
            InterventionDistribution::Degenerate(2),
            InterventionDistribution::Observational,
            InterventionDistribution::Uniform,
        ] {
            let p = kind.probabilities(&pi, 3);
            assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-10);
            assert!(p.iter().all(|&v| v >= 0.0));
        }
    }

    mod properties {
        use super::*;
        use proptest::prelude::*;

        fn dataset_strategy() -> impl Strategy<Value = Dataset> {
            (2usize..5, 2usize..40).prop_flat_map(|(m, n)| {
                (
                    proptest::collection::vec(1..=m, n),
                    proptest::collection::vec(-10.0f64..10.0, n),
                    proptest::collection::vec(0u8..2, n),
                    Just(m),
                )
                    .prop_map(|(players, xs, ys, m)| {
                        let records = players
                            .into_iter()
                            .zip(xs)
                            .zip(ys)
                            .map(|((a, x), y)| AttemptRecord::new(vec![x], a, y as f64))
                            .collect();
                        Dataset::with_default_labels(records, m).unwrap()
                    })
            })
        }

        proptest! {
            #[test]
            fn conditioning_is_idempotent_ordered_and_consistent(
                data in dataset_strategy(),
                focal in 1usize..5,
                threshold in -10.0f64..10.0,
            ) {
                let focal = 1 + (focal - 1) % data.m();
                for kind in [EstimandKind::Direct, EstimandKind::Indirect, EstimandKind::RandomReplacement] {
                    let spec = EstimandSpec::new(kind, focal)
                        .with_x_condition(XCondition::single(0, ConstraintOp::Ge(threshold)));
                    match conditioning_indices(&data, &spec) {
                        Ok(idx) => {
                            prop_assert!(idx.windows(2).all(|w| w[0] < w[1]));
                            prop_assert_eq!(
                                conditioning_indices(&data, &spec).unwrap(),
                                idx.clone()
                            );
                            for &i in &idx {
                                let r = data.record(i);
                                prop_assert!(spec.x_condition.contains(&r.x));
                                prop_assert!(spec.player_in_reference(r.player));
                            }
                        }
                        Err(Error::EmptyConditioningSet) => {
                            // Legal outcome for harsh thresholds.
                        }
                        Err(e) => return Err(TestCaseError::fail(format!("{e}"))),
                    }
                }
            }

            #[test]
            fn direct_conditioning_ignores_focal_player(
                data in dataset_strategy(),
                threshold in -10.0f64..10.0,
            ) {
                let cond = XCondition::single(0, ConstraintOp::Le(threshold));
                let base = conditioning_indices(
                    &data,
                    &EstimandSpec::new(EstimandKind::Direct, 1).with_x_condition(cond.clone()),
                );
                for focal in 2..=data.m() {
                    let other = conditioning_indices(
                        &data,
                        &EstimandSpec::new(EstimandKind::Direct, focal)
                            .with_x_condition(cond.clone()),
                    );
                    match (&base, &other) {
                        (Ok(a), Ok(b)) => prop_assert_eq!(a, b),
                        (Err(_), Err(_)) => {}
                        _ => return Err(TestCaseError::fail("focal changed the Direct set")),
                    }
                }
            }

            #[test]
            fn intervention_rows_are_distributions(
                weights in proptest::collection::vec(0.01f64..10.0, 2..6),
                pick in 0usize..6,
            ) {
                let m = weights.len();
                let total: f64 = weights.iter().sum();
                let pi: Vec<f64> = weights.iter().map(|w| w / total).collect();
                for kind in [
                    InterventionDistribution::Degenerate(1 + pick % m),
                    InterventionDistribution::Observational,
                    InterventionDistribution::Uniform,
                ] {
                    let p = kind.probabilities(&pi, m);
                    prop_assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-10);
                    prop_assert!(p.iter().all(|&v| v >= 0.0));
                }
            }
        }
    }
}
