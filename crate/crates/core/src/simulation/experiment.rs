//! Monte-Carlo experiment harness: repeatedly simulate, fit, and estimate,
//! then summarize bias, spread, and interval coverage against the oracle.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::crossfit::{fit_nuisances, make_folds, LearnerConfig, LearnerLibrary};
use crate::error::Result;
use crate::estimand::{EstimandKind, EstimandSpec, XCondition};
use crate::estimators::{
    estimate_onestep, estimate_substitution, estimate_tmle, EstimatorKind, EstimatorOptions,
};
use crate::simulation::{generate, oracle_exact, oracle_mc, DgpSpec};
use crate::stats::{mean, mix_seed, sample_variance};

/// Which nuisance (if any) is deliberately restricted to the mean-only
/// learner.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scenario {
    BothCorrect,
    MuMisspecified,
    PiMisspecified,
    BothMisspecified,
}

impl Scenario {
    pub fn as_str(&self) -> &'static str {
        match self {
            Scenario::BothCorrect => "both_correct",
            Scenario::MuMisspecified => "mu_misspecified",
            Scenario::PiMisspecified => "pi_misspecified",
            Scenario::BothMisspecified => "both_misspecified",
        }
    }

    pub fn parse(s: &str) -> Option<Scenario> {
        match s {
            "both_correct" => Some(Scenario::BothCorrect),
            "mu_misspecified" => Some(Scenario::MuMisspecified),
            "pi_misspecified" => Some(Scenario::PiMisspecified),
            "both_misspecified" => Some(Scenario::BothMisspecified),
            _ => None,
        }
    }
}

/// Experiment setup. The correct library is used for nuisances the
/// scenario leaves well-specified; misspecified nuisances fall back to the
/// mean-only library.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub scenario: Scenario,
    pub n: usize,
    pub replications: usize,
    pub estimators: Vec<EstimatorKind>,
    pub estimands: Vec<EstimandKind>,
    pub focal_player: usize,
    pub folds: usize,
    pub seed: u64,
    pub level: f64,
    pub correct_library: LearnerLibrary,
    pub epsilon_pool: bool,
}

impl ExperimentConfig {
    pub fn new(scenario: Scenario, n: usize, replications: usize, seed: u64) -> Self {
        ExperimentConfig {
            scenario,
            n,
            replications,
            estimators: vec![
                EstimatorKind::Substitution,
                EstimatorKind::OneStep,
                EstimatorKind::Tmle,
            ],
            estimands: vec![
                EstimandKind::Direct,
                EstimandKind::Indirect,
                EstimandKind::RandomReplacement,
            ],
            focal_player: 1,
            folds: 5,
            seed,
            level: 0.95,
            correct_library: LearnerLibrary::mean_logistic(),
            epsilon_pool: false,
        }
    }

    fn learner_config(&self) -> LearnerConfig {
        let (outcome, propensity) = match self.scenario {
            Scenario::BothCorrect => (self.correct_library.clone(), self.correct_library.clone()),
            Scenario::MuMisspecified => (LearnerLibrary::mean_only(), self.correct_library.clone()),
            Scenario::PiMisspecified => (self.correct_library.clone(), LearnerLibrary::mean_only()),
            Scenario::BothMisspecified => (LearnerLibrary::mean_only(), LearnerLibrary::mean_only()),
        };
        LearnerConfig {
            outcome,
            propensity,
        }
    }
}

/// Summary for one (estimator, estimand) pair.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentCell {
    pub estimator: EstimatorKind,
    pub estimand: EstimandKind,
    pub truth: f64,
    pub mean_estimate: f64,
    pub bias: f64,
    /// Monte-Carlo standard error of the bias estimate.
    pub bias_mc_se: f64,
    pub empirical_se: f64,
    pub mean_estimated_se: Option<f64>,
    pub coverage: Option<f64>,
    pub replications: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub scenario: Scenario,
    pub n: usize,
    pub replications: usize,
    pub cells: Vec<ExperimentCell>,
    pub warnings: Vec<String>,
}

struct RepOutcome {
    // (estimator, estimand) -> (psi, se, ci)
    values: Vec<(EstimatorKind, EstimandKind, f64, Option<f64>, Option<(f64, f64)>)>,
}

/// Run the experiment: `replications` independent datasets, each
/// cross-fitted and estimated, summarized against the oracle truth.
/// Replications are parallel and derive their seeds from the base seed and
/// replication index, so results are scheduling-invariant.
pub fn run_experiment(dgp: &DgpSpec, config: &ExperimentConfig) -> Result<ExperimentReport> {
    dgp.validate()?;
    let mut warnings = Vec::new();
    if config.replications < 50 {
        warnings.push(format!(
            "replications {} below the recommended minimum of 50",
            config.replications
        ));
    }

    // Oracle truth per estimand.
    let mut truths = Vec::new();
    for &kind in &config.estimands {
        let spec = EstimandSpec::new(kind, config.focal_player);
        let truth = if dgp.is_discrete() {
            oracle_exact(dgp, &spec)?
        } else {
            oracle_mc(dgp, &spec, 400_000, mix_seed(config.seed, 0xC0FFEE))?.0
        };
        truths.push((kind, truth));
    }

    let learner_config = config.learner_config();
    let options = EstimatorOptions {
        level: config.level,
        epsilon_pool: config.epsilon_pool,
    };

    let outcomes: Result<Vec<RepOutcome>> = (0..config.replications)
        .into_par_iter()
        .map(|rep| -> Result<RepOutcome> {
            let rep_seed = mix_seed(config.seed, rep as u64);
            let data = generate(dgp, config.n, rep_seed)?;
            let folds = make_folds(
                data.n(),
                &data.players(),
                config.folds,
                mix_seed(rep_seed, 1),
            )?;
            let nuisances = fit_nuisances(&data, &folds, &learner_config, &XCondition::all())?;
            let mut values = Vec::new();
            for &kind in &config.estimands {
                let spec = EstimandSpec::new(kind, config.focal_player);
                for &estimator in &config.estimators {
                    let (psi, se, ci) = match estimator {
                        EstimatorKind::Substitution => {
                            let r = estimate_substitution(&data, &spec, &nuisances, &options)?;
                            (r.psi, None, None)
                        }
                        EstimatorKind::OneStep => {
                            let r = estimate_onestep(&data, &spec, &nuisances, &options)?;
                            (r.psi, r.se, r.ci)
                        }
                        EstimatorKind::Tmle => {
                            let r = estimate_tmle(&data, &spec, &nuisances, &folds, &options)?;
                            (r.psi, r.se, r.ci)
                        }
                    };
                    values.push((estimator, kind, psi, se, ci));
                }
            }
            Ok(RepOutcome { values })
        })
        .collect();
    let outcomes = outcomes?;

    let mut cells = Vec::new();
    for &(kind, truth) in &truths {
        for &estimator in &config.estimators {
            let mut psis = Vec::new();
            let mut ses = Vec::new();
            let mut covered = 0usize;
            let mut ci_count = 0usize;
            for rep in &outcomes {
                for &(e, k, psi, se, ci) in &rep.values {
                    if e == estimator && k == kind {
                        psis.push(psi);
                        if let Some(se) = se {
                            ses.push(se);
                        }
                        if let Some((lo, hi)) = ci {
                            ci_count += 1;
                            if lo <= truth && truth <= hi {
                                covered += 1;
                            }
                        }
                    }
                }
            }
            let mean_estimate = mean(&psis);
            let empirical_se = sample_variance(&psis).sqrt();
            let reps = psis.len();
            cells.push(ExperimentCell {
                estimator,
                estimand: kind,
                truth,
                mean_estimate,
                bias: mean_estimate - truth,
                bias_mc_se: empirical_se / (reps as f64).sqrt(),
                empirical_se,
                mean_estimated_se: if ses.is_empty() { None } else { Some(mean(&ses)) },
                coverage: if ci_count == 0 {
                    None
                } else {
                    Some(covered as f64 / ci_count as f64)
                },
                replications: reps,
            });
        }
    }

    Ok(ExperimentReport {
        scenario: config.scenario,
        n: config.n,
        replications: config.replications,
        cells,
        warnings,
    })
}

impl ExperimentReport {
    pub fn cell(&self, estimator: EstimatorKind, estimand: EstimandKind) -> Option<&ExperimentCell> {
        self.cells
            .iter()
            .find(|c| c.estimator == estimator && c.estimand == estimand)
    }

    /// One CSV row per cell, with a header.
    pub fn to_csv(&self) -> String {
        let mut out = String::from(
            "scenario,n,estimator,estimand,truth,mean_estimate,bias,bias_mc_se,empirical_se,mean_estimated_se,coverage,replications\n",
        );
        for c in &self.cells {
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{},{},{},{},{}\n",
                self.scenario.as_str(),
                self.n,
                c.estimator.as_str(),
                c.estimand.as_str(),
                c.truth,
                c.mean_estimate,
                c.bias,
                c.bias_mc_se,
                c.empirical_se,
                c.mean_estimated_se.map_or(String::new(), |v| v.to_string()),
                c.coverage.map_or(String::new(), |v| v.to_string()),
                c.replications
            ));
        }
        out
    }
}
