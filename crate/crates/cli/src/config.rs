//! Run configuration: a JSON config file with CLI-flag overrides.

use serde::{Deserialize, Serialize};

use parr::crossfit::{LearnerConfig, LearnerLibrary};
use parr::learners::LearnerSpec;
use parr::EstimandKind;
use parr::EstimatorKind;

fn default_level() -> f64 {
    0.95
}

fn default_funnel_levels() -> Vec<f64> {
    vec![0.975, 0.99, 0.999]
}

fn default_linkage() -> String {
    "complete".to_string()
}

fn default_estimands() -> Vec<String> {
    vec!["all".to_string()]
}

fn default_estimators() -> Vec<String> {
    vec![
        "substitution".to_string(),
        "onestep".to_string(),
        "tmle".to_string(),
    ]
}

fn default_players() -> Vec<String> {
    vec!["all".to_string()]
}

/// Candidate learner entry in the config file.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum LearnerEntry {
    Mean,
    Logistic {
        #[serde(default = "default_ridge")]
        ridge: f64,
    },
    BoostedStumps {
        #[serde(default = "default_rounds")]
        rounds: usize,
        #[serde(default = "default_shrinkage")]
        shrinkage: f64,
    },
}

fn default_ridge() -> f64 {
    1e-6
}
fn default_rounds() -> usize {
    50
}
fn default_shrinkage() -> f64 {
    0.1
}

impl LearnerEntry {
    fn to_spec(&self) -> LearnerSpec {
        match self {
            LearnerEntry::Mean => LearnerSpec::Mean,
            LearnerEntry::Logistic { ridge } => LearnerSpec::Logistic { ridge: *ridge },
            LearnerEntry::BoostedStumps { rounds, shrinkage } => LearnerSpec::BoostedStumps {
                rounds: *rounds,
                shrinkage: *shrinkage,
            },
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LibraryConfig {
    pub candidates: Vec<LearnerEntry>,
    #[serde(default = "default_stacking")]
    pub stacking_folds: usize,
}

fn default_stacking() -> usize {
    5
}

impl Default for LibraryConfig {
    fn default() -> Self {
        LibraryConfig {
            candidates: vec![
                LearnerEntry::Mean,
                LearnerEntry::Logistic { ridge: 1e-6 },
                LearnerEntry::BoostedStumps {
                    rounds: 50,
                    shrinkage: 0.1,
                },
            ],
            stacking_folds: 5,
        }
    }
}

impl LibraryConfig {
    pub fn to_library(&self) -> LearnerLibrary {
        LearnerLibrary::new(
            self.candidates.iter().map(|c| c.to_spec()).collect(),
            self.stacking_folds,
        )
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct LearnersConfig {
    #[serde(default)]
    pub outcome: LibraryConfig,
    #[serde(default)]
    pub propensity: LibraryConfig,
}

impl LearnersConfig {
    pub fn to_learner_config(&self) -> LearnerConfig {
        LearnerConfig {
            outcome: self.outcome.to_library(),
            propensity: self.propensity.to_library(),
        }
    }
}

/// Full run configuration for `estimate` and `cluster`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunConfig {
    #[serde(default)]
    pub seed: u64,
    /// Cross-fitting folds; `None` selects the size-based default.
    #[serde(default)]
    pub folds: Option<usize>,
    #[serde(default = "default_level")]
    pub level: f64,
    #[serde(default = "default_estimands")]
    pub estimands: Vec<String>,
    #[serde(default = "default_estimators")]
    pub estimators: Vec<String>,
    #[serde(default = "default_players")]
    pub players: Vec<String>,
    #[serde(default = "default_funnel_levels")]
    pub funnel_levels: Vec<f64>,
    #[serde(default = "default_linkage")]
    pub linkage: String,
    #[serde(default)]
    pub epsilon_pool: bool,
    #[serde(default)]
    pub learners: LearnersConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: 0,
            folds: None,
            level: default_level(),
            estimands: default_estimands(),
            estimators: default_estimators(),
            players: default_players(),
            funnel_levels: default_funnel_levels(),
            linkage: default_linkage(),
            epsilon_pool: false,
            learners: LearnersConfig::default(),
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<(), String> {
        if !(0.0..1.0).contains(&self.level) {
            return Err(format!("level must be in [0, 1), got {}", self.level));
        }
        if let Some(j) = self.folds {
            if j < 2 {
                return Err(format!("folds must be >= 2, got {j}"));
            }
        }
        for l in &self.funnel_levels {
            if !(0.0..1.0).contains(l) {
                return Err(format!("funnel level {l} outside [0, 1)"));
            }
        }
        self.estimand_kinds()?;
        self.estimator_kinds()?;
        Ok(())
    }

    pub fn estimand_kinds(&self) -> Result<Vec<EstimandKind>, String> {
        let mut kinds = Vec::new();
        for e in &self.estimands {
            match e.as_str() {
                "all" => {
                    return Ok(vec![
                        EstimandKind::Direct,
                        EstimandKind::Indirect,
                        EstimandKind::RandomReplacement,
                    ])
                }
                "direct" => kinds.push(EstimandKind::Direct),
                "indirect" => kinds.push(EstimandKind::Indirect),
                "rand" | "random_replacement" => kinds.push(EstimandKind::RandomReplacement),
                other => return Err(format!("unknown estimand '{other}'")),
            }
        }
        if kinds.is_empty() {
            return Err("no estimands requested".to_string());
        }
        Ok(kinds)
    }

    pub fn estimator_kinds(&self) -> Result<Vec<EstimatorKind>, String> {
        let mut kinds = Vec::new();
        for e in &self.estimators {
            match e.as_str() {
                "substitution" => kinds.push(EstimatorKind::Substitution),
                "onestep" => kinds.push(EstimatorKind::OneStep),
                "tmle" => kinds.push(EstimatorKind::Tmle),
                other => return Err(format!("unknown estimator '{other}'")),
            }
        }
        if kinds.is_empty() {
            return Err("no estimators requested".to_string());
        }
        Ok(kinds)
    }
}
