//! Attempt-level data model.
//!
//! An attempt is one discrete action by one player with a binary outcome.
//! Covariates are already encoded to fixed-length numeric vectors by the
//! time they reach this type; ingestion owns the raw-to-numeric mapping.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One attempt: encoded covariates, the player who took it (1-based,
/// dense in `1..=m`), and the 0/1 outcome.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttemptRecord {
    pub x: Vec<f64>,
    pub player: usize,
    pub y: f64,
}

impl AttemptRecord {
    pub fn new(x: Vec<f64>, player: usize, y: f64) -> Self {
        AttemptRecord { x, player, y }
    }
}

/// An immutable analysis dataset: attempt records plus the player count and
/// display metadata. Construction validates the structural invariants once;
/// everything downstream relies on them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    records: Vec<AttemptRecord>,
    m: usize,
    player_labels: Vec<String>,
    covariate_names: Vec<String>,
}

impl Dataset {
    pub fn new(
        records: Vec<AttemptRecord>,
        m: usize,
        player_labels: Vec<String>,
        covariate_names: Vec<String>,
    ) -> Result<Self> {
        if records.is_empty() {
            return Err(Error::InvalidDataset("no records".into()));
        }
        if m < 2 {
            return Err(Error::InvalidDataset(format!(
                "need at least 2 players, got m = {m}"
            )));
        }
        if player_labels.len() != m {
            return Err(Error::InvalidDataset(format!(
                "label count {} does not match m = {m}",
                player_labels.len()
            )));
        }
        let dim = records[0].x.len();
        if dim != covariate_names.len() {
            return Err(Error::InvalidDataset(format!(
                "covariate dimension {dim} does not match {} names",
                covariate_names.len()
            )));
        }
        for (i, r) in records.iter().enumerate() {
            if r.y != 0.0 && r.y != 1.0 {
                return Err(Error::InvalidDataset(format!(
                    "record {i}: outcome {} is not 0 or 1",
                    r.y
                )));
            }
            if r.player == 0 || r.player > m {
                return Err(Error::InvalidDataset(format!(
                    "record {i}: player index {} outside 1..={m}",
                    r.player
                )));
            }
            if r.x.len() != dim {
                return Err(Error::InvalidDataset(format!(
                    "record {i}: covariate dimension {} != {dim}",
                    r.x.len()
                )));
            }
            if r.x.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite("covariate vector"));
            }
        }
        Ok(Dataset {
            records,
            m,
            player_labels,
            covariate_names,
        })
    }

    /// Convenience constructor with generated labels "P1".."Pm" and
    /// covariate names "x1".."xd".
    pub fn with_default_labels(records: Vec<AttemptRecord>, m: usize) -> Result<Self> {
        let dim = records.first().map_or(0, |r| r.x.len());
        let player_labels = (1..=m).map(|a| format!("P{a}")).collect();
        let covariate_names = (1..=dim).map(|j| format!("x{j}")).collect();
        Dataset::new(records, m, player_labels, covariate_names)
    }

    pub fn n(&self) -> usize {
        self.records.len()
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn records(&self) -> &[AttemptRecord] {
        &self.records
    }

    pub fn record(&self, i: usize) -> &AttemptRecord {
        &self.records[i]
    }

    pub fn player_labels(&self) -> &[String] {
        &self.player_labels
    }

    pub fn player_label(&self, a: usize) -> &str {
        &self.player_labels[a - 1]
    }

    pub fn covariate_names(&self) -> &[String] {
        &self.covariate_names
    }

    pub fn covariate_dim(&self) -> usize {
        self.covariate_names.len()
    }

    /// Player indices for all records, in record order.
    pub fn players(&self) -> Vec<usize> {
        self.records.iter().map(|r| r.player).collect()
    }

    /// Outcomes for all records, in record order.
    pub fn outcomes(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.y).collect()
    }

    /// Number of attempts by the given player.
    pub fn player_count(&self, a: usize) -> usize {
        self.records.iter().filter(|r| r.player == a).count()
    }
}
