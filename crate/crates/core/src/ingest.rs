//! CSV ingestion under a declarative schema: outcome coercion, covariate
//! encoding, missing-value policy, and player eligibility filtering.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::dataset::{AttemptRecord, Dataset};
use crate::error::{Error, Result};
use crate::estimand::{ConstraintOp, XCondition};

/// Missing-value policy for one covariate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
#[derive(Default)]
pub enum MissingPolicy {
    /// Drop rows where this covariate is missing.
    #[default]
    CompleteCase,
    /// Substitute a fixed value for missing entries.
    ConstantFill(f64),
}


#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CovariateType {
    Numeric,
    Binary,
    Categorical,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CovariateSpec {
    pub name: String,
    #[serde(rename = "type")]
    pub kind: CovariateType,
    #[serde(default)]
    pub missing: MissingPolicy,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EligibilityRule {
    /// Minimum attempts a player needs to enter the analysis dataset.
    pub min_attempts: usize,
}

impl Default for EligibilityRule {
    fn default() -> Self {
        EligibilityRule { min_attempts: 1 }
    }
}

/// A covariate-space constraint expressed against a named column (resolved
/// to encoded-column constraints during ingestion).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NamedConstraint {
    pub column: String,
    pub op: ConstraintOp,
}

/// Declarative description of an attempt-level CSV file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SchemaConfig {
    pub outcome: String,
    pub player: String,
    pub covariates: Vec<CovariateSpec>,
    #[serde(default)]
    pub eligibility: EligibilityRule,
    #[serde(default)]
    pub x_condition: Vec<NamedConstraint>,
}

impl SchemaConfig {
    pub fn validate(&self) -> Result<()> {
        let mut names: Vec<&str> = self.covariates.iter().map(|c| c.name.as_str()).collect();
        names.push(&self.outcome);
        names.push(&self.player);
        let mut sorted = names.clone();
        sorted.sort_unstable();
        sorted.dedup();
        if sorted.len() != names.len() {
            return Err(Error::InvalidConfig("duplicate column names in schema".into()));
        }
        if self.eligibility.min_attempts < 1 {
            return Err(Error::InvalidConfig("min_attempts must be >= 1".into()));
        }
        Ok(())
    }
}

/// Row bookkeeping for one ingestion run. Counts balance:
/// `raw_rows = kept + dropped_missing + dropped_ineligible`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IngestReport {
    pub raw_rows: usize,
    pub dropped_missing: usize,
    pub dropped_ineligible: usize,
    pub kept: usize,
    pub players_raw: usize,
    pub players_kept: usize,
    pub covariate_names: Vec<String>,
}

fn is_missing(value: &str) -> bool {
    let v = value.trim();
    v.is_empty() || v == "NA" || v == "NaN" || v == "nan" || v == "null"
}

fn parse_numeric(value: &str, row: usize, column: &str) -> Result<f64> {
    value.trim().parse::<f64>().map_err(|_| Error::UnparseableValue {
        row,
        column: column.to_string(),
        value: value.to_string(),
    })
}

/// Load a CSV file into a `Dataset` under the schema, together with the
/// ingestion report and the encoded covariate-space condition.
pub fn load_csv(
    path: &Path,
    schema: &SchemaConfig,
) -> Result<(Dataset, IngestReport, XCondition)> {
    let text = std::fs::read_to_string(path)?;
    load_csv_str(&text, schema)
}

/// As `load_csv`, over in-memory CSV text.
pub fn load_csv_str(
    text: &str,
    schema: &SchemaConfig,
) -> Result<(Dataset, IngestReport, XCondition)> {
    schema.validate()?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_reader(text.as_bytes());
    let headers = reader.headers()?.clone();
    let col_index = |name: &str| -> Result<usize> {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::MissingColumn(name.to_string()))
    };
    let outcome_col = col_index(&schema.outcome)?;
    let player_col = col_index(&schema.player)?;
    let covariate_cols: Vec<usize> = schema
        .covariates
        .iter()
        .map(|c| col_index(&c.name))
        .collect::<Result<_>>()?;

    // First pass: raw parse, collect categorical levels.
    struct RawRow {
        player: String,
        y: f64,
        // Raw per-covariate values; None = missing-and-filled later or drop.
        values: Vec<Option<String>>,
    }
    let mut raw_rows = Vec::new();
    let mut dropped_missing = 0usize;
    let mut levels: BTreeMap<usize, Vec<String>> = BTreeMap::new();
    for (row_num, record) in reader.records().enumerate() {
        let record = record?;
        let row = row_num + 2; // 1-based with header
        let y_raw = record.get(outcome_col).unwrap_or("");
        if is_missing(y_raw) {
            dropped_missing += 1;
            continue;
        }
        let y = parse_numeric(y_raw, row, &schema.outcome)?;
        if y != 0.0 && y != 1.0 {
            return Err(Error::NonBinaryOutcome {
                row,
                value: y_raw.to_string(),
            });
        }
        let player = record.get(player_col).unwrap_or("").trim().to_string();
        if player.is_empty() {
            dropped_missing += 1;
            continue;
        }

        let mut values = Vec::with_capacity(schema.covariates.len());
        let mut drop_row = false;
        for (spec, &col) in schema.covariates.iter().zip(&covariate_cols) {
            let raw = record.get(col).unwrap_or("");
            if is_missing(raw) {
                match spec.missing {
                    MissingPolicy::CompleteCase => {
                        drop_row = true;
                        break;
                    }
                    MissingPolicy::ConstantFill(_) => values.push(None),
                }
            } else {
                // Validate numeric/binary parse early so errors carry rows.
                match spec.kind {
                    CovariateType::Numeric => {
                        parse_numeric(raw, row, &spec.name)?;
                    }
                    CovariateType::Binary => {
                        let v = parse_numeric(raw, row, &spec.name)?;
                        if v != 0.0 && v != 1.0 {
                            return Err(Error::UnparseableValue {
                                row,
                                column: spec.name.clone(),
                                value: raw.to_string(),
                            });
                        }
                    }
                    CovariateType::Categorical => {}
                }
                values.push(Some(raw.trim().to_string()));
            }
        }
        if drop_row {
            dropped_missing += 1;
            continue;
        }
        for (c, spec) in schema.covariates.iter().enumerate() {
            if spec.kind == CovariateType::Categorical {
                if let Some(Some(v)) = values.get(c) {
                    let entry = levels.entry(c).or_default();
                    if !entry.contains(v) {
                        entry.push(v.clone());
                    }
                }
            }
        }
        raw_rows.push(RawRow { player, y, values });
    }
    let raw_count = raw_rows.len() + dropped_missing;

    // Eligibility: count attempts per player among parseable rows.
    let mut attempts: BTreeMap<String, usize> = BTreeMap::new();
    for r in &raw_rows {
        *attempts.entry(r.player.clone()).or_insert(0) += 1;
    }
    let players_raw = attempts.len();
    let eligible: Vec<String> = attempts
        .iter()
        .filter(|(_, &c)| c >= schema.eligibility.min_attempts)
        .map(|(p, _)| p.clone())
        .collect(); // BTreeMap iteration: lexicographic, deterministic
    let player_index: BTreeMap<&str, usize> = eligible
        .iter()
        .enumerate()
        .map(|(i, p)| (p.as_str(), i + 1))
        .collect();

    // Encoded covariate layout: numeric/binary passthrough; categoricals
    // one-hot with the lexicographically first level dropped.
    for level_list in levels.values_mut() {
        level_list.sort_unstable();
    }
    let mut covariate_names = Vec::new();
    for (c, spec) in schema.covariates.iter().enumerate() {
        match spec.kind {
            CovariateType::Numeric | CovariateType::Binary => {
                covariate_names.push(spec.name.clone())
            }
            CovariateType::Categorical => {
                let ls = levels.get(&c).cloned().unwrap_or_default();
                for level in ls.iter().skip(1) {
                    covariate_names.push(format!("{}_{}", spec.name, level));
                }
            }
        }
    }

    let mut records = Vec::new();
    let mut dropped_ineligible = 0usize;
    for r in &raw_rows {
        let Some(&player) = player_index.get(r.player.as_str()) else {
            dropped_ineligible += 1;
            continue;
        };
        let mut x = Vec::with_capacity(covariate_names.len());
        for (c, spec) in schema.covariates.iter().enumerate() {
            match spec.kind {
                CovariateType::Numeric | CovariateType::Binary => {
                    let v = match &r.values[c] {
                        Some(raw) => raw.parse::<f64>().expect("validated in first pass"),
                        None => match spec.missing {
                            MissingPolicy::ConstantFill(v) => v,
                            MissingPolicy::CompleteCase => unreachable!("dropped above"),
                        },
                    };
                    x.push(v);
                }
                CovariateType::Categorical => {
                    let ls = levels.get(&c).cloned().unwrap_or_default();
                    let value = match &r.values[c] {
                        Some(raw) => raw.clone(),
                        None => match &spec.missing {
                            MissingPolicy::ConstantFill(_) => String::new(),
                            MissingPolicy::CompleteCase => unreachable!("dropped above"),
                        },
                    };
                    for level in ls.iter().skip(1) {
                        x.push((level == &value) as i32 as f64);
                    }
                }
            }
        }
        records.push(AttemptRecord::new(x, player, r.y));
    }

    let kept = records.len();
    let report = IngestReport {
        raw_rows: raw_count,
        dropped_missing,
        dropped_ineligible,
        kept,
        players_raw,
        players_kept: eligible.len(),
        covariate_names: covariate_names.clone(),
    };
    let dataset = Dataset::new(records, eligible.len(), eligible, covariate_names.clone())?;

    // Resolve named constraints against the encoded layout.
    let mut constraints = Vec::new();
    for c in &schema.x_condition {
        let idx = covariate_names
            .iter()
            .position(|n| n == &c.column)
            .ok_or_else(|| Error::MissingColumn(c.column.clone()))?;
        constraints.push((idx, c.op.clone()));
    }

    Ok((dataset, report, XCondition { constraints }))
}

/// Canonicalized CSV of an encoded dataset: player label, outcome, and the
/// encoded covariates. Re-ingesting with `canonical_schema` reproduces the
/// dataset.
pub fn emit_canonical_csv(data: &Dataset) -> String {
    let mut out = String::from("player,outcome");
    for name in data.covariate_names() {
        out.push(',');
        out.push_str(name);
    }
    out.push('\n');
    for r in data.records() {
        out.push_str(data.player_label(r.player));
        out.push(',');
        out.push_str(&format!("{}", r.y));
        for v in &r.x {
            out.push(',');
            out.push_str(&format!("{v}"));
        }
        out.push('\n');
    }
    out
}

/// Schema matching `emit_canonical_csv` output for the given dataset.
pub fn canonical_schema(data: &Dataset) -> SchemaConfig {
    SchemaConfig {
        outcome: "outcome".into(),
        player: "player".into(),
        covariates: data
            .covariate_names()
            .iter()
            .map(|n| CovariateSpec {
                name: n.clone(),
                kind: CovariateType::Numeric,
                missing: MissingPolicy::CompleteCase,
            })
            .collect(),
        eligibility: EligibilityRule { min_attempts: 1 },
        x_condition: Vec::new(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn schema() -> SchemaConfig {
        SchemaConfig {
            outcome: "made".into(),
            player: "kicker".into(),
            covariates: vec![
                CovariateSpec {
                    name: "distance".into(),
                    kind: CovariateType::Numeric,
                    missing: MissingPolicy::CompleteCase,
                },
                CovariateSpec {
                    name: "wind".into(),
                    kind: CovariateType::Numeric,
                    missing: MissingPolicy::ConstantFill(0.0),
                },
                CovariateSpec {
                    name: "surface".into(),
                    kind: CovariateType::Categorical,
                    missing: MissingPolicy::CompleteCase,
                },
            ],
            eligibility: EligibilityRule { min_attempts: 2 },
            x_condition: vec![],
        }
    }

    #[test]
    fn complete_case_drops_and_reports() {
        let csv = "kicker,made,distance,wind,surface\n\
                   a,1,30,5,grass\n\
                   a,0,,4,grass\n\
                   b,1,42,NA,turf\n\
                   b,0,28,3,grass\n\
                   a,1,33,2,turf\n";
        let (data, report, _) = load_csv_str(csv, &schema()).unwrap();
        assert_eq!(report.raw_rows, 5);
        assert_eq!(report.dropped_missing, 1);
        assert_eq!(report.kept, 4);
        assert_eq!(data.n(), 4);
        // Missing wind filled with 0.
        assert_eq!(data.record(1).x[1], 0.0);
    }

    #[test]
    fn categorical_one_hot_drops_first_level() {
        let csv = "kicker,made,distance,wind,surface\n\
                   a,1,30,5,grass\n\
                   a,0,31,5,turf\n\
                   b,1,42,1,dome\n\
                   b,0,28,3,grass\n";
        let (data, _, _) = load_csv_str(csv, &schema()).unwrap();
        // Levels sorted: dome, grass, turf -> columns grass, turf.
        assert_eq!(
            data.covariate_names(),
            &["distance", "wind", "surface_grass", "surface_turf"]
        );
        assert_eq!(data.record(0).x[2..], [1.0, 0.0]);
        assert_eq!(data.record(1).x[2..], [0.0, 1.0]);
        assert_eq!(data.record(2).x[2..], [0.0, 0.0]);
    }

    #[test]
    fn eligibility_filter_densifies_indices() {
        let csv = "kicker,made,distance,wind,surface\n\
                   a,1,30,5,grass\n\
                   a,0,31,5,grass\n\
                   b,1,42,1,grass\n\
                   c,0,28,3,grass\n\
                   c,1,29,3,grass\n";
        let (data, report, _) = load_csv_str(csv, &schema()).unwrap();
        // b has a single attempt: dropped by min_attempts = 2.
        assert_eq!(report.dropped_ineligible, 1);
        assert_eq!(data.m(), 2);
        assert_eq!(data.player_labels(), &["a", "c"]);
        assert_eq!(
            report.raw_rows,
            report.kept + report.dropped_missing + report.dropped_ineligible
        );
    }

    #[test]
    fn missing_column_and_bad_outcome_errors() {
        let mut s = schema();
        s.outcome = "winner".into();
        let csv = "kicker,made,distance,wind,surface\na,1,30,5,grass\n";
        assert!(matches!(
            load_csv_str(csv, &s),
            Err(Error::MissingColumn(_))
        ));

        let csv2 = "kicker,made,distance,wind,surface\na,2,30,5,grass\n";
        assert!(matches!(
            load_csv_str(csv2, &schema()),
            Err(Error::NonBinaryOutcome { .. })
        ));

        let csv3 = "kicker,made,distance,wind,surface\na,1,far,5,grass\n";
        assert!(matches!(
            load_csv_str(csv3, &schema()),
            Err(Error::UnparseableValue { .. })
        ));
    }

    #[test]
    fn x_condition_resolves_to_encoded_columns() {
        let mut s = schema();
        s.x_condition = vec![NamedConstraint {
            column: "distance".into(),
            op: ConstraintOp::Le(40.0),
        }];
        let csv = "kicker,made,distance,wind,surface\n\
                   a,1,30,5,grass\n\
                   a,0,45,5,grass\n\
                   b,1,42,1,grass\n\
                   b,0,28,3,grass\n";
        let (data, _, cond) = load_csv_str(csv, &s).unwrap();
        let inside: Vec<bool> = data
            .records()
            .iter()
            .map(|r| cond.contains(&r.x))
            .collect();
        assert_eq!(inside, vec![true, false, false, true]);
    }

    #[test]
    fn ingest_roundtrip_through_canonical_csv() {
        let csv = "kicker,made,distance,wind,surface\n\
                   a,1,30,5,grass\n\
                   a,0,31,,turf\n\
                   b,1,42,1,dome\n\
                   b,0,28,3,grass\n";
        let (data, _, _) = load_csv_str(csv, &schema()).unwrap();
        let canonical = emit_canonical_csv(&data);
        let (data2, _, _) = load_csv_str(&canonical, &canonical_schema(&data)).unwrap();
        assert_eq!(data, data2);
        // A second round trip is byte-identical.
        assert_eq!(canonical, emit_canonical_csv(&data2));
    }

    #[test]
    fn ingest_is_deterministic() {
        let csv = "kicker,made,distance,wind,surface\n\
                   z,1,30,5,grass\n\
                   z,0,31,2,turf\n\
                   a,1,42,1,dome\n\
                   a,0,28,3,grass\n";
        let (d1, r1, _) = load_csv_str(csv, &schema()).unwrap();
        let (d2, r2, _) = load_csv_str(csv, &schema()).unwrap();
        assert_eq!(d1, d2);
        assert_eq!(r1, r2);
        // Labels sorted lexicographically for index stability.
        assert_eq!(d1.player_labels(), &["a", "z"]);
    }
}
