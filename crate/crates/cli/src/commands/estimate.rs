//! `estimate`: ingest a CSV, cross-fit nuisances, estimate all requested
//! parameters and contrasts, and write the result artifacts.

use std::fs;
use std::path::Path;

use serde::Serialize;

use parr::crossfit::{default_fold_count, fit_nuisances, make_folds, NuisanceMatrices};
use parr::ingest::{load_csv, IngestReport, SchemaConfig};
use parr::profiling::{funnel_geometry, positivity_report, svg};
use parr::{
    empirical_success_rate, estimate_contrast, estimate_onestep, estimate_substitution,
    estimate_tmle, ContrastResult, Dataset, EstimandKind, EstimandSpec, EstimateResult,
    EstimatorKind, EstimatorOptions, ResultFlag, XCondition,
};

use crate::config::RunConfig;
use crate::manifest::{config_hash, write_manifest};
use crate::CliError;

#[derive(Debug, Serialize)]
struct EstimateRecord {
    player: usize,
    player_label: String,
    estimand: String,
    estimator: String,
    psi: f64,
    se: Option<f64>,
    ci_lo: Option<f64>,
    ci_hi: Option<f64>,
    level: f64,
    eif_mean: Option<f64>,
    conditioning_n: usize,
    flags: Vec<ResultFlag>,
}

impl EstimateRecord {
    fn from_result(r: &EstimateResult, label: &str) -> Self {
        EstimateRecord {
            player: r.spec.focal_player,
            player_label: label.to_string(),
            estimand: r.spec.kind.as_str().to_string(),
            estimator: r.estimator.as_str().to_string(),
            psi: r.psi,
            se: r.se,
            ci_lo: r.ci.map(|c| c.0),
            ci_hi: r.ci.map(|c| c.1),
            level: r.level,
            eif_mean: r.eif_mean,
            conditioning_n: r.conditioning_n,
            flags: r.flags.clone(),
        }
    }
}

#[derive(Debug, Serialize)]
struct ContrastRecord {
    player: usize,
    player_label: String,
    kind: String,
    delta: f64,
    se: f64,
    ci_lo: f64,
    ci_hi: f64,
    level: f64,
    empirical_rate: f64,
    psi: f64,
    flags: Vec<ResultFlag>,
}

impl ContrastRecord {
    fn from_result(r: &ContrastResult, label: &str) -> Self {
        ContrastRecord {
            player: r.player,
            player_label: label.to_string(),
            kind: match r.kind {
                parr::estimators::ContrastKind::IndirectContrast => "indirect".to_string(),
                parr::estimators::ContrastKind::RandContrast => "rand".to_string(),
            },
            delta: r.delta,
            se: r.se,
            ci_lo: r.ci.0,
            ci_hi: r.ci.1,
            level: r.level,
            empirical_rate: r.empirical_rate,
            psi: r.psi,
            flags: r.flags.clone(),
        }
    }
}

#[derive(Debug, Serialize)]
struct ResultsDocument {
    seed: u64,
    folds: usize,
    level: f64,
    n: usize,
    m: usize,
    players: Vec<String>,
    ingest: IngestReport,
    estimates: Vec<EstimateRecord>,
    contrasts: Vec<ContrastRecord>,
}

pub fn run(
    data_path: &Path,
    schema_path: &Path,
    out_dir: &Path,
    config: &RunConfig,
) -> Result<(), CliError> {
    config.validate().map_err(CliError::config)?;
    let schema_text = fs::read_to_string(schema_path).map_err(|e| {
        CliError::config(format!(
            "cannot read schema '{}': {e}",
            schema_path.display()
        ))
    })?;
    let schema: SchemaConfig = serde_json::from_str(&schema_text)
        .map_err(|e| CliError::config(format!("invalid schema JSON: {e}")))?;
    fs::create_dir_all(out_dir)?;

    let (data, report, x_condition) = load_csv(data_path, &schema).map_err(CliError::from)?;
    let folds_count = config.folds.unwrap_or_else(|| default_fold_count(data.n()));
    let folds = make_folds(data.n(), &data.players(), folds_count, config.seed)
        .map_err(CliError::from)?;
    let learner_config = config.learners.to_learner_config();
    let nuisances =
        fit_nuisances(&data, &folds, &learner_config, &x_condition).map_err(CliError::from)?;

    let options = EstimatorOptions {
        level: config.level,
        epsilon_pool: config.epsilon_pool,
    };
    let estimands = config.estimand_kinds().map_err(CliError::config)?;
    let estimators = config.estimator_kinds().map_err(CliError::config)?;
    let players = resolve_players(&data, &config.players).map_err(CliError::config)?;

    let mut estimates = Vec::new();
    let mut contrasts = Vec::new();
    for &player in &players {
        let label = data.player_label(player).to_string();
        for &kind in &estimands {
            let spec = EstimandSpec::new(kind, player).with_x_condition(x_condition.clone());
            for &estimator in &estimators {
                let result = match estimator {
                    EstimatorKind::Substitution => {
                        estimate_substitution(&data, &spec, &nuisances, &options)
                    }
                    EstimatorKind::OneStep => estimate_onestep(&data, &spec, &nuisances, &options),
                    EstimatorKind::Tmle => {
                        estimate_tmle(&data, &spec, &nuisances, &folds, &options)
                    }
                }
                .map_err(CliError::from)?;
                estimates.push(EstimateRecord::from_result(&result, &label));
            }
            if kind != EstimandKind::Direct && estimators.contains(&EstimatorKind::Tmle) {
                let contrast = estimate_contrast(&data, &spec, &nuisances, &folds, &options)
                    .map_err(CliError::from)?;
                contrasts.push(ContrastRecord::from_result(&contrast, &label));
            }
        }
    }

    let doc = ResultsDocument {
        seed: config.seed,
        folds: folds_count,
        level: config.level,
        n: data.n(),
        m: data.m(),
        players: data.player_labels().to_vec(),
        ingest: report,
        estimates,
        contrasts,
    };
    fs::write(
        out_dir.join("results.json"),
        serde_json::to_string_pretty(&doc).map_err(CliError::from)? + "\n",
    )?;

    write_leaderboard(out_dir, &data, &doc, &x_condition)?;
    let funnel_artifacts = write_funnels(out_dir, &doc, &config.funnel_levels)?;
    write_positivity(out_dir, &nuisances)?;

    let mut artifacts = vec!["results.json", "leaderboard.csv", "positivity.json"];
    artifacts.extend(funnel_artifacts);
    write_manifest(
        out_dir,
        "estimate",
        config.seed,
        config_hash(config)?,
        &artifacts,
    )?;
    Ok(())
}

fn resolve_players(data: &Dataset, requested: &[String]) -> Result<Vec<usize>, String> {
    if requested.iter().any(|p| p == "all") {
        return Ok((1..=data.m()).collect());
    }
    let mut players = Vec::new();
    for name in requested {
        let found = data
            .player_labels()
            .iter()
            .position(|l| l == name)
            .map(|i| i + 1)
            .or_else(|| name.parse::<usize>().ok().filter(|&i| i >= 1 && i <= data.m()));
        match found {
            Some(i) => players.push(i),
            None => return Err(format!("unknown player '{name}'")),
        }
    }
    if players.is_empty() {
        return Err("no players requested".to_string());
    }
    Ok(players)
}

/// Leaderboard CSV: one row per player, sorted descending by the targeted
/// direct-standardization estimate (ties by label).
fn write_leaderboard(
    out_dir: &Path,
    data: &Dataset,
    doc: &ResultsDocument,
    x_condition: &XCondition,
) -> Result<(), CliError> {
    let mut rows: Vec<(String, f64, Option<f64>, Option<f64>, Option<f64>, f64, usize)> =
        Vec::new();
    for record in &doc.estimates {
        if record.estimand == "direct" && record.estimator == "tmle" {
            let rate = empirical_success_rate(data, record.player, x_condition).unwrap_or(f64::NAN);
            rows.push((
                record.player_label.clone(),
                record.psi,
                record.se,
                record.ci_lo,
                record.ci_hi,
                rate,
                data.player_count(record.player),
            ));
        }
    }
    rows.sort_by(|a, b| {
        b.1.partial_cmp(&a.1)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then_with(|| a.0.cmp(&b.0))
    });
    let mut out = String::from("player,psi_direct,se,ci_lo,ci_hi,empirical_rate,attempts\n");
    for (label, psi, se, lo, hi, rate, attempts) in rows {
        out.push_str(&format!(
            "{label},{psi},{},{},{},{rate},{attempts}\n",
            se.map_or(String::new(), |v| v.to_string()),
            lo.map_or(String::new(), |v| v.to_string()),
            hi.map_or(String::new(), |v| v.to_string()),
        ));
    }
    fs::write(out_dir.join("leaderboard.csv"), out)?;
    Ok(())
}

/// Funnel CSV + SVG per contrast family present in the results.
fn write_funnels(
    out_dir: &Path,
    doc: &ResultsDocument,
    levels: &[f64],
) -> Result<Vec<&'static str>, CliError> {
    let mut artifacts = Vec::new();
    for (kind, csv_name, svg_name, title) in [
        (
            "indirect",
            "funnel_indirect.csv",
            "funnel_indirect.svg",
            "Indirect standardization contrast",
        ),
        (
            "rand",
            "funnel_rand.csv",
            "funnel_rand.svg",
            "Random replacement contrast",
        ),
    ] {
        let points: Vec<(String, f64, f64)> = doc
            .contrasts
            .iter()
            .filter(|c| c.kind == kind)
            .map(|c| (c.player_label.clone(), c.delta, c.se))
            .collect();
        if points.is_empty() {
            continue;
        }
        let geometry = funnel_geometry(&points, levels).map_err(CliError::from)?;
        let mut csv = String::from("player,delta,se,precision,flags\n");
        for (p, (_, _, se)) in geometry.points.iter().zip(&points) {
            let flags = p
                .flags
                .iter()
                .map(|l| l.to_string())
                .collect::<Vec<_>>()
                .join(";");
            csv.push_str(&format!(
                "{},{},{},{},{}\n",
                p.label, p.estimate, se, p.precision, flags
            ));
        }
        fs::write(out_dir.join(csv_name), csv)?;
        fs::write(out_dir.join(svg_name), svg::funnel_svg(&geometry, title))?;
        artifacts.push(csv_name);
        artifacts.push(svg_name);
    }
    Ok(artifacts)
}

fn write_positivity(out_dir: &Path, nuisances: &NuisanceMatrices) -> Result<(), CliError> {
    let report = positivity_report(nuisances.pi.view());
    fs::write(
        out_dir.join("positivity.json"),
        serde_json::to_string_pretty(&report).map_err(CliError::from)? + "\n",
    )?;
    Ok(())
}
