//! `simulate`: run a Monte-Carlo experiment against a bundled or on-disk
//! fixture and write the report.

use std::fs;
use std::path::Path;

use parr::simulation::{fixture_by_name, run_experiment, DgpSpec, ExperimentConfig, Scenario};
use parr::EstimandKind;

use crate::manifest::{config_hash, write_manifest};
use crate::CliError;

#[allow(clippy::too_many_arguments)]
pub fn run(
    fixture: &str,
    scenario: &str,
    n: usize,
    reps: usize,
    folds: usize,
    focal: usize,
    seed: u64,
    out_dir: &Path,
) -> Result<(), CliError> {
    let dgp = load_fixture(fixture)?;
    let scenario = Scenario::parse(scenario)
        .ok_or_else(|| CliError::config(format!("unknown scenario '{scenario}'")))?;
    let mut config = ExperimentConfig::new(scenario, n, reps, seed);
    config.folds = folds;
    config.focal_player = focal;
    config.estimands = vec![
        EstimandKind::Direct,
        EstimandKind::Indirect,
        EstimandKind::RandomReplacement,
    ];
    let report = run_experiment(&dgp, &config).map_err(CliError::from)?;

    fs::create_dir_all(out_dir)?;
    fs::write(out_dir.join("report.csv"), report.to_csv())?;
    fs::write(
        out_dir.join("report.json"),
        serde_json::to_string_pretty(&report).map_err(CliError::from)? + "\n",
    )?;
    write_manifest(
        out_dir,
        "simulate",
        seed,
        config_hash(&config)?,
        &["report.csv", "report.json"],
    )?;
    Ok(())
}

/// A bundled fixture name, or a path to a JSON process description.
pub fn load_fixture(fixture: &str) -> Result<DgpSpec, CliError> {
    if let Some(dgp) = fixture_by_name(fixture) {
        return Ok(dgp);
    }
    let path = Path::new(fixture);
    if !path.exists() {
        return Err(CliError::config(format!(
            "unknown fixture '{fixture}' (expected a bundled name or a JSON file path)"
        )));
    }
    let text = fs::read_to_string(path)?;
    let dgp: DgpSpec = serde_json::from_str(&text)
        .map_err(|e| CliError::config(format!("invalid fixture JSON: {e}")))?;
    dgp.validate().map_err(CliError::from)?;
    Ok(dgp)
}
