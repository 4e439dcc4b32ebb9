//! `cluster`: cross-fit propensities, build the normalized-propensity
//! distance matrix, and write the dendrogram artifacts.

use std::fs;
use std::path::Path;

use parr::crossfit::{default_fold_count, fit_nuisances, make_folds};
use parr::ingest::{load_csv, SchemaConfig};
use parr::profiling::{
    hierarchical_cluster, normalize_propensities, propensity_distance, svg, Linkage,
};
use parr::XCondition;

use crate::config::RunConfig;
use crate::manifest::{config_hash, write_manifest};
use crate::CliError;

pub fn run(
    data_path: &Path,
    schema_path: &Path,
    out_dir: &Path,
    config: &RunConfig,
) -> Result<(), CliError> {
    config.validate().map_err(CliError::config)?;
    let linkage = Linkage::parse(&config.linkage)
        .ok_or_else(|| CliError::config(format!("unknown linkage '{}'", config.linkage)))?;
    let schema_text = fs::read_to_string(schema_path).map_err(|e| {
        CliError::config(format!(
            "cannot read schema '{}': {e}",
            schema_path.display()
        ))
    })?;
    let schema: SchemaConfig = serde_json::from_str(&schema_text)
        .map_err(|e| CliError::config(format!("invalid schema JSON: {e}")))?;
    fs::create_dir_all(out_dir)?;

    let (data, _, _) = load_csv(data_path, &schema).map_err(CliError::from)?;
    let folds_count = config.folds.unwrap_or_else(|| default_fold_count(data.n()));
    let folds = make_folds(data.n(), &data.players(), folds_count, config.seed)
        .map_err(CliError::from)?;
    let learner_config = config.learners.to_learner_config();
    let nuisances = fit_nuisances(&data, &folds, &learner_config, &XCondition::all())
        .map_err(CliError::from)?;

    let pi_bar = normalize_propensities(nuisances.pi.view());
    let distances = propensity_distance(pi_bar.view());
    let tree = hierarchical_cluster(&distances, data.player_labels(), linkage)
        .map_err(CliError::from)?;

    let mut csv = String::from("player");
    for label in data.player_labels() {
        csv.push(',');
        csv.push_str(label);
    }
    csv.push('\n');
    for (a, label) in data.player_labels().iter().enumerate() {
        csv.push_str(label);
        for b in 0..data.m() {
            csv.push_str(&format!(",{}", distances.get(a, b)));
        }
        csv.push('\n');
    }
    fs::write(out_dir.join("distance.csv"), csv)?;
    fs::write(out_dir.join("dendrogram.newick"), tree.to_newick() + "\n")?;
    fs::write(
        out_dir.join("dendrogram.svg"),
        svg::dendrogram_svg(&tree, "Propensity-profile clustering"),
    )?;
    write_manifest(
        out_dir,
        "cluster",
        config.seed,
        config_hash(config)?,
        &["distance.csv", "dendrogram.newick", "dendrogram.svg"],
    )?;
    Ok(())
}
