//! Dataset directory layout: a manifest listing every scenario plus one JSON
//! file per scenario under scenarios/.

use std::path::{Path, PathBuf};

use anchorplan_core::scene::{generate_scenario, mix_seed, Scenario, Template, WorldConfig};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::{CliError, CliResult};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub id: String,
    pub template: Template,
    pub file: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Manifest {
    pub seed: u64,
    pub per_template: usize,
    pub entries: Vec<ManifestEntry>,
}

pub fn manifest_path(dir: &Path) -> PathBuf {
    dir.join("manifest.json")
}

/// Generate `per_template` scenarios for each template into `dir`.
/// Deterministic in (seed, per_template); rerunning produces identical bytes.
pub fn generate(
    dir: &Path,
    seed: u64,
    per_template: usize,
    world: &WorldConfig,
) -> CliResult<Manifest> {
    let scen_dir = dir.join("scenarios");
    std::fs::create_dir_all(&scen_dir)
        .map_err(|e| CliError::Prerequisite(format!("cannot create {}: {e}", scen_dir.display())))?;

    let jobs: Vec<(Template, u64)> = Template::all()
        .into_iter()
        .enumerate()
        .flat_map(|(ti, template)| {
            (0..per_template).map(move |i| {
                (
                    template,
                    mix_seed(mix_seed(seed, ti as u64 + 1), i as u64),
                )
            })
        })
        .collect();

    let scenarios: Vec<Scenario> = jobs
        .par_iter()
        .map(|(template, s)| {
            generate_scenario(*s, *template, world).map_err(CliError::from)
        })
        .collect::<CliResult<_>>()?;

    let mut entries = Vec::with_capacity(scenarios.len());
    for s in &scenarios {
        let file = format!("scenarios/{}.json", s.id);
        let json = serde_json::to_string_pretty(s)
            .map_err(|e| CliError::Numeric(format!("serialize {}: {e}", s.id)))?;
        std::fs::write(dir.join(&file), json)
            .map_err(|e| CliError::Prerequisite(format!("write {}: {e}", file)))?;
        entries.push(ManifestEntry {
            id: s.id.clone(),
            template: s.template,
            file,
        });
    }
    let manifest = Manifest {
        seed,
        per_template,
        entries,
    };
    let json = serde_json::to_string_pretty(&manifest)
        .map_err(|e| CliError::Numeric(format!("serialize manifest: {e}")))?;
    std::fs::write(manifest_path(dir), json)
        .map_err(|e| CliError::Prerequisite(format!("write manifest: {e}")))?;
    Ok(manifest)
}

pub fn load_manifest(dir: &Path) -> CliResult<Manifest> {
    let path = manifest_path(dir);
    let text = std::fs::read_to_string(&path)
        .map_err(|e| CliError::Prerequisite(format!("cannot read {}: {e}", path.display())))?;
    serde_json::from_str(&text)
        .map_err(|e| CliError::Prerequisite(format!("cannot parse {}: {e}", path.display())))
}

/// Load every scenario listed in the manifest, in manifest order, validating
/// each against the world invariants.
pub fn load_scenarios(dir: &Path, world: &WorldConfig) -> CliResult<Vec<Scenario>> {
    let manifest = load_manifest(dir)?;
    manifest
        .entries
        .par_iter()
        .map(|entry| {
            let path = dir.join(&entry.file);
            let text = std::fs::read_to_string(&path).map_err(|e| {
                CliError::Prerequisite(format!("cannot read {}: {e}", path.display()))
            })?;
            let scenario: Scenario = serde_json::from_str(&text).map_err(|e| {
                CliError::Prerequisite(format!("cannot parse {}: {e}", path.display()))
            })?;
            scenario.validate(world).map_err(CliError::from)?;
            Ok(scenario)
        })
        .collect()
}
