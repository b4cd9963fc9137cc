//! Run configuration: one JSON file drives every command. Serialization uses
//! fixed struct field order, so configs diff cleanly and identical runs
//! produce identical bytes.

use std::path::{Path, PathBuf};

use anchorplan_core::decoder::DecoderConfig;
use anchorplan_core::diffusion::PlannerConfig;
use anchorplan_core::metrics::EpdmsConfig;
use anchorplan_core::scene::{PerceptionConfig, WorldConfig};
use serde::{Deserialize, Serialize};

use crate::{CliError, CliResult};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunConfig {
    pub dataset_dir: PathBuf,
    pub vocab_path: PathBuf,
    pub checkpoint_path: PathBuf,
    pub out_dir: PathBuf,
    pub seed: u64,
    pub scenarios_per_template: usize,
    pub epochs: usize,
    pub learning_rate: f64,
    pub world: WorldConfig,
    pub perception: PerceptionConfig,
    pub decoder: DecoderConfig,
    pub planner: PlannerConfig,
    pub epdms: EpdmsConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            dataset_dir: "data/train".into(),
            vocab_path: "artifacts/vocab.json".into(),
            checkpoint_path: "artifacts/model.ckpt".into(),
            out_dir: "out".into(),
            seed: 42,
            scenarios_per_template: 40,
            epochs: 34,
            learning_rate: 2e-3,
            world: WorldConfig::default(),
            perception: PerceptionConfig::default(),
            decoder: DecoderConfig::default(),
            planner: PlannerConfig::default(),
            epdms: EpdmsConfig::default(),
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        serde_json::from_str(&text)
            .map_err(|e| CliError::Config(format!("cannot parse {}: {e}", path.display())))
    }

    pub fn canonical_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    /// Fingerprint used to tie checkpoints to the settings they were trained
    /// under.
    pub fn model_fingerprint(&self) -> String {
        let relevant = serde_json::json!({
            "world": self.world,
            "perception": self.perception,
            "decoder": self.decoder,
            "planner": self.planner,
        });
        anchorplan_core::anchors::fnv1a_hash(relevant.to_string().as_bytes())
    }

    pub fn validate(&self) -> CliResult<()> {
        if self.planner.t_trunc > self.planner.t_total {
            return Err(CliError::Config(format!(
                "t_trunc {} exceeds t_total {}",
                self.planner.t_trunc, self.planner.t_total
            )));
        }
        if self.decoder.query_count != self.planner.k_dynamic {
            return Err(CliError::Config(format!(
                "decoder query_count {} must equal planner k_dynamic {}",
                self.decoder.query_count, self.planner.k_dynamic
            )));
        }
        if self.decoder.bev_grid != self.perception.grid {
            return Err(CliError::Config(format!(
                "decoder bev_grid {} must equal perception grid {}",
                self.decoder.bev_grid, self.perception.grid
            )));
        }
        if self.decoder.map_token_width != 2 * self.perception.map_points {
            return Err(CliError::Config(
                "decoder map_token_width must be 2 * perception map_points".into(),
            ));
        }
        if self.decoder.horizon != self.world.horizon {
            return Err(CliError::Config(
                "decoder horizon must equal world horizon".into(),
            ));
        }
        Ok(())
    }
}
