//! Command implementations shared by the binary and the integration tests.

use std::path::{Path, PathBuf};

use anchorplan_core::anchors::{fnv1a_hash, kmeans, AnchorSet, StaticVocabulary, VocabularyFile};
use anchorplan_core::decoder::StreamMask;
use anchorplan_core::diffusion::eval::{ablate_steps, evaluate_corpus, EvalSettings, InitMode};
use anchorplan_core::diffusion::train::{train_epoch, Optimizers, TrainContext};
use anchorplan_core::diffusion::{NoiseSchedule, PlanResult, PlannerModels};
use anchorplan_core::metrics::{
    corpus_epdms, score_all, CorpusSummary, EpdmsReport, SubScoreId, SubScores,
};
use anchorplan_core::scene::{extract_perception, PerceptionBundle, Scenario};
use anchorplan_core::traj::flatten;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::dataset;
use crate::lock::DirLock;
use crate::{CliError, CliResult};

/// Report CSV column order (the conventional table layout).
pub const REPORT_COLUMNS: [SubScoreId; 9] = [
    SubScoreId::Nc,
    SubScoreId::Dac,
    SubScoreId::Ddc,
    SubScoreId::Tlc,
    SubScoreId::Ep,
    SubScoreId::Ttc,
    SubScoreId::Lk,
    SubScoreId::Hc,
    SubScoreId::Ec,
];

/// Everything the renderer needs, saved per scenario during evaluation.
#[derive(Debug, Serialize, Deserialize)]
pub struct PlanRecord {
    pub scenario_id: String,
    pub anchors: AnchorSet,
    pub plan: PlanResult,
}

#[derive(Debug, Clone)]
pub struct CheckpointMeta {
    pub fingerprint: String,
    pub vocab_hash: String,
}

impl CheckpointMeta {
    fn to_json(&self) -> String {
        serde_json::json!({
            "fingerprint": self.fingerprint,
            "vocab_hash": self.vocab_hash,
        })
        .to_string()
    }

    fn parse(meta: &str) -> CliResult<Self> {
        let v: serde_json::Value = serde_json::from_str(meta)
            .map_err(|e| CliError::Prerequisite(format!("bad checkpoint metadata: {e}")))?;
        Ok(Self {
            fingerprint: v["fingerprint"].as_str().unwrap_or_default().to_string(),
            vocab_hash: v["vocab_hash"].as_str().unwrap_or_default().to_string(),
        })
    }
}

pub fn cmd_gen_data(cfg: &RunConfig, dir: Option<&Path>, count: Option<usize>) -> CliResult<()> {
    let dir = dir.unwrap_or(&cfg.dataset_dir);
    let count = count.unwrap_or(cfg.scenarios_per_template);
    let _lock = DirLock::acquire(dir)?;
    let manifest = dataset::generate(dir, cfg.seed, count, &cfg.world)?;
    let manifest_bytes = std::fs::read(dataset::manifest_path(dir))
        .map_err(|e| CliError::Prerequisite(format!("manifest: {e}")))?;
    eprintln!(
        "generated {} scenarios into {} (manifest {})",
        manifest.entries.len(),
        dir.display(),
        fnv1a_hash(&manifest_bytes)
    );
    Ok(())
}

pub fn cmd_build_vocab(cfg: &RunConfig) -> CliResult<()> {
    let scenarios = dataset::load_scenarios(&cfg.dataset_dir, &cfg.world)?;
    let manifest_bytes = std::fs::read(dataset::manifest_path(&cfg.dataset_dir))
        .map_err(|e| CliError::Prerequisite(format!("manifest: {e}")))?;
    let corpus_hash = fnv1a_hash(&manifest_bytes);

    let data: Vec<_> = scenarios.iter().map(|s| flatten(&s.expert)).collect();
    let vocab = kmeans(&data, cfg.planner.k_static, cfg.seed, 200, 1e-7)?;
    let file = VocabularyFile::from_vocabulary(&vocab, corpus_hash);

    if let Some(parent) = cfg.vocab_path.parent() {
        std::fs::create_dir_all(parent)
            .map_err(|e| CliError::Prerequisite(format!("create {}: {e}", parent.display())))?;
    }
    let json = serde_json::to_string_pretty(&file)
        .map_err(|e| CliError::Numeric(format!("serialize vocabulary: {e}")))?;
    std::fs::write(&cfg.vocab_path, json)
        .map_err(|e| CliError::Prerequisite(format!("write vocabulary: {e}")))?;
    let written = std::fs::read(&cfg.vocab_path)
        .map_err(|e| CliError::Prerequisite(format!("reread vocabulary: {e}")))?;
    eprintln!(
        "vocabulary of {} anchors written to {} (inertia {:.3}, {})",
        file.k,
        cfg.vocab_path.display(),
        file.inertia,
        fnv1a_hash(&written)
    );
    Ok(())
}

pub fn load_vocab(path: &Path) -> CliResult<(StaticVocabulary, String)> {
    let bytes = std::fs::read(path)
        .map_err(|e| CliError::Prerequisite(format!("cannot read {}: {e}", path.display())))?;
    let file: VocabularyFile = serde_json::from_slice(&bytes)
        .map_err(|e| CliError::Prerequisite(format!("cannot parse {}: {e}", path.display())))?;
    Ok((file.to_vocabulary()?, fnv1a_hash(&bytes)))
}

pub fn prepare_bundles(cfg: &RunConfig, scenarios: &[Scenario]) -> Vec<PerceptionBundle> {
    scenarios
        .par_iter()
        .map(|s| extract_perception(s, &cfg.perception))
        .collect()
}

pub struct TrainOutcome {
    pub epoch_losses: Vec<f64>,
}

/// Linear learning-rate warmup spans the first epochs of a run.
const WARMUP_EPOCHS: usize = 4;

pub fn cmd_train(cfg: &RunConfig) -> CliResult<TrainOutcome> {
    let _lock = DirLock::acquire(&cfg.out_dir)?;
    let scenarios = dataset::load_scenarios(&cfg.dataset_dir, &cfg.world)?;
    let (vocab, vocab_hash) = load_vocab(&cfg.vocab_path)?;
    let bundles = prepare_bundles(cfg, &scenarios);

    let schedule = NoiseSchedule::new(cfg.planner.schedule, cfg.planner.t_total);
    let mut models = PlannerModels::new(cfg.decoder, cfg.planner.train_seed);
    let mut opts = Optimizers::new(&models, cfg.learning_rate);
    let ctx = TrainContext {
        vocab: &vocab,
        planner: &cfg.planner,
        schedule: &schedule,
        world: &cfg.world,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.planner.train_seed);

    let mut epoch_losses = Vec::with_capacity(cfg.epochs);
    for epoch in 0..cfg.epochs {
        // linear warmup across the first epoch, then step decay so late
        // epochs stop oscillating
        let frac = epoch as f64 / cfg.epochs.max(1) as f64;
        let factor = match () {
            _ if frac < 0.55 => 1.0,
            _ if frac < 0.85 => 0.3,
            _ => 0.1,
        };
        let avg = train_epoch(
            &mut models,
            &mut opts,
            &scenarios,
            &bundles,
            &ctx,
            &mut rng,
            cfg.learning_rate * factor,
            (epoch < WARMUP_EPOCHS).then_some((epoch, WARMUP_EPOCHS)),
        )
        .map_err(CliError::from)?;
        eprintln!(
            "epoch {:>3}: loss {:.5} (anchor {:.4} noise {:.4} conf {:.4})",
            epoch + 1,
            avg.total,
            avg.wta,
            avg.mse,
            avg.bce
        );
        epoch_losses.push(avg.total);
    }

    if let Some(parent) = cfg.checkpoint_path.parent() {
        std::fs::create_dir_all(parent)
            .map_err(|e| CliError::Prerequisite(format!("create {}: {e}", parent.display())))?;
    }
    let meta = CheckpointMeta {
        fingerprint: cfg.model_fingerprint(),
        vocab_hash,
    };
    models
        .save(&cfg.checkpoint_path, &meta.to_json())
        .map_err(CliError::from)?;

    let mut log = String::from("epoch,mean_loss\n");
    for (i, l) in epoch_losses.iter().enumerate() {
        log.push_str(&format!("{},{l:.6}\n", i + 1));
    }
    std::fs::write(cfg.out_dir.join("train_log.csv"), log)
        .map_err(|e| CliError::Prerequisite(format!("write train log: {e}")))?;
    let ckpt_bytes = std::fs::read(&cfg.checkpoint_path)
        .map_err(|e| CliError::Prerequisite(format!("reread checkpoint: {e}")))?;
    eprintln!(
        "checkpoint written to {} ({})",
        cfg.checkpoint_path.display(),
        fnv1a_hash(&ckpt_bytes)
    );
    Ok(TrainOutcome { epoch_losses })
}

/// Load models and verify the checkpoint matches this config and vocabulary.
pub fn load_models(cfg: &RunConfig, vocab_hash: &str) -> CliResult<PlannerModels> {
    if !cfg.checkpoint_path.exists() {
        return Err(CliError::Prerequisite(format!(
            "checkpoint {} not found",
            cfg.checkpoint_path.display()
        )));
    }
    let mut models = PlannerModels::new(cfg.decoder, cfg.planner.train_seed);
    let meta = models.load(&cfg.checkpoint_path).map_err(CliError::from)?;
    let meta = CheckpointMeta::parse(&meta)?;
    if meta.fingerprint != cfg.model_fingerprint() {
        return Err(CliError::Prerequisite(
            "checkpoint was trained under a different model configuration".into(),
        ));
    }
    if meta.vocab_hash != vocab_hash {
        return Err(CliError::Prerequisite(
            "checkpoint was trained against a different vocabulary file".into(),
        ));
    }
    Ok(models)
}

#[derive(Debug, Clone)]
pub struct EvalArgs {
    pub dataset: Option<PathBuf>,
    pub init: InitMode,
    pub steps: Option<usize>,
    /// Score the reference driver instead of the planner.
    pub expert_agent: bool,
    pub report_name: String,
    pub save_plans: bool,
}

impl Default for EvalArgs {
    fn default() -> Self {
        Self {
            dataset: None,
            init: InitMode::Hybrid,
            steps: None,
            expert_agent: false,
            report_name: "report.csv".into(),
            save_plans: true,
        }
    }
}

#[derive(Debug)]
pub struct EvalOutcome {
    pub reports: Vec<EpdmsReport>,
    pub summary: CorpusSummary,
}

pub fn cmd_eval(cfg: &RunConfig, args: &EvalArgs) -> CliResult<EvalOutcome> {
    let _lock = DirLock::acquire(&cfg.out_dir)?;
    let dataset_dir = args.dataset.as_deref().unwrap_or(&cfg.dataset_dir);
    let scenarios = dataset::load_scenarios(dataset_dir, &cfg.world)?;

    let reports: Vec<EpdmsReport> = if args.expert_agent {
        scenarios
            .par_iter()
            .map(|s| {
                let human = score_all(&s.expert, s, &cfg.epdms, &cfg.world)?;
                EpdmsReport::new(s.id.clone(), human, human, &cfg.epdms)
            })
            .collect::<anchorplan_core::Result<_>>()
            .map_err(CliError::from)?
    } else {
        let (vocab, vocab_hash) = load_vocab(&cfg.vocab_path)?;
        let models = load_models(cfg, &vocab_hash)?;
        let bundles = prepare_bundles(cfg, &scenarios);
        let schedule = NoiseSchedule::new(cfg.planner.schedule, cfg.planner.t_total);
        let settings = EvalSettings {
            steps: args.steps.unwrap_or(cfg.planner.steps),
            mask: StreamMask::FULL,
            init: args.init,
        };
        let (evaluations, _) = evaluate_corpus(
            &scenarios,
            &bundles,
            &models,
            &vocab,
            &cfg.planner,
            &schedule,
            &settings,
            &cfg.epdms,
            &cfg.world,
        )
        .map_err(CliError::from)?;

        if args.save_plans {
            let plans_dir = cfg.out_dir.join("plans");
            std::fs::create_dir_all(&plans_dir)
                .map_err(|e| CliError::Prerequisite(format!("create plans dir: {e}")))?;
            for (s, ev) in scenarios.iter().zip(&evaluations) {
                let record = PlanRecord {
                    scenario_id: s.id.clone(),
                    anchors: ev.anchors.clone(),
                    plan: ev.plan.clone(),
                };
                let json = serde_json::to_string(&record)
                    .map_err(|e| CliError::Numeric(format!("serialize plan: {e}")))?;
                std::fs::write(plans_dir.join(format!("{}.json", s.id)), json)
                    .map_err(|e| CliError::Prerequisite(format!("write plan: {e}")))?;
            }
        }
        evaluations.into_iter().map(|e| e.report).collect()
    };

    let summary = corpus_epdms(&reports).map_err(CliError::from)?;
    let csv = report_csv(&reports, &summary);
    let report_hash = fnv1a_hash(csv.as_bytes());
    std::fs::write(cfg.out_dir.join(&args.report_name), csv)
        .map_err(|e| CliError::Prerequisite(format!("write report: {e}")))?;
    eprintln!(
        "evaluated {} scenarios: mean score {:.2} (report {report_hash})",
        summary.count,
        summary.mean_epdms * 100.0
    );
    Ok(EvalOutcome { reports, summary })
}

pub fn report_csv(reports: &[EpdmsReport], summary: &CorpusSummary) -> String {
    let mut out = String::from("scenario_id");
    for c in REPORT_COLUMNS {
        out.push(',');
        out.push_str(c.label());
    }
    out.push_str(",EPDMS\n");
    let row = |id: &str, scores: &SubScores, epdms: f64, out: &mut String| {
        out.push_str(id);
        for c in REPORT_COLUMNS {
            out.push_str(&format!(",{:.6}", scores.get(c)));
        }
        out.push_str(&format!(",{epdms:.6}\n"));
    };
    for r in reports {
        row(&r.scenario_id, &r.agent, r.epdms, &mut out);
    }
    row("mean", &summary.mean_agent, summary.mean_epdms, &mut out);
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AblateAxis {
    Steps,
    Heads,
}

pub fn cmd_ablate(
    cfg: &RunConfig,
    axis: AblateAxis,
    dataset_override: Option<&Path>,
) -> CliResult<PathBuf> {
    let _lock = DirLock::acquire(&cfg.out_dir)?;
    let dataset_dir = dataset_override.unwrap_or(&cfg.dataset_dir);
    let scenarios = dataset::load_scenarios(dataset_dir, &cfg.world)?;
    let (vocab, vocab_hash) = load_vocab(&cfg.vocab_path)?;
    let models = load_models(cfg, &vocab_hash)?;
    let bundles = prepare_bundles(cfg, &scenarios);
    let schedule = NoiseSchedule::new(cfg.planner.schedule, cfg.planner.t_total);

    let path = match axis {
        AblateAxis::Steps => {
            let rows = ablate_steps(
                &scenarios,
                &bundles,
                &models,
                &vocab,
                &cfg.planner,
                &schedule,
                1..=5,
                &cfg.epdms,
                &cfg.world,
            )
            .map_err(CliError::from)?;
            let mut csv = String::from("steps");
            for c in REPORT_COLUMNS {
                csv.push(',');
                csv.push_str(c.label());
            }
            csv.push_str(",EPDMS\n");
            for (steps, summary) in &rows {
                csv.push_str(&steps.to_string());
                for c in REPORT_COLUMNS {
                    csv.push_str(&format!(",{:.6}", summary.mean_agent.get(c)));
                }
                csv.push_str(&format!(",{:.6}\n", summary.mean_epdms));
            }
            let path = cfg.out_dir.join("ablate_steps.csv");
            std::fs::write(&path, csv)
                .map_err(|e| CliError::Prerequisite(format!("write ablation: {e}")))?;
            path
        }
        AblateAxis::Heads => {
            let mut csv = String::from("bev,obj,map,vlm");
            for c in REPORT_COLUMNS {
                csv.push(',');
                csv.push_str(c.label());
            }
            csv.push_str(",EPDMS\n");
            for level in 0..=4usize {
                let mask = StreamMask::cumulative(level);
                let settings = EvalSettings {
                    steps: cfg.planner.steps,
                    mask,
                    init: if level == 0 {
                        InitMode::StaticOnly
                    } else {
                        InitMode::Hybrid
                    },
                };
                let (_, summary) = evaluate_corpus(
                    &scenarios,
                    &bundles,
                    &models,
                    &vocab,
                    &cfg.planner,
                    &schedule,
                    &settings,
                    &cfg.epdms,
                    &cfg.world,
                )
                .map_err(CliError::from)?;
                csv.push_str(&format!(
                    "{},{},{},{}",
                    mask.bev as u8, mask.objects as u8, mask.map as u8, mask.command as u8
                ));
                for c in REPORT_COLUMNS {
                    csv.push_str(&format!(",{:.6}", summary.mean_agent.get(c)));
                }
                csv.push_str(&format!(",{:.6}\n", summary.mean_epdms));
            }
            let path = cfg.out_dir.join("ablate_heads.csv");
            std::fs::write(&path, csv)
                .map_err(|e| CliError::Prerequisite(format!("write ablation: {e}")))?;
            path
        }
    };
    eprintln!("ablation table written to {}", path.display());
    Ok(path)
}

pub fn cmd_render(
    cfg: &RunConfig,
    scenario_id: &str,
    dataset_override: Option<&Path>,
    plans_override: Option<&Path>,
) -> CliResult<PathBuf> {
    let dataset_dir = dataset_override.unwrap_or(&cfg.dataset_dir);
    let manifest = dataset::load_manifest(dataset_dir)?;
    let entry = manifest
        .entries
        .iter()
        .find(|e| e.id == scenario_id)
        .ok_or_else(|| CliError::Prerequisite(format!("unknown scenario id {scenario_id}")))?;
    let text = std::fs::read_to_string(dataset_dir.join(&entry.file))
        .map_err(|e| CliError::Prerequisite(format!("read scenario: {e}")))?;
    let scenario: Scenario = serde_json::from_str(&text)
        .map_err(|e| CliError::Prerequisite(format!("parse scenario: {e}")))?;

    let plans_dir = plans_override
        .map(|p| p.to_path_buf())
        .unwrap_or_else(|| cfg.out_dir.join("plans"));
    let plan_path = plans_dir.join(format!("{scenario_id}.json"));
    let text = std::fs::read_to_string(&plan_path).map_err(|e| {
        CliError::Prerequisite(format!("plan record {}: {e}", plan_path.display()))
    })?;
    let record: PlanRecord = serde_json::from_str(&text)
        .map_err(|e| CliError::Prerequisite(format!("parse plan record: {e}")))?;

    let svg = crate::svg::render_scene(&scenario, &record.anchors, &record.plan, &cfg.world);
    if !svg_coordinates_finite(&svg) {
        return Err(CliError::Numeric("render produced non-finite coordinates".into()));
    }
    std::fs::create_dir_all(&cfg.out_dir)
        .map_err(|e| CliError::Prerequisite(format!("create out dir: {e}")))?;
    let out_path = cfg.out_dir.join(format!("render_{scenario_id}.svg"));
    std::fs::write(&out_path, svg)
        .map_err(|e| CliError::Prerequisite(format!("write svg: {e}")))?;
    eprintln!("rendered {}", out_path.display());
    Ok(out_path)
}

fn svg_coordinates_finite(svg: &str) -> bool {
    !svg.contains("NaN") && !svg.contains("inf")
}

/// Pretty-print the summary row of a report CSV on the conventional 0-100
/// scale.
pub fn cmd_report(path: &Path) -> CliResult<String> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Prerequisite(format!("cannot read {}: {e}", path.display())))?;
    let mut lines = text.lines();
    let header = lines
        .next()
        .ok_or_else(|| CliError::Prerequisite("empty report".into()))?;
    let mean = lines
        .rfind(|l| l.starts_with("mean"))
        .ok_or_else(|| CliError::Prerequisite("report has no summary row".into()))?;
    let mut out = String::new();
    for (name, value) in header.split(',').zip(mean.split(',')).skip(1) {
        let v: f64 = value
            .parse()
            .map_err(|e| CliError::Prerequisite(format!("bad value {value}: {e}")))?;
        out.push_str(&format!("{name:>6}: {:6.2}\n", v * 100.0));
    }
    Ok(out)
}
