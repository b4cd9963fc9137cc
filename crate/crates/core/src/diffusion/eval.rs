//! Planner evaluation: run the sampler on a scenario under a chosen
//! initialization, score the selected trajectory, and aggregate over a
//! corpus. Scenario-level work parallelizes; results keep input order.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::anchors::{fuse, AnchorSet, StaticVocabulary};
use crate::decoder::StreamMask;
use crate::metrics::{corpus_epdms, score_all, CorpusSummary, EpdmsConfig, EpdmsReport};
use crate::scene::{PerceptionBundle, Scenario, WorldConfig};
use crate::Result;

use super::train::infer_decoder;
use super::{noise_init_sample, truncated_sample, NoiseSchedule, PlanResult, PlannerConfig, PlannerModels};

/// How candidates are initialized before refinement.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitMode {
    /// Dynamic anchors fused with the static vocabulary.
    Hybrid,
    /// Static vocabulary only.
    StaticOnly,
    /// Pure noise at the top of the schedule.
    Noise,
}

#[derive(Debug, Clone, Copy)]
pub struct EvalSettings {
    pub steps: usize,
    pub mask: StreamMask,
    pub init: InitMode,
}

impl EvalSettings {
    pub fn standard(steps: usize) -> Self {
        Self {
            steps,
            mask: StreamMask::FULL,
            init: InitMode::Hybrid,
        }
    }
}

/// Run the planner on one scenario. Returns the plan and the anchor set that
/// seeded it (empty provenance list for noise initialization).
pub fn plan_scenario(
    scenario: &Scenario,
    bundle: &PerceptionBundle,
    models: &PlannerModels,
    vocab: &StaticVocabulary,
    cfg: &PlannerConfig,
    schedule: &NoiseSchedule,
    settings: &EvalSettings,
) -> Result<(PlanResult, AnchorSet)> {
    let seed = super::mix_seed(cfg.sample_seed, fnv1a_u64(scenario.id.as_bytes()));
    let dt = scenario.expert.dt;
    let heading = scenario.ego_start.heading;
    match settings.init {
        InitMode::Noise => {
            // conditioning stays intact; only the initialization changes
            let (_, ctx) = infer_decoder(models, bundle, StreamMask::FULL)?;
            let count = cfg.k_static + cfg.k_dynamic;
            let plan = noise_init_sample(
                count,
                models.decoder.cfg.horizon,
                &ctx,
                settings.steps,
                seed,
                models,
                schedule,
                dt,
                heading,
            )?;
            let anchors = AnchorSet {
                anchors: Vec::new(),
                provenance: Vec::new(),
            };
            Ok((plan, anchors))
        }
        InitMode::StaticOnly => {
            let (_, ctx) = infer_decoder(models, bundle, settings.mask)?;
            let set = fuse(vocab, &[], 0)?;
            let plan = truncated_sample(
                &set,
                &ctx,
                settings.steps,
                seed,
                models,
                schedule,
                cfg,
                dt,
                heading,
            )?;
            Ok((plan, set))
        }
        InitMode::Hybrid => {
            let (dynamic, ctx) = infer_decoder(models, bundle, settings.mask)?;
            let expected = if settings.mask.any() { cfg.k_dynamic } else { 0 };
            let set = fuse(vocab, &dynamic, expected)?;
            let plan = truncated_sample(
                &set,
                &ctx,
                settings.steps,
                seed,
                models,
                schedule,
                cfg,
                dt,
                heading,
            )?;
            Ok((plan, set))
        }
    }
}

pub struct ScenarioEvaluation {
    pub report: EpdmsReport,
    pub plan: PlanResult,
    pub anchors: AnchorSet,
}

#[allow(clippy::too_many_arguments)]
pub fn evaluate_scenario(
    scenario: &Scenario,
    bundle: &PerceptionBundle,
    models: &PlannerModels,
    vocab: &StaticVocabulary,
    cfg: &PlannerConfig,
    schedule: &NoiseSchedule,
    settings: &EvalSettings,
    epdms_cfg: &EpdmsConfig,
    world: &WorldConfig,
) -> Result<ScenarioEvaluation> {
    let (plan, anchors) = plan_scenario(scenario, bundle, models, vocab, cfg, schedule, settings)?;
    let agent = score_all(plan.selected_trajectory(), scenario, epdms_cfg, world)?;
    let human = score_all(&scenario.expert, scenario, epdms_cfg, world)?;
    let report = EpdmsReport::new(scenario.id.clone(), agent, human, epdms_cfg)?;
    Ok(ScenarioEvaluation {
        report,
        plan,
        anchors,
    })
}

/// Evaluate a corpus in parallel; output order matches input order.
#[allow(clippy::too_many_arguments)]
pub fn evaluate_corpus(
    scenarios: &[Scenario],
    bundles: &[PerceptionBundle],
    models: &PlannerModels,
    vocab: &StaticVocabulary,
    cfg: &PlannerConfig,
    schedule: &NoiseSchedule,
    settings: &EvalSettings,
    epdms_cfg: &EpdmsConfig,
    world: &WorldConfig,
) -> Result<(Vec<ScenarioEvaluation>, CorpusSummary)> {
    assert_eq!(scenarios.len(), bundles.len());
    let evaluations: Vec<ScenarioEvaluation> = scenarios
        .par_iter()
        .zip(bundles.par_iter())
        .map(|(s, b)| {
            evaluate_scenario(s, b, models, vocab, cfg, schedule, settings, epdms_cfg, world)
        })
        .collect::<Result<_>>()?;
    let reports: Vec<EpdmsReport> = evaluations.iter().map(|e| e.report.clone()).collect();
    let summary = corpus_epdms(&reports)?;
    Ok((evaluations, summary))
}

/// Sweep the reverse-step count and evaluate the corpus at each setting.
#[allow(clippy::too_many_arguments)]
pub fn ablate_steps(
    scenarios: &[Scenario],
    bundles: &[PerceptionBundle],
    models: &PlannerModels,
    vocab: &StaticVocabulary,
    cfg: &PlannerConfig,
    schedule: &NoiseSchedule,
    steps_range: std::ops::RangeInclusive<usize>,
    epdms_cfg: &EpdmsConfig,
    world: &WorldConfig,
) -> Result<Vec<(usize, CorpusSummary)>> {
    let mut out = Vec::new();
    for steps in steps_range {
        let settings = EvalSettings::standard(steps);
        let (_, summary) = evaluate_corpus(
            scenarios, bundles, models, vocab, cfg, schedule, &settings, epdms_cfg, world,
        )?;
        out.push((steps, summary));
    }
    Ok(out)
}

pub fn fnv1a_u64(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf29ce484222325;
    for b in bytes {
        h ^= *b as u64;
        h = h.wrapping_mul(0x100000001b3);
    }
    h
}
