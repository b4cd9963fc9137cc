//! The planner core: a cumulative signal-retention schedule, the conditional
//! noise-prediction network with its confidence head, truncated reverse
//! sampling that starts from the hybrid anchors instead of pure noise, and
//! training/evaluation loops built on top.

pub mod eval;
pub mod train;

use anchorplan_nn::checkpoint;
use anchorplan_nn::init::{normal_vec, seeded_rng, xavier_uniform};
use anchorplan_nn::tape::{NodeId, Tape};
use anchorplan_nn::tensor::Tensor2;
use anchorplan_nn::Parameter;
use serde::{Deserialize, Serialize};
use std::path::Path;

use crate::anchors::{AnchorProvenance, AnchorSet};
use crate::decoder::{DecoderConfig, DecoderModel};
use crate::scene::mix_seed;
use crate::traj::{unflatten, FlatTrajectory, Trajectory};
use crate::{Error, Result};

pub use eval::{evaluate_corpus, plan_scenario, InitMode};
pub use train::{train_epoch, TrainContext};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScheduleKind {
    Cosine,
    Linear,
}

/// Table of cumulative signal coefficients for t in [0, T]; index 0 is
/// exactly 1 and the tail stays strictly positive but close to zero.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NoiseSchedule {
    pub kind: ScheduleKind,
    alpha_bar: Vec<f64>,
}

impl NoiseSchedule {
    pub fn new(kind: ScheduleKind, t_total: usize) -> Self {
        assert!(t_total >= 2);
        const FLOOR: f64 = 1e-5;
        let table: Vec<f64> = match kind {
            ScheduleKind::Cosine => {
                let s = 0.008;
                let f = |t: f64| {
                    let x = (t / t_total as f64 + s) / (1.0 + s);
                    (x * std::f64::consts::FRAC_PI_2).cos().powi(2)
                };
                let f0 = f(0.0);
                (0..=t_total)
                    .map(|t| {
                        if t == 0 {
                            1.0
                        } else {
                            (f(t as f64) / f0).max(FLOOR)
                        }
                    })
                    .collect()
            }
            ScheduleKind::Linear => {
                // betas scale with table length so the terminal signal stays
                // near zero for any T
                let scale = 100.0 / t_total as f64;
                let beta_start = 1e-3 * scale;
                let beta_end = 0.12 * scale;
                let mut acc = 1.0;
                let mut out = vec![1.0];
                for t in 0..t_total {
                    let beta = (beta_start
                        + (beta_end - beta_start) * t as f64 / (t_total - 1) as f64)
                        .min(0.5);
                    acc *= 1.0 - beta;
                    out.push(acc.max(FLOOR));
                }
                out
            }
        };
        for w in table.windows(2) {
            assert!(w[1] < w[0], "schedule must be strictly decreasing");
        }
        assert!(*table.last().unwrap() < 5e-3, "terminal signal too high");
        assert!(table.iter().all(|&a| a > 0.0 && a <= 1.0));
        Self { kind, alpha_bar: table }
    }

    pub fn t_total(&self) -> usize {
        self.alpha_bar.len() - 1
    }

    pub fn alpha_bar(&self, t: usize) -> Result<f64> {
        self.alpha_bar
            .get(t)
            .copied()
            .ok_or(Error::TimestepOutOfRange {
                t,
                max: self.t_total(),
            })
    }
}

/// Closed-form forward corruption: sqrt(a)*x + sqrt(1-a)*eps, elementwise.
pub fn forward_noise(
    tau0: &FlatTrajectory,
    t: usize,
    eps: &[f64],
    schedule: &NoiseSchedule,
) -> Result<FlatTrajectory> {
    let a = schedule.alpha_bar(t)?;
    if eps.len() != tau0.values().len() {
        return Err(Error::HorizonMismatch {
            a: tau0.horizon(),
            b: eps.len() / 2,
        });
    }
    let sa = a.sqrt();
    let sn = (1.0 - a).sqrt();
    Ok(FlatTrajectory(
        tau0.values()
            .iter()
            .zip(eps)
            .map(|(x, e)| sa * x + sn * e)
            .collect(),
    ))
}

/// One deterministic reverse update from level `t_from` to `t_to` using the
/// predicted noise: reconstruct the clean estimate by inverting the forward
/// map, then re-noise it to the lower level with the same prediction.
pub fn reverse_step(
    state: &[f64],
    eps_hat: &[f64],
    t_from: usize,
    t_to: usize,
    schedule: &NoiseSchedule,
) -> Result<Vec<f64>> {
    let a_from = schedule.alpha_bar(t_from)?;
    let a_to = schedule.alpha_bar(t_to)?;
    let sa_from = a_from.sqrt();
    let sn_from = (1.0 - a_from).sqrt();
    let sa_to = a_to.sqrt();
    let sn_to = (1.0 - a_to).sqrt();
    Ok(state
        .iter()
        .zip(eps_hat)
        .map(|(x, e)| {
            let clean = (x - sn_from * e) / sa_from;
            sa_to * clean + sn_to * e
        })
        .collect())
}

/// Sinusoidal embedding of a diffusion timestep.
pub fn timestep_embedding(t: usize, dim: usize) -> Vec<f64> {
    let half = dim / 2;
    let mut out = Vec::with_capacity(dim);
    for i in 0..half {
        let freq = 1.0 / 10_000f64.powf(i as f64 / half as f64);
        out.push((t as f64 * freq).sin());
        out.push((t as f64 * freq).cos());
    }
    out
}

pub const TIME_EMBED_DIM: usize = 16;

/// Fixed linear frontend for trajectory inputs: scaled positions, first
/// differences (per-step motion), and second differences (bend/jag). The
/// difference channels make the injected noise visible at unit scale instead
/// of burying it under road-scale coordinates.
pub fn traj_features(flat: &[f64]) -> Vec<f64> {
    const POS_SCALE: f64 = 0.1;
    const VEL_SCALE: f64 = 0.25;
    const ACC_SCALE: f64 = 0.5;
    let h = flat.len() / 2;
    let mut out = Vec::with_capacity(6 * h);
    for v in flat {
        out.push(v * POS_SCALE);
    }
    for i in 0..h.saturating_sub(1) {
        out.push((flat[2 * (i + 1)] - flat[2 * i]) * VEL_SCALE);
        out.push((flat[2 * (i + 1) + 1] - flat[2 * i + 1]) * VEL_SCALE);
    }
    for i in 0..h.saturating_sub(2) {
        let ddx = flat[2 * (i + 2)] - 2.0 * flat[2 * (i + 1)] + flat[2 * i];
        let ddy = flat[2 * (i + 2) + 1] - 2.0 * flat[2 * (i + 1) + 1] + flat[2 * i + 1];
        out.push(ddx * ACC_SCALE);
        out.push(ddy * ACC_SCALE);
    }
    out
}

pub fn traj_feature_width(traj_width: usize) -> usize {
    let h = traj_width / 2;
    traj_width + 2 * h.saturating_sub(1) + 2 * h.saturating_sub(2)
}

/// Noise-prediction network plus its per-candidate confidence head. Input is
/// the absolute noisy trajectory (through the difference frontend), the
/// timestep embedding, and the pooled scene context; output is the predicted
/// injected noise.
pub struct Denoiser {
    pub traj_width: usize,
    pub ctx_width: usize,
    pub hidden: usize,
    w1: Parameter,
    b1: Parameter,
    w2: Parameter,
    b2: Parameter,
    w3: Parameter,
    b3: Parameter,
}

impl Denoiser {
    pub fn new(traj_width: usize, ctx_width: usize, hidden: usize, seed: u64) -> Self {
        let mut rng = seeded_rng(seed);
        let input = traj_feature_width(traj_width) + TIME_EMBED_DIM + ctx_width;
        Self {
            traj_width,
            ctx_width,
            hidden,
            w1: Parameter::new("w1", xavier_uniform(input, hidden, &mut rng)),
            b1: Parameter::new("b1", Tensor2::zeros(1, hidden)),
            w2: Parameter::new("w2", xavier_uniform(hidden, hidden, &mut rng)),
            b2: Parameter::new("b2", Tensor2::zeros(1, hidden)),
            w3: Parameter::new("w3", xavier_uniform(hidden, traj_width, &mut rng)),
            b3: Parameter::new("b3", Tensor2::zeros(1, traj_width)),
        }
    }

    pub fn params(&self) -> Vec<&Parameter> {
        vec![&self.w1, &self.b1, &self.w2, &self.b2, &self.w3, &self.b3]
    }

    pub fn params_mut(&mut self) -> Vec<&mut Parameter> {
        vec![
            &mut self.w1,
            &mut self.b1,
            &mut self.w2,
            &mut self.b2,
            &mut self.w3,
            &mut self.b3,
        ]
    }

    pub fn bind(&self, tape: &mut Tape) -> Vec<NodeId> {
        self.params().iter().map(|p| tape.param(p.value.clone())).collect()
    }

    /// Forward with the conditioning vector already on the tape.
    pub fn forward(
        &self,
        tape: &mut Tape,
        bound: &[NodeId],
        noisy: &[f64],
        t: usize,
        ctx: NodeId,
    ) -> Result<NodeId> {
        let mut head = traj_features(noisy);
        head.extend(timestep_embedding(t, TIME_EMBED_DIM));
        let head = tape.leaf(Tensor2::row_vector(&head));
        let x = tape.concat_cols(head, ctx)?;
        let h = tape.matmul(x, bound[0])?;
        let h = tape.add_bias(h, bound[1])?;
        let h = tape.layer_norm(h)?;
        let h = tape.relu(h)?;
        let h2 = tape.matmul(h, bound[2])?;
        let h2 = tape.add_bias(h2, bound[3])?;
        let h2 = tape.relu(h2)?;
        let out = tape.matmul(h2, bound[4])?;
        let out = tape.add_bias(out, bound[5])?;
        Ok(out)
    }

    /// Value-level forward for sampling; drives a scratch tape so the math is
    /// identical to the training path.
    pub fn infer(&self, noisy: &[f64], t: usize, ctx: &[f64]) -> Result<Vec<f64>> {
        let mut tape = Tape::new();
        let bound = self.bind(&mut tape);
        let ctx_node = tape.leaf(Tensor2::row_vector(ctx));
        let out = self.forward(&mut tape, &bound, noisy, t, ctx_node)?;
        Ok(tape.value(out).data().to_vec())
    }
}

/// Scores a refined candidate given the scene context; higher logit means
/// the candidate is more expert-like.
pub struct ConfidenceHead {
    pub traj_width: usize,
    pub ctx_width: usize,
    pub hidden: usize,
    w1: Parameter,
    b1: Parameter,
    w2: Parameter,
    b2: Parameter,
}

impl ConfidenceHead {
    pub fn new(traj_width: usize, ctx_width: usize, hidden: usize, seed: u64) -> Self {
        let mut rng = seeded_rng(seed);
        let input = traj_feature_width(traj_width) + ctx_width;
        Self {
            traj_width,
            ctx_width,
            hidden,
            w1: Parameter::new("w1", xavier_uniform(input, hidden, &mut rng)),
            b1: Parameter::new("b1", Tensor2::zeros(1, hidden)),
            w2: Parameter::new("w2", xavier_uniform(hidden, 1, &mut rng)),
            b2: Parameter::new("b2", Tensor2::zeros(1, 1)),
        }
    }

    pub fn params(&self) -> Vec<&Parameter> {
        vec![&self.w1, &self.b1, &self.w2, &self.b2]
    }

    pub fn params_mut(&mut self) -> Vec<&mut Parameter> {
        vec![&mut self.w1, &mut self.b1, &mut self.w2, &mut self.b2]
    }

    pub fn bind(&self, tape: &mut Tape) -> Vec<NodeId> {
        self.params().iter().map(|p| tape.param(p.value.clone())).collect()
    }

    /// Logits for a batch of candidates (rows) sharing one context node.
    pub fn forward(
        &self,
        tape: &mut Tape,
        bound: &[NodeId],
        candidates: Tensor2,
        ctx: NodeId,
    ) -> Result<NodeId> {
        let n = candidates.rows();
        let feat_width = traj_feature_width(self.traj_width);
        let mut data = Vec::with_capacity(n * feat_width);
        for r in 0..n {
            data.extend(traj_features(candidates.row(r)));
        }
        let cand = tape.leaf(Tensor2::from_vec(n, feat_width, data)?);
        let ctx_rows = tape.repeat_rows(ctx, n)?;
        let x = tape.concat_cols(cand, ctx_rows)?;
        let h = tape.matmul(x, bound[0])?;
        let h = tape.add_bias(h, bound[1])?;
        let h = tape.relu(h)?;
        let out = tape.matmul(h, bound[2])?;
        let out = tape.add_bias(out, bound[3])?;
        Ok(out)
    }

    pub fn infer(&self, candidates: &[FlatTrajectory], ctx: &[f64]) -> Result<Vec<f64>> {
        let mut tape = Tape::new();
        let bound = self.bind(&mut tape);
        let mut data = Vec::new();
        for c in candidates {
            data.extend_from_slice(c.values());
        }
        let cand = Tensor2::from_vec(candidates.len(), self.traj_width, data)?;
        let ctx_node = tape.leaf(Tensor2::row_vector(ctx));
        let logits = self.forward(&mut tape, &bound, cand, ctx_node)?;
        let probs = tape.sigmoid(logits)?;
        Ok(tape.value(probs).data().to_vec())
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct PlannerConfig {
    /// Total diffusion steps of the schedule.
    pub t_total: usize,
    /// Level anchors are perturbed to before refinement.
    pub t_trunc: usize,
    /// Reverse updates per candidate.
    pub steps: usize,
    pub schedule: ScheduleKind,
    pub k_static: usize,
    pub k_dynamic: usize,
    pub train_seed: u64,
    pub sample_seed: u64,
    /// Softmin temperature (meters) for confidence soft labels.
    pub label_sigma: f64,
}

impl Default for PlannerConfig {
    fn default() -> Self {
        Self {
            t_total: 100,
            t_trunc: 8,
            steps: 2,
            schedule: ScheduleKind::Cosine,
            k_static: 16,
            k_dynamic: 4,
            train_seed: 1,
            sample_seed: 2,
            label_sigma: 0.5,
        }
    }
}

/// Every trained component of the planner.
pub struct PlannerModels {
    pub decoder: DecoderModel,
    pub denoiser: Denoiser,
    pub confidence: ConfidenceHead,
}

pub const DENOISER_HIDDEN: usize = 96;
pub const CONFIDENCE_HIDDEN: usize = 64;

impl PlannerModels {
    pub fn new(decoder_cfg: DecoderConfig, seed: u64) -> Self {
        let traj_width = decoder_cfg.traj_width();
        let ctx_width = decoder_cfg.ctx_width();
        Self {
            decoder: DecoderModel::new(decoder_cfg, mix_seed(seed, 1)),
            denoiser: Denoiser::new(traj_width, ctx_width, DENOISER_HIDDEN, mix_seed(seed, 2)),
            confidence: ConfidenceHead::new(
                traj_width,
                ctx_width,
                CONFIDENCE_HIDDEN,
                mix_seed(seed, 3),
            ),
        }
    }

    pub fn save(&self, path: &Path, meta: &str) -> Result<()> {
        checkpoint::save(
            path,
            meta,
            &[
                ("dyn_decoder", self.decoder.params()),
                ("denoiser", self.denoiser.params()),
                ("confidence", self.confidence.params()),
            ],
        )?;
        Ok(())
    }

    /// Restore parameters in place; returns the checkpoint metadata string.
    pub fn load(&mut self, path: &Path) -> Result<String> {
        let ckpt = checkpoint::load(path)?;
        checkpoint::restore_section(&ckpt, "dyn_decoder", &mut self.decoder.params_mut())?;
        checkpoint::restore_section(&ckpt, "denoiser", &mut self.denoiser.params_mut())?;
        checkpoint::restore_section(&ckpt, "confidence", &mut self.confidence.params_mut())?;
        Ok(ckpt.meta)
    }
}

/// The planner output: one refined candidate per anchor with a confidence
/// each, and the argmax selection (ties to the lowest index).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PlanResult {
    pub candidates: Vec<Trajectory>,
    pub confidences: Vec<f64>,
    pub selected: usize,
    pub provenance: AnchorProvenance,
}

impl PlanResult {
    pub fn selected_trajectory(&self) -> &Trajectory {
        &self.candidates[self.selected]
    }
}

/// Refine one anchor: perturb its residual to `t_start`, then walk the given
/// timestep ladder down to zero with deterministic reverse updates.
fn refine_anchor(
    anchor: &[f64],
    ladder: &[usize],
    eps: &[f64],
    ctx: &[f64],
    denoiser: &Denoiser,
    schedule: &NoiseSchedule,
) -> Result<Vec<f64>> {
    debug_assert!(ladder.len() >= 2);
    let t_start = ladder[0];
    let a0 = schedule.alpha_bar(t_start)?;
    let sn = (1.0 - a0).sqrt();
    // zero residual noised to t_start
    let mut residual: Vec<f64> = eps.iter().map(|e| sn * e).collect();
    for pair in ladder.windows(2) {
        let (t_from, t_to) = (pair[0], pair[1]);
        let noisy_abs: Vec<f64> = anchor
            .iter()
            .zip(&residual)
            .map(|(a, r)| a + r)
            .collect();
        let eps_hat = denoiser.infer(&noisy_abs, t_from, ctx)?;
        residual = reverse_step(&residual, &eps_hat, t_from, t_to, schedule)?;
    }
    Ok(anchor.iter().zip(&residual).map(|(a, r)| a + r).collect())
}

/// Evenly spaced descending timesteps from `t_start` to 0, inclusive.
pub fn step_ladder(t_start: usize, steps: usize) -> Vec<usize> {
    let mut ladder = Vec::with_capacity(steps + 1);
    for i in 0..=steps {
        let t = ((t_start as f64) * (steps - i) as f64 / steps as f64).round() as usize;
        if ladder.last() != Some(&t) {
            ladder.push(t);
        }
    }
    ladder
}

/// Anchor-initialized truncated sampling: each anchor is perturbed to the
/// truncation level and refined for `steps` reverse updates; candidates are
/// scored by the confidence head and the argmax wins. `steps == 0` returns
/// the anchors unchanged.
#[allow(clippy::too_many_arguments)]
pub fn truncated_sample(
    anchors: &AnchorSet,
    ctx: &[f64],
    steps: usize,
    seed: u64,
    models: &PlannerModels,
    schedule: &NoiseSchedule,
    cfg: &PlannerConfig,
    dt: f64,
    initial_heading: f64,
) -> Result<PlanResult> {
    sample_from(
        anchors, ctx, cfg.t_trunc, steps, seed, models, schedule, dt, initial_heading,
    )
}

/// Baseline initialization from pure noise at the top of the schedule: the
/// "anchors" are all zero and the walk starts at t = T.
#[allow(clippy::too_many_arguments)]
pub fn noise_init_sample(
    count: usize,
    horizon: usize,
    ctx: &[f64],
    steps: usize,
    seed: u64,
    models: &PlannerModels,
    schedule: &NoiseSchedule,
    dt: f64,
    initial_heading: f64,
) -> Result<PlanResult> {
    let anchors = AnchorSet {
        anchors: vec![FlatTrajectory::zeros(horizon); count],
        provenance: (0..count).map(AnchorProvenance::Static).collect(),
    };
    sample_from(
        &anchors,
        ctx,
        schedule.t_total(),
        steps.max(1),
        seed,
        models,
        schedule,
        dt,
        initial_heading,
    )
}

#[allow(clippy::too_many_arguments)]
fn sample_from(
    anchors: &AnchorSet,
    ctx: &[f64],
    t_start: usize,
    steps: usize,
    seed: u64,
    models: &PlannerModels,
    schedule: &NoiseSchedule,
    dt: f64,
    initial_heading: f64,
) -> Result<PlanResult> {
    if anchors.is_empty() {
        return Err(Error::EmptyInput {
            context: "truncated_sample",
        });
    }
    let mut flats = Vec::with_capacity(anchors.len());
    if steps == 0 {
        flats.extend(anchors.anchors.iter().cloned());
    } else {
        let ladder = step_ladder(t_start, steps);
        for (j, anchor) in anchors.anchors.iter().enumerate() {
            let mut rng = seeded_rng(mix_seed(seed, j as u64));
            let eps = normal_vec(anchor.values().len(), &mut rng);
            let refined = refine_anchor(
                anchor.values(),
                &ladder,
                &eps,
                ctx,
                &models.denoiser,
                schedule,
            )?;
            flats.push(FlatTrajectory(refined));
        }
    }

    let confidences = models.confidence.infer(&flats, ctx)?;
    let mut selected = 0;
    for (i, c) in confidences.iter().enumerate() {
        if *c > confidences[selected] {
            selected = i;
        }
    }
    let candidates = flats
        .iter()
        .map(|f| unflatten(f, dt, initial_heading))
        .collect();
    Ok(PlanResult {
        candidates,
        confidences,
        selected,
        provenance: anchors.provenance[selected],
    })
}
