//! Scene-conditioned anchor generator. Four perception streams (BEV raster
//! patches, object tokens, map tokens, command token) are projected into a
//! shared embedding, learned queries cross-attend to them, and four parallel
//! MLP heads each emit one flattened trajectory anchor.

use anchorplan_nn::init::{seeded_rng, xavier_uniform};
use anchorplan_nn::tape::{Gradients, NodeId, Tape};
use anchorplan_nn::tensor::Tensor2;
use anchorplan_nn::Parameter;
use serde::{Deserialize, Serialize};

use crate::scene::perception::{PerceptionBundle, BEV_CHANNELS, EGO_TOKEN_WIDTH, OBJECT_TOKEN_WIDTH};
use crate::traj::FlatTrajectory;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct DecoderConfig {
    pub embed_dim: usize,
    pub attention_heads: usize,
    pub bev_grid: usize,
    pub patch: usize,
    pub map_token_width: usize,
    pub command_width: usize,
    /// Learned queries; one trajectory head each.
    pub query_count: usize,
    pub head_hidden: usize,
    pub horizon: usize,
}

impl Default for DecoderConfig {
    fn default() -> Self {
        Self {
            embed_dim: 64,
            attention_heads: 4,
            bev_grid: 32,
            patch: 8,
            map_token_width: 16,
            command_width: 4,
            query_count: 4,
            head_hidden: 96,
            horizon: crate::traj::DEFAULT_HORIZON,
        }
    }
}

impl DecoderConfig {
    pub fn patch_count(&self) -> usize {
        let per_side = self.bev_grid / self.patch;
        per_side * per_side
    }

    pub fn patch_width(&self) -> usize {
        BEV_CHANNELS * self.patch * self.patch
    }

    pub fn traj_width(&self) -> usize {
        2 * self.horizon
    }

    /// Width of the pooled conditioning vector (mean plus attentive read).
    pub fn ctx_width(&self) -> usize {
        2 * self.embed_dim
    }
}

/// Which input streams the encoder may see. Masking is an evaluation-time
/// ablation switch; an all-false mask disables the dynamic anchors entirely.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct StreamMask {
    pub bev: bool,
    pub objects: bool,
    pub map: bool,
    pub command: bool,
}

impl StreamMask {
    pub const FULL: StreamMask = StreamMask {
        bev: true,
        objects: true,
        map: true,
        command: true,
    };

    pub const NONE: StreamMask = StreamMask {
        bev: false,
        objects: false,
        map: false,
        command: false,
    };

    /// Cumulative levels 0..=4: none, BEV, +objects, +map, +command.
    pub fn cumulative(level: usize) -> StreamMask {
        StreamMask {
            bev: level >= 1,
            objects: level >= 2,
            map: level >= 3,
            command: level >= 4,
        }
    }

    pub fn any(&self) -> bool {
        self.bev || self.objects || self.map || self.command
    }
}

/// Fixed per-column scaling applied to raw token values before projection;
/// brings meter-scale inputs to unit order.
const OBJ_SCALE: [f64; OBJECT_TOKEN_WIDTH] = [0.05, 0.05, 0.2, 0.2, 1.0, 1.0, 0.1, 0.1];
const EGO_SCALE: [f64; EGO_TOKEN_WIDTH] = [0.1, 1.0, 1.0];
const MAP_SCALE: f64 = 0.05;
/// Trajectory heads emit unit-scale values that are stretched to meters.
const HEAD_OUTPUT_SCALE: f64 = 8.0;

pub struct DecoderModel {
    pub cfg: DecoderConfig,
    w_bev: Parameter,
    b_bev: Parameter,
    w_ego: Parameter,
    b_ego: Parameter,
    w_obj: Parameter,
    b_obj: Parameter,
    w_map: Parameter,
    b_map: Parameter,
    w_cmd: Parameter,
    b_cmd: Parameter,
    type_bev: Parameter,
    type_obj: Parameter,
    type_map: Parameter,
    type_cmd: Parameter,
    queries: Parameter,
    ctx_query: Parameter,
    w_q: Parameter,
    w_k: Parameter,
    w_v: Parameter,
    w_o: Parameter,
    b_o: Parameter,
    /// (w1, b1, w2, b2) per trajectory head.
    heads: Vec<[Parameter; 4]>,
}

impl DecoderModel {
    pub fn new(cfg: DecoderConfig, seed: u64) -> Self {
        let mut rng = seeded_rng(seed);
        let d = cfg.embed_dim;
        let mut p = |name: &str, rows: usize, cols: usize| {
            Parameter::new(name, xavier_uniform(rows, cols, &mut rng))
        };
        let w_bev = p("w_bev", cfg.patch_width(), d);
        let b_bev = Parameter::new("b_bev", Tensor2::zeros(1, d));
        let w_ego = p("w_ego", EGO_TOKEN_WIDTH, d);
        let b_ego = Parameter::new("b_ego", Tensor2::zeros(1, d));
        let w_obj = p("w_obj", OBJECT_TOKEN_WIDTH, d);
        let b_obj = Parameter::new("b_obj", Tensor2::zeros(1, d));
        let w_map = p("w_map", cfg.map_token_width, d);
        let b_map = Parameter::new("b_map", Tensor2::zeros(1, d));
        let w_cmd = p("w_cmd", cfg.command_width, d);
        let b_cmd = Parameter::new("b_cmd", Tensor2::zeros(1, d));
        let type_bev = p("type_bev", 1, d);
        let type_obj = p("type_obj", 1, d);
        let type_map = p("type_map", 1, d);
        let type_cmd = p("type_cmd", 1, d);
        let queries = p("queries", cfg.query_count, d);
        let ctx_query = p("ctx_query", 1, d);
        let w_q = p("w_q", d, d);
        let w_k = p("w_k", d, d);
        let w_v = p("w_v", d, d);
        let w_o = p("w_o", d, d);
        let b_o = Parameter::new("b_o", Tensor2::zeros(1, d));
        let mut heads = Vec::with_capacity(cfg.query_count);
        for j in 0..cfg.query_count {
            let w1 = p(&format!("head{j}_w1"), 3 * d, cfg.head_hidden);
            let b1 = Parameter::new(format!("head{j}_b1"), Tensor2::zeros(1, cfg.head_hidden));
            let w2 = p(&format!("head{j}_w2"), cfg.head_hidden, cfg.traj_width());
            let b2 = Parameter::new(format!("head{j}_b2"), Tensor2::zeros(1, cfg.traj_width()));
            heads.push([w1, b1, w2, b2]);
        }
        Self {
            cfg,
            w_bev,
            b_bev,
            w_ego,
            b_ego,
            w_obj,
            b_obj,
            w_map,
            b_map,
            w_cmd,
            b_cmd,
            type_bev,
            type_obj,
            type_map,
            type_cmd,
            queries,
            ctx_query,
            w_q,
            w_k,
            w_v,
            w_o,
            b_o,
            heads,
        }
    }

    pub fn params(&self) -> Vec<&Parameter> {
        let mut out = vec![
            &self.w_bev,
            &self.b_bev,
            &self.w_ego,
            &self.b_ego,
            &self.w_obj,
            &self.b_obj,
            &self.w_map,
            &self.b_map,
            &self.w_cmd,
            &self.b_cmd,
            &self.type_bev,
            &self.type_obj,
            &self.type_map,
            &self.type_cmd,
            &self.queries,
            &self.ctx_query,
            &self.w_q,
            &self.w_k,
            &self.w_v,
            &self.w_o,
            &self.b_o,
        ];
        for h in &self.heads {
            out.extend(h.iter());
        }
        out
    }

    pub fn params_mut(&mut self) -> Vec<&mut Parameter> {
        let mut out: Vec<&mut Parameter> = vec![
            &mut self.w_bev,
            &mut self.b_bev,
            &mut self.w_ego,
            &mut self.b_ego,
            &mut self.w_obj,
            &mut self.b_obj,
            &mut self.w_map,
            &mut self.b_map,
            &mut self.w_cmd,
            &mut self.b_cmd,
            &mut self.type_bev,
            &mut self.type_obj,
            &mut self.type_map,
            &mut self.type_cmd,
            &mut self.queries,
            &mut self.ctx_query,
            &mut self.w_q,
            &mut self.w_k,
            &mut self.w_v,
            &mut self.w_o,
            &mut self.b_o,
        ];
        for h in &mut self.heads {
            out.extend(h.iter_mut());
        }
        out
    }

    /// Bind every parameter onto the tape; the returned ids align with
    /// `params()` order.
    pub fn bind(&self, tape: &mut Tape) -> DecoderBinding {
        DecoderBinding {
            ids: self.params().iter().map(|p| tape.param(p.value.clone())).collect(),
        }
    }

    pub fn accumulate_grads(&mut self, binding: &DecoderBinding, grads: &Gradients) {
        for (param, id) in self.params_mut().into_iter().zip(&binding.ids) {
            if let Some(g) = grads.get(*id) {
                param.accumulate(g);
            }
        }
    }

    /// Strided patch rows of the BEV raster, channel-major within each patch.
    pub fn patch_matrix(&self, bundle: &PerceptionBundle) -> Tensor2 {
        let g = self.cfg.bev_grid;
        let p = self.cfg.patch;
        let per_side = g / p;
        let mut out = Tensor2::zeros(self.cfg.patch_count(), self.cfg.patch_width());
        for rp in 0..per_side {
            for cp in 0..per_side {
                let patch_idx = rp * per_side + cp;
                let mut col = 0;
                for ch in 0..BEV_CHANNELS {
                    for py in 0..p {
                        for px in 0..p {
                            let row = rp * p + py;
                            let c = cp * p + px;
                            out.set(patch_idx, col, bundle.bev[ch * g * g + row * g + c]);
                            col += 1;
                        }
                    }
                }
            }
        }
        out
    }

    /// Encode the unmasked streams into one token sequence with stream-type
    /// embeddings added. Returns None when the mask excludes every stream.
    pub fn encode_streams(
        &self,
        tape: &mut Tape,
        binding: &DecoderBinding,
        bundle: &PerceptionBundle,
        mask: StreamMask,
    ) -> Result<Option<EncodedScene>> {
        if bundle.grid != self.cfg.bev_grid {
            return Err(Error::Nn(anchorplan_nn::NnError::ShapeMismatch {
                op: "encode_streams",
                expected: format!("bev grid {}", self.cfg.bev_grid),
                got: format!("{}", bundle.grid),
            }));
        }
        let b = |i: usize| binding.ids[i];
        let mut tokens: Option<NodeId> = None;
        let mut count = 0usize;
        let push = |tape: &mut Tape, tokens: &mut Option<NodeId>, t: NodeId| -> Result<()> {
            *tokens = Some(match tokens.take() {
                Some(acc) => tape.concat_rows(acc, t)?,
                None => t,
            });
            Ok(())
        };

        if mask.bev {
            let patches = tape.leaf(self.patch_matrix(bundle));
            let proj = tape.matmul(patches, b(IDX_W_BEV))?;
            let proj = tape.add_bias(proj, b(IDX_B_BEV))?;
            let typed = tape.add_bias(proj, b(IDX_TYPE_BEV))?;
            count += self.cfg.patch_count();
            push(tape, &mut tokens, typed)?;
        }
        if mask.objects {
            // the ego state token leads the sparse instance stream
            let scaled: Vec<f64> = bundle
                .ego_token
                .iter()
                .zip(EGO_SCALE)
                .map(|(v, s)| v * s)
                .collect();
            let raw = tape.leaf(Tensor2::row_vector(&scaled));
            let proj = tape.matmul(raw, b(IDX_W_EGO))?;
            let proj = tape.add_bias(proj, b(IDX_B_EGO))?;
            let typed = tape.add_bias(proj, b(IDX_TYPE_OBJ))?;
            count += 1;
            push(tape, &mut tokens, typed)?;
        }
        if mask.objects && !bundle.object_tokens.is_empty() {
            let mut data = Vec::new();
            for t in &bundle.object_tokens {
                data.extend(t.iter().zip(OBJ_SCALE).map(|(v, s)| v * s));
            }
            let raw = tape.leaf(Tensor2::from_vec(
                bundle.object_tokens.len(),
                OBJECT_TOKEN_WIDTH,
                data,
            )?);
            let proj = tape.matmul(raw, b(IDX_W_OBJ))?;
            let proj = tape.add_bias(proj, b(IDX_B_OBJ))?;
            let typed = tape.add_bias(proj, b(IDX_TYPE_OBJ))?;
            count += bundle.object_tokens.len();
            push(tape, &mut tokens, typed)?;
        }
        if mask.map && !bundle.map_tokens.is_empty() {
            let mut data = Vec::new();
            for t in &bundle.map_tokens {
                data.extend(t.iter().map(|v| v * MAP_SCALE));
            }
            let raw = tape.leaf(Tensor2::from_vec(
                bundle.map_tokens.len(),
                self.cfg.map_token_width,
                data,
            )?);
            let proj = tape.matmul(raw, b(IDX_W_MAP))?;
            let proj = tape.add_bias(proj, b(IDX_B_MAP))?;
            let typed = tape.add_bias(proj, b(IDX_TYPE_MAP))?;
            count += bundle.map_tokens.len();
            push(tape, &mut tokens, typed)?;
        }
        if mask.command {
            let raw = tape.leaf(Tensor2::row_vector(&bundle.command_token));
            let proj = tape.matmul(raw, b(IDX_W_CMD))?;
            let proj = tape.add_bias(proj, b(IDX_B_CMD))?;
            let typed = tape.add_bias(proj, b(IDX_TYPE_CMD))?;
            count += 1;
            push(tape, &mut tokens, typed)?;
        }

        Ok(tokens.map(|tokens| EncodedScene {
            tokens,
            token_count: count,
        }))
    }

    /// Cross-attend the learned queries to the scene tokens and run each
    /// attended query through its own trajectory head.
    pub fn decode_anchors(
        &self,
        tape: &mut Tape,
        binding: &DecoderBinding,
        scene: &EncodedScene,
    ) -> Result<DecodedAnchors> {
        let b = |i: usize| binding.ids[i];
        let q = tape.matmul(b(IDX_QUERIES), b(IDX_W_Q))?;
        let k = tape.matmul(scene.tokens, b(IDX_W_K))?;
        let v = tape.matmul(scene.tokens, b(IDX_W_V))?;
        let att = tape.scaled_dot_attention(q, k, v, self.cfg.attention_heads)?;
        let proj = tape.matmul(att, b(IDX_W_O))?;
        let proj = tape.add_bias(proj, b(IDX_B_O))?;
        let mixed = tape.add(b(IDX_QUERIES), proj)?;
        let mixed = tape.layer_norm(mixed)?;

        // pooled conditioning: token mean plus an attentive read that can
        // single out low-population tokens (ego state, command)
        let mean_ctx = tape.mean_rows(scene.tokens)?;
        let att_ctx =
            tape.scaled_dot_attention(b(IDX_CTX_QUERY), scene.tokens, scene.tokens, 1)?;
        let ctx = tape.concat_cols(mean_ctx, att_ctx)?;

        let mut anchors = Vec::with_capacity(self.cfg.query_count);
        for j in 0..self.cfg.query_count {
            let base = IDX_HEADS + 4 * j;
            let x = tape.slice_row(mixed, j)?;
            let x = tape.concat_cols(x, ctx)?;
            let h = tape.matmul(x, b(base))?;
            let h = tape.add_bias(h, b(base + 1))?;
            let h = tape.relu(h)?;
            let out = tape.matmul(h, b(base + 2))?;
            let out = tape.add_bias(out, b(base + 3))?;
            // heads work at unit scale; waypoints live at road scale
            let out = tape.scale(out, HEAD_OUTPUT_SCALE)?;
            anchors.push(out);
        }
        Ok(DecodedAnchors {
            anchors,
            ctx,
            attention: att,
        })
    }

    /// Anchor values as flat trajectories (reads the tape).
    pub fn anchor_values(tape: &Tape, decoded: &DecodedAnchors) -> Vec<FlatTrajectory> {
        decoded
            .anchors
            .iter()
            .map(|id| FlatTrajectory(tape.value(*id).data().to_vec()))
            .collect()
    }
}

// parameter order inside `params()`
const IDX_W_BEV: usize = 0;
const IDX_B_BEV: usize = 1;
const IDX_W_EGO: usize = 2;
const IDX_B_EGO: usize = 3;
const IDX_W_OBJ: usize = 4;
const IDX_B_OBJ: usize = 5;
const IDX_W_MAP: usize = 6;
const IDX_B_MAP: usize = 7;
const IDX_W_CMD: usize = 8;
const IDX_B_CMD: usize = 9;
const IDX_TYPE_BEV: usize = 10;
const IDX_TYPE_OBJ: usize = 11;
const IDX_TYPE_MAP: usize = 12;
const IDX_TYPE_CMD: usize = 13;
const IDX_QUERIES: usize = 14;
const IDX_CTX_QUERY: usize = 15;
const IDX_W_Q: usize = 16;
const IDX_W_K: usize = 17;
const IDX_W_V: usize = 18;
const IDX_W_O: usize = 19;
const IDX_B_O: usize = 20;
const IDX_HEADS: usize = 21;

pub struct DecoderBinding {
    pub ids: Vec<NodeId>,
}

pub struct EncodedScene {
    pub tokens: NodeId,
    pub token_count: usize,
}

pub struct DecodedAnchors {
    /// One 1 x 2H node per trajectory head.
    pub anchors: Vec<NodeId>,
    /// Pooled conditioning vector (mean over tokens), 1 x d.
    pub ctx: NodeId,
    /// Attention node (per-head weights retrievable from the tape).
    pub attention: NodeId,
}

/// Winner-takes-all anchor loss: displacement of the best head plus a small
/// pull on the mean so losing heads stay in range.
pub const WTA_PULL: f64 = 0.01;

pub fn decoder_loss(
    tape: &mut Tape,
    anchors: &[NodeId],
    expert: &FlatTrajectory,
    winner: Option<usize>,
) -> Result<(NodeId, usize)> {
    assert!(!anchors.is_empty());
    let target = Tensor2::row_vector(expert.values());
    let mut dists = Vec::with_capacity(anchors.len());
    for a in anchors {
        dists.push(tape.mean_point_dist(*a, target.clone())?);
    }
    let winner = winner.unwrap_or_else(|| {
        let mut best = (0usize, f64::INFINITY);
        for (j, d) in dists.iter().enumerate() {
            let v = tape.value(*d).item();
            if v < best.1 {
                best = (j, v);
            }
        }
        best.0
    });
    let mut mean = dists[0];
    for d in &dists[1..] {
        mean = tape.add(mean, *d)?;
    }
    let mean = tape.scale(mean, WTA_PULL / anchors.len() as f64)?;
    let loss = tape.add(dists[winner], mean)?;
    Ok((loss, winner))
}
