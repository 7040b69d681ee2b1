//! Non-equivariant anchored-branched transformer twin: concatenated raw
//! features with sine-cosine position embeddings, scaled-dot-product
//! attention with rotary encoding over the 3-D coordinates, and the same
//! anchor/branch/KV-exchange topology and supernode pooling as the
//! equivariant model.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::abgatr::{DropoutCtx, Predictions};
use super::inputs::{baseline_feature_rows, FeatureSpec};
use super::params::{Init, ParamStore, ParamTensors};
use super::ModelError;
use crate::data::{Sample, TargetKind};
use crate::layers::{scalar_layer_norm, scalar_linear, validate_anchors, RopeTables};
use crate::pga::{norm3, sub3};
use crate::tensor::{Real, Tensor};

pub const LAYER_NORM_EPS: f64 = 1e-6;

/// Baseline hyperparameters; block counts mirror the equivariant model
/// (12 per branch, 10 shared at the stock setting).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaselineConfig {
    pub hidden: usize,
    pub heads: usize,
    pub shared_blocks: usize,
    pub decoder_blocks: usize,
    pub anchors_surface: usize,
    pub anchors_volume: usize,
    pub pooling_radius: f64,
    pub dropout: f64,
    /// sine-cosine frequencies per coordinate for the input embedding
    pub n_freq: usize,
    pub mlp_ratio: usize,
    pub surface_features: FeatureSpec,
    pub volume_features: FeatureSpec,
    pub surface_target: TargetKind,
    pub volume_target: TargetKind,
}

impl BaselineConfig {
    pub fn stock(
        surface_features: FeatureSpec,
        volume_features: FeatureSpec,
        surface_target: TargetKind,
        volume_target: TargetKind,
    ) -> Self {
        BaselineConfig {
            hidden: 192,
            heads: 3,
            shared_blocks: 9,
            decoder_blocks: 2,
            anchors_surface: 64,
            anchors_volume: 64,
            pooling_radius: 60.0,
            dropout: 0.0,
            n_freq: 8,
            mlp_ratio: 4,
            surface_features,
            volume_features,
            surface_target,
            volume_target,
        }
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        if self.hidden % self.heads != 0 {
            return Err(ModelError::ConfigMismatch(format!(
                "hidden = {} not divisible by heads = {}",
                self.hidden, self.heads
            )));
        }
        if self.pooling_radius <= 0.0 {
            return Err(ModelError::NonPositiveRadius(self.pooling_radius));
        }
        Ok(())
    }

    fn input_width(&self, spec: &FeatureSpec) -> usize {
        6 * self.n_freq + 3 * spec.n_vec + spec.n_scalar
    }
}

fn register_linear<T: Real>(store: &mut ParamStore<T>, name: &str, out: usize, inp: usize) {
    store.register(&format!("{name}/w"), &[out, inp], Init::UniformFan(inp.max(1)));
    store.register(&format!("{name}/b"), &[out], Init::Zeros);
}

fn register_block<T: Real>(store: &mut ParamStore<T>, prefix: &str, cfg: &BaselineConfig) {
    let h = cfg.hidden;
    for w in ["q", "k", "v", "o"] {
        register_linear(store, &format!("{prefix}/attn/{w}"), h, h);
    }
    register_linear(store, &format!("{prefix}/mlp/w1"), cfg.mlp_ratio * h, h);
    register_linear(store, &format!("{prefix}/mlp/w2"), h, cfg.mlp_ratio * h);
}

pub fn register_params<T: Real>(store: &mut ParamStore<T>, cfg: &BaselineConfig) {
    register_linear(store, "embed/surface", cfg.hidden, cfg.input_width(&cfg.surface_features));
    register_linear(store, "embed/volume", cfg.hidden, cfg.input_width(&cfg.volume_features));
    register_linear(store, "pool", cfg.hidden, cfg.hidden + 4);
    register_block(store, "geom", cfg);
    for i in 0..cfg.shared_blocks {
        register_block(store, &format!("body{i}"), cfg);
    }
    for j in 0..cfg.decoder_blocks {
        register_block(store, &format!("dec/surface{j}"), cfg);
        register_block(store, &format!("dec/volume{j}"), cfg);
    }
    register_linear(store, "head/surface", cfg.surface_target.dims(), cfg.hidden);
    register_linear(store, "head/volume", cfg.volume_target.dims(), cfg.hidden);
}

pub fn init_params<T: Real>(cfg: &BaselineConfig, seed: u64) -> ParamStore<T> {
    let mut store = ParamStore::new(seed);
    register_params(&mut store, cfg);
    store
}

fn linear<T: Real>(p: &ParamTensors<T>, name: &str, x: &Tensor<T>) -> Result<Tensor<T>, ModelError> {
    Ok(scalar_linear(p.get(&format!("{name}/w")), Some(p.get(&format!("{name}/b"))), x)?)
}

struct Dropout {
    rate: f64,
    rng: Option<ChaCha8Rng>,
}

impl Dropout {
    fn new(ctx: &Option<DropoutCtx>) -> Dropout {
        match ctx {
            Some(c) if c.rate > 0.0 => {
                Dropout { rate: c.rate, rng: Some(ChaCha8Rng::seed_from_u64(c.seed ^ 0xb5)) }
            }
            _ => Dropout { rate: 0.0, rng: None },
        }
    }

    fn apply<T: Real>(&mut self, x: Tensor<T>) -> Result<Tensor<T>, ModelError> {
        let Some(rng) = self.rng.as_mut() else { return Ok(x) };
        let keep = 1.0 - self.rate;
        let inv = 1.0 / keep;
        let mask: Vec<f64> = (0..x.numel())
            .map(|_| if rng.gen_range(0.0..1.0) < keep { inv } else { 0.0 })
            .collect();
        Ok(x.mul(&Tensor::from_f64_slice(x.shape(), &mask, false))?)
    }
}

/// Rotary tables over 3-D coordinates for one token set: the largest prefix
/// of the head dimension divisible into even per-axis groups is rotated, the
/// remaining channels pass through unchanged.
struct HeadRope<T: Real> {
    tables: Option<RopeTables<T>>,
    rotated: usize,
}

impl<T: Real> HeadRope<T> {
    fn new(positions: &[[f64; 3]], head_dim: usize) -> Result<Self, ModelError> {
        let rotated = 6 * (head_dim / 6);
        if rotated == 0 {
            return Ok(HeadRope { tables: None, rotated: 0 });
        }
        let flat: Vec<f64> = positions.iter().flat_map(|p| p.iter().copied()).collect();
        let tables = RopeTables::new(&flat, positions.len(), 3, rotated)?;
        Ok(HeadRope { tables: Some(tables), rotated })
    }

    fn apply(&self, x: &Tensor<T>) -> Result<Tensor<T>, ModelError> {
        match &self.tables {
            None => Ok(x.clone()),
            Some(t) => {
                let d = x.shape()[1];
                let head = x.slice(1, 0, self.rotated)?;
                let rotated = t.apply(&head)?;
                if self.rotated == d {
                    Ok(rotated)
                } else {
                    Ok(Tensor::concat(&[rotated, x.slice(1, self.rotated, d)?], 1)?)
                }
            }
        }
    }
}

struct BranchState<T: Real> {
    x: Tensor<T>,
    rope: HeadRope<T>,
}

#[allow(clippy::too_many_arguments)]
fn attention<T: Real>(
    p: &ParamTensors<T>,
    prefix: &str,
    cfg: &BaselineConfig,
    x_normed: &Tensor<T>,
    q_rope: &HeadRope<T>,
    kv_normed: &Tensor<T>,
    kv_rope: &HeadRope<T>,
) -> Result<Tensor<T>, ModelError> {
    let h = cfg.hidden;
    let heads = cfg.heads;
    let d_head = h / heads;
    let q = linear(p, &format!("{prefix}/attn/q"), x_normed)?;
    let k = linear(p, &format!("{prefix}/attn/k"), kv_normed)?;
    let v = linear(p, &format!("{prefix}/attn/v"), kv_normed)?;
    let scale = T::from_f64(1.0 / (d_head as f64).sqrt());
    let mut parts = Vec::with_capacity(heads);
    for head in 0..heads {
        let qh = q_rope.apply(&q.slice(1, head * d_head, (head + 1) * d_head)?)?;
        let kh = kv_rope.apply(&k.slice(1, head * d_head, (head + 1) * d_head)?)?;
        let vh = v.slice(1, head * d_head, (head + 1) * d_head)?;
        let logits = qh.matmul_nt(&kh)?.mul_scalar(scale);
        let w = logits.softmax(1)?;
        parts.push(w.matmul(&vh)?);
    }
    let concat = Tensor::concat(&parts, 1)?;
    linear(p, &format!("{prefix}/attn/o"), &concat)
}

enum Kv<'a, T: Real> {
    Own(&'a [usize]),
    External(&'a Tensor<T>, &'a HeadRope<T>),
}

fn apply_block<T: Real>(
    p: &ParamTensors<T>,
    prefix: &str,
    cfg: &BaselineConfig,
    state: &BranchState<T>,
    kv: Kv<'_, T>,
    kv_positions_own: &[[f64; 3]],
    drop: &mut Dropout,
) -> Result<Tensor<T>, ModelError> {
    let normed = scalar_layer_norm(&state.x, LAYER_NORM_EPS)?;
    let attn_out = match kv {
        Kv::Own(idx) => {
            validate_anchors(idx, state.x.shape()[0])?;
            let kv_tokens = normed.gather_rows(idx)?;
            let kv_pos: Vec<[f64; 3]> = idx.iter().map(|&i| kv_positions_own[i]).collect();
            let kv_rope = HeadRope::new(&kv_pos, cfg.hidden / cfg.heads)?;
            attention(p, prefix, cfg, &normed, &state.rope, &kv_tokens, &kv_rope)?
        }
        Kv::External(tokens, rope) => {
            attention(p, prefix, cfg, &normed, &state.rope, tokens, rope)?
        }
    };
    let x = state.x.add(&drop.apply(attn_out)?)?;
    let normed = scalar_layer_norm(&x, LAYER_NORM_EPS)?;
    let hidden = linear(p, &format!("{prefix}/mlp/w1"), &normed)?.gelu();
    let mlp_out = linear(p, &format!("{prefix}/mlp/w2"), &hidden)?;
    Ok(x.add(&drop.apply(mlp_out)?)?)
}

/// Forward pass of the baseline on a scaled sample; mirrors the equivariant
/// model's topology with per-axis-standardized targets handled by the caller.
pub fn baseline_forward<T: Real>(
    sample: &Sample,
    cfg: &BaselineConfig,
    p: &ParamTensors<T>,
    spec: &super::abgatr::ForwardSpec<'_>,
) -> Result<Predictions<T>, ModelError> {
    cfg.validate()?;
    if sample.surface_vectors.len() != cfg.surface_features.n_vec
        || sample.surface_scalars.len() != cfg.surface_features.n_scalar
        || sample.volume_vectors.len() != cfg.volume_features.n_vec
        || sample.volume_scalars.len() != cfg.volume_features.n_scalar
    {
        return Err(ModelError::ConfigMismatch("baseline feature spec mismatch".into()));
    }
    validate_anchors(spec.anchors_surface, sample.n_surface())?;
    validate_anchors(spec.anchors_volume, sample.n_volume())?;

    let mut drop = Dropout::new(&spec.dropout);
    let d_head = cfg.hidden / cfg.heads;

    let (rows_s, width_s) = baseline_feature_rows(
        &sample.surface_pos,
        &sample.surface_vectors,
        &sample.surface_scalars,
        cfg.n_freq,
    );
    let (rows_v, width_v) = baseline_feature_rows(
        &sample.volume_pos,
        &sample.volume_vectors,
        &sample.volume_scalars,
        cfg.n_freq,
    );
    let feats_s =
        Tensor::<T>::from_f64_slice(&[sample.n_surface(), width_s], &rows_s, false);
    let feats_v = Tensor::<T>::from_f64_slice(&[sample.n_volume(), width_v], &rows_v, false);

    let mut surface = BranchState {
        x: linear(p, "embed/surface", &feats_s)?,
        rope: HeadRope::new(&sample.surface_pos, d_head)?,
    };
    let mut volume = BranchState {
        x: linear(p, "embed/volume", &feats_v)?,
        rope: HeadRope::new(&sample.volume_pos, d_head)?,
    };

    // supernode pooling with raw relative offsets
    let supernodes = baseline_pool(p, cfg, &surface.x, &sample.surface_pos, spec.anchors_surface)?;
    let sn_pos: Vec<[f64; 3]> =
        spec.anchors_surface.iter().map(|&i| sample.surface_pos[i]).collect();
    let sn_rope = HeadRope::new(&sn_pos, d_head)?;
    let sn_normed = scalar_layer_norm(&supernodes, LAYER_NORM_EPS)?;

    let new_s = apply_block(
        p,
        "geom",
        cfg,
        &surface,
        Kv::External(&sn_normed, &sn_rope),
        &sample.surface_pos,
        &mut drop,
    )?;
    let new_v = apply_block(
        p,
        "geom",
        cfg,
        &volume,
        Kv::External(&sn_normed, &sn_rope),
        &sample.volume_pos,
        &mut drop,
    )?;
    surface.x = new_s.scatter_add_rows(spec.anchors_surface, &supernodes)?;
    volume.x = new_v;

    for i in 0..cfg.shared_blocks {
        let prefix = format!("body{i}");
        if i % 2 == 0 {
            let new_s = apply_block(
                p,
                &prefix,
                cfg,
                &surface,
                Kv::Own(spec.anchors_surface),
                &sample.surface_pos,
                &mut drop,
            )?;
            let new_v = apply_block(
                p,
                &prefix,
                cfg,
                &volume,
                Kv::Own(spec.anchors_volume),
                &sample.volume_pos,
                &mut drop,
            )?;
            surface.x = new_s;
            volume.x = new_v;
        } else {
            let s_kv = scalar_layer_norm(&surface.x, LAYER_NORM_EPS)?
                .gather_rows(spec.anchors_surface)?;
            let v_kv =
                scalar_layer_norm(&volume.x, LAYER_NORM_EPS)?.gather_rows(spec.anchors_volume)?;
            let s_kv_pos: Vec<[f64; 3]> =
                spec.anchors_surface.iter().map(|&i| sample.surface_pos[i]).collect();
            let v_kv_pos: Vec<[f64; 3]> =
                spec.anchors_volume.iter().map(|&i| sample.volume_pos[i]).collect();
            let s_rope = HeadRope::new(&s_kv_pos, d_head)?;
            let v_rope = HeadRope::new(&v_kv_pos, d_head)?;
            let new_s = apply_block(
                p,
                &prefix,
                cfg,
                &surface,
                Kv::External(&v_kv, &v_rope),
                &sample.surface_pos,
                &mut drop,
            )?;
            let new_v = apply_block(
                p,
                &prefix,
                cfg,
                &volume,
                Kv::External(&s_kv, &s_rope),
                &sample.volume_pos,
                &mut drop,
            )?;
            surface.x = new_s;
            volume.x = new_v;
        }
    }

    for j in 0..cfg.decoder_blocks {
        surface.x = apply_block(
            p,
            &format!("dec/surface{j}"),
            cfg,
            &surface,
            Kv::Own(spec.anchors_surface),
            &sample.surface_pos,
            &mut drop,
        )?;
        volume.x = apply_block(
            p,
            &format!("dec/volume{j}"),
            cfg,
            &volume,
            Kv::Own(spec.anchors_volume),
            &sample.volume_pos,
            &mut drop,
        )?;
    }

    let surface_pred =
        linear(p, "head/surface", &scalar_layer_norm(&surface.x, LAYER_NORM_EPS)?)?;
    let volume_pred = linear(p, "head/volume", &scalar_layer_norm(&volume.x, LAYER_NORM_EPS)?)?;
    Ok(Predictions { surface: surface_pred, volume: volume_pred })
}

/// Radius-ball pooling with raw relative offsets as message features.
fn baseline_pool<T: Real>(
    p: &ParamTensors<T>,
    cfg: &BaselineConfig,
    surface: &Tensor<T>,
    positions: &[[f64; 3]],
    anchors: &[usize],
) -> Result<Tensor<T>, ModelError> {
    if cfg.pooling_radius <= 0.0 {
        return Err(ModelError::NonPositiveRadius(cfg.pooling_radius));
    }
    validate_anchors(anchors, surface.shape()[0])?;
    let n = surface.shape()[0];
    let mut pair_anchor = Vec::new();
    let mut pair_token = Vec::new();
    for (ai, &a) in anchors.iter().enumerate() {
        for b in 0..n {
            if norm3(sub3(positions[b], positions[a])) <= cfg.pooling_radius {
                pair_anchor.push(ai);
                pair_token.push(b);
            }
        }
    }
    let pairs = pair_token.len();
    let neighbors = surface.gather_rows(&pair_token)?;
    let mut extra = Vec::with_capacity(pairs * 4);
    for (&ai, &b) in pair_anchor.iter().zip(&pair_token) {
        let delta = sub3(positions[b], positions[anchors[ai]]);
        extra.extend_from_slice(&delta);
        extra.push(norm3(delta));
    }
    let extra = Tensor::<T>::from_f64_slice(&[pairs, 4], &extra, false);
    let message = Tensor::concat(&[neighbors, extra], 1)?;
    let mapped = linear(p, "pool", &message)?.gelu();

    let m = anchors.len();
    let mut counts = vec![0usize; m];
    for &ai in &pair_anchor {
        counts[ai] += 1;
    }
    let mut avg = vec![0.0f64; m * pairs];
    for (pi, &ai) in pair_anchor.iter().enumerate() {
        avg[ai * pairs + pi] = 1.0 / counts[ai] as f64;
    }
    let avg = Tensor::<T>::from_f64_slice(&[m, pairs], &avg, false);
    Ok(avg.matmul(&mapped)?)
}
