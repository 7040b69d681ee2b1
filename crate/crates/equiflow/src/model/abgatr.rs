//! The anchored-branched equivariant surrogate: PGA token embedding,
//! supernode pooling, a geometry block against pooled supernodes, a shared
//! body alternating within-branch anchor attention with KV exchange across
//! branches, branch-specific decoder blocks, and equivariant output heads.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::inputs::{sample_raw_tokens, FeatureSpec};
use super::params::{Init, ParamStore, ParamTensors};
use super::ModelError;
use crate::data::{Sample, TargetKind};
use crate::layers::{
    gated_nonlinearity, geometric_bilinear, pseudoscalar_reference, softplus_inverse_one,
    token_norm, validate_anchors, GeometricAttention, TokenLinear, TokenSet,
};
use crate::pga::{embed_translation, norm3, sub3};
use crate::tensor::ops::{geometric_product_table, join_table};
use crate::tensor::{Real, Tensor};

pub const LAYER_NORM_EPS: f64 = 1e-6;

/// Architecture hyperparameters plus the dataset-determined input/target
/// layout. The stock configuration is 16 multivector channels, 64 scalar
/// channels, 4 heads, and 1 geometry + 9 shared + 2 decoder blocks per
/// branch (12 total, 10 shared across branches).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub n_mv: usize,
    pub n_s: usize,
    pub heads: usize,
    pub shared_blocks: usize,
    pub decoder_blocks: usize,
    pub anchors_surface: usize,
    pub anchors_volume: usize,
    /// radius-ball size for supernode pooling, in scaled coordinate units
    pub pooling_radius: f64,
    pub dropout: f64,
    /// sine-cosine expansion width per invariant scalar feature
    pub n_freq: usize,
    /// hidden widening of the scalar MLP path
    pub scalar_mlp_ratio: usize,
    pub surface_features: FeatureSpec,
    pub volume_features: FeatureSpec,
    pub surface_target: TargetKind,
    pub volume_target: TargetKind,
}

impl ModelConfig {
    /// Paper-scale defaults (1.6M parameters with the stock feature layout).
    pub fn stock(
        surface_features: FeatureSpec,
        volume_features: FeatureSpec,
        surface_target: TargetKind,
        volume_target: TargetKind,
    ) -> Self {
        ModelConfig {
            n_mv: 16,
            n_s: 64,
            heads: 4,
            shared_blocks: 9,
            decoder_blocks: 2,
            anchors_surface: 64,
            anchors_volume: 64,
            pooling_radius: 60.0,
            dropout: 0.0,
            n_freq: 4,
            scalar_mlp_ratio: 4,
            surface_features,
            volume_features,
            surface_target,
            volume_target,
        }
    }

    pub fn blocks_per_branch(&self) -> usize {
        1 + self.shared_blocks + self.decoder_blocks
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        if self.n_s % self.heads != 0 {
            return Err(ModelError::ConfigMismatch(format!(
                "n_s = {} not divisible by heads = {}",
                self.n_s, self.heads
            )));
        }
        if self.n_mv % 2 != 0 {
            return Err(ModelError::ConfigMismatch(format!(
                "n_mv = {} must be even for the bilinear channel split",
                self.n_mv
            )));
        }
        if self.pooling_radius <= 0.0 {
            return Err(ModelError::NonPositiveRadius(self.pooling_radius));
        }
        Ok(())
    }
}

fn register_token_linear<T: Real>(
    store: &mut ParamStore<T>,
    prefix: &str,
    in_mv: usize,
    out_mv: usize,
    in_s: usize,
    out_s: usize,
    scalar_bias: Init,
) {
    store.register(&format!("{prefix}/w_mv"), &[out_mv, in_mv, 9], Init::UniformFan(in_mv * 3));
    store.register(&format!("{prefix}/w_s"), &[out_s, in_s], Init::UniformFan(in_s.max(1)));
    store.register(
        &format!("{prefix}/w_s_to_mv"),
        &[out_mv, in_s],
        Init::UniformFan(in_s.max(1)),
    );
    store.register(&format!("{prefix}/w_mv_to_s"), &[out_s, in_mv], Init::UniformFan(in_mv));
    store.register(&format!("{prefix}/b_mv"), &[out_mv], Init::Zeros);
    store.register(&format!("{prefix}/b_s"), &[out_s], scalar_bias);
}

fn token_linear_from<T: Real>(p: &ParamTensors<T>, prefix: &str) -> TokenLinear<T> {
    TokenLinear {
        w_mv: p.get(&format!("{prefix}/w_mv")).clone(),
        w_s: p.get(&format!("{prefix}/w_s")).clone(),
        w_s_to_mv: p.get(&format!("{prefix}/w_s_to_mv")).clone(),
        w_mv_to_s: p.get(&format!("{prefix}/w_mv_to_s")).clone(),
        b_mv: p.get(&format!("{prefix}/b_mv")).clone(),
        b_s: p.get(&format!("{prefix}/b_s")).clone(),
    }
}

fn register_block<T: Real>(store: &mut ParamStore<T>, prefix: &str, cfg: &ModelConfig) {
    let (n_mv, n_s, heads) = (cfg.n_mv, cfg.n_s, cfg.heads);
    for w in ["k_mv", "q_mv", "v_mv"] {
        store.register(
            &format!("{prefix}/attn/{w}"),
            &[heads * n_mv, n_mv, 9],
            Init::UniformFan(n_mv * 3),
        );
    }
    for w in ["k_s", "q_s", "v_s"] {
        store.register(&format!("{prefix}/attn/{w}"), &[n_s, n_s], Init::UniformFan(n_s.max(1)));
    }
    store.register(
        &format!("{prefix}/attn/head_pre"),
        &[heads, 3],
        Init::Constant(softplus_inverse_one()),
    );
    register_token_linear(store, &format!("{prefix}/attn/out"), heads * n_mv, n_mv, n_s, n_s, Init::Zeros);
    register_token_linear(
        store,
        &format!("{prefix}/mlp/in"),
        n_mv,
        2 * n_mv,
        n_s,
        cfg.scalar_mlp_ratio * n_s,
        Init::Zeros,
    );
    store.register(&format!("{prefix}/mlp/mix"), &[n_mv, n_mv, 9], Init::UniformFan(n_mv * 3));
    register_token_linear(
        store,
        &format!("{prefix}/mlp/out"),
        n_mv,
        n_mv,
        cfg.scalar_mlp_ratio * n_s,
        n_s,
        Init::Zeros,
    );
}

/// Block name list: one shared geometry block, `shared_blocks` shared body
/// blocks, then branch-specific decoder blocks.
fn body_block_name(i: usize) -> String {
    format!("body{i}")
}

/// Register every learnable tensor of the model.
pub fn register_params<T: Real>(store: &mut ParamStore<T>, cfg: &ModelConfig) {
    let raw_s_surface = cfg.surface_features.raw_scalar_width(cfg.n_freq);
    let raw_s_volume = cfg.volume_features.raw_scalar_width(cfg.n_freq);
    register_token_linear(
        store,
        "embed/surface",
        cfg.surface_features.raw_mv_channels(),
        cfg.n_mv,
        raw_s_surface,
        cfg.n_s,
        Init::Uniform(0.5),
    );
    register_token_linear(
        store,
        "embed/volume",
        cfg.volume_features.raw_mv_channels(),
        cfg.n_mv,
        raw_s_volume,
        cfg.n_s,
        Init::Uniform(0.5),
    );
    register_token_linear(store, "pool", cfg.n_mv + 1, cfg.n_mv, cfg.n_s + 1, cfg.n_s, Init::Zeros);
    register_block(store, "geom", cfg);
    for i in 0..cfg.shared_blocks {
        register_block(store, &body_block_name(i), cfg);
    }
    for j in 0..cfg.decoder_blocks {
        register_block(store, &format!("dec/surface{j}"), cfg);
        register_block(store, &format!("dec/volume{j}"), cfg);
    }
    register_token_linear(store, "head/surface", cfg.n_mv, 1, cfg.n_s, 1, Init::Zeros);
    register_token_linear(store, "head/volume", cfg.n_mv, 1, cfg.n_s, 1, Init::Zeros);
}

/// Build a fresh seeded parameter store for the configuration.
pub fn init_params<T: Real>(cfg: &ModelConfig, seed: u64) -> ParamStore<T> {
    let mut store = ParamStore::new(seed);
    register_params(&mut store, cfg);
    store
}

fn attention_from<T: Real>(
    p: &ParamTensors<T>,
    prefix: &str,
    heads: usize,
) -> GeometricAttention<T> {
    GeometricAttention {
        heads,
        w_k_mv: p.get(&format!("{prefix}/attn/k_mv")).clone(),
        w_q_mv: p.get(&format!("{prefix}/attn/q_mv")).clone(),
        w_v_mv: p.get(&format!("{prefix}/attn/v_mv")).clone(),
        w_k_s: p.get(&format!("{prefix}/attn/k_s")).clone(),
        w_q_s: p.get(&format!("{prefix}/attn/q_s")).clone(),
        w_v_s: p.get(&format!("{prefix}/attn/v_s")).clone(),
        head_pre: p.get(&format!("{prefix}/attn/head_pre")).clone(),
        out: token_linear_from(p, &format!("{prefix}/attn/out")),
    }
}

/// Anchor indices plus the dropout state of one forward pass. Evaluation
/// passes use `dropout: None`; training passes resample anchors per step and
/// seed channel-level dropout masks.
pub struct ForwardSpec<'a> {
    pub anchors_surface: &'a [usize],
    pub anchors_volume: &'a [usize],
    pub dropout: Option<DropoutCtx>,
}

#[derive(Debug, Clone, Copy)]
pub struct DropoutCtx {
    pub rate: f64,
    pub seed: u64,
}

pub struct Predictions<T: Real> {
    /// [N_s, dims of the surface target]
    pub surface: Tensor<T>,
    /// [N_v, dims of the volume target]
    pub volume: Tensor<T>,
}

struct Dropout {
    rate: f64,
    rng: Option<ChaCha8Rng>,
}

impl Dropout {
    fn new(ctx: &Option<DropoutCtx>) -> Dropout {
        match ctx {
            Some(c) if c.rate > 0.0 => {
                Dropout { rate: c.rate, rng: Some(ChaCha8Rng::seed_from_u64(c.seed)) }
            }
            _ => Dropout { rate: 0.0, rng: None },
        }
    }

    /// Channel dropout: whole multivector channels and individual scalar
    /// channels are zeroed, scaled by 1/(1-rate) to keep expectations.
    fn apply<T: Real>(&mut self, x: TokenSet<T>) -> Result<TokenSet<T>, ModelError> {
        let Some(rng) = self.rng.as_mut() else { return Ok(x) };
        let keep = 1.0 - self.rate;
        let inv = 1.0 / keep;
        let (n, c) = (x.mv.shape()[0], x.mv.shape()[1]);
        let mv_mask: Vec<f64> =
            (0..n * c).map(|_| if rng.gen_range(0.0..1.0) < keep { inv } else { 0.0 }).collect();
        let s_mask: Vec<f64> = (0..x.s.numel())
            .map(|_| if rng.gen_range(0.0..1.0) < keep { inv } else { 0.0 })
            .collect();
        let mv_mask = Tensor::<T>::from_f64_slice(&[n, c, 1], &mv_mask, false);
        let s_mask = Tensor::<T>::from_f64_slice(x.s.shape(), &s_mask, false);
        Ok(TokenSet { mv: x.mv.mul(&mv_mask)?, s: x.s.mul(&s_mask)? })
    }
}

enum KvSource<'a, T: Real> {
    /// keys/values from the block's own (normed) tokens at these indices
    Own(&'a [usize]),
    /// keys/values from an already-normed external token set
    External(&'a TokenSet<T>),
}

struct BlockWeights<T: Real> {
    attn: GeometricAttention<T>,
    mlp_in: TokenLinear<T>,
    mlp_mix: Tensor<T>,
    mlp_out: TokenLinear<T>,
}

fn block_weights<T: Real>(p: &ParamTensors<T>, prefix: &str, heads: usize) -> BlockWeights<T> {
    BlockWeights {
        attn: attention_from(p, prefix, heads),
        mlp_in: token_linear_from(p, &format!("{prefix}/mlp/in")),
        mlp_mix: p.get(&format!("{prefix}/mlp/mix")).clone(),
        mlp_out: token_linear_from(p, &format!("{prefix}/mlp/out")),
    }
}

/// One pre-norm residual block: anchor attention then the equivariant MLP
/// (norm, joint linear, geometric bilinear, gated nonlinearity, joint
/// linear), with residual connections on both halves.
fn apply_block<T: Real>(
    x: &TokenSet<T>,
    kv: KvSource<'_, T>,
    w: &BlockWeights<T>,
    drop: &mut Dropout,
) -> Result<TokenSet<T>, ModelError> {
    let gp = geometric_product_table();
    let join = join_table();
    let normed = token_norm(x, LAYER_NORM_EPS)?;
    // orientation reference for the join, computed from the key/value tokens
    // so that query outputs stay independent of one another
    let (attn_out, reference) = match kv {
        KvSource::Own(idx) => {
            validate_anchors(idx, x.len())?;
            let anchors = normed.gather(idx)?;
            (w.attn.attend(&normed, &anchors, None)?, pseudoscalar_reference(&anchors)?)
        }
        KvSource::External(tokens) => {
            (w.attn.attend(&normed, tokens, None)?, pseudoscalar_reference(tokens)?)
        }
    };
    let x = x.add(&drop.apply(attn_out)?)?;

    let h = w.mlp_in.apply(&token_norm(&x, LAYER_NORM_EPS)?)?;
    let n_mv = x.n_mv();
    let first = h.mv.slice(1, 0, n_mv)?;
    let second = h.mv.slice(1, n_mv, 2 * n_mv)?;
    let bil = geometric_bilinear(&first, &second, &w.mlp_mix, &reference, &gp, &join)?;
    let mlp_out = w.mlp_out.apply(&TokenSet { mv: gated_nonlinearity(&bil)?, s: h.s.gelu() })?;
    Ok(x.add(&drop.apply(mlp_out)?)?)
}

/// Radius-ball supernode pooling onto the surface anchors: every neighbor
/// contributes its features plus the relative translation encoded as a
/// translation primitive and its length as an extra scalar; messages go
/// through a joint linear map and gated nonlinearity and are mean-aggregated
/// per anchor.
pub fn supernode_pool<T: Real>(
    surface: &TokenSet<T>,
    positions: &[[f64; 3]],
    anchors: &[usize],
    radius: f64,
    lin: &TokenLinear<T>,
) -> Result<TokenSet<T>, ModelError> {
    if radius <= 0.0 {
        return Err(ModelError::NonPositiveRadius(radius));
    }
    validate_anchors(anchors, surface.len())?;
    let n = surface.len();
    let mut pair_anchor = Vec::new();
    let mut pair_token = Vec::new();
    for (ai, &a) in anchors.iter().enumerate() {
        for b in 0..n {
            if norm3(sub3(positions[b], positions[a])) <= radius {
                pair_anchor.push(ai);
                pair_token.push(b);
            }
        }
    }
    let pairs = pair_token.len();
    let neighbors = surface.gather(&pair_token)?;

    let mut trans = Vec::with_capacity(pairs * 16);
    let mut dist = Vec::with_capacity(pairs);
    for (&ai, &b) in pair_anchor.iter().zip(&pair_token) {
        let delta = sub3(positions[b], positions[anchors[ai]]);
        trans.extend_from_slice(&embed_translation(delta).0);
        dist.push(norm3(delta));
    }
    let trans = Tensor::<T>::from_f64_slice(&[pairs, 1, 16], &trans, false);
    let dist = Tensor::<T>::from_f64_slice(&[pairs, 1], &dist, false);
    let message = TokenSet {
        mv: Tensor::concat(&[neighbors.mv, trans], 1)?,
        s: Tensor::concat(&[neighbors.s, dist], 1)?,
    };
    let mapped = lin.apply(&message)?;
    let mapped = TokenSet { mv: gated_nonlinearity(&mapped.mv)?, s: mapped.s.gelu() };

    // deterministic mean aggregation per anchor
    let m = anchors.len();
    let mut counts = vec![0usize; m];
    for &ai in &pair_anchor {
        counts[ai] += 1;
    }
    let mut avg = vec![0.0f64; m * pairs];
    for (p, &ai) in pair_anchor.iter().enumerate() {
        avg[ai * pairs + p] = 1.0 / counts[ai] as f64;
    }
    let avg = Tensor::<T>::from_f64_slice(&[m, pairs], &avg, false);
    let (c, s_w) = (mapped.mv.shape()[1], mapped.s.shape()[1]);
    let mv = avg.matmul(&mapped.mv.reshape(&[pairs, c * 16])?)?.reshape(&[m, c, 16])?;
    let s = avg.matmul(&mapped.s)?;
    debug_assert_eq!(s.shape(), &[m, s_w]);
    Ok(TokenSet { mv, s })
}

fn check_features(
    what: &str,
    spec: &FeatureSpec,
    n_vec: usize,
    n_scalar: usize,
) -> Result<(), ModelError> {
    if spec.n_vec != n_vec || spec.n_scalar != n_scalar {
        return Err(ModelError::ConfigMismatch(format!(
            "{what} features: config expects {spec:?}, sample has n_vec={n_vec}, n_scalar={n_scalar}"
        )));
    }
    Ok(())
}

fn read_head<T: Real>(
    p: &ParamTensors<T>,
    prefix: &str,
    tokens: &TokenSet<T>,
    kind: TargetKind,
) -> Result<Tensor<T>, ModelError> {
    let head = token_linear_from(p, prefix);
    let out = head.apply(&token_norm(tokens, LAYER_NORM_EPS)?)?;
    let n = tokens.len();
    match kind {
        TargetKind::Scalar => {
            // invariant scalar read-out plus the scalar-channel linear head
            let mv_scalar = out.mv.slice(2, 0, 1)?.reshape(&[n, 1])?;
            Ok(mv_scalar.add(&out.s)?)
        }
        TargetKind::Vector => {
            // grade-1 components: rotation-equivariant, translation-invariant
            Ok(out.mv.slice(2, 2, 5)?.reshape(&[n, 3])?)
        }
    }
}

/// Full forward pass over one scaled sample.
pub fn forward<T: Real>(
    sample: &Sample,
    cfg: &ModelConfig,
    p: &ParamTensors<T>,
    spec: &ForwardSpec<'_>,
) -> Result<Predictions<T>, ModelError> {
    cfg.validate()?;
    check_features(
        "surface",
        &cfg.surface_features,
        sample.surface_vectors.len(),
        sample.surface_scalars.len(),
    )?;
    check_features(
        "volume",
        &cfg.volume_features,
        sample.volume_vectors.len(),
        sample.volume_scalars.len(),
    )?;
    validate_anchors(spec.anchors_surface, sample.n_surface())?;
    validate_anchors(spec.anchors_volume, sample.n_volume())?;

    let mut drop = Dropout::new(&spec.dropout);
    let (raw_surface, raw_volume) = sample_raw_tokens::<T>(sample, cfg.n_freq);

    // (1) branch embeddings
    let embed_s = token_linear_from(p, "embed/surface");
    let embed_v = token_linear_from(p, "embed/volume");
    let mut surface = embed_s.apply(&raw_surface.tokens)?;
    let mut volume = embed_v.apply(&raw_volume.tokens)?;

    // (2) supernode pooling on the embedded surface
    let pool_lin = token_linear_from(p, "pool");
    let supernodes = supernode_pool(
        &surface,
        &raw_surface.positions,
        spec.anchors_surface,
        cfg.pooling_radius,
        &pool_lin,
    )?;

    // geometry block: both branches attend to the (normed) supernodes
    let geom = block_weights(p, "geom", cfg.heads);
    let sn_normed = token_norm(&supernodes, LAYER_NORM_EPS)?;
    let new_surface = apply_block(&surface, KvSource::External(&sn_normed), &geom, &mut drop)?;
    let new_volume = apply_block(&volume, KvSource::External(&sn_normed), &geom, &mut drop)?;
    surface = new_surface;
    volume = new_volume;

    // fold the supernode outputs into the surface anchor tokens
    surface = TokenSet {
        mv: surface.mv.scatter_add_rows(spec.anchors_surface, &supernodes.mv)?,
        s: surface.s.scatter_add_rows(spec.anchors_surface, &supernodes.s)?,
    };

    // (3) shared body: within-branch anchor attention alternating with
    // KV exchange from the opposite branch's anchors
    for i in 0..cfg.shared_blocks {
        let w = block_weights(p, &body_block_name(i), cfg.heads);
        if i % 2 == 0 {
            let new_surface =
                apply_block(&surface, KvSource::Own(spec.anchors_surface), &w, &mut drop)?;
            let new_volume =
                apply_block(&volume, KvSource::Own(spec.anchors_volume), &w, &mut drop)?;
            surface = new_surface;
            volume = new_volume;
        } else {
            let surface_kv = token_norm(&surface, LAYER_NORM_EPS)?.gather(spec.anchors_surface)?;
            let volume_kv = token_norm(&volume, LAYER_NORM_EPS)?.gather(spec.anchors_volume)?;
            let new_surface = apply_block(&surface, KvSource::External(&volume_kv), &w, &mut drop)?;
            let new_volume = apply_block(&volume, KvSource::External(&surface_kv), &w, &mut drop)?;
            surface = new_surface;
            volume = new_volume;
        }
    }

    // (4) branch-specific decoders
    for j in 0..cfg.decoder_blocks {
        let ws = block_weights(p, &format!("dec/surface{j}"), cfg.heads);
        let wv = block_weights(p, &format!("dec/volume{j}"), cfg.heads);
        surface = apply_block(&surface, KvSource::Own(spec.anchors_surface), &ws, &mut drop)?;
        volume = apply_block(&volume, KvSource::Own(spec.anchors_volume), &wv, &mut drop)?;
    }

    // (5) heads
    let surface_pred = read_head(p, "head/surface", &surface, cfg.surface_target)?;
    let volume_pred = read_head(p, "head/volume", &volume, cfg.volume_target)?;
    Ok(Predictions { surface: surface_pred, volume: volume_pred })
}
