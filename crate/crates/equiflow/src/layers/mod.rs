//! E(3)-equivariant neural building blocks over multivector + scalar token
//! sets: equilinear maps, geometric bilinears, gated nonlinearities, layer
//! norms, and geometric self-/anchor-attention with the distance-aware
//! attention weights.
//!
//! Equivariance contract: a rigid motion acts on a [`TokenSet`] by the versor
//! sandwich on every multivector channel and by the identity on scalar
//! channels ([`transform_tokens`]). Every layer here commutes with that
//! action; the property tests drive it with random motions including
//! reflections and translations.

use std::sync::Arc;

use thiserror::Error;

use crate::pga::{sandwich_matrix, tables, Versor};
use crate::tensor::{PairTable, Real, Tensor, TensorError, TensorResult};

#[derive(Debug, Error)]
pub enum LayersError {
    #[error(transparent)]
    Tensor(#[from] TensorError),
    #[error("anchor index list is empty")]
    EmptyAnchors,
    #[error("duplicate anchor index {0}")]
    DuplicateAnchor(usize),
    #[error("scalar channel count {channels} not divisible into even pairs over {positions} position dims")]
    OddChannelCount { channels: usize, positions: usize },
}

pub type LayersResult<V> = Result<V, LayersError>;

/// Homogeneous-weight threshold below which a channel contributes nothing to
/// the distance term of the attention logits.
pub const TRIVEC_EPS: f64 = 1e-9;

/// Per-node multivector channels plus auxiliary scalar channels.
///
/// `mv` is [N, n_mv, 16]; `s` is [N, n_s] (n_s may be zero).
#[derive(Clone, Debug)]
pub struct TokenSet<T: Real> {
    pub mv: Tensor<T>,
    pub s: Tensor<T>,
}

impl<T: Real> TokenSet<T> {
    pub fn len(&self) -> usize {
        self.mv.shape()[0]
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn n_mv(&self) -> usize {
        self.mv.shape()[1]
    }

    pub fn n_s(&self) -> usize {
        self.s.shape()[1]
    }

    pub fn gather(&self, idx: &[usize]) -> LayersResult<TokenSet<T>> {
        Ok(TokenSet { mv: self.mv.gather_rows(idx)?, s: self.s.gather_rows(idx)? })
    }

    pub fn add(&self, other: &TokenSet<T>) -> LayersResult<TokenSet<T>> {
        Ok(TokenSet { mv: self.mv.add(&other.mv)?, s: self.s.add(&other.s)? })
    }
}

/// Apply a rigid motion to a token set: sandwich on multivector channels,
/// identity on scalars.
pub fn transform_tokens<T: Real>(x: &TokenSet<T>, v: &Versor) -> LayersResult<TokenSet<T>> {
    let m = sandwich_matrix(v);
    let mut rows = Vec::with_capacity(256);
    for r in m.iter() {
        rows.extend_from_slice(r);
    }
    let m_t = Tensor::<T>::from_f64_slice(&[16, 16], &rows, false);
    let (n, c) = (x.mv.shape()[0], x.mv.shape()[1]);
    let flat = x.mv.reshape(&[n * c, 16])?;
    let moved = flat.matmul_nt(&m_t)?.reshape(&[n, c, 16])?;
    Ok(TokenSet { mv: moved, s: x.s.clone() })
}

/// Equivariant linear map on multivector channels.
///
/// `weights` is [out_ch, in_ch, 9]: five grade projections plus four
/// e0-product maps per channel pair. Commutes with the sandwich action for
/// all rigid versors.
pub fn equi_linear<T: Real>(weights: &Tensor<T>, x: &Tensor<T>) -> TensorResult<T> {
    let (out_ch, in_ch) = (weights.shape()[0], weights.shape()[1]);
    if weights.shape().len() != 3
        || weights.shape()[2] != tables::EQUI_BASIS
        || x.shape().len() != 3
        || x.shape()[1] != in_ch
        || x.shape()[2] != 16
    {
        return Err(TensorError::ShapeMismatch {
            op: "equi_linear",
            a: weights.shape().to_vec(),
            b: x.shape().to_vec(),
        });
    }
    let n = x.shape()[0];
    let basis = x.equi_basis()?.reshape(&[n, in_ch * 9, 16])?;
    let w = weights.reshape(&[out_ch, in_ch * 9])?;
    w.bmm_left(&basis)
}

/// Plain linear map on scalar channels: s [N, in] x w [out, in] (+ bias).
pub fn scalar_linear<T: Real>(
    w: &Tensor<T>,
    bias: Option<&Tensor<T>>,
    s: &Tensor<T>,
) -> TensorResult<T> {
    let y = s.matmul_nt(w)?;
    match bias {
        Some(b) => y.add(b),
        None => Ok(y),
    }
}

/// Joint linear layer on a token set with invariant cross-talk: auxiliary
/// scalars feed the grade-0 component of the multivector outputs and the
/// grade-0 components feed the scalar outputs. Both directions touch only
/// E(3)-invariant quantities, so equivariance is preserved.
#[derive(Clone)]
pub struct TokenLinear<T: Real> {
    /// [out_mv, in_mv, 9]
    pub w_mv: Tensor<T>,
    /// [out_s, in_s]
    pub w_s: Tensor<T>,
    /// [out_mv, in_s]
    pub w_s_to_mv: Tensor<T>,
    /// [out_s, in_mv]
    pub w_mv_to_s: Tensor<T>,
    /// [out_mv] bias on the grade-0 component
    pub b_mv: Tensor<T>,
    /// [out_s]
    pub b_s: Tensor<T>,
}

impl<T: Real> TokenLinear<T> {
    pub fn apply(&self, x: &TokenSet<T>) -> LayersResult<TokenSet<T>> {
        let n = x.len();
        let out_mv = self.w_mv.shape()[0];
        let mv = equi_linear(&self.w_mv, &x.mv)?;
        // scalar -> grade-0 injection
        let inj = scalar_linear(&self.w_s_to_mv, Some(&self.b_mv), &x.s)?; // [N, out_mv]
        let inj = inj.reshape(&[n, out_mv, 1])?;
        let zeros = Tensor::<T>::zeros(&[n, out_mv, 15]);
        let inj_full = Tensor::concat(&[inj, zeros], 2)?;
        let mv = mv.add(&inj_full)?;
        // grade-0 -> scalar extraction
        let g0 = x.mv.slice(2, 0, 1)?.reshape(&[n, x.n_mv()])?;
        let s = scalar_linear(&self.w_s, Some(&self.b_s), &x.s)?
            .add(&scalar_linear(&self.w_mv_to_s, None, &g0)?)?;
        Ok(TokenSet { mv, s })
    }
}

/// Channel-split geometric bilinear: geometric product on the first half of
/// the channel pairs, join on the second half, concatenated back.
pub fn bilinear_pair<T: Real>(
    x: &Tensor<T>,
    y: &Tensor<T>,
    gp: &Arc<PairTable>,
    join: &Arc<PairTable>,
) -> TensorResult<T> {
    let c = x.shape()[1];
    let half = c / 2;
    let xp = x.slice(1, 0, half)?;
    let xj = x.slice(1, half, c)?;
    let yp = y.slice(1, 0, half)?;
    let yj = y.slice(1, half, c)?;
    let prod = xp.pair_product(&yp, gp)?;
    let joined = xj.pair_product(&yj, join)?;
    Tensor::concat(&[prod, joined], 1)
}

/// Orientation reference for the join: the mean pseudoscalar coefficient of
/// a covariantly transforming token set. It flips sign under improper
/// motions, exactly cancelling the sign the join picks up there.
pub fn pseudoscalar_reference<T: Real>(tokens: &TokenSet<T>) -> TensorResult<T> {
    Ok(tokens.mv.slice(2, 15, 16)?.mean())
}

/// Full geometric bilinear block: pair products (the join half scaled by the
/// orientation reference) followed by equilinear mixing. With a covariant
/// reference the block is equivariant under the full E(3), reflections
/// included.
pub fn geometric_bilinear<T: Real>(
    x: &Tensor<T>,
    y: &Tensor<T>,
    mix: &Tensor<T>,
    reference: &Tensor<T>,
    gp: &Arc<PairTable>,
    join: &Arc<PairTable>,
) -> TensorResult<T> {
    if x.shape() != y.shape() {
        return Err(TensorError::ShapeMismatch {
            op: "geometric_bilinear",
            a: x.shape().to_vec(),
            b: y.shape().to_vec(),
        });
    }
    let c = x.shape()[1];
    let half = c / 2;
    let prod = x.slice(1, 0, half)?.pair_product(&y.slice(1, 0, half)?, gp)?;
    let joined = x.slice(1, half, c)?.pair_product(&y.slice(1, half, c)?, join)?.mul(reference)?;
    let paired = Tensor::concat(&[prod, joined], 1)?;
    equi_linear(mix, &paired)
}

/// Scalar-gated nonlinearity: each multivector channel is scaled by
/// gelu of its own grade-0 component (an invariant gate).
pub fn gated_nonlinearity<T: Real>(mv: &Tensor<T>) -> TensorResult<T> {
    let gate = mv.slice(2, 0, 1)?.gelu();
    mv.mul(&gate)
}

/// Multivector layer norm: x / sqrt(mean_c <x_c, x_c> + eps) per token, with
/// the invariant inner product so the scaling factor is E(3)-invariant.
pub fn equi_layer_norm<T: Real>(mv: &Tensor<T>, eps: f64) -> TensorResult<T> {
    let mask: Vec<f64> = tables::INNER_MASK.iter().map(|&m| if m { 1.0 } else { 0.0 }).collect();
    let mask = Tensor::<T>::from_f64_slice(&[16], &mask, false);
    let sq = mv.mul(mv)?.mul(&mask)?;
    let per_channel = sq.sum_axis(2)?; // [N, C]
    let mean = per_channel.mean_axis_keep(1)?; // [N, 1]
    let denom = mean.add_scalar(T::from_f64(eps)).sqrt();
    let n = mv.shape()[0];
    mv.div(&denom.reshape(&[n, 1, 1])?)
}

/// Standard layer norm on scalar channels (per token over channels).
pub fn scalar_layer_norm<T: Real>(s: &Tensor<T>, eps: f64) -> TensorResult<T> {
    if s.shape()[1] == 0 {
        return Ok(s.clone());
    }
    let mean = s.mean_axis_keep(1)?;
    let centered = s.sub(&mean)?;
    let var = centered.mul(&centered)?.mean_axis_keep(1)?;
    centered.div(&var.add_scalar(T::from_f64(eps)).sqrt())
}

/// Norm both streams of a token set.
pub fn token_norm<T: Real>(x: &TokenSet<T>, eps: f64) -> LayersResult<TokenSet<T>> {
    Ok(TokenSet { mv: equi_layer_norm(&x.mv, eps)?, s: scalar_layer_norm(&x.s, eps)? })
}

/// Sine-cosine features of invariant scalar values at geometrically spaced
/// frequencies. Layout per input dim: sin block then cos block, frequency
/// major; output width 2 * d * n_freq.
pub fn scalar_positional_features(values: &[f64], n: usize, d: usize, n_freq: usize) -> Vec<f64> {
    assert_eq!(values.len(), n * d);
    let mut out = vec![0.0; n * 2 * d * n_freq];
    let freqs: Vec<f64> = (0..n_freq).map(|i| sincos_frequency(i, n_freq)).collect();
    let width = 2 * d * n_freq;
    for row in 0..n {
        for dim in 0..d {
            let v = values[row * d + dim];
            let base = row * width + dim * 2 * n_freq;
            for (fi, f) in freqs.iter().enumerate() {
                out[base + fi] = (v * f).sin();
                out[base + n_freq + fi] = (v * f).cos();
            }
        }
    }
    out
}

/// Geometric frequency ladder shared by the sine-cosine embedding and RoPE.
pub fn sincos_frequency(i: usize, n_freq: usize) -> f64 {
    1.0 / 10_000f64.powf(i as f64 / n_freq as f64)
}

/// Rotary position tables: cos/sin per token and channel, pairing channel c
/// with channel c + d/2 inside each per-position-dim group (rotate-half
/// layout). Position dim p requires the channel count divisible by p with an
/// even group size.
pub struct RopeTables<T: Real> {
    pub cos: Tensor<T>,
    pub sin: Tensor<T>,
    group: usize,
    positions: usize,
}

impl<T: Real> RopeTables<T> {
    /// Precompute tables for `channels` scalar channels over `positions`
    /// [N, p] invariant position values.
    pub fn new(positions_vals: &[f64], n: usize, p: usize, channels: usize) -> LayersResult<Self> {
        if p == 0 || channels % p != 0 || (channels / p) % 2 != 0 {
            return Err(LayersError::OddChannelCount { channels, positions: p });
        }
        let group = channels / p;
        let half = group / 2;
        let mut cos = vec![0.0; n * channels];
        let mut sin = vec![0.0; n * channels];
        for row in 0..n {
            for dim in 0..p {
                let v = positions_vals[row * p + dim];
                for f in 0..half {
                    let theta = v * sincos_frequency(f, half);
                    let (s, c) = theta.sin_cos();
                    for offset in [f, f + half] {
                        cos[row * channels + dim * group + offset] = c;
                        sin[row * channels + dim * group + offset] = s;
                    }
                }
            }
        }
        Ok(RopeTables {
            cos: Tensor::from_f64_slice(&[n, channels], &cos, false),
            sin: Tensor::from_f64_slice(&[n, channels], &sin, false),
            group,
            positions: p,
        })
    }

    /// Rotate channel pairs: out = s * cos + rotate_half(s) * sin.
    pub fn apply(&self, s: &Tensor<T>) -> TensorResult<T> {
        let (n, channels) = (s.shape()[0], s.shape()[1]);
        let half = self.group / 2;
        let mut parts = Vec::new();
        for dim in 0..self.positions {
            let lo = s.slice(1, dim * self.group, dim * self.group + half)?;
            let hi = s.slice(1, dim * self.group + half, (dim + 1) * self.group)?;
            parts.push(hi.neg());
            parts.push(lo);
        }
        let rotated = Tensor::concat(&parts, 1)?.reshape(&[n, channels])?;
        s.mul(&self.cos)?.add(&rotated.mul(&self.sin)?)
    }
}

/// rope_rotate as a standalone operation (identity when positions are absent).
pub fn rope_rotate<T: Real>(
    s: &Tensor<T>,
    positions: Option<(&[f64], usize)>,
) -> LayersResult<Tensor<T>> {
    match positions {
        None => Ok(s.clone()),
        Some((vals, p)) => {
            let n = s.shape()[0];
            let tables = RopeTables::<T>::new(vals, n, p, s.shape()[1])?;
            Ok(tables.apply(s)?)
        }
    }
}

/// Learnable per-head mixing weights, stored pre-softplus.
pub struct HeadWeights<T: Real> {
    /// [3]: pre-activation alpha, beta, gamma.
    pub pre: Tensor<T>,
}

impl<T: Real> HeadWeights<T> {
    #[allow(clippy::type_complexity)]
    pub fn positive(&self) -> Result<(Tensor<T>, Tensor<T>, Tensor<T>), TensorError> {
        let p = self.pre.softplus();
        Ok((p.slice(0, 0, 1)?, p.slice(0, 1, 2)?, p.slice(0, 2, 3)?))
    }
}

/// Value of the pre-softplus parameter that makes softplus(pre) = 1.
pub fn softplus_inverse_one() -> f64 {
    (std::f64::consts::E - 1.0f64).ln()
}

fn inner_features<T: Real>(x: &Tensor<T>) -> TensorResult<T> {
    let mask: Vec<f64> = tables::INNER_MASK.iter().map(|&m| if m { 1.0 } else { 0.0 }).collect();
    let mask = Tensor::<T>::from_f64_slice(&[16], &mask, false);
    let (n, c) = (x.shape()[0], x.shape()[1]);
    x.mul(&mask)?.reshape(&[n, c * 16])
}

/// The fixed 5-feature maps phi/psi on normalized trivector content, masked
/// to zero for channels whose homogeneous weight is below [`TRIVEC_EPS`], so
/// that phi(a) . psi(b) = -|a - b|^2 over well-defined point channels.
fn distance_features<T: Real>(x: &Tensor<T>, query_side: bool) -> TensorResult<T> {
    let (n, c) = (x.shape()[0], x.shape()[1]);
    let w = x.slice(2, 14, 15)?; // [N, C, 1]
    let eps = T::from_f64(TRIVEC_EPS);
    let mask_vals: Vec<T> =
        w.data().iter().map(|&v| if v.abs() > eps { T::one() } else { T::zero() }).collect();
    let mask = Tensor::from_vec(&[n, c, 1], mask_vals, false);
    // guarded divisor: 1 where masked out, so no stray NaN/Inf leaks in
    let safe_w = w.mul(&mask)?.add(&mask.neg().add_scalar(T::one()))?;
    let tri = x.slice(2, 11, 14)?; // [N, C, 3]
    let a = tri.div(&safe_w)?;
    let sq = a.mul(&a)?.sum_axis(2)?.reshape(&[n, c, 1])?;
    let ones = Tensor::<T>::full(&[n, c, 1], T::one());
    let feats = if query_side {
        Tensor::concat(&[a.mul_scalar(T::from_f64(2.0)), sq.neg(), ones], 2)?
    } else {
        Tensor::concat(&[a, ones, sq.neg()], 2)?
    };
    feats.mul(&mask)?.reshape(&[n, c * 5])
}

/// Raw attention logits before softmax: the three-term distance-aware inner
/// product divided by sqrt(13 n_mv + n_s).
pub fn attention_logits<T: Real>(
    q: &TokenSet<T>,
    k: &TokenSet<T>,
    head: &HeadWeights<T>,
    rope: Option<(&RopeTables<T>, &RopeTables<T>)>,
) -> LayersResult<Tensor<T>> {
    if q.n_mv() != k.n_mv() || q.n_s() != k.n_s() {
        return Err(TensorError::ShapeMismatch {
            op: "attention_logits",
            a: vec![q.n_mv(), q.n_s()],
            b: vec![k.n_mv(), k.n_s()],
        }
        .into());
    }
    let (alpha, beta, gamma) = head.positive()?;
    let term_inner = inner_features(&q.mv)?.matmul_nt(&inner_features(&k.mv)?)?;
    let term_dist = distance_features(&q.mv, true)?.matmul_nt(&distance_features(&k.mv, false)?)?;
    let (qs, ks) = match rope {
        Some((rq, rk)) => (rq.apply(&q.s)?, rk.apply(&k.s)?),
        None => (q.s.clone(), k.s.clone()),
    };
    let term_scalar = qs.matmul_nt(&ks)?;
    let scale = T::from_f64(1.0 / ((13 * q.n_mv() + q.n_s()) as f64).sqrt());
    let logits = term_inner
        .mul(&alpha)?
        .add(&term_dist.mul(&beta)?)?
        .add(&term_scalar.mul(&gamma)?)?
        .mul_scalar(scale);
    Ok(logits)
}

/// Row-normalized attention weights [N_q, N_k].
pub fn attention_weights<T: Real>(
    q: &TokenSet<T>,
    k: &TokenSet<T>,
    head: &HeadWeights<T>,
    rope: Option<(&RopeTables<T>, &RopeTables<T>)>,
) -> LayersResult<Tensor<T>> {
    Ok(attention_logits(q, k, head, rope)?.softmax(1)?)
}

/// Mix values with attention weights: multivector channels componentwise over
/// the 16 coefficients, scalar channels by the standard weighted sum.
pub fn apply_attention<T: Real>(
    weights: &Tensor<T>,
    v: &TokenSet<T>,
) -> LayersResult<TokenSet<T>> {
    let (nk, c) = (v.mv.shape()[0], v.mv.shape()[1]);
    let nq = weights.shape()[0];
    let mv = weights.matmul(&v.mv.reshape(&[nk, c * 16])?)?.reshape(&[nq, c, 16])?;
    let s = weights.matmul(&v.s)?;
    Ok(TokenSet { mv, s })
}

/// Multi-head geometric attention: per-head equilinear K/Q/V projections on
/// multivector channels (each head projects the full channel set), split-head
/// scalar projections, head-wise distance-aware weights, and a joint output
/// projection with grade-0 cross-talk.
pub struct GeometricAttention<T: Real> {
    pub heads: usize,
    /// each [heads * n_mv, n_mv, 9]
    pub w_k_mv: Tensor<T>,
    pub w_q_mv: Tensor<T>,
    pub w_v_mv: Tensor<T>,
    /// each [n_s, n_s]
    pub w_k_s: Tensor<T>,
    pub w_q_s: Tensor<T>,
    pub w_v_s: Tensor<T>,
    /// [heads, 3] pre-softplus head weights
    pub head_pre: Tensor<T>,
    pub out: TokenLinear<T>,
}

impl<T: Real> GeometricAttention<T> {
    /// Queries from `x`, keys/values from `kv`.
    pub fn attend(
        &self,
        x: &TokenSet<T>,
        kv: &TokenSet<T>,
        rope: Option<(&RopeTables<T>, &RopeTables<T>)>,
    ) -> LayersResult<TokenSet<T>> {
        let heads = self.heads;
        let n_mv = x.n_mv();
        let n_s = x.n_s();
        let s_head = if n_s == 0 { 0 } else { n_s / heads };

        let q_mv = equi_linear(&self.w_q_mv, &x.mv)?;
        let k_mv = equi_linear(&self.w_k_mv, &kv.mv)?;
        let v_mv = equi_linear(&self.w_v_mv, &kv.mv)?;
        let q_s = scalar_linear(&self.w_q_s, None, &x.s)?;
        let k_s = scalar_linear(&self.w_k_s, None, &kv.s)?;
        let v_s = scalar_linear(&self.w_v_s, None, &kv.s)?;

        let mut mv_parts = Vec::with_capacity(heads);
        let mut s_parts = Vec::with_capacity(heads);
        for h in 0..heads {
            let slice_head = |t: &Tensor<T>| t.slice(1, h * n_mv, (h + 1) * n_mv);
            let slice_s = |t: &Tensor<T>| t.slice(1, h * s_head, (h + 1) * s_head);
            let qh = TokenSet { mv: slice_head(&q_mv)?, s: slice_s(&q_s)? };
            let kh = TokenSet { mv: slice_head(&k_mv)?, s: slice_s(&k_s)? };
            let vh = TokenSet { mv: slice_head(&v_mv)?, s: slice_s(&v_s)? };
            let head = HeadWeights { pre: self.head_pre.slice(0, h, h + 1)?.reshape(&[3])? };
            let w = attention_weights(&qh, &kh, &head, rope)?;
            let mixed = apply_attention(&w, &vh)?;
            mv_parts.push(mixed.mv);
            s_parts.push(mixed.s);
        }
        let concat = TokenSet {
            mv: Tensor::concat(&mv_parts, 1)?,
            s: Tensor::concat(&s_parts, 1)?,
        };
        self.out.apply(&concat)
    }

    /// All pairwise interactions.
    pub fn self_attention(&self, x: &TokenSet<T>) -> LayersResult<TokenSet<T>> {
        self.attend(x, x, None)
    }

    /// Keys/values restricted to the anchor subset; each query depends only
    /// on itself and the anchors.
    pub fn anchor_attention(
        &self,
        x: &TokenSet<T>,
        anchor_idx: &[usize],
    ) -> LayersResult<TokenSet<T>> {
        validate_anchors(anchor_idx, x.len())?;
        let anchors = x.gather(anchor_idx)?;
        self.attend(x, &anchors, None)
    }
}

/// Anchor index preconditions: nonempty, in-range, duplicate-free.
pub fn validate_anchors(idx: &[usize], n: usize) -> LayersResult<()> {
    if idx.is_empty() {
        return Err(LayersError::EmptyAnchors);
    }
    let mut seen = vec![false; n];
    for &i in idx {
        if i >= n {
            return Err(TensorError::IndexOutOfRange { index: i, len: n }.into());
        }
        if seen[i] {
            return Err(LayersError::DuplicateAnchor(i));
        }
        seen[i] = true;
    }
    Ok(())
}

#[cfg(test)]
pub(crate) mod tests;
