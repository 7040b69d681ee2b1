//! Raw token construction shared by both models: positions as PGA points,
//! vector features as planes, invariant scalars with their sine-cosine
//! expansion.

use crate::data::Sample;
use crate::layers::{scalar_positional_features, TokenSet};
use crate::pga;
use crate::tensor::{Real, Tensor};

/// Feature layout of one branch, fixed by the dataset.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct FeatureSpec {
    /// number of per-token vector features (normals, flow priors)
    pub n_vec: usize,
    /// number of per-token invariant scalar features
    pub n_scalar: usize,
}

impl FeatureSpec {
    /// Raw multivector channels: the position point plus one plane per
    /// vector feature.
    pub fn raw_mv_channels(&self) -> usize {
        1 + self.n_vec
    }

    /// Raw scalar width after sine-cosine expansion.
    pub fn raw_scalar_width(&self, n_freq: usize) -> usize {
        self.n_scalar * (1 + 2 * n_freq)
    }
}

pub struct BranchRaw<T: Real> {
    pub tokens: TokenSet<T>,
    pub positions: Vec<[f64; 3]>,
}

/// Build the raw (pre-embedding) token set of one branch from scaled
/// positions, vector features and invariant scalars.
pub fn build_raw_tokens<T: Real>(
    positions: &[[f64; 3]],
    vectors: &[(String, Vec<[f64; 3]>)],
    scalars: &[(String, Vec<f64>)],
    n_freq: usize,
) -> BranchRaw<T> {
    let n = positions.len();
    let n_vec = vectors.len();
    let n_scalar = scalars.len();
    let mut mv = vec![0.0f64; n * (1 + n_vec) * 16];
    for (i, &p) in positions.iter().enumerate() {
        let point = pga::embed_point(p);
        mv[i * (1 + n_vec) * 16..i * (1 + n_vec) * 16 + 16].copy_from_slice(&point.0);
        for (c, (_, vecs)) in vectors.iter().enumerate() {
            // plane through the token's own position: the offset transforms
            // covariantly under translations, a zero offset would not
            let plane = pga::embed_plane(vecs[i], pga::dot3(vecs[i], p));
            let base = (i * (1 + n_vec) + 1 + c) * 16;
            mv[base..base + 16].copy_from_slice(&plane.0);
        }
    }
    // scalar features: raw values then their sine-cosine expansion
    let mut scal_rows = vec![0.0f64; n * n_scalar];
    for (c, (_, vals)) in scalars.iter().enumerate() {
        for i in 0..n {
            scal_rows[i * n_scalar + c] = vals[i];
        }
    }
    let width = n_scalar * (1 + 2 * n_freq);
    let mut s = vec![0.0f64; n * width];
    if n_scalar > 0 {
        let expanded = scalar_positional_features(&scal_rows, n, n_scalar, n_freq);
        let exp_width = 2 * n_scalar * n_freq;
        for i in 0..n {
            s[i * width..i * width + n_scalar]
                .copy_from_slice(&scal_rows[i * n_scalar..(i + 1) * n_scalar]);
            s[i * width + n_scalar..(i + 1) * width]
                .copy_from_slice(&expanded[i * exp_width..(i + 1) * exp_width]);
        }
    }
    BranchRaw {
        tokens: TokenSet {
            mv: Tensor::from_f64_slice(&[n, 1 + n_vec, 16], &mv, false),
            s: Tensor::from_f64_slice(&[n, width], &s, false),
        },
        positions: positions.to_vec(),
    }
}

/// Raw tokens for both branches of a scaled sample.
pub fn sample_raw_tokens<T: Real>(
    sample: &Sample,
    n_freq: usize,
) -> (BranchRaw<T>, BranchRaw<T>) {
    let surface = build_raw_tokens(
        &sample.surface_pos,
        &sample.surface_vectors,
        &sample.surface_scalars,
        n_freq,
    );
    let volume = build_raw_tokens(
        &sample.volume_pos,
        &sample.volume_vectors,
        &sample.volume_scalars,
        n_freq,
    );
    (surface, volume)
}

/// Flattened feature rows for the non-equivariant baseline: sine-cosine
/// position features, then raw vector components, then raw scalars.
pub fn baseline_feature_rows(
    positions: &[[f64; 3]],
    vectors: &[(String, Vec<[f64; 3]>)],
    scalars: &[(String, Vec<f64>)],
    n_freq: usize,
) -> (Vec<f64>, usize) {
    let n = positions.len();
    let pos_flat: Vec<f64> = positions.iter().flat_map(|p| p.iter().copied()).collect();
    let pos_feats = scalar_positional_features(&pos_flat, n, 3, n_freq);
    let pos_width = 6 * n_freq;
    let width = pos_width + 3 * vectors.len() + scalars.len();
    let mut rows = vec![0.0f64; n * width];
    for i in 0..n {
        let row = &mut rows[i * width..(i + 1) * width];
        row[..pos_width].copy_from_slice(&pos_feats[i * pos_width..(i + 1) * pos_width]);
        for (c, (_, vecs)) in vectors.iter().enumerate() {
            row[pos_width + 3 * c..pos_width + 3 * c + 3].copy_from_slice(&vecs[i]);
        }
        for (c, (_, vals)) in scalars.iter().enumerate() {
            row[pos_width + 3 * vectors.len() + c] = vals[i];
        }
    }
    (rows, width)
}
