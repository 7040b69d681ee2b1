//! Position scaling into the [0,1000]^3 cube and equivariance-aware target
//! standardization.

use serde::{Deserialize, Serialize};

use super::ModelError;
use crate::data::{PositionScaling, Sample, TargetKind};
use crate::pga::{norm3, sub3};

/// Dataset-wide scaling: center = centroid over all points of all samples,
/// scale chosen so the maximum radius from the center maps to 500. Any
/// rotation of any geometry about the center then stays inside [0,1000]^3
/// under x -> (x - center) * scale + (500,500,500).
pub fn compute_position_scaling(samples: &[Sample]) -> Result<PositionScaling, ModelError> {
    let mut sum = [0.0f64; 3];
    let mut count = 0usize;
    for s in samples {
        for p in s.surface_pos.iter().chain(s.volume_pos.iter()) {
            for k in 0..3 {
                sum[k] += p[k];
            }
            count += 1;
        }
    }
    if count == 0 {
        return Err(ModelError::EmptyDataset);
    }
    let center = [sum[0] / count as f64, sum[1] / count as f64, sum[2] / count as f64];
    let mut max_radius = 0.0f64;
    for s in samples {
        for p in s.surface_pos.iter().chain(s.volume_pos.iter()) {
            max_radius = max_radius.max(norm3(sub3(*p, center)));
        }
    }
    let scale = if max_radius <= 1e-12 { 1.0 } else { 500.0 / max_radius };
    Ok(PositionScaling { center, scale })
}

/// Map a point into scaled coordinates.
pub fn scale_point(p: [f64; 3], s: &PositionScaling) -> [f64; 3] {
    [
        (p[0] - s.center[0]) * s.scale + 500.0,
        (p[1] - s.center[1]) * s.scale + 500.0,
        (p[2] - s.center[2]) * s.scale + 500.0,
    ]
}

/// Scale all positions of a sample (features and targets are untouched).
pub fn apply_scaling(sample: &Sample, s: &PositionScaling) -> Sample {
    let mut out = sample.clone();
    for p in out.surface_pos.iter_mut().chain(out.volume_pos.iter_mut()) {
        *p = scale_point(*p, s);
    }
    out
}

/// Label standardization. Magnitude mode divides vectors by one positive
/// scalar (the mean training magnitude), the only vector construction that
/// commutes with rotations; per-axis mode is the non-equivariant baseline
/// convention; scalar mode is a plain z-score.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Standardizer {
    Magnitude { scale: f64 },
    PerAxis { mean: [f64; 3], std: [f64; 3] },
    Scalar { mean: f64, std: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StandardizerMode {
    Magnitude,
    PerAxis,
    Scalar,
}

/// Fit over the concatenated target arrays of the training split.
pub fn fit_standardizer(
    fields: &[&[f64]],
    kind: TargetKind,
    mode: StandardizerMode,
) -> Result<Standardizer, ModelError> {
    match (mode, kind) {
        (StandardizerMode::Magnitude, TargetKind::Vector) => {
            let mut sum = 0.0;
            let mut n = 0usize;
            for data in fields {
                for v in data.chunks_exact(3) {
                    sum += (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
                    n += 1;
                }
            }
            let scale = if n == 0 { 0.0 } else { sum / n as f64 };
            if scale <= 0.0 {
                return Err(ModelError::ZeroScale);
            }
            Ok(Standardizer::Magnitude { scale })
        }
        (StandardizerMode::PerAxis, TargetKind::Vector) => {
            let mut mean = [0.0f64; 3];
            let mut n = 0usize;
            for data in fields {
                for v in data.chunks_exact(3) {
                    for k in 0..3 {
                        mean[k] += v[k];
                    }
                    n += 1;
                }
            }
            if n == 0 {
                return Err(ModelError::ZeroScale);
            }
            for m in mean.iter_mut() {
                *m /= n as f64;
            }
            let mut var = [0.0f64; 3];
            for data in fields {
                for v in data.chunks_exact(3) {
                    for k in 0..3 {
                        var[k] += (v[k] - mean[k]) * (v[k] - mean[k]);
                    }
                }
            }
            let std = std::array::from_fn(|k| (var[k] / n as f64).sqrt().max(1e-12));
            Ok(Standardizer::PerAxis { mean, std })
        }
        (StandardizerMode::Scalar, TargetKind::Scalar) => {
            let mut mean = 0.0;
            let mut n = 0usize;
            for data in fields {
                for v in *data {
                    mean += v;
                    n += 1;
                }
            }
            if n == 0 {
                return Err(ModelError::ZeroScale);
            }
            mean /= n as f64;
            let mut var = 0.0;
            for data in fields {
                for v in *data {
                    var += (v - mean) * (v - mean);
                }
            }
            let std = (var / n as f64).sqrt().max(1e-12);
            Ok(Standardizer::Scalar { mean, std })
        }
        _ => Err(ModelError::ConfigMismatch(format!(
            "standardizer mode {mode:?} does not apply to {kind:?} targets"
        ))),
    }
}

impl Standardizer {
    pub fn apply(&self, data: &[f64]) -> Vec<f64> {
        match self {
            Standardizer::Magnitude { scale } => data.iter().map(|v| v / scale).collect(),
            Standardizer::PerAxis { mean, std } => data
                .chunks_exact(3)
                .flat_map(|v| [(v[0] - mean[0]) / std[0], (v[1] - mean[1]) / std[1], (v[2] - mean[2]) / std[2]])
                .collect(),
            Standardizer::Scalar { mean, std } => data.iter().map(|v| (v - mean) / std).collect(),
        }
    }

    pub fn invert(&self, data: &[f64]) -> Vec<f64> {
        match self {
            Standardizer::Magnitude { scale } => data.iter().map(|v| v * scale).collect(),
            Standardizer::PerAxis { mean, std } => data
                .chunks_exact(3)
                .flat_map(|v| [v[0] * std[0] + mean[0], v[1] * std[1] + mean[1], v[2] * std[2] + mean[2]])
                .collect(),
            Standardizer::Scalar { mean, std } => data.iter().map(|v| v * std + mean).collect(),
        }
    }
}
