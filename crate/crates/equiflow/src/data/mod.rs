//! Analytic toy CFD dataset generators with controllable alignment, rigid
//! motion augmentation, and the on-disk NSF sample container.
//!
//! Two families stand in for the external-flow and internal-flow regimes:
//! potential flow past a sphere (aerodynamics stand-in, canonical inflow
//! along +x) and Poiseuille flow through a tube (hemodynamics stand-in,
//! orientation uniform on the sphere). Ground truth is exact, so fidelity
//! checks reduce to finite-difference probes of the generated fields.

pub mod flow;
pub mod mesh;
pub mod motion;
pub mod nsf;

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::pga::RigidMotion;
use nsf::{NsfData, NsfField, NsfFile};

#[derive(Debug, Error)]
pub enum DataError {
    #[error("bad magic {0:?}")]
    BadMagic(Vec<u8>),
    #[error("unsupported container version {0}")]
    VersionUnsupported(u32),
    #[error("truncated payload: needed {needed} bytes, got {got}")]
    TruncatedPayload { needed: usize, got: usize },
    #[error("shape mismatch for {what}: expected {expected}, got {got}")]
    ShapeMismatch { what: String, expected: usize, got: usize },
    #[error("unknown dtype {0}")]
    UnknownDtype(String),
    #[error("rotation angle {0} outside [0, 180] degrees")]
    AngleOutOfRange(f64),
    #[error("empty dataset")]
    EmptyDataset,
    #[error("missing field {0}")]
    MissingField(String),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TargetKind {
    Scalar,
    Vector,
}

impl TargetKind {
    pub fn dims(&self) -> usize {
        match self {
            TargetKind::Scalar => 1,
            TargetKind::Vector => 3,
        }
    }
}

/// One named target field over a token set; data is [N] or [N,3] row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct TargetField {
    pub name: String,
    pub kind: TargetKind,
    pub data: Vec<f64>,
}

/// One simulation case: positions, input features, targets, connectivity.
///
/// Vector-valued inputs (normals, flow priors) and vector targets rotate with
/// the sample under [`apply_rigid_motion`]; scalar features and scalar
/// targets are invariant.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub surface_pos: Vec<[f64; 3]>,
    pub volume_pos: Vec<[f64; 3]>,
    pub surface_vectors: Vec<(String, Vec<[f64; 3]>)>,
    pub volume_vectors: Vec<(String, Vec<[f64; 3]>)>,
    pub surface_scalars: Vec<(String, Vec<f64>)>,
    pub volume_scalars: Vec<(String, Vec<f64>)>,
    pub surface_target: TargetField,
    pub volume_target: TargetField,
    pub triangles: Vec<[usize; 3]>,
    pub meta: serde_json::Value,
}

impl Sample {
    pub fn n_surface(&self) -> usize {
        self.surface_pos.len()
    }

    pub fn n_volume(&self) -> usize {
        self.volume_pos.len()
    }
}

/// Apply a rigid motion: positions x -> R x + t, vector fields v -> R v,
/// scalar fields and connectivity unchanged.
pub fn apply_rigid_motion(sample: &Sample, m: &RigidMotion) -> Sample {
    let mut out = sample.clone();
    for p in out.surface_pos.iter_mut().chain(out.volume_pos.iter_mut()) {
        *p = m.apply(*p);
    }
    for (_, vecs) in out.surface_vectors.iter_mut().chain(out.volume_vectors.iter_mut()) {
        for v in vecs.iter_mut() {
            *v = m.apply_vector(*v);
        }
    }
    for target in [&mut out.surface_target, &mut out.volume_target] {
        if target.kind == TargetKind::Vector {
            for chunk in target.data.chunks_mut(3) {
                let v = m.apply_vector([chunk[0], chunk[1], chunk[2]]);
                chunk.copy_from_slice(&v);
            }
        }
    }
    out
}

fn flatten3(v: &[[f64; 3]]) -> Vec<f64> {
    v.iter().flat_map(|p| p.iter().copied()).collect()
}

fn unflatten3(v: &[f64]) -> Vec<[f64; 3]> {
    v.chunks_exact(3).map(|c| [c[0], c[1], c[2]]).collect()
}

impl Sample {
    /// Serialize into the NSF container with the documented field names.
    pub fn to_nsf(&self) -> NsfFile {
        let mut fields = Vec::new();
        let push3 = |fields: &mut Vec<NsfField>, name: String, v: &[[f64; 3]]| {
            fields.push(NsfField {
                name,
                shape: vec![v.len(), 3],
                data: NsfData::F64(flatten3(v)),
            });
        };
        push3(&mut fields, "surface_pos".into(), &self.surface_pos);
        push3(&mut fields, "volume_pos".into(), &self.volume_pos);
        for (name, v) in &self.surface_vectors {
            push3(&mut fields, format!("surface_vec/{name}"), v);
        }
        for (name, v) in &self.volume_vectors {
            push3(&mut fields, format!("volume_vec/{name}"), v);
        }
        for (name, v) in &self.surface_scalars {
            fields.push(NsfField {
                name: format!("surface_scalar/{name}"),
                shape: vec![v.len()],
                data: NsfData::F64(v.clone()),
            });
        }
        for (name, v) in &self.volume_scalars {
            fields.push(NsfField {
                name: format!("volume_scalar/{name}"),
                shape: vec![v.len()],
                data: NsfData::F64(v.clone()),
            });
        }
        for (prefix, t, n) in [
            ("surface_target", &self.surface_target, self.n_surface()),
            ("volume_target", &self.volume_target, self.n_volume()),
        ] {
            let shape = match t.kind {
                TargetKind::Scalar => vec![n],
                TargetKind::Vector => vec![n, 3],
            };
            fields.push(NsfField {
                name: format!("{prefix}/{}", t.name),
                shape,
                data: NsfData::F64(t.data.clone()),
            });
        }
        fields.push(NsfField {
            name: "triangles".into(),
            shape: vec![self.triangles.len(), 3],
            data: NsfData::I64(
                self.triangles.iter().flat_map(|t| t.iter().map(|&i| i as i64)).collect(),
            ),
        });
        NsfFile { fields, meta: self.meta.clone() }
    }

    pub fn from_nsf(file: &NsfFile) -> Result<Sample, DataError> {
        let get = |name: &str| -> Result<&NsfField, DataError> {
            file.field(name).ok_or_else(|| DataError::MissingField(name.to_string()))
        };
        let f64s = |f: &NsfField| -> Vec<f64> {
            match &f.data {
                NsfData::F64(v) => v.clone(),
                NsfData::F32(v) => v.iter().map(|&x| x as f64).collect(),
                NsfData::I64(v) => v.iter().map(|&x| x as f64).collect(),
            }
        };
        let surface_pos = unflatten3(&f64s(get("surface_pos")?));
        let volume_pos = unflatten3(&f64s(get("volume_pos")?));
        let mut surface_vectors = Vec::new();
        let mut volume_vectors = Vec::new();
        let mut surface_scalars = Vec::new();
        let mut volume_scalars = Vec::new();
        let mut surface_target = None;
        let mut volume_target = None;
        let mut triangles = Vec::new();
        for f in &file.fields {
            if let Some(name) = f.name.strip_prefix("surface_vec/") {
                surface_vectors.push((name.to_string(), unflatten3(&f64s(f))));
            } else if let Some(name) = f.name.strip_prefix("volume_vec/") {
                volume_vectors.push((name.to_string(), unflatten3(&f64s(f))));
            } else if let Some(name) = f.name.strip_prefix("surface_scalar/") {
                surface_scalars.push((name.to_string(), f64s(f)));
            } else if let Some(name) = f.name.strip_prefix("volume_scalar/") {
                volume_scalars.push((name.to_string(), f64s(f)));
            } else if let Some(name) = f.name.strip_prefix("surface_target/") {
                let kind = if f.shape.len() == 2 { TargetKind::Vector } else { TargetKind::Scalar };
                surface_target = Some(TargetField { name: name.to_string(), kind, data: f64s(f) });
            } else if let Some(name) = f.name.strip_prefix("volume_target/") {
                let kind = if f.shape.len() == 2 { TargetKind::Vector } else { TargetKind::Scalar };
                volume_target = Some(TargetField { name: name.to_string(), kind, data: f64s(f) });
            } else if f.name == "triangles" {
                if let NsfData::I64(v) = &f.data {
                    triangles =
                        v.chunks_exact(3).map(|c| [c[0] as usize, c[1] as usize, c[2] as usize]).collect();
                }
            }
        }
        Ok(Sample {
            surface_pos,
            volume_pos,
            surface_vectors,
            volume_vectors,
            surface_scalars,
            volume_scalars,
            surface_target: surface_target
                .ok_or_else(|| DataError::MissingField("surface_target/*".into()))?,
            volume_target: volume_target
                .ok_or_else(|| DataError::MissingField("volume_target/*".into()))?,
            triangles,
            meta: file.meta.clone(),
        })
    }
}

/// Read one sample from disk.
pub fn nsf_read(path: &Path) -> Result<Sample, DataError> {
    Sample::from_nsf(&NsfFile::read(path)?)
}

/// Write one sample to disk.
pub fn nsf_write(path: &Path, sample: &Sample) -> Result<(), DataError> {
    sample.to_nsf().write(path)
}

/// Dataset-wide position scaling constants (see the model's scaling op).
#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq)]
pub struct PositionScaling {
    pub center: [f64; 3],
    pub scale: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub kind: String,
    pub alignment: String,
    pub seed: u64,
    /// split name -> sample count, in generation order
    pub splits: Vec<(String, usize)>,
    pub scaling: PositionScaling,
}

impl DatasetManifest {
    pub fn save(&self, root: &Path) -> Result<(), DataError> {
        let path = root.join("manifest.json");
        std::fs::write(path, serde_json::to_vec_pretty(self)?)?;
        Ok(())
    }

    pub fn load(root: &Path) -> Result<DatasetManifest, DataError> {
        let bytes = std::fs::read(root.join("manifest.json"))?;
        Ok(serde_json::from_slice(&bytes)?)
    }
}

pub fn sample_path(root: &Path, split: &str, index: usize) -> PathBuf {
    root.join(split).join(format!("sample_{index:06}.nsf"))
}

/// Load every sample of one split, in index order.
pub fn load_split(root: &Path, split: &str) -> Result<Vec<Sample>, DataError> {
    let manifest = DatasetManifest::load(root)?;
    let count = manifest
        .splits
        .iter()
        .find(|(name, _)| name == split)
        .map(|(_, n)| *n)
        .ok_or_else(|| DataError::MissingField(format!("split {split}")))?;
    (0..count).map(|i| nsf_read(&sample_path(root, split, i))).collect()
}

#[cfg(test)]
mod tests;
