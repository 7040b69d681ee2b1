//! Named parameter storage shared by both models: deterministic seeded
//! initialization, per-forward leaf tensors, gradient collection, and the
//! NSF-framed checkpoint container.

use std::collections::HashMap;
use std::path::Path;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::data::nsf::{NsfData, NsfField, NsfFile};
use crate::data::DataError;
use crate::tensor::{GradStore, Real, Tensor};

/// All learnable weights, addressable by name in registration order.
pub struct ParamStore<T: Real> {
    entries: Vec<ParamEntry<T>>,
    index: HashMap<String, usize>,
    seed: u64,
}

struct ParamEntry<T: Real> {
    name: String,
    shape: Vec<usize>,
    data: Arc<Vec<T>>,
}

/// How a parameter tensor is filled at registration time.
#[derive(Debug, Clone, Copy)]
pub enum Init {
    Zeros,
    Constant(f64),
    /// Uniform(-bound, bound) with bound = sqrt(3 / fan), fan = given value.
    UniformFan(usize),
    /// Uniform(-a, a).
    Uniform(f64),
}

fn seed_for(name: &str, root: u64) -> u64 {
    // FNV-1a over the name, mixed with the root seed
    let mut h: u64 = 0xcbf29ce484222325 ^ root.wrapping_mul(0x9e3779b97f4a7c15);
    for b in name.as_bytes() {
        h ^= *b as u64;
        h = h.wrapping_mul(0x100000001b3);
    }
    h
}

impl<T: Real> ParamStore<T> {
    pub fn new(seed: u64) -> Self {
        ParamStore { entries: Vec::new(), index: HashMap::new(), seed }
    }

    /// Register a tensor; the initial values depend only on (seed, name).
    pub fn register(&mut self, name: &str, shape: &[usize], init: Init) {
        assert!(!self.index.contains_key(name), "duplicate parameter {name}");
        let n: usize = shape.iter().product();
        let mut rng = ChaCha8Rng::seed_from_u64(seed_for(name, self.seed));
        let data: Vec<T> = match init {
            Init::Zeros => vec![T::zero(); n],
            Init::Constant(c) => vec![T::from_f64(c); n],
            Init::UniformFan(fan) => {
                let bound = (3.0 / fan.max(1) as f64).sqrt();
                (0..n).map(|_| T::from_f64(rng.gen_range(-bound..bound))).collect()
            }
            Init::Uniform(a) => (0..n).map(|_| T::from_f64(rng.gen_range(-a..a))).collect(),
        };
        self.index.insert(name.to_string(), self.entries.len());
        self.entries.push(ParamEntry {
            name: name.to_string(),
            shape: shape.to_vec(),
            data: Arc::new(data),
        });
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.entries.iter().map(|e| e.name.as_str())
    }

    pub fn shape(&self, name: &str) -> &[usize] {
        &self.entries[self.index[name]].shape
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn total_parameters(&self) -> usize {
        self.entries.iter().map(|e| e.data.len()).sum()
    }

    pub fn values(&self, name: &str) -> &[T] {
        &self.entries[self.index[name]].data
    }

    /// Replace a tensor's contents (optimizer update).
    pub fn set_values(&mut self, name: &str, data: Vec<T>) {
        let entry = &mut self.entries[self.index[name]];
        assert_eq!(entry.data.len(), data.len());
        entry.data = Arc::new(data);
    }

    /// Leaf tensors for one forward pass, sharing the stored buffers.
    pub fn leaves(&self, requires_grad: bool) -> ParamTensors<T> {
        let mut map = HashMap::with_capacity(self.entries.len());
        for e in &self.entries {
            map.insert(
                e.name.clone(),
                Tensor::leaf_shared(&e.shape, Arc::clone(&e.data), requires_grad),
            );
        }
        ParamTensors { map }
    }

    /// Leaves with one tensor substituted by an external probe (used by
    /// whole-model gradient checks).
    pub fn leaves_with_override(&self, name: &str, probe: &Tensor<T>) -> ParamTensors<T> {
        let mut tensors = self.leaves(false);
        assert!(tensors.map.contains_key(name), "unknown parameter {name}");
        tensors.map.insert(name.to_string(), probe.clone());
        ParamTensors { map: tensors.map }
    }

    /// Gradients per parameter, in registration order (zeros for untouched).
    pub fn gradients(&self, tensors: &ParamTensors<T>, grads: &GradStore<T>) -> Vec<Vec<T>> {
        self.entries.iter().map(|e| grads.grad_or_zero(tensors.get(&e.name))).collect()
    }

    /// Apply an update produced in registration order.
    pub fn apply_update(&mut self, new_values: Vec<Vec<T>>) {
        assert_eq!(new_values.len(), self.entries.len());
        for (e, v) in self.entries.iter_mut().zip(new_values) {
            assert_eq!(e.data.len(), v.len());
            e.data = Arc::new(v);
        }
    }

    pub fn iter_values(&self) -> impl Iterator<Item = (&str, &[T])> {
        self.entries.iter().map(|e| (e.name.as_str(), e.data.as_slice()))
    }
}

/// Leaf tensors of one forward pass keyed by parameter name.
pub struct ParamTensors<T: Real> {
    map: HashMap<String, Tensor<T>>,
}

impl<T: Real> ParamTensors<T> {
    pub fn get(&self, name: &str) -> &Tensor<T> {
        self.map.get(name).unwrap_or_else(|| panic!("unknown parameter {name}"))
    }
}

/// Serialize parameters plus optional optimizer momentum into an NSF file.
pub fn checkpoint_to_nsf<T: Real>(
    params: &ParamStore<T>,
    momentum: Option<&[Vec<T>]>,
    meta: serde_json::Value,
) -> NsfFile {
    let mut fields = Vec::new();
    for (i, (name, values)) in params.iter_values().enumerate() {
        fields.push(NsfField {
            name: format!("param/{name}"),
            shape: params.entries[i].shape.clone(),
            data: NsfData::F64(values.iter().map(|v| v.as_f64()).collect()),
        });
    }
    if let Some(m) = momentum {
        for (i, values) in m.iter().enumerate() {
            fields.push(NsfField {
                name: format!("opt/m/{}", params.entries[i].name),
                shape: params.entries[i].shape.clone(),
                data: NsfData::F64(values.iter().map(|v| v.as_f64()).collect()),
            });
        }
    }
    NsfFile { fields, meta }
}

/// Load values (and momentum, when present) back into a registered store.
pub fn checkpoint_from_nsf<T: Real>(
    file: &NsfFile,
    params: &mut ParamStore<T>,
) -> Result<Option<Vec<Vec<T>>>, DataError> {
    for name in params.names().map(str::to_string).collect::<Vec<_>>() {
        let field = file
            .field(&format!("param/{name}"))
            .ok_or_else(|| DataError::MissingField(format!("param/{name}")))?;
        let values: Vec<T> = match &field.data {
            NsfData::F64(v) => v.iter().map(|&x| T::from_f64(x)).collect(),
            NsfData::F32(v) => v.iter().map(|&x| T::from_f64(x as f64)).collect(),
            NsfData::I64(_) => {
                return Err(DataError::UnknownDtype("i64 parameter".into()));
            }
        };
        params.set_values(&name, values);
    }
    let mut momentum = Vec::new();
    for name in params.names().map(str::to_string).collect::<Vec<_>>() {
        match file.field(&format!("opt/m/{name}")) {
            Some(field) => {
                let values: Vec<T> = match &field.data {
                    NsfData::F64(v) => v.iter().map(|&x| T::from_f64(x)).collect(),
                    NsfData::F32(v) => v.iter().map(|&x| T::from_f64(x as f64)).collect(),
                    NsfData::I64(_) => {
                        return Err(DataError::UnknownDtype("i64 momentum".into()));
                    }
                };
                momentum.push(values);
            }
            None => return Ok(None),
        }
    }
    Ok(Some(momentum))
}

/// Write a checkpoint file.
pub fn save_checkpoint<T: Real>(
    path: &Path,
    params: &ParamStore<T>,
    momentum: Option<&[Vec<T>]>,
    meta: serde_json::Value,
) -> Result<(), DataError> {
    checkpoint_to_nsf(params, momentum, meta).write(path)
}

/// Read a checkpoint file (meta plus raw container).
pub fn read_checkpoint(path: &Path) -> Result<NsfFile, DataError> {
    NsfFile::read(path)
}
