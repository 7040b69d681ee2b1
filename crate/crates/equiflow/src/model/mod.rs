//! Model assembly: the equivariant anchored-branched surrogate, its
//! non-equivariant twin, parameter storage and checkpoints, position scaling,
//! target standardization, and anchor sampling.

pub mod abgatr;
pub mod checks;
pub mod anchors;
pub mod baseline;
pub mod inputs;
pub mod params;
pub mod scaling;

pub use abgatr::{forward, DropoutCtx, ForwardSpec, ModelConfig, Predictions};
pub use anchors::sample_anchors;
pub use baseline::{baseline_forward, BaselineConfig};
pub use inputs::FeatureSpec;
pub use params::{ParamStore, ParamTensors};
pub use scaling::{
    apply_scaling, compute_position_scaling, fit_standardizer, Standardizer, StandardizerMode,
};

use thiserror::Error;

use crate::data::DataError;
use crate::layers::LayersError;
use crate::tensor::TensorError;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("config mismatch: {0}")]
    ConfigMismatch(String),
    #[error("requested {requested} anchors from {available} tokens")]
    TooManyAnchors { requested: usize, available: usize },
    #[error("pooling radius must be positive, got {0}")]
    NonPositiveRadius(f64),
    #[error("empty dataset")]
    EmptyDataset,
    #[error("standardizer scale is zero")]
    ZeroScale,
    #[error(transparent)]
    Layers(#[from] LayersError),
    #[error(transparent)]
    Tensor(#[from] TensorError),
    #[error(transparent)]
    Data(#[from] DataError),
}
