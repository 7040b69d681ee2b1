//! equiflow: E(3)-equivariant neural surrogates for toy CFD at desk scale.
//!
//! The crate bundles everything needed to study when equivariance helps a
//! CFD surrogate: a projective-geometric-algebra kernel ([`pga`]), a minimal
//! reverse-mode tensor engine ([`tensor`]), equivariant token layers with
//! geometric anchor attention ([`layers`]), an anchored-branched equivariant
//! model and its non-equivariant twin ([`model`]), analytic flow dataset
//! generators with a binary sample container ([`data`]), training and
//! evaluation loops ([`train`]), dataset variability diagnostics
//! ([`diagnostics`]), and a command-line front end ([`cli`]).
//!
//! Start with the examples: each major capability has a runnable example
//! under `examples/`.

pub mod pga;
pub mod tensor;
pub mod layers;
pub mod data;
pub mod model;
