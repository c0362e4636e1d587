//! Exact simulation of a linear-optical layer.

pub mod amplitude;
pub mod circuit;
pub mod fock;
pub mod layer;
pub mod matrix;
pub mod mesh;
pub mod permanent;

pub use amplitude::{amplitude_backends, backend, AmplitudeBackend, BasisPlan, DEFAULT_BACKEND};
pub use circuit::{
    bucket_bounds, modes_and_photons, pool_output, CircuitGradients, CircuitLayout, CircuitSpec,
    ForwardCache, OutputDistribution, PhotonicCircuit,
};
pub use fock::{basis_size, FockBasis, DEFAULT_BASIS_CAP};
pub use layer::photonic_layer;
pub use matrix::{CMatrix, C64};
pub use mesh::MeshLayout;
pub use permanent::permanent;
