//! Periodic lattice fields on `[0, 2π)²` and their spectral calculus.

mod field;
mod grid;
pub mod ops;
mod random;
pub mod snapshot;
pub mod spectral;

pub use field::{sym2_min_eigenvalue, Field, ScalarField, SymTensorField, VectorField};
pub use grid::Grid;
pub use ops::{
    advect, advect_with, curl2, dealias, dealias_vector, divergence, gradient, hessian, l2_norm, laplacian,
    partial, sobolev_norm,
};
pub use random::{random_field, RandomFieldSpec};
pub use snapshot::{read_snapshot, write_snapshot};
pub use spectral::{forward_pair, Spectrum};

#[derive(Debug, thiserror::Error)]
pub enum FieldError {
    #[error("grid size {n} must be a power of two and at least 8")]
    Sizing { n: usize },
    #[error("fields live on different grids")]
    GridMismatch,
    #[error("expected {expected} lattice values, got {got}")]
    Length { expected: usize, got: usize },
    #[error("field contains NaN or infinite values")]
    NonFinite,
    #[error("Sobolev index must be non-negative, got {0}")]
    NegativeSobolevIndex(i32),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("malformed snapshot: {0}")]
    Snapshot(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
