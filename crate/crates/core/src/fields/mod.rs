//! Structured grids, field containers, quadrature and discrete norms.

mod field;
mod grid;
pub mod io;
mod norms;

pub use field::{Field, FieldKind};
pub use grid::{Boundary, Grid, MIN_CELLS};
pub use norms::{
    integrate, integrate_components, linf_norm, lq_norm, sobolev_norm, spacetime_norm, w1q_norm, w2q_norm,
    NormSpec,
};
pub(crate) use norms::lq_of_magnitudes;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum FieldError {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("expected {expected} values, found {found}")]
    Shape { expected: usize, found: usize },
    #[error("fields live on different grids")]
    GridMismatch,
    #[error("expected a {} field, found a {} field", .expected.name(), .found.name())]
    KindMismatch { expected: FieldKind, found: FieldKind },
    #[error("exponent {0} is out of range")]
    InvalidExponent(f64),
    #[error("invalid norm: {0}")]
    InvalidNorm(String),
    #[error("invalid time samples: {0}")]
    InvalidSamples(String),
    #[error("malformed field data: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
