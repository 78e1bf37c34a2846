//! Manufactured solutions: closed-form fields, their exact forcing and
//! grid-refinement studies of the full solver.

mod cases;
pub mod jet;
mod study;

pub use cases::{forcing_fields, mms_forcing, CaseKind, ManufacturedCase, CASE_EPSILON};
pub use study::{convergence_study, ConvergenceReport, DtPolicy, ErrorEntry, StudyConfig, EXACT_FLOOR, FIELDS};

use thiserror::Error;

use crate::dynamics::DynamicsError;
use crate::fields::FieldError;

#[derive(Debug, Error)]
pub enum MmsError {
    #[error("unknown manufactured case {0:?}")]
    UnknownCase(String),
    #[error("invalid convergence study: {0}")]
    InvalidStudy(String),
    #[error(transparent)]
    Dynamics(#[from] DynamicsError),
    #[error(transparent)]
    Field(#[from] FieldError),
}
