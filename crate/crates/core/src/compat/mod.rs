//! Compatible initial data and diagnostics for the intrinsic identities,
//! conserved integrals and dissipative combinations of the system.

mod checks;
mod diagnostics;
mod displacement;

pub use checks::{
    check_conserved, check_intrinsic, check_q1_identity, check_trace_constraint, conserved_integrals, q1_nonlinear_term,
    sigma_diagnostic, sigma_mismatch, z_monitor, ConservationReport, IntrinsicResiduals, SigmaReport, ZMonitor,
    DEFAULT_RESIDUAL_Q,
};
pub use diagnostics::{diagnose, write_diagnostics_csv, DiagnosticsRecord, Monitor, MonitorSet, NORM_KEYS};
pub use displacement::{
    gen_initial_from_displacement, invert_map, DisplacementSpec, MapInverse, Mode, INVERSION_TOLERANCE,
    MAX_DISPLACEMENT_GRADIENT,
};

use thiserror::Error;

use crate::fields::FieldError;
use crate::operators::OperatorError;

#[derive(Debug, Error)]
pub enum CompatError {
    #[error("invalid initial data: {0}")]
    InvalidSpec(String),
    #[error("deformation map may not be invertible: max|∇ψ| ≤ {max_gradient} is not below 0.5")]
    NotInvertible { max_gradient: f64 },
    #[error("map is not a contraction: Lipschitz bound {lipschitz}")]
    NotContraction { lipschitz: f64 },
    #[error("fixed-point inversion stalled after {iterations} iterations (residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },
    #[error("{0} requires a periodic grid")]
    PeriodicOnly(&'static str),
    #[error("invalid state: {0}")]
    InvalidState(String),
    #[error(transparent)]
    Operator(#[from] OperatorError),
    #[error(transparent)]
    Field(#[from] FieldError),
}

/// Determinant of a flattened d×d matrix, d ∈ {2, 3}.
pub(crate) fn det(m: &[f64], d: usize) -> f64 {
    if d == 2 {
        m[0] * m[3] - m[1] * m[2]
    } else {
        m[0] * (m[4] * m[8] - m[5] * m[7]) - m[1] * (m[3] * m[8] - m[5] * m[6]) + m[2] * (m[3] * m[7] - m[4] * m[6])
    }
}
