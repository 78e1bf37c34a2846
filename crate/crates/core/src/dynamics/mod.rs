//! Right-hand sides of the full and perturbation systems, time stepping and
//! the simulation loop.

mod params;
mod rhs;
mod simulate;
mod state;
mod stepper;

pub use params::MaterialParams;
pub use rhs::{rhs_full, rhs_perturb, rhs_sigma, FlowRates};
pub use simulate::{simulate, Simulation};
pub use state::{FlowState, PerturbState};
pub use stepper::{advance, stable_dt, Forcing, Integrator, Scheme, SimState, StepControl, TimeStepperConfig};

use thiserror::Error;

use crate::fields::{FieldError, Grid};
use crate::operators::OperatorError;

#[derive(Debug, Error)]
pub enum DynamicsError {
    #[error("density {value:e} is not positive at node {node} (x = {position:?})")]
    NonPositiveDensity { node: usize, value: f64, position: Vec<f64> },
    #[error("non-finite value after stage {stage} at t = {t} (node {node})")]
    NonFinite { stage: usize, t: f64, node: usize },
    #[error("invalid state: {0}")]
    InvalidState(String),
    #[error("invalid stepper configuration: {0}")]
    InvalidConfig(String),
    #[error("invalid material parameters: {0}")]
    InvalidParams(String),
    #[error(transparent)]
    Operator(#[from] OperatorError),
    #[error(transparent)]
    Field(#[from] FieldError),
}

impl DynamicsError {
    pub(crate) fn non_positive(grid: &Grid, node: usize, value: f64) -> Self {
        let x = grid.position(node);
        DynamicsError::NonPositiveDensity { node, value, position: x[..grid.dim()].to_vec() }
    }

    /// NaN/Inf or a solver breakdown, as opposed to bad input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            DynamicsError::NonFinite { .. }
                | DynamicsError::NonPositiveDensity { .. }
                | DynamicsError::Operator(OperatorError::NotConverged { .. })
        )
    }
}
