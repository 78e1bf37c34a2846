use super::DynamicsError;
use crate::fields::{Field, FieldKind, Grid};

/// Unknowns of the full system: density, velocity, deformation gradient.
#[derive(Clone, Debug, PartialEq)]
pub struct FlowState {
    pub rho: Field,
    pub u: Field,
    pub f: Field,
    pub t: f64,
}

/// Perturbation unknowns with `ϱ = 1 + ρ̃`, `F = I + E`.
#[derive(Clone, Debug, PartialEq)]
pub struct PerturbState {
    pub rho_tilde: Field,
    pub u: Field,
    pub e: Field,
    pub t: f64,
}

fn check_shapes(grid: &Grid, parts: [(&Field, FieldKind); 3]) -> Result<(), DynamicsError> {
    for (f, kind) in parts {
        f.expect_kind(kind)?;
        if !f.grid().same_layout(grid) {
            return Err(crate::fields::FieldError::GridMismatch.into());
        }
    }
    Ok(())
}

/// First node where `values[node] <= 0`, with its value.
pub(crate) fn first_non_positive(rho: &Field) -> Option<(usize, f64)> {
    rho.values().iter().enumerate().find(|(_, v)| !(**v > 0.0)).map(|(n, v)| (n, *v))
}

impl FlowState {
    /// `ϱ = 1`, `u = 0`, `F = I`.
    pub fn equilibrium(grid: Grid) -> Self {
        Self {
            rho: Field::constant(grid, FieldKind::Scalar, &[1.0]).expect("scalar"),
            u: Field::zeros(grid, FieldKind::Vector),
            f: Field::identity(grid),
            t: 0.0,
        }
    }

    pub fn grid(&self) -> &Grid {
        self.rho.grid()
    }

    /// Shapes agree, density is positive, velocity vanishes on box walls.
    pub fn validate(&self) -> Result<(), DynamicsError> {
        let grid = *self.grid();
        check_shapes(&grid, [(&self.rho, FieldKind::Scalar), (&self.u, FieldKind::Vector), (&self.f, FieldKind::Tensor)])?;
        if let Some((node, value)) = first_non_positive(&self.rho) {
            return Err(DynamicsError::non_positive(&grid, node, value));
        }
        if !grid.is_periodic() {
            for node in 0..grid.node_count() {
                if grid.on_boundary(node) && self.u.node(node).iter().any(|v| *v != 0.0) {
                    return Err(DynamicsError::InvalidState(format!(
                        "velocity is nonzero on wall node {node}"
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn to_perturb(&self) -> PerturbState {
        PerturbState {
            rho_tilde: self.rho.map(|r| r - 1.0),
            u: self.u.clone(),
            e: self.f.minus(&Field::identity(*self.grid())).expect("same grid"),
            t: self.t,
        }
    }
}

impl PerturbState {
    pub fn zero(grid: Grid) -> Self {
        FlowState::equilibrium(grid).to_perturb()
    }

    pub fn grid(&self) -> &Grid {
        self.rho_tilde.grid()
    }

    pub fn validate(&self) -> Result<(), DynamicsError> {
        self.to_full().validate()
    }

    pub fn to_full(&self) -> FlowState {
        FlowState {
            rho: self.rho_tilde.map(|r| 1.0 + r),
            u: self.u.clone(),
            f: self.e.plus(1.0, &Field::identity(*self.grid())).expect("same grid"),
            t: self.t,
        }
    }
}
