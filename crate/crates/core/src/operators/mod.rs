//! Discrete differential calculus and elliptic solvers.
//!
//! Explicit operators ([`diff_ops`] and friends) are second-order finite
//! differences. Elliptic solves come in two realizations: an exact Fourier
//! multiplier on periodic grids ([`Realization::Spectral`]) and a
//! preconditioned conjugate-gradient solve of the compact finite-difference
//! operator ([`Realization::Iterative`]), which also handles the no-slip box.

mod cg;
pub(crate) mod spectral;
pub mod stencil;

use thiserror::Error;

use crate::dynamics::MaterialParams;
use crate::fields::{Field, FieldError, FieldKind, Grid};
use spectral::{invert_small, norm_sq, outer, Spectral};

pub use stencil::{partial, second_partial};

#[derive(Debug, Error)]
pub enum OperatorError {
    #[error("{op} is not defined for a {} field in {dim}D", .kind.name())]
    RankMismatch { op: &'static str, kind: FieldKind, dim: usize },
    #[error("input is not mean-zero: mean {mean:e} exceeds {tolerance:e}")]
    NotMeanZero { mean: f64, tolerance: f64 },
    #[error("{0} requires a periodic grid")]
    PeriodicOnly(&'static str),
    #[error("solver did not converge: relative residual {residual:e} after {iterations} iterations")]
    NotConverged { iterations: usize, residual: f64, history: Vec<f64> },
    #[error("ellipticity violated: {0}")]
    Ellipticity(String),
    #[error("invalid solver options: {0}")]
    InvalidOptions(String),
    #[error(transparent)]
    Field(#[from] FieldError),
}

/// Explicit finite-difference operator selector for [`diff_ops`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DiffOp {
    Grad,
    DivVec,
    DivTensor,
    Curl,
    Laplacian,
}

/// Index layout of derivative tensors used throughout the crate.
///
/// Only one convention is supported; the type documents it and exposes the
/// contraction rule for `(∇u F)`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct DerivativeConvention;

impl DerivativeConvention {
    /// `(∇u)_{ij} = ∂u_i/∂x_j`.
    pub const GRAD_VECTOR: &'static str = "(grad u)_ij = d u_i / d x_j";
    /// `(div T)_i = ∂_j T_{ij}`.
    pub const DIV_TENSOR: &'static str = "(div T)_i = d_j T_ij";

    /// `(∇u F)_{ij} = (∇u)_{ik} F_{kj}` for flattened d×d tensors.
    pub fn grad_times(grad_u: &[f64], f: &[f64], d: usize, out: &mut [f64]) {
        for i in 0..d {
            for j in 0..d {
                out[i * d + j] = (0..d).map(|k| grad_u[i * d + k] * f[k * d + j]).sum();
            }
        }
    }
}

/// Apply one explicit operator.
///
/// * `Grad`: scalar → vector, vector → tensor.
/// * `DivVec`: vector → scalar. `DivTensor`: tensor → vector.
/// * `Curl`: 3D vector → vector, 2D vector → scalar; on tensors the curl of
///   each row (3D → tensor, 2D → vector).
/// * `Laplacian`: any rank, componentwise, compact stencil.
pub fn diff_ops(f: &Field, which: DiffOp) -> Result<Field, OperatorError> {
    let d = f.dim();
    let mismatch = |op| OperatorError::RankMismatch { op, kind: f.kind(), dim: d };
    match (which, f.kind()) {
        (DiffOp::Grad, FieldKind::Scalar | FieldKind::Vector) => Ok(stencil::gradient_raw(f)),
        (DiffOp::Grad, _) => Err(mismatch("Grad")),
        (DiffOp::DivVec, FieldKind::Vector) => Ok(stencil::divergence_raw(f)),
        (DiffOp::DivVec, _) => Err(mismatch("DivVec")),
        (DiffOp::DivTensor, FieldKind::Tensor) => Ok(stencil::divergence_raw(f)),
        (DiffOp::DivTensor, _) => Err(mismatch("DivTensor")),
        (DiffOp::Curl, FieldKind::Vector | FieldKind::Tensor) => Ok(curl(f)),
        (DiffOp::Curl, _) => Err(mismatch("Curl")),
        (DiffOp::Laplacian, _) => Ok(stencil::laplacian_raw(f)),
    }
}

pub fn gradient(f: &Field) -> Result<Field, OperatorError> {
    diff_ops(f, DiffOp::Grad)
}

pub fn divergence(u: &Field) -> Result<Field, OperatorError> {
    diff_ops(u, DiffOp::DivVec)
}

pub fn div_tensor(t: &Field) -> Result<Field, OperatorError> {
    diff_ops(t, DiffOp::DivTensor)
}

pub fn laplacian(f: &Field) -> Field {
    stencil::laplacian_raw(f)
}

fn curl(f: &Field) -> Field {
    let grid = *f.grid();
    let d = grid.dim();
    let rows = if f.kind() == FieldKind::Tensor { d } else { 1 };
    let row_width = d;
    // Partial derivatives of every component along every axis.
    let partials: Vec<Field> = (0..d).map(|a| stencil::partial(f, a)).collect();
    let per_row = if d == 3 { 3 } else { 1 };
    let kind = match (f.kind(), d) {
        (FieldKind::Vector, 3) => FieldKind::Vector,
        (FieldKind::Vector, _) => FieldKind::Scalar,
        (_, 3) => FieldKind::Tensor,
        _ => FieldKind::Vector,
    };
    let mut out = Field::zeros(grid, kind);
    let nc = f.components();
    let width = rows * per_row;
    for node in 0..grid.node_count() {
        let o = out.node_mut(node);
        for r in 0..rows {
            let c = |i: usize, a: usize| partials[a].values()[node * nc + r * row_width + i];
            if d == 3 {
                o[r * 3] = c(2, 1) - c(1, 2);
                o[r * 3 + 1] = c(0, 2) - c(2, 0);
                o[r * 3 + 2] = c(1, 0) - c(0, 1);
            } else {
                o[r] = c(1, 0) - c(0, 1);
            }
        }
        debug_assert_eq!(o.len(), width);
    }
    out
}

/// `μΔu + (μ+λ)∇div u`, finite differences, compact second derivatives.
pub fn viscous_operator(u: &Field, params: &MaterialParams) -> Result<Field, OperatorError> {
    u.expect_kind(FieldKind::Vector)?;
    Ok(stencil::viscous_raw(u, params.mu, params.lambda))
}

/// Which elliptic realization to use.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Realization {
    /// Exact Fourier symbol; periodic grids only.
    Spectral,
    /// Conjugate gradients on the compact finite-difference operator.
    Iterative,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EllipticSolveOptions {
    /// Relative residual target.
    pub tolerance: f64,
    /// `None` selects `10 ×` the number of unknowns.
    pub max_iterations: Option<usize>,
    pub realization: Realization,
}

impl EllipticSolveOptions {
    pub const DEFAULT_TOLERANCE: f64 = 1e-10;

    /// Spectral on periodic grids, iterative on boxes.
    pub fn default_for(grid: &Grid) -> Self {
        Self {
            tolerance: Self::DEFAULT_TOLERANCE,
            max_iterations: None,
            realization: if grid.is_periodic() { Realization::Spectral } else { Realization::Iterative },
        }
    }

    pub fn iterative() -> Self {
        Self { tolerance: Self::DEFAULT_TOLERANCE, max_iterations: None, realization: Realization::Iterative }
    }

    pub fn validate(&self, grid: &Grid) -> Result<(), OperatorError> {
        if !(self.tolerance > 0.0 && self.tolerance <= 1e-2) {
            return Err(OperatorError::InvalidOptions(format!("tolerance {} outside (0, 1e-2]", self.tolerance)));
        }
        if self.max_iterations == Some(0) {
            return Err(OperatorError::InvalidOptions("max_iterations must be positive".into()));
        }
        if self.realization == Realization::Spectral && !grid.is_periodic() {
            return Err(OperatorError::PeriodicOnly("the spectral realization"));
        }
        Ok(())
    }

    fn iteration_cap(&self, unknowns: usize) -> usize {
        self.max_iterations.unwrap_or(10 * unknowns)
    }
}

/// Result of an elliptic solve.
#[derive(Clone, Debug)]
pub struct SolveOutcome {
    pub field: Field,
    /// Zero for spectral solves.
    pub iterations: usize,
    /// Final relative residual (zero for spectral solves).
    pub relative_residual: f64,
}

fn spectral_outcome(field: Field) -> SolveOutcome {
    SolveOutcome { field, iterations: 0, relative_residual: 0.0 }
}

/// Componentwise mean-zero check against `1e-10 ‖f‖₂`.
fn require_mean_zero(f: &Field) -> Result<(), OperatorError> {
    let tolerance = 1e-10 * crate::fields::lq_norm(f, 2.0)?;
    for mean in f.mean() {
        if mean.abs() > tolerance {
            return Err(OperatorError::NotMeanZero { mean, tolerance });
        }
    }
    Ok(())
}

/// Subspace projector for CG: remove per-component means (torus) or clear
/// wall values (box).
fn projector(grid: Grid, nc: usize) -> impl Fn(&mut [f64]) {
    move |v: &mut [f64]| {
        if grid.is_periodic() {
            let n = grid.node_count() as f64;
            for c in 0..nc {
                let mean: f64 = v.iter().skip(c).step_by(nc).sum::<f64>() / n;
                v.iter_mut().skip(c).step_by(nc).for_each(|x| *x -= mean);
            }
        } else {
            for (node, chunk) in v.chunks_mut(nc).enumerate() {
                if grid.on_boundary(node) {
                    chunk.iter_mut().for_each(|x| *x = 0.0);
                }
            }
        }
    }
}

fn run_cg(
    grid: Grid,
    kind: FieldKind,
    rhs: &Field,
    apply: impl Fn(&Field) -> Field,
    diag: Vec<f64>,
    opts: &EllipticSolveOptions,
) -> Result<SolveOutcome, OperatorError> {
    let nc = kind.components(grid.dim());
    let project = projector(grid, nc);
    let apply_flat = |v: &[f64]| -> Vec<f64> {
        let f = Field::from_vec(grid, kind, v.to_vec()).expect("shape preserved");
        let mut out = apply(&f).into_values();
        project(&mut out);
        out
    };
    let res = cg::pcg(apply_flat, rhs.values(), &diag, &project, opts.tolerance, opts.iteration_cap(rhs.values().len()));
    let residual = *res.history.last().unwrap_or(&0.0);
    if !res.converged {
        return Err(OperatorError::NotConverged { iterations: res.iterations, residual, history: res.history });
    }
    Ok(SolveOutcome {
        field: Field::from_vec(grid, kind, res.x)?,
        iterations: res.iterations,
        relative_residual: residual,
    })
}

/// Diagonal of the compact operator `−s μ Δ − s (μ+λ) ∇_c div + shift` at
/// each unknown, used for Jacobi preconditioning.
fn lame_diagonal(grid: &Grid, mu: f64, lambda: f64, scale: f64, shift: f64) -> Vec<f64> {
    let d = grid.dim();
    let mut diag = vec![1.0; grid.node_count() * d];
    for node in 0..grid.node_count() {
        if grid.on_boundary(node) {
            continue;
        }
        let lap: f64 = (0..d).map(|a| 2.0 / grid.spacing(a).powi(2)).sum();
        for i in 0..d {
            let own = 2.0 / grid.spacing(i).powi(2);
            diag[node * d + i] = shift + scale * (mu * lap + (mu + lambda) * own);
        }
    }
    diag
}

/// Solve `Δg = f`.
///
/// Periodic grids require mean-zero input and return a mean-zero solution;
/// the box realization imposes `g = 0` on the walls.
pub fn inv_laplacian(f: &Field, opts: &EllipticSolveOptions) -> Result<SolveOutcome, OperatorError> {
    let grid = *f.grid();
    opts.validate(&grid)?;
    if grid.is_periodic() {
        require_mean_zero(f)?;
    }
    match opts.realization {
        Realization::Spectral => {
            let s = Spectral::new(&grid);
            Ok(spectral_outcome(s.apply_scalar_symbol(f, |k, _| {
                let k2 = norm_sq(k);
                if k2 == 0.0 {
                    0.0
                } else {
                    -1.0 / k2
                }
            })))
        }
        Realization::Iterative => {
            // Solve (−Δ) g = −f, SPD on the solution subspace.
            let mut rhs = f.scaled(-1.0);
            projector(grid, f.components())(rhs.values_mut());
            let d = grid.dim();
            let diag_val: f64 = (0..d).map(|a| 2.0 / grid.spacing(a).powi(2)).sum();
            let diag = vec![diag_val; f.values().len()];
            run_cg(grid, f.kind(), &rhs, |g| stencil::laplacian_raw(g).scaled(-1.0), diag, opts)
        }
    }
}

/// Laplacian matching a realization: the exact symbol `−|k|²` for
/// [`Realization::Spectral`], the compact stencil otherwise.
pub fn laplacian_with(f: &Field, realization: Realization) -> Result<Field, OperatorError> {
    match realization {
        Realization::Spectral => {
            if !f.grid().is_periodic() {
                return Err(OperatorError::PeriodicOnly("the spectral Laplacian"));
            }
            Ok(Spectral::new(f.grid()).apply_scalar_symbol(f, |k, _| -norm_sq(k)))
        }
        Realization::Iterative => Ok(stencil::laplacian_raw(f)),
    }
}

/// Riesz operator `R_ij = Δ⁻¹ ∂_i ∂_j` (0-based axes), Fourier symbol
/// `k_i k_j / |k|²`, mean mode mapped to zero.
pub fn riesz(i: usize, j: usize, f: &Field) -> Result<Field, OperatorError> {
    let grid = f.grid();
    if !grid.is_periodic() {
        return Err(OperatorError::PeriodicOnly("the Riesz operator"));
    }
    f.expect_kind(FieldKind::Scalar)?;
    let d = grid.dim();
    if i >= d || j >= d {
        return Err(OperatorError::RankMismatch { op: "riesz axis", kind: FieldKind::Scalar, dim: d });
    }
    Ok(Spectral::new(grid).apply_scalar_symbol(f, |k, ko| {
        let k2 = norm_sq(k);
        if k2 == 0.0 {
            0.0
        } else {
            outer(k, ko, i, j) / k2
        }
    }))
}

/// Symbol of `−μΔ − (μ+λ)∇div` scaled by `scale`, plus `shift · I`.
fn lame_symbol(k: &[f64; 3], ko: &[f64; 3], d: usize, mu: f64, lambda: f64, scale: f64, shift: f64) -> [[f64; 3]; 3] {
    let k2 = norm_sq(k);
    let mut m = [[0.0; 3]; 3];
    for a in 0..d {
        for b in 0..d {
            m[a][b] = scale * (mu + lambda) * outer(k, ko, a, b);
        }
        m[a][a] += scale * mu * k2 + shift;
    }
    m
}

fn spectral_lame_inverse(f: &Field, mu: f64, lambda: f64, scale: f64, shift: f64) -> Field {
    let d = f.dim();
    let s = Spectral::new(f.grid());
    s.apply_matrix_symbol(f, |k, ko| {
        let m = lame_symbol(k, ko, d, mu, lambda, scale, shift);
        if norm_sq(k) == 0.0 && shift == 0.0 {
            [[0.0; 3]; 3]
        } else {
            invert_small(&m, d)
        }
    })
}

/// Apply the Lamé operator `−μΔw − (μ+λ)∇div w` in the given realization.
pub fn lame_apply(w: &Field, params: &MaterialParams, realization: Realization) -> Result<Field, OperatorError> {
    w.expect_kind(FieldKind::Vector)?;
    match realization {
        Realization::Spectral => {
            if !w.grid().is_periodic() {
                return Err(OperatorError::PeriodicOnly("the spectral realization"));
            }
            let d = w.dim();
            let s = Spectral::new(w.grid());
            Ok(s.apply_matrix_symbol(w, |k, ko| lame_symbol(k, ko, d, params.mu, params.lambda, 1.0, 0.0)))
        }
        Realization::Iterative => {
            let mut out = stencil::viscous_raw(w, params.mu, params.lambda).scaled(-1.0);
            out.zero_on_boundary();
            Ok(out)
        }
    }
}

/// Solve `−μΔw − (μ+λ)∇div w = f` with `w = 0` on box walls (mean-zero on a torus).
pub fn lame_solve(f: &Field, params: &MaterialParams, opts: &EllipticSolveOptions) -> Result<SolveOutcome, OperatorError> {
    f.expect_kind(FieldKind::Vector)?;
    let grid = *f.grid();
    params.check_ellipticity(grid.dim()).map_err(OperatorError::Ellipticity)?;
    opts.validate(&grid)?;
    if grid.is_periodic() {
        require_mean_zero(f)?;
    }
    let (mu, lambda) = (params.mu, params.lambda);
    match opts.realization {
        Realization::Spectral => Ok(spectral_outcome(spectral_lame_inverse(f, mu, lambda, 1.0, 0.0))),
        Realization::Iterative => {
            let mut rhs = f.clone();
            projector(grid, grid.dim())(rhs.values_mut());
            let diag = lame_diagonal(&grid, mu, lambda, 1.0, 0.0);
            run_cg(grid, FieldKind::Vector, &rhs, |w| stencil::viscous_raw(w, mu, lambda).scaled(-1.0), diag, opts)
        }
    }
}

/// Solve `(I − dt (μΔ + (μ+λ)∇div)) w = rhs`; on a box `w = 0` at the walls.
pub fn imex_viscous_solve(
    rhs: &Field,
    dt: f64,
    params: &MaterialParams,
    opts: &EllipticSolveOptions,
) -> Result<SolveOutcome, OperatorError> {
    rhs.expect_kind(FieldKind::Vector)?;
    if !(dt > 0.0) {
        return Err(OperatorError::InvalidOptions(format!("time step {dt} must be positive")));
    }
    let grid = *rhs.grid();
    params.check_ellipticity(grid.dim()).map_err(OperatorError::Ellipticity)?;
    opts.validate(&grid)?;
    let (mu, lambda) = (params.mu, params.lambda);
    match opts.realization {
        Realization::Spectral => Ok(spectral_outcome(spectral_lame_inverse(rhs, mu, lambda, dt, 1.0))),
        Realization::Iterative => {
            let mut b = rhs.clone();
            b.zero_on_boundary();
            let diag = lame_diagonal(&grid, mu, lambda, dt, 1.0);
            let apply = |w: &Field| {
                let mut out = w.clone();
                out.axpy(-dt, &stencil::viscous_raw(w, mu, lambda)).expect("same layout");
                out
            };
            if grid.is_periodic() {
                // The shifted operator is nonsingular; no mean projection needed.
                let res = cg::pcg(
                    |v: &[f64]| apply(&Field::from_vec(grid, FieldKind::Vector, v.to_vec()).unwrap()).into_values(),
                    b.values(),
                    &diag,
                    |_| {},
                    opts.tolerance,
                    opts.iteration_cap(b.values().len()),
                );
                let residual = *res.history.last().unwrap_or(&0.0);
                if !res.converged {
                    return Err(OperatorError::NotConverged { iterations: res.iterations, residual, history: res.history });
                }
                return Ok(SolveOutcome {
                    field: Field::from_vec(grid, FieldKind::Vector, res.x)?,
                    iterations: res.iterations,
                    relative_residual: residual,
                });
            }
            run_cg(grid, FieldKind::Vector, &b, apply, diag, opts)
        }
    }
}

/// Implicit viscous stage solver used inside time steps.
///
/// Solves `(I − τ V_h) w = b` where `V_h` is exactly the finite-difference
/// viscous operator used by the explicit right-hand side, so explicit and
/// semi-implicit steppers share one spatial discretization. Periodic grids
/// use the discrete Fourier symbol of `V_h`; boxes use conjugate gradients.
pub(crate) struct ViscousImplicit {
    grid: Grid,
    mu: f64,
    lambda: f64,
    spectral: Option<Spectral>,
}

impl ViscousImplicit {
    pub(crate) const TOLERANCE: f64 = 1e-12;

    pub(crate) fn new(grid: &Grid, params: &MaterialParams) -> Self {
        Self {
            grid: *grid,
            mu: params.mu,
            lambda: params.lambda,
            spectral: grid.is_periodic().then(|| Spectral::new(grid)),
        }
    }

    pub(crate) fn solve(&self, b: &Field, tau: f64) -> Result<Field, OperatorError> {
        let (mu, lambda, grid) = (self.mu, self.lambda, self.grid);
        let d = grid.dim();
        if let Some(s) = &self.spectral {
            let h: Vec<f64> = (0..d).map(|a| grid.spacing(a)).collect();
            return Ok(s.apply_matrix_symbol(b, |k, ko| {
                let mut m = [[0.0; 3]; 3];
                let second: Vec<f64> = (0..d).map(|a| (2.0 - 2.0 * (k[a] * h[a]).cos()) / (h[a] * h[a])).collect();
                let first: Vec<f64> = (0..d).map(|a| (ko[a] * h[a]).sin() / h[a]).collect();
                let lap: f64 = second.iter().sum();
                for i in 0..d {
                    for j in 0..d {
                        let gd = if i == j { second[i] } else { first[i] * first[j] };
                        m[i][j] = tau * (mu + lambda) * gd;
                    }
                    m[i][i] += 1.0 + tau * mu * lap;
                }
                invert_small(&m, d)
            }));
        }
        let mut rhs = b.clone();
        rhs.zero_on_boundary();
        let opts = EllipticSolveOptions { tolerance: Self::TOLERANCE, ..EllipticSolveOptions::iterative() };
        let diag = lame_diagonal(&grid, mu, lambda, tau, 1.0);
        let apply = |w: &Field| {
            let mut out = w.clone();
            out.axpy(-tau, &stencil::viscous_raw(w, mu, lambda)).expect("same layout");
            out
        };
        Ok(run_cg(grid, FieldKind::Vector, &rhs, apply, diag, &opts)?.field)
    }
}
