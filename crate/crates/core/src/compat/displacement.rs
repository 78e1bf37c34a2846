use std::f64::consts::PI;

use super::CompatError;
use crate::dynamics::{FlowState, PerturbState};
use crate::fields::{Field, FieldKind, Grid};

/// One term `c · b(k·X)` of a displacement or velocity expansion.
///
/// On a periodic grid the basis is `sin(2π Σ m_a X_a / L_a + phase)`; on a
/// no-slip box it is the sine product `Π_a sin(π m_a X_a / L_a)` (the phase is
/// ignored), which vanishes on every wall when all `m_a ≥ 1`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Mode {
    pub wave: [i32; 3],
    pub coeffs: [f64; 3],
    pub phase: f64,
}

impl Mode {
    pub fn new(wave: [i32; 3], coeffs: [f64; 3], phase: f64) -> Self {
        Self { wave, coeffs, phase }
    }
}

/// Deformation `φ(X) = X + ε ψ̂(X)` and an independent initial velocity.
#[derive(Clone, Debug, PartialEq)]
pub struct DisplacementSpec {
    pub amplitude: f64,
    pub modes: Vec<Mode>,
    pub velocity_amplitude: f64,
    pub velocity_modes: Vec<Mode>,
}

/// Largest admissible bound on `|∇ψ|`.
pub const MAX_DISPLACEMENT_GRADIENT: f64 = 0.5;

/// Evaluator of a mode expansion on a given grid geometry.
#[derive(Clone, Debug)]
pub(crate) struct Expansion {
    dim: usize,
    periodic: bool,
    amplitude: f64,
    /// (angular wave vector, coefficients, phase)
    terms: Vec<([f64; 3], [f64; 3], f64)>,
}

impl Expansion {
    fn new(grid: &Grid, amplitude: f64, modes: &[Mode]) -> Result<Self, CompatError> {
        let d = grid.dim();
        let periodic = grid.is_periodic();
        let mut terms = Vec::with_capacity(modes.len());
        for m in modes {
            let mut k = [0.0; 3];
            for a in 0..d {
                if !periodic && m.wave[a] < 1 {
                    return Err(CompatError::InvalidSpec(format!(
                        "box modes need positive wave numbers on every axis, got {:?}",
                        &m.wave[..d]
                    )));
                }
                let base = if periodic { 2.0 * PI } else { PI };
                k[a] = base * m.wave[a] as f64 / grid.length(a);
            }
            let mut c = [0.0; 3];
            c[..d].copy_from_slice(&m.coeffs[..d]);
            terms.push((k, c, if periodic { m.phase } else { 0.0 }));
        }
        Ok(Self { dim: d, periodic, amplitude, terms })
    }

    pub(crate) fn value(&self, x: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|v| *v = 0.0);
        for (k, c, phase) in &self.terms {
            let b = if self.periodic {
                ((0..self.dim).map(|a| k[a] * x[a]).sum::<f64>() + phase).sin()
            } else {
                (0..self.dim).map(|a| (k[a] * x[a]).sin()).product()
            };
            for i in 0..self.dim {
                out[i] += self.amplitude * c[i] * b;
            }
        }
    }

    /// `(∇ψ)_{ij} = ∂ψ_i/∂X_j`, flattened.
    pub(crate) fn gradient(&self, x: &[f64], out: &mut [f64]) {
        let d = self.dim;
        out.iter_mut().for_each(|v| *v = 0.0);
        for (k, c, phase) in &self.terms {
            let mut db = [0.0; 3];
            if self.periodic {
                let arg = (0..d).map(|a| k[a] * x[a]).sum::<f64>() + phase;
                for a in 0..d {
                    db[a] = k[a] * arg.cos();
                }
            } else {
                for a in 0..d {
                    db[a] = (0..d)
                        .map(|b| if a == b { k[b] * (k[b] * x[b]).cos() } else { (k[b] * x[b]).sin() })
                        .product();
                }
            }
            for i in 0..d {
                for j in 0..d {
                    out[i * d + j] += self.amplitude * c[i] * db[j];
                }
            }
        }
    }

    /// Upper bound `Σ ε |c| |k|` on the operator norm of the gradient.
    pub(crate) fn gradient_bound(&self) -> f64 {
        self.terms
            .iter()
            .map(|(k, c, _)| {
                let kn = k.iter().map(|v| v * v).sum::<f64>().sqrt();
                let cn = c.iter().map(|v| v * v).sum::<f64>().sqrt();
                self.amplitude.abs() * kn * cn
            })
            .sum()
    }
}

impl DisplacementSpec {
    /// No displacement and no velocity.
    pub fn zero() -> Self {
        Self { amplitude: 0.0, modes: Vec::new(), velocity_amplitude: 0.0, velocity_modes: Vec::new() }
    }

    /// Reference compatible data of size `epsilon`: a shear, a compression and
    /// an oblique mode in the deformation, two velocity modes of the same size.
    pub fn canonical(grid: &Grid, epsilon: f64) -> Self {
        let periodic = grid.is_periodic();
        let (modes, velocity_modes) = match (grid.dim(), periodic) {
            (2, true) => (
                vec![
                    Mode::new([0, 1, 0], [1.0, 0.0, 0.0], 0.0),
                    Mode::new([1, 0, 0], [0.6, 0.0, 0.0], 0.3),
                    Mode::new([1, 1, 0], [0.0, 0.5, 0.0], 1.0),
                ],
                vec![Mode::new([1, 0, 0], [0.0, 1.0, 0.0], 0.0), Mode::new([0, 1, 0], [0.5, 0.0, 0.0], 0.7)],
            ),
            (_, true) => (
                vec![
                    Mode::new([0, 1, 0], [1.0, 0.0, 0.0], 0.0),
                    Mode::new([1, 0, 0], [0.6, 0.0, 0.0], 0.3),
                    Mode::new([1, 1, 0], [0.0, 0.5, 0.0], 1.0),
                    Mode::new([0, 1, 1], [0.0, 0.0, 0.4], 0.2),
                ],
                vec![Mode::new([1, 0, 0], [0.0, 1.0, 0.0], 0.0), Mode::new([0, 0, 1], [0.5, 0.0, 0.3], 0.7)],
            ),
            (_, false) => (
                vec![Mode::new([1, 1, 1], [1.0, 0.5, 0.3], 0.0), Mode::new([2, 1, 1], [0.0, 0.4, 0.2], 0.0)],
                vec![Mode::new([1, 1, 1], [0.5, -1.0, 0.3], 0.0), Mode::new([1, 2, 1], [0.3, 0.0, 0.5], 0.0)],
            ),
        };
        Self { amplitude: epsilon, modes, velocity_amplitude: epsilon, velocity_modes }
    }

    pub(crate) fn displacement(&self, grid: &Grid) -> Result<Expansion, CompatError> {
        Expansion::new(grid, self.amplitude, &self.modes)
    }

    pub(crate) fn velocity(&self, grid: &Grid) -> Result<Expansion, CompatError> {
        Expansion::new(grid, self.velocity_amplitude, &self.velocity_modes)
    }

    /// Upper bound on `max|∇ψ|` over the domain.
    pub fn gradient_bound(&self, grid: &Grid) -> Result<f64, CompatError> {
        Ok(self.displacement(grid)?.gradient_bound())
    }

    pub fn validate(&self, grid: &Grid) -> Result<(), CompatError> {
        if !(self.amplitude >= 0.0 && self.velocity_amplitude >= 0.0) {
            return Err(CompatError::InvalidSpec("amplitudes must be non-negative".into()));
        }
        self.velocity(grid)?;
        let bound = self.gradient_bound(grid)?;
        if !(bound < MAX_DISPLACEMENT_GRADIENT) {
            return Err(CompatError::NotInvertible { max_gradient: bound });
        }
        Ok(())
    }
}

/// Result of [`invert_map`].
#[derive(Clone, Debug, PartialEq)]
pub struct MapInverse {
    pub point: Vec<f64>,
    pub iterations: usize,
}

/// Solve `X + ψ(X) = x` by the fixed-point iteration `X ← x − ψ(X)`.
///
/// `lipschitz` bounds `|∇ψ|` and must be below 1. Stops once
/// `|X + ψ(X) − x| ≤ tol`.
pub fn invert_map(
    psi: impl Fn(&[f64], &mut [f64]),
    lipschitz: f64,
    x: &[f64],
    tol: f64,
) -> Result<MapInverse, CompatError> {
    if !(lipschitz >= 0.0 && lipschitz < 1.0) {
        return Err(CompatError::NotContraction { lipschitz });
    }
    if !(tol > 0.0) {
        return Err(CompatError::InvalidSpec(format!("tolerance {tol} must be positive")));
    }
    let n = x.len();
    let mut point = x.to_vec();
    let mut p = vec![0.0; n];
    psi(&point, &mut p);
    let r0: f64 = p.iter().map(|v| v * v).sum::<f64>().sqrt();
    // Residual contracts by `lipschitz` per sweep.
    let cap = if lipschitz == 0.0 {
        1
    } else {
        ((tol / r0.max(1.0)).ln() / lipschitz.ln()).ceil().max(0.0) as usize + 2
    };
    for it in 0..=cap {
        let residual: f64 = (0..n).map(|i| (point[i] + p[i] - x[i]).powi(2)).sum::<f64>().sqrt();
        if residual <= tol {
            return Ok(MapInverse { point, iterations: it });
        }
        for i in 0..n {
            point[i] = x[i] - p[i];
        }
        psi(&point, &mut p);
    }
    let residual: f64 = (0..n).map(|i| (point[i] + p[i] - x[i]).powi(2)).sum::<f64>().sqrt();
    Err(CompatError::NoConvergence { iterations: cap, residual })
}

/// Tolerance used when inverting the deformation map at grid nodes.
pub const INVERSION_TOLERANCE: f64 = 1e-14;

/// Initial data from a displacement: `F₀ = I + D_h ψ` at `X = φ⁻¹(x)`,
/// `ϱ₀ = 1/det(I + ∇ψ(X))`, `u₀` from the velocity modes.
///
/// `D_h` is the central difference with the grid spacing taken in the
/// reference configuration, so the intrinsic residuals of the returned state
/// are at truncation level rather than round-off; `∫ϱ₀F₀ = |Ω| I` still
/// holds exactly in the continuum because `D_h ψ` integrates to zero.
pub fn gen_initial_from_displacement(spec: &DisplacementSpec, grid: &Grid) -> Result<(FlowState, PerturbState), CompatError> {
    spec.validate(grid)?;
    let d = grid.dim();
    let psi = spec.displacement(grid)?;
    let vel = spec.velocity(grid)?;
    let lip = psi.gradient_bound();
    let h: Vec<f64> = (0..d).map(|a| grid.spacing(a)).collect();

    let n = grid.node_count();
    let mut rho = Field::zeros(*grid, FieldKind::Scalar);
    let mut f = Field::identity(*grid);
    let u = Field::from_fn(*grid, FieldKind::Vector, |x, o| vel.value(&x[..d], o));
    for node in 0..n {
        let x = grid.position(node);
        let inv = invert_map(|p, out| psi.value(p, out), lip, &x[..d], INVERSION_TOLERANCE)?;
        let big_x = inv.point;
        let mut g = [0.0; 9];
        psi.gradient(&big_x, &mut g[..d * d]);
        let mut jac = [0.0; 9];
        for i in 0..d {
            jac[i * d + i] = 1.0;
        }
        for (a, v) in jac.iter_mut().zip(&g).take(d * d) {
            *a += v;
        }
        rho.values_mut()[node] = 1.0 / super::det(&jac[..d * d], d);

        let fnode = f.node_mut(node);
        let mut plus = [0.0; 3];
        let mut minus = [0.0; 3];
        for j in 0..d {
            let mut xp = big_x.clone();
            let mut xm = big_x.clone();
            xp[j] += h[j];
            xm[j] -= h[j];
            psi.value(&xp, &mut plus[..d]);
            psi.value(&xm, &mut minus[..d]);
            for i in 0..d {
                fnode[i * d + j] += (plus[i] - minus[i]) / (2.0 * h[j]);
            }
        }
    }
    let mut flow = FlowState { rho, u, f, t: 0.0 };
    flow.u.zero_on_boundary();
    let pert = flow.to_perturb();
    Ok((flow, pert))
}
