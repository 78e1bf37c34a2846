use super::state::first_non_positive;
use super::{DynamicsError, FlowState, MaterialParams, PerturbState};
use crate::fields::{Field, FieldKind, Grid};
use crate::operators::stencil::{divergence_raw, gradient_raw, viscous_raw, NodeStencil};
use crate::par;

/// Time derivatives of `(ϱ, u, F)`, or of `(ρ̃, u, E)` for the perturbation form.
#[derive(Clone, Debug, PartialEq)]
pub struct FlowRates {
    pub rho: Field,
    pub u: Field,
    pub f: Field,
}

impl FlowRates {
    pub fn zeros(grid: Grid) -> Self {
        Self {
            rho: Field::zeros(grid, FieldKind::Scalar),
            u: Field::zeros(grid, FieldKind::Vector),
            f: Field::zeros(grid, FieldKind::Tensor),
        }
    }

    pub fn is_finite(&self) -> bool {
        self.rho.is_finite() && self.u.is_finite() && self.f.is_finite()
    }

    /// Largest blockwise relative difference `max|a−b| / max|b|` (absolute when `b` vanishes).
    pub fn relative_difference(&self, other: &FlowRates) -> f64 {
        [(&self.rho, &other.rho), (&self.u, &other.u), (&self.f, &other.f)]
            .iter()
            .map(|(a, b)| {
                let scale = b.values().iter().fold(0.0f64, |m, v| m.max(v.abs()));
                let diff = a.max_diff(b);
                if scale > 0.0 {
                    diff / scale
                } else {
                    diff
                }
            })
            .fold(0.0, f64::max)
    }
}

/// How the viscous term enters the assembled velocity rate.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub(crate) enum Viscous {
    /// `V(u)/ϱ`.
    Full,
    /// `V(u)(1/ϱ − 1)`: the part left over when `V(u)` is treated implicitly.
    Remainder,
}

/// `(∇u)F` plus transport `−(u·∇)F` at one node, written to `out`.
#[inline(always)]
fn deformation_rate<const D: usize>(grid: &Grid, u: &[f64], f: &[f64], node: usize, out: &mut [f64], with_source: bool) {
    let st = NodeStencil::new(grid, node);
    let un = &u[node * D..(node + 1) * D];
    let fnode = &f[node * D * D..(node + 1) * D * D];
    let mut grad_u = [[0.0; D]; D];
    for (i, row) in grad_u.iter_mut().enumerate() {
        for (k, v) in row.iter_mut().enumerate() {
            *v = st.d1(u, D, i, k);
        }
    }
    for i in 0..D {
        for j in 0..D {
            let c = i * D + j;
            let (mut transport, mut stretch) = (0.0, 0.0);
            for l in 0..D {
                transport += un[l] * st.d1(f, D * D, c, l);
                stretch += grad_u[i][l] * fnode[l * D + j];
            }
            out[c] = -transport + stretch + if with_source { grad_u[i][j] } else { 0.0 };
        }
    }
}

/// Deformation rate on every node.
fn deformation_field(grid: Grid, u: &[f64], f: &[f64], with_source: bool) -> Field {
    let mut df = Field::zeros(grid, FieldKind::Tensor);
    match grid.dim() {
        2 => par::fill_nodes(df.values_mut(), 4, |node, out| deformation_rate::<2>(&grid, u, f, node, out, with_source)),
        _ => par::fill_nodes(df.values_mut(), 9, |node, out| deformation_rate::<3>(&grid, u, f, node, out, with_source)),
    }
    df
}

/// `S = ϱ u⊗u + P(ϱ) I − ϱ F Fᵀ`.
fn momentum_flux<const D: usize>(grid: Grid, rho: &[f64], u: &[f64], f: &[f64], params: &MaterialParams) -> Field {
    let mut flux = Field::zeros(grid, FieldKind::Tensor);
    par::fill_nodes(flux.values_mut(), D * D, |node, out| {
        let r = rho[node];
        let un = &u[node * D..(node + 1) * D];
        let fnode = &f[node * D * D..(node + 1) * D * D];
        let p = params.pressure(r);
        for i in 0..D {
            for j in 0..D {
                let mut ff = 0.0;
                for k in 0..D {
                    ff += fnode[i * D + k] * fnode[j * D + k];
                }
                out[i * D + j] = r * un[i] * un[j] - r * ff + if i == j { p } else { 0.0 };
            }
        }
    });
    flux
}

/// Velocity rate from the momentum-flux tensor `S`, continuity rate and viscous term.
fn velocity_rate(
    grid: Grid,
    rho: &[f64],
    u: &Field,
    flux: &Field,
    drho: &Field,
    params: &MaterialParams,
    viscous: Viscous,
) -> Field {
    let d = grid.dim();
    let div_s = divergence_raw(flux);
    let visc = viscous_raw(u, params.mu, params.lambda);
    let mut du = Field::zeros(grid, FieldKind::Vector);
    let (uv, ds, vv, dr) = (u.values(), div_s.values(), visc.values(), drho.values());
    par::fill_nodes(du.values_mut(), d, |node, out| {
        if !grid.is_periodic() && grid.on_boundary(node) {
            out.iter_mut().for_each(|v| *v = 0.0);
            return;
        }
        let r = rho[node];
        for i in 0..d {
            let k = node * d + i;
            let momentum = -ds[k] - uv[k] * dr[node];
            out[i] = match viscous {
                Viscous::Full => (momentum + vv[k]) / r,
                Viscous::Remainder => momentum / r + vv[k] * (1.0 / r - 1.0),
            };
        }
    });
    du
}

pub(crate) fn assemble_full(
    s: &FlowState,
    params: &MaterialParams,
    forcing: Option<&FlowRates>,
    viscous: Viscous,
) -> Result<FlowRates, DynamicsError> {
    let grid = *s.grid();
    if let Some((node, value)) = first_non_positive(&s.rho) {
        return Err(DynamicsError::non_positive(&grid, node, value));
    }
    let d = grid.dim();
    let (rho, u, f) = (s.rho.values(), s.u.values(), s.f.values());

    let mut mass_flux = Field::zeros(grid, FieldKind::Vector);
    par::fill_nodes(mass_flux.values_mut(), d, |node, out| {
        for i in 0..d {
            out[i] = rho[node] * u[node * d + i];
        }
    });
    let drho = divergence_raw(&mass_flux).scaled(-1.0);

    let flux = match d {
        2 => momentum_flux::<2>(grid, rho, u, f, params),
        _ => momentum_flux::<3>(grid, rho, u, f, params),
    };
    let du = velocity_rate(grid, rho, &s.u, &flux, &drho, params, viscous);
    let df = deformation_field(grid, u, f, false);

    let mut rates = FlowRates { rho: drho, u: du, f: df };
    if let Some(g) = forcing {
        rates.rho.axpy(1.0, &g.rho)?;
        rates.u.axpy(1.0, &g.u)?;
        rates.f.axpy(1.0, &g.f)?;
        rates.u.zero_on_boundary();
    }
    Ok(rates)
}

/// Right-hand side of the full system in velocity form.
///
/// `dϱ = −div(ϱu)`, `du = [−div(ϱu⊗u) + μΔu + (μ+λ)∇div u − ∇P + div(ϱFFᵀ) − u dϱ]/ϱ`,
/// `dF = −(u·∇)F + (∇u)F`; `forcing` is added blockwise. On a no-slip box
/// the velocity rate vanishes at wall nodes.
pub fn rhs_full(s: &FlowState, params: &MaterialParams, forcing: Option<&FlowRates>) -> Result<FlowRates, DynamicsError> {
    assemble_full(s, params, forcing, Viscous::Full)
}

/// Right-hand side of the perturbation system for `(ρ̃, u, E)`.
///
/// `dρ̃ = −div(ρ̃u) − div u`, the momentum flux is expanded about the rest
/// state, and `dE = −(u·∇)E + (∇u)E + ∇u`.
pub fn rhs_perturb(s: &PerturbState, params: &MaterialParams) -> Result<FlowRates, DynamicsError> {
    let grid = *s.grid();
    let d = grid.dim();
    let (rt, u, e) = (s.rho_tilde.values(), s.u.values(), s.e.values());
    if let Some(node) = rt.iter().position(|r| !(1.0 + r > 0.0)) {
        return Err(DynamicsError::non_positive(&grid, node, 1.0 + rt[node]));
    }

    let mut flux_rt = Field::zeros(grid, FieldKind::Vector);
    par::fill_nodes(flux_rt.values_mut(), d, |node, out| {
        for i in 0..d {
            out[i] = rt[node] * u[node * d + i];
        }
    });
    let div_u = divergence_raw(&s.u);
    let drho = divergence_raw(&flux_rt).plus(1.0, &div_u)?.scaled(-1.0);

    // S = (1+ρ̃) u⊗u + (P(1+ρ̃) − P(1)) I − ρ̃ I − (1+ρ̃)(E + Eᵀ + EEᵀ)
    let p1 = params.pressure(1.0);
    let mut flux = Field::zeros(grid, FieldKind::Tensor);
    par::fill_nodes(flux.values_mut(), d * d, |node, out| {
        let r = rt[node];
        let un = &u[node * d..(node + 1) * d];
        let en = &e[node * d * d..(node + 1) * d * d];
        let dp = params.pressure(1.0 + r) - p1;
        for i in 0..d {
            for j in 0..d {
                let eet: f64 = (0..d).map(|k| en[i * d + k] * en[j * d + k]).sum();
                let elastic = en[i * d + j] + en[j * d + i] + eet;
                let diag = if i == j { dp - r } else { 0.0 };
                out[i * d + j] = (1.0 + r) * un[i] * un[j] + diag - (1.0 + r) * elastic;
            }
        }
    });
    let rho: Vec<f64> = rt.iter().map(|r| 1.0 + r).collect();
    let du = velocity_rate(grid, &rho, &s.u, &flux, &drho, params, Viscous::Full);

    let de = deformation_field(grid, u, e, true);
    Ok(FlowRates { rho: drho, u: du, f: de })
}

/// `dσ = −∇(u·σ) − ∇div u` for `σ = ∇ ln ϱ`.
pub fn rhs_sigma(u: &Field, sigma: &Field) -> Field {
    let grid = *u.grid();
    let d = grid.dim();
    let div_u = divergence_raw(u);
    let mut w = Field::zeros(grid, FieldKind::Scalar);
    let (uv, sv, dv) = (u.values(), sigma.values(), div_u.values());
    par::fill_nodes(w.values_mut(), 1, |node, out| {
        out[0] = (0..d).map(|i| uv[node * d + i] * sv[node * d + i]).sum::<f64>() + dv[node];
    });
    gradient_raw(&w).scaled(-1.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn smooth_state(grid: Grid, amp: f64) -> FlowState {
        let d = grid.dim();
        FlowState {
            rho: Field::scalar_from_fn(grid, move |x| 1.0 + amp * (x[0] + 2.0 * x[1]).sin()),
            u: Field::from_fn(grid, FieldKind::Vector, move |x, o| {
                for i in 0..d {
                    o[i] = amp * (x[(i + 1) % d] + i as f64).cos();
                }
            }),
            f: Field::from_fn(grid, FieldKind::Tensor, move |x, o| {
                for i in 0..d {
                    for j in 0..d {
                        o[i * d + j] = if i == j { 1.0 } else { 0.0 } + amp * (x[j] - x[i] + (i * d + j) as f64).sin();
                    }
                }
            }),
            t: 0.0,
        }
    }

    #[test]
    fn equilibrium_rates_are_exactly_zero() {
        for g in [Grid::periodic_cube(2, 8, 1.0).unwrap(), Grid::box_cube(3, 8, 1.0).unwrap()] {
            let s = FlowState::equilibrium(g);
            let r = rhs_full(&s, &MaterialParams::default(), None).unwrap();
            assert_eq!(r.rho.max_abs() + r.u.max_abs() + r.f.max_abs(), 0.0);
            let p = rhs_perturb(&s.to_perturb(), &MaterialParams::default()).unwrap();
            assert_eq!(p.rho.max_abs() + p.u.max_abs() + p.f.max_abs(), 0.0);
        }
    }

    #[test]
    fn constant_state_has_zero_rates() {
        let g = Grid::periodic_cube(3, 8, 1.0).unwrap();
        let s = FlowState {
            rho: Field::constant(g, FieldKind::Scalar, &[1.3]).unwrap(),
            u: Field::constant(g, FieldKind::Vector, &[0.2, -0.4, 1.0]).unwrap(),
            f: Field::constant(g, FieldKind::Tensor, &[1.1, 0.2, 0.0, 0.1, 0.9, 0.3, 0.0, 0.0, 1.2]).unwrap(),
            t: 0.0,
        };
        let r = rhs_full(&s, &MaterialParams::default(), None).unwrap();
        assert_eq!(r.rho.max_abs() + r.u.max_abs() + r.f.max_abs(), 0.0);
    }

    #[test]
    fn perturbation_form_matches_full_form() {
        for dim in [2, 3] {
            let g = Grid::periodic_cube(dim, 12, 2.0 * PI).unwrap();
            let s = smooth_state(g, 0.1);
            let full = rhs_full(&s, &MaterialParams::default(), None).unwrap();
            let pert = rhs_perturb(&s.to_perturb(), &MaterialParams::default()).unwrap();
            assert!(pert.relative_difference(&full) < 1e-12);
        }
    }

    #[test]
    fn zero_deformation_gives_linear_source() {
        let g = Grid::periodic_cube(2, 16, 2.0 * PI).unwrap();
        let mut s = smooth_state(g, 0.1).to_perturb();
        s.e = Field::zeros(g, FieldKind::Tensor);
        let r = rhs_perturb(&s, &MaterialParams::default()).unwrap();
        assert!(r.f.max_diff(&gradient_raw(&s.u)) < 1e-15);
    }

    #[test]
    fn mass_rate_integrates_to_zero() {
        let g = Grid::periodic_cube(2, 16, 2.0 * PI).unwrap();
        let r = rhs_full(&smooth_state(g, 0.2), &MaterialParams::default(), None).unwrap();
        assert!(crate::fields::integrate(&r.rho).unwrap().abs() < 1e-13);
    }

    #[test]
    fn non_positive_density_is_located() {
        let g = Grid::periodic_cube(2, 8, 1.0).unwrap();
        let mut s = FlowState::equilibrium(g);
        s.rho.values_mut()[17] = 0.0;
        match rhs_full(&s, &MaterialParams::default(), None) {
            Err(DynamicsError::NonPositiveDensity { node, .. }) => assert_eq!(node, 17),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn box_velocity_rate_vanishes_on_walls() {
        let g = Grid::box_cube(2, 8, 1.0).unwrap();
        let mut s = smooth_state(g, 0.1);
        s.u.zero_on_boundary();
        let r = rhs_full(&s, &MaterialParams::default(), None).unwrap();
        for n in 0..g.node_count() {
            if g.on_boundary(n) {
                assert_eq!(r.u.node(n), &[0.0, 0.0]);
            }
        }
    }
}
