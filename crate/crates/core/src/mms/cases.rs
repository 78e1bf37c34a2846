use std::f64::consts::PI;

use super::jet::{Jet1, Jet2, Real, T};
use crate::dynamics::{FlowRates, FlowState, MaterialParams};
use crate::fields::{Boundary, Field, FieldKind, Grid};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CaseKind {
    /// `ϱ = 1, u = 0, F = I`.
    Equilibrium,
    /// `ϱ = 1, u = 0, F = I + ε sin(x₁) e₁⊗e₁`.
    SteadyStretch,
    /// `ϱ = 1, u = ε sin(t) sin(x₁) e₂, F = I`.
    TimeDependent,
    /// Fully coupled trigonometric fields on the torus.
    Smooth,
    /// Fully coupled fields on the unit box with `u = 0` on the walls.
    BoxSmooth,
}

/// Amplitude of the simple manufactured cases.
pub const CASE_EPSILON: f64 = 0.1;

/// A closed-form space-time solution `(ϱ*, u*, F*)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ManufacturedCase {
    pub name: &'static str,
    pub dim: usize,
    pub kind: CaseKind,
}

const CASES: [ManufacturedCase; 7] = [
    ManufacturedCase { name: "equilibrium2d", dim: 2, kind: CaseKind::Equilibrium },
    ManufacturedCase { name: "equilibrium3d", dim: 3, kind: CaseKind::Equilibrium },
    ManufacturedCase { name: "steady_stretch", dim: 2, kind: CaseKind::SteadyStretch },
    ManufacturedCase { name: "time_dependent", dim: 2, kind: CaseKind::TimeDependent },
    ManufacturedCase { name: "smooth2d", dim: 2, kind: CaseKind::Smooth },
    ManufacturedCase { name: "smooth3d", dim: 3, kind: CaseKind::Smooth },
    ManufacturedCase { name: "box2d", dim: 2, kind: CaseKind::BoxSmooth },
];

impl ManufacturedCase {
    pub fn all() -> &'static [ManufacturedCase] {
        &CASES
    }

    pub fn by_name(name: &str) -> Option<ManufacturedCase> {
        CASES.iter().copied().find(|c| c.name == name)
    }

    pub fn boundary(&self) -> Boundary {
        match self.kind {
            CaseKind::BoxSmooth => Boundary::NoSlipBox,
            _ => Boundary::Periodic,
        }
    }

    /// Edge length of the cubic domain.
    pub fn length(&self) -> f64 {
        match self.kind {
            CaseKind::BoxSmooth => 1.0,
            _ => 2.0 * PI,
        }
    }

    pub fn grid(&self, cells: usize) -> Result<Grid, crate::fields::FieldError> {
        let n = vec![cells; self.dim];
        let l = vec![self.length(); self.dim];
        Grid::new(&n, &l, self.boundary())
    }

    /// Guaranteed lower bound on `ϱ*`.
    pub fn rho_min(&self) -> f64 {
        match self.kind {
            CaseKind::Smooth | CaseKind::BoxSmooth => 0.8,
            _ => 1.0,
        }
    }

    pub fn rho<R: Real>(&self, x: &[R; 4]) -> R {
        let t = x[T];
        match self.kind {
            CaseKind::Equilibrium | CaseKind::SteadyStretch | CaseKind::TimeDependent => R::cst(1.0),
            CaseKind::Smooth => {
                let z = if self.dim == 3 { x[2].cos() } else { R::cst(1.0) };
                (x[0] + t).sin() * x[1].cos() * z * 0.1 + 1.0
            }
            CaseKind::BoxSmooth => (x[0] * PI).cos() * (x[1] * PI).cos() * t.cos() * 0.1 + 1.0,
        }
    }

    pub fn velocity<R: Real>(&self, x: &[R; 4], out: &mut [R]) {
        let t = x[T];
        let e = CASE_EPSILON;
        out.iter_mut().for_each(|v| *v = R::cst(0.0));
        match self.kind {
            CaseKind::Equilibrium | CaseKind::SteadyStretch => {}
            CaseKind::TimeDependent => out[1] = t.sin() * x[0].sin() * e,
            CaseKind::Smooth => {
                out[0] = t.cos() * x[1].sin() * 0.1 + (x[0] - t).sin() * 0.05;
                out[1] = x[0].sin() * (x[1] + t * 0.5).cos() * 0.1;
                if self.dim == 3 {
                    out[0] = out[0] + (x[2] + t).sin() * 0.05;
                    out[2] = (x[0] + x[1]).cos() * x[2].sin() * 0.08;
                }
            }
            CaseKind::BoxSmooth => {
                let s1 = (x[0] * PI).sin();
                let s2 = (x[1] * PI).sin();
                out[0] = t.cos() * s1 * s2 * 0.1;
                out[1] = (t + 0.5).sin() * s1 * (x[1] * (2.0 * PI)).sin() * 0.1;
            }
        }
    }

    pub fn deformation<R: Real>(&self, x: &[R; 4], out: &mut [R]) {
        let d = self.dim;
        let t = x[T];
        for i in 0..d {
            for j in 0..d {
                out[i * d + j] = R::cst(if i == j { 1.0 } else { 0.0 });
            }
        }
        match self.kind {
            CaseKind::Equilibrium | CaseKind::TimeDependent => {}
            CaseKind::SteadyStretch => out[0] = x[0].sin() * CASE_EPSILON + 1.0,
            CaseKind::Smooth => {
                out[0] = out[0] + (x[0] - t).sin() * 0.1;
                out[1] = out[1] + (x[1] + t).cos() * 0.05;
                out[d] = out[d] + (x[0] + x[1]).sin() * 0.1;
                out[d + 1] = out[d + 1] + (x[0] - t * 2.0).cos() * x[1].sin() * 0.1;
                if d == 3 {
                    out[2] = out[2] + (x[2] - t).sin() * 0.05;
                    out[7] = out[7] + (x[1] + x[2]).cos() * 0.05;
                    out[8] = out[8] + (x[2] + t).sin() * x[0].cos() * 0.1;
                }
            }
            CaseKind::BoxSmooth => {
                out[0] = out[0] + (x[0] * PI).sin() * t.cos() * 0.1;
                out[1] = out[1] + (x[1] * PI).cos() * 0.05;
                out[2] = out[2] + (x[0] * PI + t).sin() * 0.1;
                out[3] = out[3] + (x[0] * (2.0 * PI)).cos() * (x[1] * PI).sin() * 0.1;
            }
        }
    }

    /// Exact state sampled on `grid` at time `t`.
    pub fn exact_state(&self, grid: &Grid, t: f64) -> FlowState {
        let d = self.dim;
        let at = |x: &[f64; 3]| [x[0], x[1], if d == 3 { x[2] } else { 0.0 }, t];
        let mut s = FlowState {
            rho: Field::scalar_from_fn(*grid, |x| self.rho(&at(x))),
            u: Field::from_fn(*grid, FieldKind::Vector, |x, o| self.velocity(&at(x), o)),
            f: Field::from_fn(*grid, FieldKind::Tensor, |x, o| self.deformation(&at(x), o)),
            t,
        };
        s.u.zero_on_boundary();
        s
    }
}

/// Pointwise forcing `(g_ϱ, g_u, g_F)` that makes the case an exact solution:
///
/// `g_ϱ = ϱ_t + u·∇ϱ + ϱ div u`,
/// `g_u = u_t + u·∇u − [μΔu + (μ+λ)∇div u − ∇P(ϱ) + div(ϱFFᵀ)]/ϱ`,
/// `g_F = F_t + u·∇F − (∇u)F`.
pub fn mms_forcing(case: &ManufacturedCase, params: &MaterialParams, x: &[f64; 3], t: f64) -> (f64, [f64; 3], [f64; 9]) {
    let d = case.dim;
    let p1 = [Jet1::var(x[0], 0), Jet1::var(x[1], 1), Jet1::var(if d == 3 { x[2] } else { 0.0 }, 2), Jet1::var(t, T)];
    let p2 = [Jet2::var(x[0], 0), Jet2::var(x[1], 1), Jet2::var(if d == 3 { x[2] } else { 0.0 }, 2), Jet2::var(t, T)];
    let rho = case.rho(&p1);
    let mut u = [Jet2::var(0.0, 0); 3];
    case.velocity(&p2, &mut u[..d]);
    let mut f = [Jet1::var(0.0, 0); 9];
    case.deformation(&p1, &mut f[..d * d]);

    let div_u: f64 = (0..d).map(|j| u[j].d[j]).sum();
    let g_rho = rho.d[T] + (0..d).map(|j| u[j].v * rho.d[j]).sum::<f64>() + rho.v * div_u;

    let dp = params.pressure_derivative(rho.v);
    let mut g_u = [0.0; 3];
    for i in 0..d {
        let lap: f64 = (0..d).map(|j| u[i].h[j][j]).sum();
        let grad_div: f64 = (0..d).map(|j| u[j].h[j][i]).sum();
        // ∂_j(ϱ F_ik F_jk)
        let elastic: f64 = (0..d)
            .flat_map(|j| (0..d).map(move |k| (j, k)))
            .map(|(j, k)| {
                let (fik, fjk) = (f[i * d + k], f[j * d + k]);
                rho.d[j] * fik.v * fjk.v + rho.v * (fik.d[j] * fjk.v + fik.v * fjk.d[j])
            })
            .sum();
        let force = params.mu * lap + (params.mu + params.lambda) * grad_div - dp * rho.d[i] + elastic;
        let advect: f64 = (0..d).map(|j| u[j].v * u[i].d[j]).sum();
        g_u[i] = u[i].d[T] + advect - force / rho.v;
    }

    let mut g_f = [0.0; 9];
    for i in 0..d {
        for j in 0..d {
            let fij = f[i * d + j];
            let advect: f64 = (0..d).map(|l| u[l].v * fij.d[l]).sum();
            let stretch: f64 = (0..d).map(|k| u[i].d[k] * f[k * d + j].v).sum();
            g_f[i * d + j] = fij.d[T] + advect - stretch;
        }
    }
    (g_rho, g_u, g_f)
}

/// Forcing sampled on every node of `grid` at time `t`.
pub fn forcing_fields(case: &ManufacturedCase, params: &MaterialParams, grid: &Grid, t: f64) -> FlowRates {
    let d = grid.dim();
    let mut rates = FlowRates::zeros(*grid);
    let nodes: Vec<usize> = (0..grid.node_count()).collect();
    let values = crate::par::map_items(&nodes, |&n| mms_forcing(case, params, &grid.position(n), t));
    for (n, (gr, gu, gf)) in values.into_iter().enumerate() {
        rates.rho.values_mut()[n] = gr;
        rates.u.node_mut(n).copy_from_slice(&gu[..d]);
        rates.f.node_mut(n).copy_from_slice(&gf[..d * d]);
    }
    rates.u.zero_on_boundary();
    rates
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn equilibrium_forcing_vanishes() {
        for name in ["equilibrium2d", "equilibrium3d"] {
            let c = ManufacturedCase::by_name(name).unwrap();
            let (gr, gu, gf) = mms_forcing(&c, &MaterialParams::default(), &[0.3, 1.1, 2.0], 0.7);
            assert_eq!(gr, 0.0);
            assert!(gu.iter().chain(&gf).all(|v| *v == 0.0));
        }
    }

    #[test]
    fn steady_stretch_forcing() {
        let c = ManufacturedCase::by_name("steady_stretch").unwrap();
        let e = CASE_EPSILON;
        for x in [[0.3, 1.1, 0.0], [2.5, -0.4, 0.0]] {
            let (gr, gu, gf) = mms_forcing(&c, &MaterialParams::default(), &x, 0.2);
            assert_eq!(gr, 0.0);
            assert!(gf.iter().all(|v| *v == 0.0));
            // −div(FFᵀ)₁ = −∂₁(1 + ε sin x₁)² = −2ε(1 + ε sin x₁) cos x₁
            let expected = -2.0 * e * (1.0 + e * x[0].sin()) * x[0].cos();
            assert!((gu[0] - expected).abs() < 1e-15);
            assert_eq!(gu[1], 0.0);
        }
    }

    #[test]
    fn time_dependent_forcing_has_acceleration_term() {
        let c = ManufacturedCase::by_name("time_dependent").unwrap();
        let p = MaterialParams::default();
        let (x, t) = ([0.8, 0.1, 0.0], 0.4);
        let (_, gu, gf) = mms_forcing(&c, &p, &x, t);
        let e = CASE_EPSILON;
        // u₂ = ε sin t sin x₁: u_t = ε cos t sin x₁, μΔu₂ = −μ u₂, no advection or gradient-of-divergence.
        let expected = e * t.cos() * x[0].sin() + p.mu * e * t.sin() * x[0].sin();
        assert!((gu[1] - expected).abs() < 1e-15);
        // g_F = −(∇u)F: only (∇u)_{21} = ε sin t cos x₁.
        assert!((gf[2] + e * t.sin() * x[0].cos()).abs() < 1e-15);
    }

    #[test]
    fn density_stays_positive() {
        for c in ManufacturedCase::all() {
            let g = c.grid(16).unwrap();
            for t in [0.0, 0.3, 1.0, 2.0] {
                let s = c.exact_state(&g, t);
                assert!(s.rho.values().iter().all(|r| *r >= c.rho_min()));
            }
        }
    }

    #[test]
    fn box_velocity_vanishes_on_walls() {
        let c = ManufacturedCase::by_name("box2d").unwrap();
        let g = c.grid(8).unwrap();
        let s = c.exact_state(&g, 0.3);
        let mut raw = [0.0; 2];
        for n in 0..g.node_count() {
            if g.on_boundary(n) {
                let x = g.position(n);
                c.velocity(&[x[0], x[1], 0.0, 0.3], &mut raw);
                assert!(raw.iter().all(|v| v.abs() < 1e-15));
            }
        }
        s.validate().unwrap();
    }
}
