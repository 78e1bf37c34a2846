use super::{det, CompatError};
use crate::dynamics::{FlowState, MaterialParams, PerturbState};
use crate::fields::{integrate_components, linf_norm, lq_norm, lq_of_magnitudes, w1q_norm, Field, FieldKind};
use crate::operators::stencil::{divergence_raw, gradient_raw, partial};
use crate::operators::{lame_apply, lame_solve, riesz, EllipticSolveOptions};
use crate::par;

/// Default exponent for `L^q` residual norms.
pub const DEFAULT_RESIDUAL_Q: f64 = 4.0;

/// Residuals of `ϱ det F = 1`, `div(ϱFᵀ) = 0` and the curl identity.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct IntrinsicResiduals {
    /// `L∞` of `ϱ det F − 1`.
    pub det: f64,
    /// `L^q` of `div(ϱFᵀ)`.
    pub piola: f64,
    /// Max over `(i, j, k)` of the `L^q` norm of `F_lk ∂_l F_ij − F_lj ∂_l F_ik`.
    pub curl: f64,
}

pub fn check_intrinsic(s: &FlowState, q: f64) -> Result<IntrinsicResiduals, CompatError> {
    let grid = *s.grid();
    let d = grid.dim();
    let (rho, f) = (s.rho.values(), s.f.values());

    let mut det_res = Field::zeros(grid, FieldKind::Scalar);
    par::fill_nodes(det_res.values_mut(), 1, |node, o| {
        o[0] = rho[node] * det(&f[node * d * d..(node + 1) * d * d], d) - 1.0;
    });

    // (ϱFᵀ)_{ij} = ϱ F_ji, so (div ϱFᵀ)_i = ∂_j(ϱ F_ji).
    let mut rho_ft = Field::zeros(grid, FieldKind::Tensor);
    par::fill_nodes(rho_ft.values_mut(), d * d, |node, o| {
        for i in 0..d {
            for j in 0..d {
                o[i * d + j] = rho[node] * f[node * d * d + j * d + i];
            }
        }
    });
    let piola = lq_norm(&divergence_raw(&rho_ft), q)?;

    let df: Vec<Field> = (0..d).map(|l| partial(&s.f, l)).collect();
    let mut curl = 0.0f64;
    let mut diff = vec![0.0; grid.node_count()];
    for i in 0..d {
        for j in 0..d {
            for k in (j + 1)..d {
                for (node, v) in diff.iter_mut().enumerate() {
                    let fl = &f[node * d * d..(node + 1) * d * d];
                    *v = (0..d)
                        .map(|l| {
                            let dl = &df[l].values()[node * d * d..(node + 1) * d * d];
                            fl[l * d + k] * dl[i * d + j] - fl[l * d + j] * dl[i * d + k]
                        })
                        .sum::<f64>()
                        .abs();
                }
                curl = curl.max(lq_of_magnitudes(&grid, &diff, q));
            }
        }
    }
    Ok(IntrinsicResiduals { det: linf_norm(&det_res), piola, curl })
}

/// `L∞` residual of the trace relation implied by `(1+ρ̃) det(I+E) = 1`.
///
/// 3D: `tr E = −ρ̃ − ρ̃ tr E + (1+ρ̃)(½[tr(E²) − (tr E)²] − det E)`;
/// 2D: `tr E = −ρ̃ − ρ̃ tr E − (1+ρ̃) det E`.
pub fn check_trace_constraint(s: &PerturbState) -> f64 {
    let grid = *s.grid();
    let d = grid.dim();
    let (rt, e) = (s.rho_tilde.values(), s.e.values());
    let mut worst = 0.0f64;
    for node in 0..grid.node_count() {
        let en = &e[node * d * d..(node + 1) * d * d];
        let r = rt[node];
        let tr: f64 = (0..d).map(|i| en[i * d + i]).sum();
        let rhs = if d == 3 {
            let tr_sq: f64 = (0..3).flat_map(|i| (0..3).map(move |k| (i, k))).map(|(i, k)| en[i * 3 + k] * en[k * 3 + i]).sum();
            -r - r * tr + (1.0 + r) * (0.5 * (tr_sq - tr * tr) - det(en, 3))
        } else {
            -r - r * tr - (1.0 + r) * det(en, 2)
        };
        worst = worst.max((tr - rhs).abs());
    }
    worst
}

/// `N_i = (−Δ)⁻¹ ∂_k ∂_j B^{(j)}_{ik}` with
/// `B^{(j)}_{ik} = E_lj ∂_l E_ik − E_lk ∂_l E_ij − E_lj ∂_l E_ki + E_li ∂_l E_kj`.
///
/// `(−Δ)⁻¹ ∂_k ∂_j = −R_kj`, so `N_i = −Σ_{j,k} R_jk B^{(j)}_{ik}`.
pub fn q1_nonlinear_term(e: &Field) -> Result<Field, CompatError> {
    let grid = *e.grid();
    if !grid.is_periodic() {
        return Err(CompatError::PeriodicOnly("the q1 identity"));
    }
    let d = grid.dim();
    let ev = e.values();
    let de: Vec<Field> = (0..d).map(|l| partial(e, l)).collect();
    let mut parts = Vec::with_capacity(d);
    for i in 0..d {
        let mut acc = Field::zeros(grid, FieldKind::Scalar);
        for j in 0..d {
            for k in 0..d {
                let b = Field::scalar_from_fn(grid, |_| 0.0);
                let mut b = b;
                par::fill_nodes(b.values_mut(), 1, |node, o| {
                    let en = &ev[node * d * d..(node + 1) * d * d];
                    o[0] = (0..d)
                        .map(|l| {
                            let g = &de[l].values()[node * d * d..(node + 1) * d * d];
                            en[l * d + j] * g[i * d + k] - en[l * d + k] * g[i * d + j] - en[l * d + j] * g[k * d + i]
                                + en[l * d + i] * g[k * d + j]
                        })
                        .sum();
                });
                acc.axpy(-1.0, &riesz(j, k, &b)?)?;
            }
        }
        parts.push(acc);
    }
    Ok(Field::from_components(FieldKind::Vector, &parts)?)
}

/// `L^q` norm of `div E − div Eᵀ + N`. Periodic grids only.
pub fn check_q1_identity(s: &PerturbState, q: f64) -> Result<f64, CompatError> {
    let e = &s.e;
    let n = q1_nonlinear_term(e)?;
    let div_e = divergence_raw(e);
    let div_et = divergence_raw(&transpose(e));
    let residual = div_e.minus(&div_et)?.plus(1.0, &n)?;
    Ok(lq_norm(&residual, q)?)
}

pub(crate) fn transpose(t: &Field) -> Field {
    let d = t.dim();
    let mut out = t.clone();
    for node in 0..t.grid().node_count() {
        let src = t.node(node);
        let dst = out.node_mut(node);
        for i in 0..d {
            for j in 0..d {
                dst[i * d + j] = src[j * d + i];
            }
        }
    }
    out
}

/// The velocity corrected by the elastic lift `Z₁ = L(div E)`.
#[derive(Clone, Debug)]
pub struct ZMonitor {
    pub z: Field,
    pub z1: Field,
    /// `(‖Z‖_{L^q}, ‖Z‖_{W^{1,q}})`.
    pub z_norms: (f64, f64),
    /// `(‖Z₁‖_{L^q}, ‖Z₁‖_{W^{1,q}})`.
    pub z1_norms: (f64, f64),
    /// Relative `L²` residual of the Lamé operator applied to `Z₁` against `div E`.
    pub consistency: f64,
}

/// `Z = u − Z₁/μ` with `−μΔZ₁ − (μ+λ)∇div Z₁ = div E`.
pub fn z_monitor(s: &PerturbState, params: &MaterialParams, opts: &EllipticSolveOptions, q: f64) -> Result<ZMonitor, CompatError> {
    let mut div_e = divergence_raw(&s.e);
    div_e.zero_on_boundary();
    let z1 = lame_solve(&div_e, params, opts)?.field;
    let z = s.u.plus(-1.0 / params.mu, &z1)?;
    let back = lame_apply(&z1, params, opts.realization)?;
    let scale = lq_norm(&div_e, 2.0)?;
    let res = lq_norm(&back.minus(&div_e)?, 2.0)?;
    let consistency = if scale > 0.0 { res / scale } else { res };
    Ok(ZMonitor {
        z_norms: (lq_norm(&z, q)?, w1q_norm(&z, q)?),
        z1_norms: (lq_norm(&z1, q)?, w1q_norm(&z1, q)?),
        z,
        z1,
        consistency,
    })
}

/// `L^q` distance between a transported `σ` and `∇ ln ϱ`.
pub fn sigma_mismatch(rho: &Field, sigma: &Field, q: f64) -> Result<f64, CompatError> {
    if let Some((node, _)) = rho.values().iter().enumerate().find(|(_, r)| !(**r > 0.0)) {
        return Err(CompatError::InvalidState(format!("density is not positive at node {node}")));
    }
    let grad_ln = gradient_raw(&rho.map(f64::ln));
    Ok(lq_norm(&sigma.minus(&grad_ln)?, q)?)
}

/// Mismatch of `σ` against `∇ ln ϱ` over a sequence of `(t, ϱ, σ)` samples.
#[derive(Clone, Debug, PartialEq)]
pub struct SigmaReport {
    pub samples: Vec<(f64, f64)>,
    pub max: f64,
}

pub fn sigma_diagnostic<'a>(series: impl IntoIterator<Item = (f64, &'a Field, &'a Field)>, q: f64) -> Result<SigmaReport, CompatError> {
    let mut samples = Vec::new();
    for (t, rho, sigma) in series {
        samples.push((t, sigma_mismatch(rho, sigma, q)?));
    }
    let max = samples.iter().map(|s| s.1).fold(0.0, f64::max);
    Ok(SigmaReport { samples, max })
}

/// `(∫ρ̃, ∫ϱF_ij)` of a flow state.
pub fn conserved_integrals(s: &FlowState) -> Result<(f64, Vec<f64>), CompatError> {
    let mass = crate::fields::integrate(&s.rho.map(|r| r - 1.0))?;
    let rho_f = s.f.times_scalar(&s.rho)?;
    Ok((mass, integrate_components(&rho_f)))
}

/// Drift per unit time of each recorded integral.
#[derive(Clone, Debug, PartialEq)]
pub struct ConservationReport {
    pub mass_drift: Option<f64>,
    pub rho_f_drift: Vec<f64>,
    pub bound: f64,
    /// True when any drift exceeds `bound`.
    pub flagged: bool,
}

impl ConservationReport {
    pub fn max_rho_f_drift(&self) -> f64 {
        self.rho_f_drift.iter().copied().fold(0.0, f64::max)
    }
}

/// `max_t |I(t) − I(t₀)| / (t_end − t₀)` for the mass and `∫ϱF` integrals.
pub fn check_conserved(records: &[super::DiagnosticsRecord], bound: f64) -> ConservationReport {
    let span = match (records.first(), records.last()) {
        (Some(a), Some(b)) if b.t > a.t => b.t - a.t,
        _ => 1.0,
    };
    let drift = |get: &dyn Fn(&super::DiagnosticsRecord) -> Option<f64>| -> Option<f64> {
        let first = get(records.first()?)?;
        Some(records.iter().filter_map(get).map(|v| (v - first).abs()).fold(0.0, f64::max) / span)
    };
    let mass_drift = drift(&|r| r.mass_integral);
    let width = records.first().and_then(|r| r.rho_f_integrals.as_ref().map(Vec::len)).unwrap_or(0);
    let rho_f_drift: Vec<f64> = (0..width)
        .map(|c| drift(&|r| r.rho_f_integrals.as_ref().map(|v| v[c])).unwrap_or(0.0))
        .collect();
    let flagged = mass_drift.is_some_and(|m| m > bound) || rho_f_drift.iter().any(|v| *v > bound);
    ConservationReport { mass_drift, rho_f_drift, bound, flagged }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::Grid;
    use std::f64::consts::PI;

    #[test]
    fn equilibrium_residuals_vanish() {
        let g = Grid::periodic_cube(3, 8, 1.0).unwrap();
        let s = FlowState::equilibrium(g);
        assert_eq!(check_intrinsic(&s, 4.0).unwrap(), IntrinsicResiduals::default());
        assert_eq!(check_trace_constraint(&s.to_perturb()), 0.0);
        assert_eq!(check_q1_identity(&s.to_perturb(), 4.0).unwrap(), 0.0);
    }

    #[test]
    fn constant_stretch() {
        let g = Grid::periodic_cube(3, 8, 1.0).unwrap();
        let mut s = FlowState::equilibrium(g);
        s.f = s.f.scaled(2.0);
        let r = check_intrinsic(&s, 4.0).unwrap();
        assert_eq!(r.det, 7.0);
        assert_eq!(r.piola, 0.0);
        assert_eq!(r.curl, 0.0);
    }

    #[test]
    fn trace_constraint_examples() {
        let g = Grid::periodic_cube(3, 8, 1.0).unwrap();
        let mut p = PerturbState::zero(g);
        p.e = Field::constant(g, FieldKind::Tensor, &[1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0]).unwrap();
        p.rho_tilde = Field::constant(g, FieldKind::Scalar, &[-0.5]).unwrap();
        assert_eq!(check_trace_constraint(&p), 0.0);
    }

    #[test]
    fn q1_rejects_box_and_constants_vanish() {
        let b = Grid::box_cube(2, 8, 1.0).unwrap();
        assert!(matches!(check_q1_identity(&PerturbState::zero(b), 4.0), Err(CompatError::PeriodicOnly(_))));
        let g = Grid::periodic_cube(2, 8, 1.0).unwrap();
        let mut p = PerturbState::zero(g);
        p.e = Field::constant(g, FieldKind::Tensor, &[0.1, 0.2, -0.3, 0.05]).unwrap();
        assert!(check_q1_identity(&p, 4.0).unwrap() < 1e-15);
    }

    #[test]
    fn z_monitor_examples() {
        let g = Grid::periodic_cube(2, 32, 2.0 * PI).unwrap();
        let params = MaterialParams::default();
        let opts = EllipticSolveOptions::default_for(&g);
        let mut p = PerturbState::zero(g);
        p.u = Field::from_fn(g, FieldKind::Vector, |x, o| {
            o[0] = x[1].sin();
            o[1] = 0.2;
        });
        let zm = z_monitor(&p, &params, &opts, 4.0).unwrap();
        assert_eq!(zm.z1.max_abs(), 0.0);
        assert_eq!(zm.z, p.u);

        // E_11 = −cos x₁ gives div E = c sin(x₁) e₁ (c = sin h / h).
        let mut p = PerturbState::zero(g);
        p.e = Field::from_fn(g, FieldKind::Tensor, |x, o| {
            o.fill(0.0);
            o[0] = -x[0].cos();
        });
        let h = g.spacing(0);
        let c = h.sin() / h;
        let zm = z_monitor(&p, &params, &opts, 4.0).unwrap();
        let expected = Field::from_fn(g, FieldKind::Vector, |x, o| {
            o[0] = -c * x[0].sin() / 2.5;
            o[1] = 0.0;
        });
        assert!(zm.z.max_diff(&expected) < 1e-10);
        assert!(zm.consistency <= 10.0 * opts.tolerance);
    }

    #[test]
    fn sigma_mismatch_vanishes_for_gradient() {
        let g = Grid::periodic_cube(2, 16, 2.0 * PI).unwrap();
        let rho = Field::scalar_from_fn(g, |x| 1.0 + 0.1 * x[0].sin());
        let sigma = gradient_raw(&rho.map(f64::ln));
        assert_eq!(sigma_mismatch(&rho, &sigma, 4.0).unwrap(), 0.0);
    }
}
