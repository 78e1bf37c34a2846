//! Quadrature and discrete Lebesgue/Sobolev norms.

use super::{Field, FieldError};
use crate::operators::stencil;

/// Order and exponents of a discrete norm.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NormSpec {
    pub q: f64,
    pub derivative_order: u8,
    /// Time exponent for space-time norms; `f64::INFINITY` selects the supremum.
    pub time_exponent: Option<f64>,
}

impl NormSpec {
    pub fn new(q: f64, derivative_order: u8, time_exponent: Option<f64>) -> Result<Self, FieldError> {
        if !(q > 1.0) || q.is_nan() {
            return Err(FieldError::InvalidExponent(q));
        }
        if derivative_order > 2 {
            return Err(FieldError::InvalidNorm(format!("derivative order {derivative_order} > 2")));
        }
        if let Some(p) = time_exponent {
            if !(p >= 1.0) {
                return Err(FieldError::InvalidExponent(p));
            }
        }
        Ok(Self { q, derivative_order, time_exponent })
    }
}

/// Quadrature of a scalar field: midpoint rule on periodic grids,
/// trapezoid rule on boxes. Exact for constants and linear functions.
pub fn integrate(f: &Field) -> Result<f64, FieldError> {
    if f.components() != 1 {
        return Err(FieldError::KindMismatch { expected: super::FieldKind::Scalar, found: f.kind() });
    }
    let g = f.grid();
    Ok(f.values().iter().enumerate().map(|(n, v)| g.weight(n) * v).sum())
}

/// Quadrature of each component separately.
pub fn integrate_components(f: &Field) -> Vec<f64> {
    let nc = f.components();
    let g = f.grid();
    let mut acc = vec![0.0; nc];
    for (node, chunk) in f.values().chunks(nc).enumerate() {
        let w = g.weight(node);
        for (a, v) in acc.iter_mut().zip(chunk) {
            *a += w * v;
        }
    }
    acc
}

fn check_q(q: f64) -> Result<(), FieldError> {
    if q >= 1.0 {
        Ok(())
    } else {
        Err(FieldError::InvalidExponent(q))
    }
}

/// `(Σ w |v|^q)^{1/q}` for pointwise magnitudes `mags[node]`; `q = ∞` is the maximum.
pub(crate) fn lq_of_magnitudes(grid: &super::Grid, mags: &[f64], q: f64) -> f64 {
    if q.is_infinite() {
        return mags.iter().copied().fold(0.0, f64::max);
    }
    // Scaling by the maximum keeps large q from overflowing.
    let scale = mags.iter().copied().fold(0.0, f64::max);
    if scale == 0.0 {
        return 0.0;
    }
    let sum: f64 = mags.iter().enumerate().map(|(n, &m)| grid.weight(n) * (m / scale).powf(q)).sum();
    scale * sum.powf(1.0 / q)
}

pub(crate) fn magnitudes(f: &Field) -> Vec<f64> {
    let nc = f.components();
    f.values().chunks(nc).map(|c| c.iter().map(|v| v * v).sum::<f64>().sqrt()).collect()
}

/// Discrete `L^q` norm with the Euclidean (Frobenius for tensors) pointwise magnitude.
pub fn lq_norm(f: &Field, q: f64) -> Result<f64, FieldError> {
    check_q(q)?;
    Ok(lq_of_magnitudes(f.grid(), &magnitudes(f), q))
}

/// Maximum pointwise magnitude.
pub fn linf_norm(f: &Field) -> f64 {
    f.max_abs()
}

/// Pointwise magnitude of all first partial derivatives of every component.
fn gradient_magnitudes(f: &Field) -> Vec<f64> {
    let mut acc = vec![0.0; f.grid().node_count()];
    for axis in 0..f.dim() {
        let d = stencil::partial(f, axis);
        for (a, m) in acc.iter_mut().zip(magnitudes(&d)) {
            *a += m * m;
        }
    }
    acc.iter_mut().for_each(|a| *a = a.sqrt());
    acc
}

fn hessian_magnitudes(f: &Field) -> Vec<f64> {
    let mut acc = vec![0.0; f.grid().node_count()];
    for a in 0..f.dim() {
        for b in 0..f.dim() {
            let d = stencil::second_partial(f, a, b);
            for (s, m) in acc.iter_mut().zip(magnitudes(&d)) {
                *s += m * m;
            }
        }
    }
    acc.iter_mut().for_each(|a| *a = a.sqrt());
    acc
}

/// `‖f‖_q + ‖∇f‖_q` with central-difference gradients.
pub fn w1q_norm(f: &Field, q: f64) -> Result<f64, FieldError> {
    check_q(q)?;
    Ok(lq_norm(f, q)? + lq_of_magnitudes(f.grid(), &gradient_magnitudes(f), q))
}

/// `‖f‖_{W^{1,q}} + ‖∇²f‖_q`.
pub fn w2q_norm(f: &Field, q: f64) -> Result<f64, FieldError> {
    check_q(q)?;
    Ok(w1q_norm(f, q)? + lq_of_magnitudes(f.grid(), &hessian_magnitudes(f), q))
}

/// Spatial norm selected by `spec.derivative_order`.
pub fn sobolev_norm(f: &Field, spec: &NormSpec) -> Result<f64, FieldError> {
    match spec.derivative_order {
        0 => lq_norm(f, spec.q),
        1 => w1q_norm(f, spec.q),
        _ => w2q_norm(f, spec.q),
    }
}

/// `(∫ v(t)^p dt)^{1/p}` by the trapezoid rule over `(t, v)` samples; the
/// maximum of `v` when `p = ∞`.
pub fn spacetime_norm(samples: &[(f64, f64)], p: f64) -> Result<f64, FieldError> {
    if samples.len() < 2 {
        return Err(FieldError::InvalidSamples("need at least two samples".into()));
    }
    if !(p >= 1.0) {
        return Err(FieldError::InvalidExponent(p));
    }
    for w in samples.windows(2) {
        if !(w[1].0 > w[0].0) {
            return Err(FieldError::InvalidSamples(format!(
                "times must be strictly increasing ({} then {})",
                w[0].0, w[1].0
            )));
        }
    }
    if p.is_infinite() {
        return Ok(samples.iter().map(|s| s.1.abs()).fold(0.0, f64::max));
    }
    let integral: f64 = samples
        .windows(2)
        .map(|w| 0.5 * (w[1].0 - w[0].0) * (w[0].1.abs().powf(p) + w[1].1.abs().powf(p)))
        .sum();
    Ok(integral.powf(1.0 / p))
}
