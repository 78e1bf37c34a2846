//! Fourier-multiplier realization of elliptic operators on periodic grids.

use std::f64::consts::PI;
use std::sync::Arc;

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::fields::{Field, FieldKind, Grid};

/// Forward/inverse FFT plans for one periodic grid.
pub(crate) struct Spectral {
    grid: Grid,
    forward: Vec<Arc<dyn Fft<f64>>>,
    inverse: Vec<Arc<dyn Fft<f64>>>,
    /// Angular wavenumber per axis and index.
    wavenumbers: Vec<Vec<f64>>,
    /// Wavenumber with the Nyquist entry zeroed, used wherever it enters to
    /// an odd power so real data stays real.
    odd_wavenumbers: Vec<Vec<f64>>,
}

impl Spectral {
    pub fn new(grid: &Grid) -> Self {
        debug_assert!(grid.is_periodic());
        let mut planner = FftPlanner::new();
        let d = grid.dim();
        let mut forward = Vec::with_capacity(d);
        let mut inverse = Vec::with_capacity(d);
        let mut wavenumbers = Vec::with_capacity(d);
        let mut odd = Vec::with_capacity(d);
        for k in 0..d {
            let n = grid.cells(k);
            forward.push(planner.plan_fft_forward(n));
            inverse.push(planner.plan_fft_inverse(n));
            let base = 2.0 * PI / grid.length(k);
            let ks: Vec<f64> = (0..n)
                .map(|i| {
                    let m = if i <= n / 2 { i as f64 } else { i as f64 - n as f64 };
                    base * m
                })
                .collect();
            let mut ko = ks.clone();
            if n % 2 == 0 {
                ko[n / 2] = 0.0;
            }
            wavenumbers.push(ks);
            odd.push(ko);
        }
        Self { grid: *grid, forward, inverse, wavenumbers, odd_wavenumbers: odd }
    }

    fn transform(&self, data: &mut [Complex64], plans: &[Arc<dyn Fft<f64>>]) {
        let g = &self.grid;
        let shape = g.shape();
        for (axis, plan) in plans.iter().enumerate() {
            let n = shape[axis];
            let stride = g.stride(axis);
            let mut line = vec![Complex64::new(0.0, 0.0); n];
            let mut scratch = vec![Complex64::new(0.0, 0.0); plan.get_inplace_scratch_len()];
            for start in 0..g.node_count() {
                if g.multi_index(start)[axis] != 0 {
                    continue;
                }
                for i in 0..n {
                    line[i] = data[start + i * stride];
                }
                plan.process_with_scratch(&mut line, &mut scratch);
                for i in 0..n {
                    data[start + i * stride] = line[i];
                }
            }
        }
    }

    /// Unnormalized forward transform of one component.
    pub fn forward(&self, f: &Field, comp: usize) -> Vec<Complex64> {
        let mut data: Vec<Complex64> = f.component(comp).values().iter().map(|&v| Complex64::new(v, 0.0)).collect();
        self.transform(&mut data, &self.forward);
        data
    }

    /// Inverse transform with `1/N` normalization; returns the real part.
    pub fn inverse(&self, mut data: Vec<Complex64>) -> Vec<f64> {
        self.transform(&mut data, &self.inverse);
        let scale = 1.0 / self.grid.node_count() as f64;
        data.iter().map(|c| c.re * scale).collect()
    }

    /// Full and odd-safe wave vectors of mode `node`.
    #[inline]
    pub fn wave_vector(&self, node: usize) -> ([f64; 3], [f64; 3]) {
        let m = self.grid.multi_index(node);
        let mut k = [0.0; 3];
        let mut ko = [0.0; 3];
        for a in 0..self.grid.dim() {
            k[a] = self.wavenumbers[a][m[a]];
            ko[a] = self.odd_wavenumbers[a][m[a]];
        }
        (k, ko)
    }

    /// Apply a scalar multiplier `symbol(k, k_odd)` to every component of `f`.
    pub fn apply_scalar_symbol(&self, f: &Field, symbol: impl Fn(&[f64; 3], &[f64; 3]) -> f64) -> Field {
        let nc = f.components();
        let parts: Vec<Field> = (0..nc)
            .map(|c| {
                let mut hat = self.forward(f, c);
                for (node, v) in hat.iter_mut().enumerate() {
                    let (k, ko) = self.wave_vector(node);
                    *v *= symbol(&k, &ko);
                }
                Field::from_vec(self.grid, FieldKind::Scalar, self.inverse(hat)).expect("shape preserved")
            })
            .collect();
        Field::from_components(f.kind(), &parts).expect("shape preserved")
    }

    /// Apply a d×d matrix multiplier to a vector field: `û ↦ M(k) û`.
    pub fn apply_matrix_symbol(&self, u: &Field, symbol: impl Fn(&[f64; 3], &[f64; 3]) -> [[f64; 3]; 3]) -> Field {
        let d = self.grid.dim();
        let hats: Vec<Vec<Complex64>> = (0..d).map(|c| self.forward(u, c)).collect();
        let mut out: Vec<Vec<Complex64>> = vec![vec![Complex64::new(0.0, 0.0); self.grid.node_count()]; d];
        for node in 0..self.grid.node_count() {
            let (k, ko) = self.wave_vector(node);
            let m = symbol(&k, &ko);
            for i in 0..d {
                let mut acc = Complex64::new(0.0, 0.0);
                for j in 0..d {
                    acc += hats[j][node] * m[i][j];
                }
                out[i][node] = acc;
            }
        }
        let parts: Vec<Field> = out
            .into_iter()
            .map(|h| Field::from_vec(self.grid, FieldKind::Scalar, self.inverse(h)).expect("shape preserved"))
            .collect();
        Field::from_components(FieldKind::Vector, &parts).expect("shape preserved")
    }
}

/// `k_a k_b` with odd-safe factors off the diagonal.
#[inline]
pub(crate) fn outer(k: &[f64; 3], ko: &[f64; 3], a: usize, b: usize) -> f64 {
    if a == b {
        k[a] * k[a]
    } else {
        ko[a] * ko[b]
    }
}

#[inline]
pub(crate) fn norm_sq(k: &[f64; 3]) -> f64 {
    k[0] * k[0] + k[1] * k[1] + k[2] * k[2]
}

/// Inverse of a symmetric d×d matrix (d ≤ 3) by cofactors.
pub(crate) fn invert_small(m: &[[f64; 3]; 3], d: usize) -> [[f64; 3]; 3] {
    let mut inv = [[0.0; 3]; 3];
    if d == 2 {
        let det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
        inv[0][0] = m[1][1] / det;
        inv[1][1] = m[0][0] / det;
        inv[0][1] = -m[0][1] / det;
        inv[1][0] = -m[1][0] / det;
        return inv;
    }
    let c = |i: usize, j: usize| {
        let (r0, r1) = ((i + 1) % 3, (i + 2) % 3);
        let (c0, c1) = ((j + 1) % 3, (j + 2) % 3);
        m[r0][c0] * m[r1][c1] - m[r0][c1] * m[r1][c0]
    };
    let det = m[0][0] * c(0, 0) + m[0][1] * c(0, 1) + m[0][2] * c(0, 2);
    for i in 0..3 {
        for j in 0..3 {
            inv[j][i] = c(i, j) / det;
        }
    }
    inv
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn forward_inverse_round_trip() {
        let g = Grid::new(&[8, 12, 10], &[1.0, 2.0, 3.0], crate::fields::Boundary::Periodic).unwrap();
        let f = Field::scalar_from_fn(g, |x| (x[0] * 7.0).sin() + x[1] * x[2]);
        let s = Spectral::new(&g);
        let back = s.inverse(s.forward(&f, 0));
        for (a, b) in back.iter().zip(f.values()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn small_inverse() {
        let m = [[4.0, 1.0, 0.5], [1.0, 3.0, 0.2], [0.5, 0.2, 2.0]];
        let inv = invert_small(&m, 3);
        for i in 0..3 {
            for j in 0..3 {
                let p: f64 = (0..3).map(|k| m[i][k] * inv[k][j]).sum();
                assert!((p - if i == j { 1.0 } else { 0.0 }).abs() < 1e-14);
            }
        }
        let inv2 = invert_small(&m, 2);
        assert!((inv2[0][0] * 4.0 + inv2[0][1] * 1.0 - 1.0).abs() < 1e-14);
    }
}
