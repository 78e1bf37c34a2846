//! Second-order finite-difference stencils.
//!
//! Interior nodes (and every node of a periodic grid) use central
//! differences; wall nodes of a no-slip box use one-sided second-order
//! stencils. Layout conventions: `(∇u)_{ij} = ∂u_i/∂x_j` and
//! `(div T)_i = ∂_j T_{ij}`.

use crate::fields::{Field, FieldKind, Grid};
use crate::par;

/// Stencil along one axis: node offsets and weights.
#[derive(Clone, Copy, Debug)]
pub(crate) struct Weights {
    offsets: [isize; 4],
    weights: [f64; 4],
    len: usize,
}

impl Weights {
    fn new(pairs: &[(isize, f64)]) -> Self {
        let mut w = Weights { offsets: [0; 4], weights: [0.0; 4], len: pairs.len() };
        for (k, &(o, c)) in pairs.iter().enumerate() {
            w.offsets[k] = o;
            w.weights[k] = c;
        }
        w
    }

    fn iter(&self) -> impl Iterator<Item = (isize, f64)> + '_ {
        self.offsets[..self.len].iter().copied().zip(self.weights[..self.len].iter().copied())
    }
}

/// First-derivative stencil at index `i` along `axis`.
pub(crate) fn first_weights(grid: &Grid, axis: usize, i: usize) -> Weights {
    let h = grid.spacing(axis);
    let c = 1.0 / (2.0 * h);
    if grid.is_periodic() {
        return Weights::new(&[(-1, -c), (1, c)]);
    }
    let last = grid.cells(axis);
    if i == 0 {
        Weights::new(&[(0, -3.0 * c), (1, 4.0 * c), (2, -c)])
    } else if i == last {
        Weights::new(&[(0, 3.0 * c), (-1, -4.0 * c), (-2, c)])
    } else {
        Weights::new(&[(-1, -c), (1, c)])
    }
}

/// Compact second-derivative stencil at index `i` along `axis`.
pub(crate) fn second_weights(grid: &Grid, axis: usize, i: usize) -> Weights {
    let h = grid.spacing(axis);
    let c = 1.0 / (h * h);
    if grid.is_periodic() {
        return Weights::new(&[(-1, c), (0, -2.0 * c), (1, c)]);
    }
    let last = grid.cells(axis);
    if i == 0 {
        Weights::new(&[(0, 2.0 * c), (1, -5.0 * c), (2, 4.0 * c), (3, -c)])
    } else if i == last {
        Weights::new(&[(0, 2.0 * c), (-1, -5.0 * c), (-2, 4.0 * c), (-3, -c)])
    } else {
        Weights::new(&[(-1, c), (0, -2.0 * c), (1, c)])
    }
}

/// Index `j` folded into `0..n`; stencil offsets never exceed one period.
#[inline(always)]
fn wrap(j: isize, n: isize) -> isize {
    if j < 0 {
        j + n
    } else if j >= n {
        j - n
    } else {
        j
    }
}

/// Node reached from `node` (multi-index `m`) by `off` steps along `axis`.
#[inline]
pub(crate) fn shifted(grid: &Grid, node: usize, m: &[usize; 3], axis: usize, off: isize) -> usize {
    let n = grid.nodes_along(axis) as isize;
    let i = m[axis] as isize;
    let j = wrap(i + off, n);
    debug_assert!((0..n).contains(&j));
    (node as isize + (j - i) * grid.stride(axis) as isize) as usize
}

/// Periodic neighbours `(node − e_axis, node + e_axis)`.
#[inline(always)]
fn periodic_neighbours(grid: &Grid, node: usize, m: &[usize; 3], axis: usize) -> (usize, usize) {
    let n = grid.nodes_along(axis);
    let stride = grid.stride(axis);
    let i = m[axis];
    let lo = if i == 0 { node + (n - 1) * stride } else { node - stride };
    let hi = if i + 1 == n { node + stride - n * stride } else { node + stride };
    (lo, hi)
}

/// Derivative of component `comp` of raw data along `axis` at one node.
///
/// Weights sum to zero, so values are taken relative to the centre node;
/// constants then differentiate to exactly zero on every stencil.
#[inline]
pub(crate) fn d1_at(grid: &Grid, data: &[f64], nc: usize, comp: usize, node: usize, m: &[usize; 3], axis: usize) -> f64 {
    let base = data[node * nc + comp];
    first_weights(grid, axis, m[axis])
        .iter()
        .map(|(o, w)| w * (data[shifted(grid, node, m, axis, o) * nc + comp] - base))
        .sum()
}

/// Second derivative `∂_a ∂_b` of one component at one node; compact when `a == b`.
#[inline]
pub(crate) fn d2_at(grid: &Grid, data: &[f64], nc: usize, comp: usize, node: usize, m: &[usize; 3], a: usize, b: usize) -> f64 {
    let base = data[node * nc + comp];
    if a == b {
        return second_weights(grid, a, m[a])
            .iter()
            .map(|(o, w)| w * (data[shifted(grid, node, m, a, o) * nc + comp] - base))
            .sum();
    }
    let mut acc = 0.0;
    for (oa, wa) in first_weights(grid, a, m[a]).iter() {
        let na = shifted(grid, node, m, a, oa);
        let mut ma = *m;
        ma[a] = wrap(ma[a] as isize + oa, grid.nodes_along(a) as isize) as usize;
        for (ob, wb) in first_weights(grid, b, ma[b]).iter() {
            acc += wa * wb * (data[shifted(grid, na, &ma, b, ob) * nc + comp] - base);
        }
    }
    acc
}

/// Stencil context of one node: multi-index and, on a torus, the neighbour
/// indices and scale factors of every axis.
pub(crate) struct NodeStencil<'g> {
    grid: &'g Grid,
    node: usize,
    m: [usize; 3],
    periodic: bool,
    lo: [usize; 3],
    hi: [usize; 3],
    half_inv_h: [f64; 3],
    inv_h2: [f64; 3],
}

impl<'g> NodeStencil<'g> {
    #[inline(always)]
    pub(crate) fn new(grid: &'g Grid, node: usize) -> Self {
        let m = grid.multi_index(node);
        let periodic = grid.is_periodic();
        let (mut lo, mut hi) = ([node; 3], [node; 3]);
        let (mut half_inv_h, mut inv_h2) = ([0.0; 3], [0.0; 3]);
        if periodic {
            for a in 0..grid.dim() {
                (lo[a], hi[a]) = periodic_neighbours(grid, node, &m, a);
                let h = grid.spacing(a);
                half_inv_h[a] = 0.5 / h;
                inv_h2[a] = 1.0 / (h * h);
            }
        }
        Self { grid, node, m, periodic, lo, hi, half_inv_h, inv_h2 }
    }

    /// `∂_axis` of one component.
    #[inline(always)]
    pub(crate) fn d1(&self, data: &[f64], nc: usize, comp: usize, axis: usize) -> f64 {
        if self.periodic {
            (data[self.hi[axis] * nc + comp] - data[self.lo[axis] * nc + comp]) * self.half_inv_h[axis]
        } else {
            d1_at(self.grid, data, nc, comp, self.node, &self.m, axis)
        }
    }

    /// `∂_a ∂_b` of one component; compact when `a == b`.
    #[inline(always)]
    pub(crate) fn d2(&self, data: &[f64], nc: usize, comp: usize, a: usize, b: usize) -> f64 {
        if !self.periodic {
            return d2_at(self.grid, data, nc, comp, self.node, &self.m, a, b);
        }
        let at = |k: usize| data[k * nc + comp];
        if a == b {
            let base = at(self.node);
            return ((at(self.hi[a]) - base) + (at(self.lo[a]) - base)) * self.inv_h2[a];
        }
        // Shifts along different axes commute, so corners are sums of offsets.
        let corner = |x: usize, y: usize| x + y - self.node;
        let (la, ha, lb, hb) = (self.lo[a], self.hi[a], self.lo[b], self.hi[b]);
        ((at(corner(ha, hb)) - at(corner(ha, lb))) - (at(corner(la, hb)) - at(corner(la, lb))))
            * (self.half_inv_h[a] * self.half_inv_h[b])
    }
}

/// `∂f/∂x_axis` applied componentwise; same kind as `f`.
pub fn partial(f: &Field, axis: usize) -> Field {
    let grid = *f.grid();
    let nc = f.components();
    let mut out = Field::zeros(grid, f.kind());
    let data = f.values();
    par::fill_nodes(out.values_mut(), nc, |node, o| {
        let st = NodeStencil::new(&grid, node);
        for (c, v) in o.iter_mut().enumerate() {
            *v = st.d1(data, nc, c, axis);
        }
    });
    out
}

/// `∂²f/∂x_a∂x_b` applied componentwise.
pub fn second_partial(f: &Field, a: usize, b: usize) -> Field {
    let grid = *f.grid();
    let nc = f.components();
    let mut out = Field::zeros(grid, f.kind());
    let data = f.values();
    par::fill_nodes(out.values_mut(), nc, |node, o| {
        let st = NodeStencil::new(&grid, node);
        for (c, v) in o.iter_mut().enumerate() {
            *v = st.d2(data, nc, c, a, b);
        }
    });
    out
}

/// Scalar → vector `∂_k f`; vector → tensor `(∇u)_{ij} = ∂_j u_i`.
pub(crate) fn gradient_raw(f: &Field) -> Field {
    let grid = *f.grid();
    let d = grid.dim();
    let nc = f.components();
    let kind = match f.kind() {
        FieldKind::Scalar => FieldKind::Vector,
        _ => FieldKind::Tensor,
    };
    let mut out = Field::zeros(grid, kind);
    let data = f.values();
    par::fill_nodes(out.values_mut(), nc * d, |node, o| {
        let st = NodeStencil::new(&grid, node);
        for c in 0..nc {
            for j in 0..d {
                o[c * d + j] = st.d1(data, nc, c, j);
            }
        }
    });
    out
}

/// Vector → scalar `∂_j u_j`; tensor → vector `∂_j T_{ij}`.
pub(crate) fn divergence_raw(f: &Field) -> Field {
    match f.grid().dim() {
        2 => divergence_dim::<2>(f),
        _ => divergence_dim::<3>(f),
    }
}

fn divergence_dim<const D: usize>(f: &Field) -> Field {
    let grid = *f.grid();
    let nc = f.components();
    let (kind, rows) = match f.kind() {
        FieldKind::Tensor => (FieldKind::Vector, D),
        _ => (FieldKind::Scalar, 1),
    };
    let mut out = Field::zeros(grid, kind);
    let data = f.values();
    par::fill_nodes(out.values_mut(), rows, |node, o| {
        let st = NodeStencil::new(&grid, node);
        for (i, v) in o.iter_mut().enumerate() {
            let mut acc = 0.0;
            for j in 0..D {
                acc += st.d1(data, nc, i * D + j, j);
            }
            *v = acc;
        }
    });
    out
}

/// Compact componentwise Laplacian.
pub(crate) fn laplacian_raw(f: &Field) -> Field {
    let grid = *f.grid();
    let d = grid.dim();
    let nc = f.components();
    let mut out = Field::zeros(grid, f.kind());
    let data = f.values();
    par::fill_nodes(out.values_mut(), nc, |node, o| {
        let st = NodeStencil::new(&grid, node);
        for (c, v) in o.iter_mut().enumerate() {
            *v = (0..d).map(|a| st.d2(data, nc, c, a, a)).sum();
        }
    });
    out
}

/// `μ Δu + (μ+λ) ∇div u` with compact second derivatives.
///
/// On a no-slip box this is, at interior nodes, a symmetric negative
/// definite operator on fields vanishing at the walls whenever
/// `μ > 0` and `2μ + λ > 0`.
pub(crate) fn viscous_raw(u: &Field, mu: f64, lambda: f64) -> Field {
    match u.grid().dim() {
        2 => viscous_dim::<2>(u, mu, lambda),
        _ => viscous_dim::<3>(u, mu, lambda),
    }
}

fn viscous_dim<const D: usize>(u: &Field, mu: f64, lambda: f64) -> Field {
    let grid = *u.grid();
    let mut out = Field::zeros(grid, FieldKind::Vector);
    let data = u.values();
    par::fill_nodes(out.values_mut(), D, |node, o| {
        let st = NodeStencil::new(&grid, node);
        for i in 0..D {
            let (mut lap, mut grad_div) = (0.0, 0.0);
            for a in 0..D {
                lap += st.d2(data, D, i, a, a);
                grad_div += st.d2(data, D, a, i, a);
            }
            o[i] = mu * lap + (mu + lambda) * grad_div;
        }
    });
    out
}
