use super::{FieldError, Grid};
use crate::par;

/// Rank of a field: 1, d or d×d components per node.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum FieldKind {
    Scalar,
    Vector,
    Tensor,
}

impl FieldKind {
    pub fn components(self, dim: usize) -> usize {
        match self {
            FieldKind::Scalar => 1,
            FieldKind::Vector => dim,
            FieldKind::Tensor => dim * dim,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            FieldKind::Scalar => "scalar",
            FieldKind::Vector => "vector",
            FieldKind::Tensor => "tensor",
        }
    }
}

/// Node values of a scalar, vector or tensor quantity on a [`Grid`].
///
/// Storage is node-major with components innermost; tensor component
/// `(i, j)` lives at offset `i * d + j`.
#[derive(Clone, Debug, PartialEq)]
pub struct Field {
    grid: Grid,
    kind: FieldKind,
    data: Vec<f64>,
}

impl Field {
    pub fn zeros(grid: Grid, kind: FieldKind) -> Self {
        let len = grid.node_count() * kind.components(grid.dim());
        Self { grid, kind, data: vec![0.0; len] }
    }

    pub fn from_vec(grid: Grid, kind: FieldKind, data: Vec<f64>) -> Result<Self, FieldError> {
        let expected = grid.node_count() * kind.components(grid.dim());
        if data.len() != expected {
            return Err(FieldError::Shape { expected, found: data.len() });
        }
        Ok(Self { grid, kind, data })
    }

    /// Same value tuple at every node.
    pub fn constant(grid: Grid, kind: FieldKind, value: &[f64]) -> Result<Self, FieldError> {
        let nc = kind.components(grid.dim());
        if value.len() != nc {
            return Err(FieldError::Shape { expected: nc, found: value.len() });
        }
        let mut f = Self::zeros(grid, kind);
        for chunk in f.data.chunks_mut(nc) {
            chunk.copy_from_slice(value);
        }
        Ok(f)
    }

    /// Identity tensor at every node.
    pub fn identity(grid: Grid) -> Self {
        let d = grid.dim();
        let mut f = Self::zeros(grid, FieldKind::Tensor);
        for chunk in f.data.chunks_mut(d * d) {
            for i in 0..d {
                chunk[i * d + i] = 1.0;
            }
        }
        f
    }

    /// Sample `fill(x, out)` at every node position.
    pub fn from_fn<F>(grid: Grid, kind: FieldKind, fill: F) -> Self
    where
        F: Fn(&[f64; 3], &mut [f64]) + Sync + Send,
    {
        let mut f = Self::zeros(grid, kind);
        let nc = f.components();
        par::fill_nodes(&mut f.data, nc, |node, out| fill(&grid.position(node), out));
        f
    }

    pub fn scalar_from_fn<F>(grid: Grid, fill: F) -> Self
    where
        F: Fn(&[f64; 3]) -> f64 + Sync + Send,
    {
        Self::from_fn(grid, FieldKind::Scalar, |x, out| out[0] = fill(x))
    }

    #[inline]
    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    #[inline]
    pub fn kind(&self) -> FieldKind {
        self.kind
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.grid.dim()
    }

    #[inline]
    pub fn components(&self) -> usize {
        self.kind.components(self.grid.dim())
    }

    #[inline]
    pub fn values(&self) -> &[f64] {
        &self.data
    }

    #[inline]
    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_values(self) -> Vec<f64> {
        self.data
    }

    #[inline]
    pub fn node(&self, node: usize) -> &[f64] {
        let nc = self.components();
        &self.data[node * nc..(node + 1) * nc]
    }

    #[inline]
    pub fn node_mut(&mut self, node: usize) -> &mut [f64] {
        let nc = self.components();
        &mut self.data[node * nc..(node + 1) * nc]
    }

    #[inline]
    pub fn get(&self, node: usize, comp: usize) -> f64 {
        self.data[node * self.components() + comp]
    }

    /// Extract one component as a scalar field.
    pub fn component(&self, comp: usize) -> Field {
        let nc = self.components();
        let data = self.data.iter().skip(comp).step_by(nc).copied().collect();
        Field { grid: self.grid, kind: FieldKind::Scalar, data }
    }

    /// Assemble a field from scalar components in storage order.
    pub fn from_components(kind: FieldKind, parts: &[Field]) -> Result<Field, FieldError> {
        let grid = *parts
            .first()
            .ok_or(FieldError::Shape { expected: 1, found: 0 })?
            .grid();
        let nc = kind.components(grid.dim());
        if parts.len() != nc {
            return Err(FieldError::Shape { expected: nc, found: parts.len() });
        }
        for p in parts {
            if p.kind != FieldKind::Scalar || p.grid != grid {
                return Err(FieldError::GridMismatch);
            }
        }
        let mut out = Field::zeros(grid, kind);
        for (node, chunk) in out.data.chunks_mut(nc).enumerate() {
            for (c, p) in parts.iter().enumerate() {
                chunk[c] = p.data[node];
            }
        }
        Ok(out)
    }

    pub fn check_compatible(&self, other: &Field) -> Result<(), FieldError> {
        if self.grid != other.grid {
            return Err(FieldError::GridMismatch);
        }
        if self.kind != other.kind {
            return Err(FieldError::KindMismatch { expected: self.kind, found: other.kind });
        }
        Ok(())
    }

    pub fn expect_kind(&self, kind: FieldKind) -> Result<(), FieldError> {
        if self.kind != kind {
            return Err(FieldError::KindMismatch { expected: kind, found: self.kind });
        }
        Ok(())
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Field {
        Field { grid: self.grid, kind: self.kind, data: self.data.iter().map(|&v| f(v)).collect() }
    }

    pub fn scaled(&self, alpha: f64) -> Field {
        self.map(|v| alpha * v)
    }

    /// `self += alpha * other`.
    pub fn axpy(&mut self, alpha: f64, other: &Field) -> Result<(), FieldError> {
        self.check_compatible(other)?;
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += alpha * b;
        }
        Ok(())
    }

    /// `self + alpha * other` as a new field.
    pub fn plus(&self, alpha: f64, other: &Field) -> Result<Field, FieldError> {
        let mut out = self.clone();
        out.axpy(alpha, other)?;
        Ok(out)
    }

    pub fn minus(&self, other: &Field) -> Result<Field, FieldError> {
        self.plus(-1.0, other)
    }

    /// Pointwise product of a scalar field with a field of any rank.
    pub fn times_scalar(&self, s: &Field) -> Result<Field, FieldError> {
        if s.kind != FieldKind::Scalar {
            return Err(FieldError::KindMismatch { expected: FieldKind::Scalar, found: s.kind });
        }
        if s.grid != self.grid {
            return Err(FieldError::GridMismatch);
        }
        let nc = self.components();
        let mut out = self.clone();
        for (node, chunk) in out.data.chunks_mut(nc).enumerate() {
            let w = s.data[node];
            chunk.iter_mut().for_each(|v| *v *= w);
        }
        Ok(out)
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// First non-finite entry as `(node, component)`.
    pub fn first_non_finite(&self) -> Option<(usize, usize)> {
        let nc = self.components();
        self.data.iter().position(|v| !v.is_finite()).map(|i| (i / nc, i % nc))
    }

    /// Largest pointwise magnitude (Euclidean over components).
    pub fn max_abs(&self) -> f64 {
        let nc = self.components();
        self.data
            .chunks(nc)
            .map(|c| c.iter().map(|v| v * v).sum::<f64>().sqrt())
            .fold(0.0, f64::max)
    }

    /// Largest componentwise difference to `other`.
    pub fn max_diff(&self, other: &Field) -> f64 {
        self.data.iter().zip(&other.data).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
    }

    /// Set every component at wall nodes to zero (no-op on periodic grids).
    pub fn zero_on_boundary(&mut self) {
        if self.grid.is_periodic() {
            return;
        }
        let nc = self.components();
        let grid = self.grid;
        for (node, chunk) in self.data.chunks_mut(nc).enumerate() {
            if grid.on_boundary(node) {
                chunk.iter_mut().for_each(|v| *v = 0.0);
            }
        }
    }

    /// Arithmetic mean of each component over nodes, weighted by quadrature.
    pub fn mean(&self) -> Vec<f64> {
        let nc = self.components();
        let mut acc = vec![0.0; nc];
        for (node, chunk) in self.data.chunks(nc).enumerate() {
            let w = self.grid.weight(node);
            for (a, v) in acc.iter_mut().zip(chunk) {
                *a += w * v;
            }
        }
        let vol = self.grid.volume();
        acc.iter_mut().for_each(|a| *a /= vol);
        acc
    }

    /// Subtract the componentwise mean.
    pub fn remove_mean(&mut self) {
        let m = self.mean();
        let nc = self.components();
        for chunk in self.data.chunks_mut(nc) {
            for (v, mu) in chunk.iter_mut().zip(&m) {
                *v -= mu;
            }
        }
    }

    /// Circularly shift a periodic field by `shift[k]` nodes along each axis.
    pub fn translated(&self, shift: [usize; 3]) -> Field {
        let grid = self.grid;
        let s = grid.shape();
        let nc = self.components();
        let mut out = Field::zeros(grid, self.kind);
        for node in 0..grid.node_count() {
            let m = grid.multi_index(node);
            let src = grid.index([(m[0] + s[0] - shift[0] % s[0]) % s[0], (m[1] + s[1] - shift[1] % s[1]) % s[1], (m[2] + s[2] - shift[2] % s[2]) % s[2]]);
            out.data[node * nc..(node + 1) * nc].copy_from_slice(&self.data[src * nc..(src + 1) * nc]);
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid() -> Grid {
        Grid::periodic_cube(2, 8, 1.0).unwrap()
    }

    #[test]
    fn component_round_trip() {
        let g = grid();
        let t = Field::from_fn(g, FieldKind::Tensor, |x, out| {
            for (c, o) in out.iter_mut().enumerate() {
                *o = x[0] + 10.0 * c as f64;
            }
        });
        let parts: Vec<Field> = (0..4).map(|c| t.component(c)).collect();
        assert_eq!(Field::from_components(FieldKind::Tensor, &parts).unwrap(), t);
    }

    #[test]
    fn shape_errors() {
        let g = grid();
        assert!(Field::from_vec(g, FieldKind::Vector, vec![0.0; 3]).is_err());
        assert!(Field::constant(g, FieldKind::Vector, &[1.0]).is_err());
        let a = Field::zeros(g, FieldKind::Scalar);
        let b = Field::zeros(g, FieldKind::Vector);
        assert!(a.plus(1.0, &b).is_err());
    }

    #[test]
    fn identity_tensor() {
        let i = Field::identity(grid());
        assert_eq!(i.node(5), &[1.0, 0.0, 0.0, 1.0]);
    }

    #[test]
    fn wall_values_cleared() {
        let g = Grid::box_cube(2, 8, 1.0).unwrap();
        let mut u = Field::constant(g, FieldKind::Vector, &[1.0, 2.0]).unwrap();
        u.zero_on_boundary();
        assert_eq!(u.node(0), &[0.0, 0.0]);
        assert_eq!(u.node(g.index([3, 3, 0])), &[1.0, 2.0]);
    }

    #[test]
    fn translation_wraps() {
        let g = grid();
        let f = Field::scalar_from_fn(g, |x| x[0]);
        let t = f.translated([1, 0, 0]);
        assert_eq!(t.get(g.index([1, 0, 0]), 0), f.get(0, 0));
        assert_eq!(t.get(0, 0), f.get(g.index([7, 0, 0]), 0));
    }
}
