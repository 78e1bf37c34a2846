use super::FieldError;

/// Boundary treatment of a structured grid.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Boundary {
    /// Torus; nodes are cell centres `(i + 1/2) h` identified modulo the box length.
    Periodic,
    /// Axis-aligned box with a no-slip wall; nodes are cell vertices `i h`,
    /// so every face carries a layer of boundary nodes.
    NoSlipBox,
}

impl Boundary {
    pub fn as_u8(self) -> u8 {
        match self {
            Boundary::Periodic => 0,
            Boundary::NoSlipBox => 1,
        }
    }

    pub fn from_u8(tag: u8) -> Option<Self> {
        match tag {
            0 => Some(Boundary::Periodic),
            1 => Some(Boundary::NoSlipBox),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Boundary::Periodic => "periodic",
            Boundary::NoSlipBox => "noslip",
        }
    }
}

/// Smallest admissible number of cells along any axis.
pub const MIN_CELLS: usize = 8;

/// Uniform structured grid in two or three dimensions.
///
/// Unused trailing axes (axis 2 of a 2D grid) have a single node and unit
/// length so that three-component index arithmetic works in both dimensions.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Grid {
    dim: usize,
    cells: [usize; 3],
    lengths: [f64; 3],
    boundary: Boundary,
    shape: [usize; 3],
    strides: [usize; 3],
    spacing: [f64; 3],
}

impl Grid {
    pub fn new(cells: &[usize], lengths: &[f64], boundary: Boundary) -> Result<Self, FieldError> {
        let dim = cells.len();
        if !(2..=3).contains(&dim) {
            return Err(FieldError::InvalidGrid(format!("dimension must be 2 or 3, got {dim}")));
        }
        if lengths.len() != dim {
            return Err(FieldError::InvalidGrid(format!(
                "{dim} cell counts but {} lengths",
                lengths.len()
            )));
        }
        let mut c = [1usize; 3];
        let mut l = [1.0f64; 3];
        for k in 0..dim {
            if cells[k] < MIN_CELLS {
                return Err(FieldError::InvalidGrid(format!(
                    "axis {k}: {} cells, need at least {MIN_CELLS}",
                    cells[k]
                )));
            }
            if !(lengths[k].is_finite() && lengths[k] > 0.0) {
                return Err(FieldError::InvalidGrid(format!("axis {k}: length {} is not positive", lengths[k])));
            }
            c[k] = cells[k];
            l[k] = lengths[k];
        }
        let mut shape = [1usize; 3];
        let mut spacing = [1.0f64; 3];
        for k in 0..dim {
            shape[k] = match boundary {
                Boundary::Periodic => c[k],
                Boundary::NoSlipBox => c[k] + 1,
            };
            spacing[k] = l[k] / c[k] as f64;
        }
        let strides = [1, shape[0], shape[0] * shape[1]];
        Ok(Self { dim, cells: c, lengths: l, boundary, shape, strides, spacing })
    }

    /// `n^dim` periodic cells on `[0, length)^dim`.
    pub fn periodic_cube(dim: usize, n: usize, length: f64) -> Result<Self, FieldError> {
        Self::new(&vec![n; dim], &vec![length; dim], Boundary::Periodic)
    }

    /// `n^dim` no-slip cells on `[0, length]^dim`.
    pub fn box_cube(dim: usize, n: usize, length: f64) -> Result<Self, FieldError> {
        Self::new(&vec![n; dim], &vec![length; dim], Boundary::NoSlipBox)
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn boundary(&self) -> Boundary {
        self.boundary
    }

    #[inline]
    pub fn is_periodic(&self) -> bool {
        self.boundary == Boundary::Periodic
    }

    #[inline]
    pub fn cells(&self, axis: usize) -> usize {
        self.cells[axis]
    }

    #[inline]
    pub fn length(&self, axis: usize) -> f64 {
        self.lengths[axis]
    }

    #[inline]
    pub fn spacing(&self, axis: usize) -> f64 {
        self.spacing[axis]
    }

    pub fn min_spacing(&self) -> f64 {
        (0..self.dim).map(|k| self.spacing(k)).fold(f64::INFINITY, f64::min)
    }

    /// Nodes along `axis`; one for the unused axis of a 2D grid.
    #[inline]
    pub fn nodes_along(&self, axis: usize) -> usize {
        self.shape[axis]
    }

    #[inline]
    pub fn shape(&self) -> [usize; 3] {
        self.shape
    }

    pub fn node_count(&self) -> usize {
        self.shape().iter().product()
    }

    /// Domain volume `Π L_k`.
    pub fn volume(&self) -> f64 {
        (0..self.dim).map(|k| self.lengths[k]).product()
    }

    pub fn cell_volume(&self) -> f64 {
        (0..self.dim).map(|k| self.spacing(k)).product()
    }

    /// Node index for a multi-index; x₁ runs fastest.
    #[inline]
    pub fn index(&self, m: [usize; 3]) -> usize {
        let s = self.shape();
        m[0] + s[0] * (m[1] + s[1] * m[2])
    }

    #[inline]
    pub fn multi_index(&self, node: usize) -> [usize; 3] {
        let s = self.shape();
        [node % s[0], (node / s[0]) % s[1], node / (s[0] * s[1])]
    }

    #[inline]
    pub fn stride(&self, axis: usize) -> usize {
        self.strides[axis]
    }

    /// Coordinate of node `i` along `axis`.
    #[inline]
    pub fn coord(&self, axis: usize, i: usize) -> f64 {
        let h = self.spacing(axis);
        match self.boundary {
            Boundary::Periodic => (i as f64 + 0.5) * h,
            Boundary::NoSlipBox => i as f64 * h,
        }
    }

    /// Physical position of `node`; trailing unused coordinates are zero.
    pub fn position(&self, node: usize) -> [f64; 3] {
        let m = self.multi_index(node);
        let mut x = [0.0; 3];
        for k in 0..self.dim {
            x[k] = self.coord(k, m[k]);
        }
        x
    }

    /// True for nodes lying on a wall of a [`Boundary::NoSlipBox`] grid.
    pub fn on_boundary(&self, node: usize) -> bool {
        if self.is_periodic() {
            return false;
        }
        let m = self.multi_index(node);
        (0..self.dim).any(|k| m[k] == 0 || m[k] == self.cells[k])
    }

    /// Quadrature weight of `node`: the cell volume, halved once per wall the
    /// node sits on (trapezoid rule on the vertex-centred box).
    #[inline]
    pub fn weight(&self, node: usize) -> f64 {
        let mut w = self.cell_volume();
        if !self.is_periodic() {
            let m = self.multi_index(node);
            for k in 0..self.dim {
                if m[k] == 0 || m[k] == self.cells[k] {
                    w *= 0.5;
                }
            }
        }
        w
    }

    pub fn same_layout(&self, other: &Grid) -> bool {
        self == other
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_coarse_or_degenerate_grids() {
        assert!(Grid::new(&[4, 16], &[1.0, 1.0], Boundary::Periodic).is_err());
        assert!(Grid::new(&[16, 16], &[1.0, 0.0], Boundary::Periodic).is_err());
        assert!(Grid::new(&[16], &[1.0], Boundary::Periodic).is_err());
        assert!(Grid::new(&[16, 16], &[1.0], Boundary::Periodic).is_err());
    }

    #[test]
    fn periodic_nodes_are_cell_centred() {
        let g = Grid::periodic_cube(2, 8, 1.0).unwrap();
        assert_eq!(g.node_count(), 64);
        assert!((g.coord(0, 0) - 0.0625).abs() < 1e-15);
        assert!(!g.on_boundary(0));
    }

    #[test]
    fn box_has_wall_nodes_on_every_face() {
        let g = Grid::box_cube(3, 8, 1.0).unwrap();
        assert_eq!(g.shape(), [9, 9, 9]);
        assert!(g.on_boundary(g.index([0, 4, 4])));
        assert!(g.on_boundary(g.index([4, 8, 4])));
        assert!(g.on_boundary(g.index([4, 4, 0])));
        assert!(!g.on_boundary(g.index([4, 4, 4])));
        assert_eq!(g.coord(1, 8), 1.0);
    }

    #[test]
    fn weights_sum_to_volume() {
        for g in [
            Grid::box_cube(2, 10, 2.0).unwrap(),
            Grid::periodic_cube(3, 8, 1.5).unwrap(),
        ] {
            let total: f64 = (0..g.node_count()).map(|n| g.weight(n)).sum();
            assert!((total - g.volume()).abs() < 1e-12);
        }
    }

    #[test]
    fn index_round_trip() {
        let g = Grid::new(&[8, 9, 10], &[1.0, 1.0, 1.0], Boundary::Periodic).unwrap();
        for node in [0, 7, 8, 71, 719] {
            assert_eq!(g.index(g.multi_index(node)), node);
        }
    }
}
